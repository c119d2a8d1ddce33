import math
from typing import Dict

from pydantic import Field, root_validator, validator

from ..common.constants import (
    DEFAULT_BETA,
    DEFAULT_LAMBDA_ADV,
    DEFAULT_LAMBDA_CE,
    DEFAULT_LAMBDA_TEMP,
)
from ..common.enums import CEReduction, Stage
from ..common.models import ValidateBaseModel

TERM_NAMES = (
    "l1",
    "per",
    "feat",
    "adv_g",
    "adv_d",
    "ce_s",
    "ce_t",
    "cf",
    "rec_latent",
    "rec_pixel",
    "temp",
)


class LossWeights(ValidateBaseModel):
    """
    Loss weights of all stages.

    Attributes:
        beta (float): Commitment weight inside the codebook feature loss.
        lambda_adv (float): Weight of the generator adversarial term in Stage 1.
        lambda_ce (float): Weight of the code cross-entropy terms in Stage 1'.
        lambda_temp (float): Weight of the warp-based temporal term in Stage 2.
        ce_reduction (CEReduction): How cross-entropy is reduced over tokens.
        perceptual_seed (int): Seed of the fixed perceptual feature extractor.
    """

    beta: float = DEFAULT_BETA
    lambda_adv: float = DEFAULT_LAMBDA_ADV
    lambda_ce: float = DEFAULT_LAMBDA_CE
    lambda_temp: float = DEFAULT_LAMBDA_TEMP
    ce_reduction: CEReduction = CEReduction.SUM
    perceptual_seed: int = 1234

    @validator("beta", "lambda_adv", "lambda_ce", "lambda_temp")
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("loss weights must be non-negative")
        return v


def weighted_total(stage: Stage, terms: Dict[str, float], weights: LossWeights) -> float:
    """The documented objective of a stage as a weighted sum of its terms"""
    t = lambda name: terms.get(name, 0.0)

    if stage == Stage.STAGE0:
        return t("rec_pixel") + t("l1")
    if stage == Stage.STAGE1:
        return t("l1") + t("per") + t("feat") + weights.lambda_adv * t("adv_g")
    if stage == Stage.STAGE1P:
        return t("cf") + weights.lambda_ce * (t("ce_s") + t("ce_t"))

    return t("rec_latent") + t("rec_pixel") + t("per") + weights.lambda_temp * t("temp")


class LossReport(ValidateBaseModel):
    """
    Scalar values of one loss evaluation. Terms a stage does not use stay at zero.

    Attributes:
        stage (Stage): The stage whose objective `total` is.
        weights (LossWeights): The weights `total` was computed with.
        total (float): The weighted objective, validated against the terms.
    """

    stage: Stage
    weights: LossWeights = Field(default_factory=LossWeights)
    l1: float = 0.0
    per: float = 0.0
    feat: float = 0.0
    adv_g: float = 0.0
    adv_d: float = 0.0
    ce_s: float = 0.0
    ce_t: float = 0.0
    cf: float = 0.0
    rec_latent: float = 0.0
    rec_pixel: float = 0.0
    temp: float = 0.0
    total: float = 0.0

    @root_validator(skip_on_failure=True)
    def total_is_weighted_sum(cls, values: dict) -> dict:
        terms = {name: values[name] for name in TERM_NAMES}
        for name, value in list(terms.items()) + [("total", values["total"])]:
            if not math.isfinite(value):
                raise ValueError(f"loss term {name} is not finite")

        expected = weighted_total(values["stage"], terms, values["weights"])
        if not math.isclose(values["total"], expected, rel_tol=1e-5, abs_tol=1e-6):
            raise ValueError(f"total {values['total']} differs from the weighted sum {expected}")

        return values

    def terms(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in TERM_NAMES}
