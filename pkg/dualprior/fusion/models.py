from typing import Optional

from pydantic import validator

from ..common.enums import FusionVariant, PriorMode
from ..common.models import ValidateBaseModel


class FusionConfig(ValidateBaseModel):
    """
    Settings of the prior fusion modules.

    Attributes:
        variant (FusionVariant): Fusion design used when both priors are injected.
        prior_mode (PriorMode): Which priors reach the velocity network.
        modulation_hidden (int): Hidden width of the modulation MLP.
        attention_heads (int): Heads of the temporally queried cross-attention.
        attention_dim (Optional[int]): Width of the W_q/W_k/W_v projections, defaults to the backbone width.
    """

    variant: FusionVariant = FusionVariant.ASYMMETRIC
    prior_mode: PriorMode = PriorMode.BOTH
    modulation_hidden: int = 128
    attention_heads: int = 1
    attention_dim: Optional[int] = None

    @validator("modulation_hidden", "attention_heads")
    def positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("sizes must be positive")
        return v

    @property
    def enabled(self) -> bool:
        return self.prior_mode != PriorMode.NONE
