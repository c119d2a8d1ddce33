import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, List, NamedTuple, Optional

import numpy as np
import torch
from pandas import DataFrame
from pydantic import Field

from ..common.checkpoint import Checkpoint, module_state
from ..common.enums import (
    CEReduction,
    CheckSuite,
    FusionVariant,
    MotionKind,
    PriorMode,
)
from ..common.models import ValidateBaseModel
from ..common.random import seeded_init
from ..data.dataset import generate_dataset
from ..data.models import FlowFieldSequence, MotionSpec, ToyDataset, VideoClip
from ..data.synthesis import make_toy_clip
from ..flow.block_match import block_match_flow
from ..flow.warp import warp
from ..fusion.models import FusionConfig
from ..fusion.module import PriorFusion, fuse
from ..losses.networks import FeatureExtractor
from ..losses.objectives import (
    code_cross_entropy,
    code_feature_loss,
    feature_loss,
    stage2_loss,
    temporal_loss,
)
from ..metrics.quality import psnr, ssim, warping_error
from ..prior.network import Priors, StdcModel
from ..prior.quantize import Codebook, quantize
from ..restore.dit import VelocityDiT
from ..restore.flow_matching import noise_inject, one_step_denoise, velocity_target
from ..restore.models import RestorerConfig
from ..restore.pipeline import Restorer
from ..restore.vae import TinyVAE
from .config import RunConfig, tiny_config
from .training import Stage1pTrainer, Stage2Trainer

log = logging.getLogger(__name__)

CheckFn = Callable[[], Optional[str]]

GRADCHECK_TOLERANCE = 1e-4


class RegisteredCheck(NamedTuple):
    name: str
    suite: CheckSuite
    fn: CheckFn


_REGISTRY: List[RegisteredCheck] = []


def register(suite: CheckSuite) -> Callable[[CheckFn], CheckFn]:
    """Registers a property check under a suite.

    A check returns an optional detail string and fails by raising, typically AssertionError.
    """

    def decorator(fn: CheckFn) -> CheckFn:
        _REGISTRY.append(RegisteredCheck(fn.__name__, CheckSuite(suite), fn))
        return fn

    return decorator


def registered_checks(suite: CheckSuite = CheckSuite.ALL) -> List[RegisteredCheck]:
    suite = CheckSuite(suite)
    return [check for check in _REGISTRY if suite == CheckSuite.ALL or check.suite == suite]


class CheckResult(ValidateBaseModel):
    """
    Outcome of one property check.

    Attributes:
        name (str): The check's name.
        suite (CheckSuite): The suite it belongs to.
        passed (bool): Whether it passed.
        seconds (float): Wall time.
        detail (Optional[str]): Measured values on success, the error on failure.
    """

    name: str
    suite: CheckSuite
    passed: bool
    seconds: float
    detail: Optional[str] = None


class CheckReport(ValidateBaseModel):
    suite: CheckSuite
    results: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [result for result in self.results if not result.passed]

    @property
    def seconds(self) -> float:
        return math.fsum(result.seconds for result in self.results)

    @property
    def df(self) -> DataFrame:
        _df = DataFrame([result.dict() for result in self.results])
        if not _df.empty:
            _df.set_index("name", inplace=True)
        return _df


def run_check(check: RegisteredCheck) -> CheckResult:
    start = time.perf_counter()
    try:
        detail = check.fn()
        passed = True
    except Exception as e:
        detail = f"{type(e).__name__}: {e}"
        passed = False
    seconds = time.perf_counter() - start

    if passed:
        log.info(f"[{check.suite.value}] {check.name} passed in {seconds:.2f}s" + (f" ({detail})" if detail else ""))
    else:
        log.error(f"[{check.suite.value}] {check.name} FAILED in {seconds:.2f}s: {detail}")

    return CheckResult(name=check.name, suite=check.suite, passed=passed, seconds=seconds, detail=detail)


def run_checks(suite: CheckSuite = CheckSuite.ALL, workers: int = 1) -> CheckReport:
    """Runs every registered check of a suite. Failures are reported, never raised.

    Args:
        suite (CheckSuite): The suite, or ALL. Defaults to ALL.
        workers (int): Threads running independent checks concurrently. Defaults to 1.

    Returns:
        CheckReport: One result per check, in registration order
    """
    checks = registered_checks(suite)
    log.info(f"running {len(checks)} checks of suite {CheckSuite(suite).value}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_check, checks))
    else:
        results = [run_check(check) for check in checks]

    report = CheckReport(suite=suite, results=results)
    log.info(
        f"{len(results) - len(report.failures)}/{len(results)} checks passed in {report.seconds:.2f}s"
    )

    return report


@lru_cache(maxsize=1)
def _tiny() -> RunConfig:
    return tiny_config(output_dir="runs/checks")


@lru_cache(maxsize=1)
def _tiny_dataset() -> ToyDataset:
    return generate_dataset(_tiny().dataset)


def _generator(seed: int) -> torch.Generator:
    return torch.Generator().manual_seed(seed)


def _perturb_zero_parameters(module: torch.nn.Module, seed: int, std: float = 0.1) -> torch.nn.Module:
    """Re-initializes the all-zero output layers so gradients through them are not trivially zero"""
    generator = _generator(seed)
    with torch.no_grad():
        for param in module.parameters():
            if not param.any():
                param.copy_(torch.randn(param.shape, generator=generator, dtype=param.dtype) * std)
    return module


def _translation_clip(velocity=(1.0, 0.0), frames: int = 4, size: int = 16):
    spec = MotionSpec(kind=MotionKind.TRANSLATE, velocity=velocity)
    return make_toy_clip(spec, frames, size, size, seed=7)


def _gradcheck(fn: Callable, *inputs: torch.Tensor) -> None:
    assert torch.autograd.gradcheck(fn, inputs, eps=1e-6, atol=1e-6, rtol=GRADCHECK_TOLERANCE)


@register(CheckSuite.ALGEBRA)
def one_step_inversion() -> str:
    generator = _generator(0)
    worst = 0.0
    for _ in range(10):
        z_hq = torch.randn(2, 2, 3, 3, 4, generator=generator, dtype=torch.float64)
        eps = torch.randn(z_hq.shape, generator=generator, dtype=torch.float64)
        t = float(torch.rand(1, generator=generator)) * 0.99 + 0.01

        z_t = noise_inject(z_hq, eps, t)
        recovered = one_step_denoise(z_t, velocity_target(z_hq, eps), t)
        worst = max(worst, float((recovered - z_hq).abs().max()))

    assert worst <= 1e-6, f"max abs error {worst}"
    return f"max abs error {worst:.2e}"


@register(CheckSuite.ALGEBRA)
def noise_inject_endpoints() -> None:
    generator = _generator(1)
    z_hq = torch.randn(1, 2, 2, 2, 3, generator=generator, dtype=torch.float64)
    eps = torch.randn(z_hq.shape, generator=generator, dtype=torch.float64)

    assert torch.equal(noise_inject(z_hq, eps, 0.0), z_hq)
    assert torch.equal(noise_inject(z_hq, eps, 1.0), eps)


@register(CheckSuite.ALGEBRA)
def quantization_oracle() -> str:
    generator = _generator(2)
    for trial in range(100):
        with seeded_init(trial, "oracle-codebook"):
            codebook = Codebook(16, 8)
        z = torch.randn(1, 2, 3, 3, 8, generator=generator) * 0.1

        indices = quantize(z, codebook).indices
        table = codebook.entries.detach().numpy().astype(np.float64)
        for position, token in zip(np.ndindex(*indices.shape), z.reshape(-1, 8).numpy().astype(np.float64)):
            distances = [float(np.sum((token - entry) ** 2)) for entry in table]
            best = min(range(len(distances)), key=lambda k: (distances[k], k))
            # float32 distances may order near-ties differently than the float64 oracle
            if int(indices[position]) != best:
                gap = abs(distances[int(indices[position])] - distances[best])
                assert gap <= 1e-6, f"trial {trial}: index {int(indices[position])} instead of {best}"

    # exact ties go to the smaller index
    codebook = Codebook(2, 1)
    with torch.no_grad():
        codebook.entries.copy_(torch.tensor([[-1.0], [1.0]]))
    assert int(quantize(torch.zeros(1, 1), codebook).indices[0]) == 0

    return "100 grids, K=16, d=8"


@register(CheckSuite.ALGEBRA)
def warp_integer_translation() -> str:
    clip, flows = _translation_clip(velocity=(1.0, -1.0))
    frames = torch.from_numpy(clip.frames)
    warped, mask = warp(frames[:-1], torch.from_numpy(flows.forward))

    error = float((warped - frames[1:]).abs()[mask].mean())
    assert error <= 1e-6, f"masked MAE {error}"
    return f"masked MAE {error:.2e}"


def _scalar_temporal_loss(video: torch.Tensor, fw: torch.Tensor, bw: torch.Tensor) -> float:
    total = 0.0
    for b in range(video.shape[0]):
        for i in range(1, video.shape[1] - 1):
            for flow, neighbor in ((fw[b, i], video[b, i + 1]), (bw[b, i - 1], video[b, i - 1])):
                warped, mask = warp(video[b, i], flow)
                total += float((warped - neighbor).abs()[mask].mean())
    return total / video.shape[0]


@register(CheckSuite.ALGEBRA)
def temporal_loss_matches_loop() -> str:
    generator = _generator(3)
    worst = 0.0
    for _ in range(5):
        video = torch.rand(2, 3, 8, 8, 3, generator=generator, dtype=torch.float64)
        fw = torch.randn(2, 2, 8, 8, 2, generator=generator, dtype=torch.float64)
        bw = torch.randn(2, 2, 8, 8, 2, generator=generator, dtype=torch.float64)
        worst = max(worst, abs(float(temporal_loss(video, fw, bw)) - _scalar_temporal_loss(video, fw, bw)))

    static = torch.rand(1, 1, 8, 8, 3, generator=generator).repeat(1, 4, 1, 1, 1)
    zeros = torch.zeros(1, 3, 8, 8, 2)
    assert float(temporal_loss(static, zeros, zeros)) == 0.0

    assert worst <= 1e-6, f"max deviation {worst}"
    return f"max deviation {worst:.2e}"


@register(CheckSuite.GRADIENTS)
def fuse_gradients() -> str:
    generator = _generator(4)
    for variant in FusionVariant:
        config = FusionConfig(variant=variant, modulation_hidden=8)
        with seeded_init(5, "fusion-check"):
            fusion = PriorFusion(4, 8, 1, config).double()
        _perturb_zero_parameters(fusion, seed=6)

        x = torch.randn(1, 8, 8, generator=generator, dtype=torch.float64, requires_grad=True)
        f_s = torch.randn(1, 2, 2, 2, 4, generator=generator, dtype=torch.float64, requires_grad=True)
        f_t = torch.randn(1, 2, 2, 2, 4, generator=generator, dtype=torch.float64, requires_grad=True)
        _gradcheck(lambda a, b, c: fuse(a, b, c, fusion), x, f_s, f_t)

    return f"{len(FusionVariant)} variants"


@register(CheckSuite.GRADIENTS)
def codebook_gradient_routing() -> None:
    """Reconstruction gradients reach the encoder through the straight-through estimator and never the codebooks;
    the feature loss moves both codebooks but not the decoder."""
    config = _tiny().prior
    model = StdcModel(config).double()
    video = torch.rand(1, 4, 16, 16, 3, generator=_generator(7), dtype=torch.float64)
    groups = model.parameter_groups()

    output = model.reconstruct(video)
    reconstruction = (output.reconstruction - video).abs().mean()
    grads = torch.autograd.grad(
        reconstruction, groups["codebooks"] + groups["encoder"], retain_graph=True, allow_unused=True
    )
    codebook_grads, encoder_grads = grads[:2], grads[2:]
    assert all(g is None or not g.any() for g in codebook_grads), "reconstruction moved a codebook"
    assert any(g is not None and g.any() for g in encoder_grads), "reconstruction did not reach the encoder"

    feat = feature_loss(output.z_h, output.z_q, beta=0.25)
    grads = torch.autograd.grad(feat, groups["codebooks"] + groups["decoder"], allow_unused=True)
    assert all(g is not None and g.any() for g in grads[:2]), "feature loss did not reach both codebooks"
    assert all(g is None or not g.any() for g in grads[2:]), "feature loss moved the decoder"

    # closed form of both stop-gradient branches
    generator = _generator(8)
    z_h = torch.randn(1, 2, 2, 2, 4, generator=generator, dtype=torch.float64, requires_grad=True)
    z_q = torch.randn(1, 2, 2, 2, 4, generator=generator, dtype=torch.float64, requires_grad=True)
    grad_h, grad_q = torch.autograd.grad(feature_loss(z_h, z_q, 0.25), (z_h, z_q))
    n = z_h.numel()
    assert torch.allclose(grad_h, 2 * 0.25 * (z_h - z_q).detach() / n)
    assert torch.allclose(grad_q, 2 * (z_q - z_h).detach() / n)

    # straight-through: identity to z, nothing to the codebook
    codebook = Codebook(16, 4).double()
    z = torch.randn(1, 2, 2, 2, 4, generator=generator, dtype=torch.float64, requires_grad=True)
    weights = torch.randn(z.shape, generator=generator, dtype=torch.float64)
    grad_z, grad_c = torch.autograd.grad(
        (quantize(z, codebook, straight_through=True).values * weights).sum(), (z, codebook.entries), allow_unused=True
    )
    assert torch.equal(grad_z, weights)
    assert grad_c is None or not grad_c.any()


@register(CheckSuite.GRADIENTS)
def code_feature_stop_gradient() -> None:
    generator = _generator(9)
    z_l = torch.randn(1, 2, 2, 2, 4, generator=generator, dtype=torch.float64, requires_grad=True)
    z_q = torch.randn(1, 2, 2, 2, 4, generator=generator, dtype=torch.float64, requires_grad=True)

    grad_q = torch.autograd.grad(code_feature_loss(z_l, z_q), z_q, allow_unused=True)[0]
    assert grad_q is None or not grad_q.any(), "gradient leaked into the ground-truth codes"
    _gradcheck(lambda a: code_feature_loss(a, z_q), z_l)


@register(CheckSuite.GRADIENTS)
def stage2_loss_gradients() -> None:
    generator = _generator(10)
    weights = _tiny().weights
    extractor = FeatureExtractor(weights.perceptual_seed, channels=(4, 4, 4)).double()

    x_hat = torch.rand(1, 3, 8, 8, 3, generator=generator, dtype=torch.float64, requires_grad=True)
    x_hq = torch.rand(1, 3, 8, 8, 3, generator=generator, dtype=torch.float64)
    z_hat = torch.randn(1, 3, 2, 2, 4, generator=generator, dtype=torch.float64, requires_grad=True)
    z_hq = torch.randn(1, 3, 2, 2, 4, generator=generator, dtype=torch.float64)
    fw = torch.randn(1, 2, 8, 8, 2, generator=generator, dtype=torch.float64) * 0.7
    bw = torch.randn(1, 2, 8, 8, 2, generator=generator, dtype=torch.float64) * 0.7

    _gradcheck(lambda a, b: stage2_loss(a, z_hq, b, x_hq, fw, bw, extractor, weights).total, z_hat, x_hat)


@register(CheckSuite.GRADIENTS)
def velocity_gradients() -> None:
    config = RestorerConfig(
        latent_dim=2, vae_hidden=4, width=8, depth=1, heads=2, timestep_frequencies=8, max_grid=(2, 2, 2)
    )
    restorer = Restorer(config, _tiny().prior.copy(update={"code_dim": 4})).double()
    _perturb_zero_parameters(restorer.dit, seed=12)

    generator = _generator(13)
    z = torch.randn(1, 2, 2, 2, 2, generator=generator, dtype=torch.float64, requires_grad=True)
    f_s = torch.randn(1, 2, 2, 2, 4, generator=generator, dtype=torch.float64)
    f_t = torch.randn(1, 2, 2, 2, 4, generator=generator, dtype=torch.float64)

    _gradcheck(lambda latent: (restorer.predict_velocity(latent, 0.7, f_s, f_t) ** 2).sum(), z)


@register(CheckSuite.ORACLES)
def psnr_constant_offset() -> str:
    frames = np.random.default_rng(0).uniform(0.2, 0.8, size=(3, 16, 16, 3))
    value = psnr(frames + 0.1, frames)
    assert abs(value - 20.0) <= 1e-6, f"psnr {value}"
    assert psnr(frames, frames) == 100.0
    return f"{value:.6f} dB"


@register(CheckSuite.ORACLES)
def ssim_identity() -> None:
    clip, _ = _translation_clip()
    assert abs(ssim(clip, clip) - 1.0) <= 1e-9


@register(CheckSuite.ORACLES)
def warping_error_flicker() -> str:
    clip, flows = _translation_clip()
    static = VideoClip(frames=np.repeat(clip.frames[:1], 4, axis=0))
    zeros = FlowFieldSequence(forward=np.zeros_like(flows.forward), backward=np.zeros_like(flows.backward))
    assert warping_error(static, zeros) == 0.0
    assert warping_error(clip, flows) <= 1e-6

    errors = []
    for amplitude in (0.01, 0.05, 0.1):
        signs = np.where(np.arange(4) % 2 == 0, 1.0, -1.0)[:, None, None, None]
        flicker = np.clip(clip.frames * 0.8 + 0.1 + amplitude * signs, 0.0, 1.0)
        errors.append(warping_error(flicker, flows))

    assert errors[0] < errors[1] < errors[2], f"not monotonic: {errors}"
    return "ewarp " + ", ".join(f"{e:.3f}" for e in errors)


@register(CheckSuite.ORACLES)
def block_match_translation() -> str:
    clip, flows = _translation_clip(velocity=(2.0, -1.0), size=32)
    estimated = block_match_flow(clip, block=4, radius=3)

    interior = (slice(None), slice(4, -4), slice(4, -4))
    error = float(np.abs(estimated.forward[interior] - flows.forward[interior]).mean())
    assert error <= 0.5, f"mean endpoint error {error}"
    return f"mean error {error:.3f} px"


@register(CheckSuite.ORACLES)
def cross_entropy_uniform() -> None:
    k, n = 64, 12
    logits = torch.zeros(2, n, k)
    targets = torch.randint(0, k, (2, n), generator=_generator(14))

    assert math.isclose(float(code_cross_entropy(logits, targets, CEReduction.MEAN)), math.log(k), rel_tol=1e-6)
    assert math.isclose(float(code_cross_entropy(logits, targets, CEReduction.SUM)), n * math.log(k), rel_tol=1e-6)


def _fresh_stdc_checkpoint(config: RunConfig) -> Checkpoint:
    return Checkpoint(kind="stdc", config_hash=config.base_hash, state={"stdc": module_state(StdcModel(config.prior))})


@register(CheckSuite.FREEZE)
def stage1p_freeze() -> None:
    config = _tiny()
    trainer = Stage1pTrainer(config, _tiny_dataset(), _fresh_stdc_checkpoint(config))
    groups = trainer.stdc.parameter_groups()
    before = [p.detach().clone() for p in groups["encoder"]]

    # train() raises FreezeViolationError if the decoder or a codebook changed
    trainer.train(iterations=2)
    assert any(not torch.equal(a, b) for a, b in zip(before, groups["encoder"])), "the encoder did not train"


@register(CheckSuite.FREEZE)
def stage2_freeze() -> None:
    config = _tiny()
    restorer = config.restorer
    with seeded_init(restorer.seed, "vae"):
        vae = TinyVAE(restorer.latent_dim, restorer.vae_hidden, restorer.vae_stride)
    vae_checkpoint = Checkpoint(kind="vae", config_hash=config.base_hash, state=module_state(vae))

    trainer = Stage2Trainer(config, _tiny_dataset(), _fresh_stdc_checkpoint(config), vae_checkpoint)
    decoder = trainer.restorer.parameter_groups()["vae_decoder"]
    before = [p.detach().clone() for p in decoder]

    trainer.train(iterations=2)
    assert any(not torch.equal(a, b) for a, b in zip(before, decoder)), "the VAE decoder did not train"


@register(CheckSuite.TRANSPARENCY)
def fusion_zero_init() -> str:
    generator = _generator(15)
    worst = 0.0
    for mode in PriorMode:
        if mode == PriorMode.NONE:
            continue
        for variant in FusionVariant:
            fusion = PriorFusion(4, 8, 2, FusionConfig(prior_mode=mode, variant=variant, modulation_hidden=8))
            assert not fusion.nonzero_output_layers(), f"{mode.value}/{variant.value} has nonzero output layers"

            x = torch.randn(2, 8, 8, generator=generator)
            f_s = torch.randn(2, 2, 2, 2, 4, generator=generator)
            f_t = torch.randn(2, 2, 2, 2, 4, generator=generator)
            for index in range(2):
                worst = max(worst, float((fuse(x, f_s, f_t, fusion, index) - x).abs().max()))

    assert worst <= 1e-6, f"max abs difference {worst}"
    return f"max abs difference {worst:.2e}"


@register(CheckSuite.TRANSPARENCY)
def backbone_zero_init() -> str:
    config = _tiny()
    dit = VelocityDiT(config.restorer, config.prior.code_dim)
    # a nonzero head, otherwise both forwards are trivially zero
    _perturb_zero_parameters(dit.head, seed=16)

    generator = _generator(17)
    z = torch.randn(1, 4, 4, 4, config.restorer.latent_dim, generator=generator)
    priors = Priors(
        spatial=torch.randn(1, 4, 4, 4, config.prior.code_dim, generator=generator),
        temporal=torch.randn(1, 4, 4, 4, config.prior.code_dim, generator=generator),
    )
    t = torch.full((1,), 0.5)
    c_text = torch.zeros(1, config.restorer.width)

    with torch.no_grad():
        difference = float((dit(z, t, c_text, priors) - dit(z, t, c_text, None)).abs().max())

    assert difference <= 1e-6, f"max abs difference {difference}"
    return f"max abs difference {difference:.2e}"


@register(CheckSuite.TRANSPARENCY)
def restorer_zero_init() -> str:
    config = _tiny()
    restorer = Restorer(config.restorer, config.prior)
    stdc = StdcModel(config.prior)
    lq = torch.from_numpy(_tiny_dataset().items[0].lq.frames).unsqueeze(0)

    with torch.no_grad():
        restored = restorer.restore(lq, stdc).video
        round_trip = restorer.vae_decode(restorer.vae_encode(lq))
    difference = float((restored - round_trip).abs().max())

    assert difference <= 1e-6, f"max abs difference {difference}"
    assert stdc.extract_priors(lq).spatial.shape[1:4] == restorer.vae_encode(lq).shape[1:4]
    return f"max abs difference {difference:.2e}"
