import logging
from typing import NamedTuple, Tuple

import numpy as np

from ..common.enums import BackgroundKind, MotionKind
from ..common.exceptions import ConfigurationError
from ..common.random import keyed_rng
from .models import FlowFieldSequence, MotionSpec, VideoClip

log = logging.getLogger(__name__)


class FaceAppearance(NamedTuple):
    """Randomized appearance of the face-like composite and its background, in canonical pixel coordinates"""

    head_center: Tuple[float, float]
    head_radii: Tuple[float, float]
    skin: np.ndarray
    eye_color: np.ndarray
    mouth_color: np.ndarray
    background_base: np.ndarray
    background_accent: np.ndarray
    wave_vector: Tuple[float, float]
    phase: float


def _smooth_step(signed_distance: np.ndarray, softness: float) -> np.ndarray:
    """Soft coverage, 1 inside (negative distance) and 0 outside"""
    return 1.0 / (1.0 + np.exp(signed_distance / softness))


def sample_appearance(height: int, width: int, seed: int, index: int = 0) -> FaceAppearance:
    rng = keyed_rng(seed, index, "appearance")
    scale = min(height, width)

    angle = rng.uniform(0.0, np.pi)
    frequency = rng.uniform(0.15, 0.35)

    return FaceAppearance(
        head_center=(
            width / 2.0 + rng.uniform(-0.05, 0.05) * width,
            height / 2.0 + rng.uniform(-0.05, 0.05) * height,
        ),
        head_radii=(rng.uniform(0.2, 0.26) * scale, rng.uniform(0.26, 0.32) * scale),
        skin=rng.uniform([0.55, 0.4, 0.3], [0.95, 0.75, 0.6]),
        eye_color=rng.uniform(0.0, 0.2, size=3),
        mouth_color=rng.uniform([0.5, 0.05, 0.05], [0.8, 0.25, 0.25]),
        background_base=rng.uniform(0.15, 0.55, size=3),
        background_accent=rng.uniform(-0.2, 0.2, size=3),
        wave_vector=(frequency * np.cos(angle), frequency * np.sin(angle)),
        phase=rng.uniform(0.0, 2 * np.pi),
    )


def render_content(
    x: np.ndarray, y: np.ndarray, appearance: FaceAppearance, background: BackgroundKind
) -> np.ndarray:
    """Evaluates the canonical scene at continuous coordinates.

    Args:
        x (np.ndarray): Column coordinates, any shape.
        y (np.ndarray): Row coordinates, same shape as x.
        appearance (FaceAppearance): The scene's appearance.
        background (BackgroundKind): Background texture.

    Returns:
        np.ndarray: RGB values in [0, 1] with shape x.shape + (3,)
    """
    kx, ky = appearance.wave_vector
    if background == BackgroundKind.FLAT:
        texture = np.zeros_like(x)
    elif background == BackgroundKind.STRIPES:
        texture = np.sign(np.sin(kx * x + ky * y + appearance.phase)) * 0.5
    elif background == BackgroundKind.CHECKER:
        texture = np.sign(np.sin(kx * 2 * x + appearance.phase) * np.sin(ky * 2 * y)) * 0.5
    else:
        texture = np.sin(kx * x + ky * y + appearance.phase) * np.cos(0.5 * ky * x - 0.5 * kx * y)

    image = appearance.background_base + texture[..., None] * appearance.background_accent

    cx, cy = appearance.head_center
    rx, ry = appearance.head_radii
    softness = 0.6

    head_distance = (np.sqrt(((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2) - 1.0) * min(rx, ry)
    head = _smooth_step(head_distance, softness)[..., None]
    image = image * (1 - head) + appearance.skin * head

    eye_radius = 0.14 * rx
    for side in (-1.0, 1.0):
        ex, ey = cx + side * 0.4 * rx, cy - 0.25 * ry
        eye = _smooth_step(np.hypot(x - ex, y - ey) - eye_radius, softness)[..., None]
        image = image * (1 - eye) + appearance.eye_color * eye

    # mouth: lower half of a ring
    mx, my = cx, cy + 0.25 * ry
    ring = np.abs(np.hypot((x - mx) / (0.45 * rx), (y - my) / (0.3 * ry)) - 1.0) * 0.3 * ry - 0.06 * ry
    mouth = (_smooth_step(ring, softness) * _smooth_step(my - y, softness))[..., None]
    image = image * (1 - mouth) + appearance.mouth_color * mouth

    return np.clip(image, 0.0, 1.0)


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _center(spec: MotionSpec, height: int, width: int) -> np.ndarray:
    if spec.center is not None:
        return np.asarray(spec.center, dtype=np.float64)
    return np.array([(width - 1) / 2.0, (height - 1) / 2.0])


def _pixel_grid(height: int, width: int) -> np.ndarray:
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    return np.stack([cols, rows], axis=-1).astype(np.float64)


def sampling_coordinates(spec: MotionSpec, frame: int, height: int, width: int) -> np.ndarray:
    """Canonical coordinates G_i(p) sampled by every pixel of frame i.

    Args:
        spec (MotionSpec): The motion.
        frame (int): Frame index i.
        height (int): Frame height.
        width (int): Frame width.

    Returns:
        np.ndarray: H x W x 2 array of (x, y) canonical coordinates
    """
    pixels = _pixel_grid(height, width)
    return _forward_map(spec, frame, pixels, _center(spec, height, width))


def _forward_map(spec: MotionSpec, frame: int, points: np.ndarray, center: np.ndarray) -> np.ndarray:
    transform = spec.effective_scale**frame * _rotation(frame * spec.effective_angular_rate)
    shift = frame * np.asarray(spec.effective_velocity, dtype=np.float64)

    return (points - center) @ transform.T + center + shift


def _inverse_map(spec: MotionSpec, frame: int, points: np.ndarray, center: np.ndarray) -> np.ndarray:
    transform = spec.effective_scale ** (-frame) * _rotation(-frame * spec.effective_angular_rate)
    shift = frame * np.asarray(spec.effective_velocity, dtype=np.float64)

    return (points - center - shift) @ transform.T + center


def analytic_flows(spec: MotionSpec, frames: int, height: int, width: int) -> FlowFieldSequence:
    """Exact forward and backward flows of a motion spec.

    forward[i](p) = G_i^-1(G_{i+1}(p)) - p and backward[i](p) = G_{i+1}^-1(G_i(p)) - p, so that sampling frame i at
    p + forward[i](p) yields frame i+1 at p.

    Returns:
        FlowFieldSequence: (frames - 1) pairs of H x W x 2 flows
    """
    pixels = _pixel_grid(height, width)
    center = _center(spec, height, width)

    forward, backward = [], []
    for i in range(frames - 1):
        forward.append(
            _inverse_map(spec, i, _forward_map(spec, i + 1, pixels, center), center) - pixels
        )
        backward.append(
            _inverse_map(spec, i + 1, _forward_map(spec, i, pixels, center), center) - pixels
        )

    if _is_integer_translation(spec):
        # exact integers, free of the rounding of the affine round trip
        forward = [np.round(flow) for flow in forward]
        backward = [np.round(flow) for flow in backward]

    return FlowFieldSequence(
        forward=np.stack(forward).astype(np.float32),
        backward=np.stack(backward).astype(np.float32),
    )


def _is_integer_translation(spec: MotionSpec) -> bool:
    vx, vy = spec.effective_velocity
    return (
        spec.effective_angular_rate == 0.0
        and spec.effective_scale == 1.0
        and float(vx).is_integer()
        and float(vy).is_integer()
    )


def validate_motion(spec: MotionSpec, frames: int, height: int, width: int) -> None:
    """Checks the per-frame displacement bound |flow| <= H/4.

    Raises:
        ConfigurationError: If any pixel moves more than H/4 between consecutive frames.
    """
    bound = height / 4.0
    flows = analytic_flows(spec, frames, height, width)

    largest = float(
        max(
            np.linalg.norm(flows.forward, axis=-1).max(),
            np.linalg.norm(flows.backward, axis=-1).max(),
        )
    )
    if largest > bound:
        raise ConfigurationError(
            f"motion displaces pixels by {largest:.3f} px per frame, above the bound H/4 = {bound}",
            {"kind": spec.kind.value, "displacement": largest, "bound": bound},
        )


def make_toy_clip(
    spec: MotionSpec,
    T: int,
    H: int,
    W: int,
    seed: int,
    index: int = 0,
    name: str = None,
) -> Tuple[VideoClip, FlowFieldSequence]:
    """Renders a moving face-like composite together with its exact flows.

    Args:
        spec (MotionSpec): Viewport motion.
        T (int): Frame count, at least 3.
        H (int): Frame height, at least 16.
        W (int): Frame width, at least 16.
        seed (int): Appearance seed.
        index (int): Appearance stream index, so several clips can share a seed. Defaults to 0.
        name (str): Clip name. Defaults to "toy_<index>".

    Raises:
        ConfigurationError: If the shape is too small or the motion violates the displacement bound.

    Returns:
        Tuple[VideoClip, FlowFieldSequence]: The clip and its analytic forward/backward flows
    """
    if T < 3:
        raise ConfigurationError(f"toy clips need T >= 3, got {T}", {"T": T})
    if H < 16 or W < 16:
        raise ConfigurationError(f"toy clips need H, W >= 16, got {H}x{W}", {"H": H, "W": W})

    validate_motion(spec, T, H, W)

    appearance = sample_appearance(H, W, seed, index)
    frames = np.empty((T, H, W, 3), dtype=np.float32)
    for i in range(T):
        coordinates = sampling_coordinates(spec, i, H, W)
        frames[i] = render_content(
            coordinates[..., 0], coordinates[..., 1], appearance, spec.background
        )

    flows = analytic_flows(spec, T, H, W)
    clip = VideoClip(frames=frames, name=name or f"toy_{index:04d}")

    log.debug(f"rendered {clip.name}: {spec.kind.value} motion, {T}x{H}x{W}")

    return clip, flows


def random_motion(seed: int, index: int, max_speed: int, height: int) -> MotionSpec:
    """Samples a motion spec, cycling through the motion kinds by index.

    Translations use integer velocities so warping them is interpolation free.
    """
    rng = keyed_rng(seed, index, "motion")
    kinds = [MotionKind.TRANSLATE, MotionKind.ROTATE, MotionKind.SCALE, MotionKind.COMPOSITE]
    kind = kinds[index % len(kinds)]
    backgrounds = list(BackgroundKind)

    velocity = tuple(float(v) for v in rng.integers(-max_speed, max_speed + 1, size=2))
    angular_rate = float(rng.uniform(-1.0, 1.0)) * min(0.05, 2.0 / height)
    scale_rate = float(rng.uniform(-0.02, 0.02))

    return MotionSpec(
        kind=kind,
        velocity=velocity,
        angular_rate=angular_rate,
        scale_rate=scale_rate,
        background=backgrounds[int(rng.integers(0, len(backgrounds)))],
    )
