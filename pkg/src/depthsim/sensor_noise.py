"""Depth corruption: crop/resample, range clipping, axial and lateral noise,
uncertainty-driven dropout and edge-conditioned dropout.

Depth frames are ``(H, W)`` float arrays in metres with ``0.0`` marking
invalid pixels. Invalid pixels are excluded from every statistic and stay
``0.0`` through every stage.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping, Optional

import numpy as np
from scipy import ndimage

from depthsim.errors import ConfigError, DegenerateFrameError, InvalidInputError
from depthsim.rng import RngStream


@dataclass(frozen=True)
class NoiseParams:
    """Corruption hyperparameters.

    Defaults are plausible values for a structured-light sensor, not
    calibrated constants.
    """

    a: float = 0.0012  # m
    b: float = 0.0019  # 1/m
    c: float = 0.0005  # m^1.5
    alpha: float = 0.002
    w: float = 2.0
    rho: float = 0.05
    lambda_e: float = 0.3
    z_min: float = 0.2
    z_max: float = 5.0
    margin: int = 10
    edge_percentile: float = 95.0

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ConfigError(f"noise parameter {f.name} must be finite")
        if not self.z_min < self.z_max:
            raise ConfigError("z_min must be below z_max")
        if not (0.0 <= self.rho <= 1.0 and 0.0 <= self.lambda_e <= 1.0):
            raise ConfigError("rho and lambda_e must lie in [0, 1]")
        if self.w < 1.0:
            raise ConfigError("axial weight w must be >= 1")
        if self.margin < 0 or int(self.margin) != self.margin:
            raise ConfigError("margin must be a non-negative integer")
        if not 0.0 < self.edge_percentile < 100.0:
            raise ConfigError("edge_percentile must lie in (0, 100)")
        if min(self.a, self.b, self.c, self.alpha) < 0:
            raise ConfigError("noise coefficients must be non-negative")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NoiseParams":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown noise parameters: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def zero(cls, z_min: float = 0.0, z_max: float = 1e9) -> "NoiseParams":
        """Parameters that leave a frame untouched apart from clipping."""
        return cls(a=0.0, b=0.0, c=0.0, alpha=0.0, w=1.0, rho=0.0, lambda_e=0.0,
                   z_min=z_min, z_max=z_max, margin=0)


def _valid(depth: np.ndarray) -> np.ndarray:
    return depth > 0.0


def crop_resize(depth: np.ndarray, margin: int, out_w: int, out_h: int) -> np.ndarray:
    """Drop ``margin`` pixels on every side and bilinearly resample to ``out_h x out_w``.

    Sampling uses pixel-centre alignment. Invalid pixels carry no weight;
    an output sample whose whole support is invalid stays ``0.0``.
    """
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    if 2 * margin >= w or 2 * margin >= h:
        raise InvalidInputError(f"margin {margin} too large for a {w}x{h} image")
    if out_w <= 0 or out_h <= 0:
        raise InvalidInputError("output size must be positive")
    src = depth[margin:h - margin, margin:w - margin]
    sh, sw = src.shape

    def axis_taps(n_out, n_in):
        s = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        s = np.clip(s, 0.0, n_in - 1)
        i0 = np.floor(s).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, s - i0

    y0, y1, fy = axis_taps(out_h, sh)
    x0, x1, fx = axis_taps(out_w, sw)
    fy = fy[:, None]
    fx = fx[None, :]
    valid = (src > 0.0).astype(np.float64)
    num = np.zeros((out_h, out_w))
    den = np.zeros((out_h, out_w))
    for yi, wy in ((y0, 1.0 - fy), (y1, fy)):
        for xi, wx in ((x0, 1.0 - fx), (x1, fx)):
            wgt = wy * wx * valid[np.ix_(yi, xi)]
            num += wgt * src[np.ix_(yi, xi)]
            den += wgt
    out = np.zeros((out_h, out_w))
    np.divide(num, den, out=out, where=den > 0)
    return out


def clip_range(depth: np.ndarray, z_min: float, z_max: float) -> np.ndarray:
    if not z_min < z_max:
        raise InvalidInputError("z_min must be below z_max")
    depth = np.asarray(depth, dtype=np.float64)
    return np.where(_valid(depth), np.clip(depth, z_min, z_max), 0.0)


def axial_sigma(depth: np.ndarray, params: NoiseParams) -> np.ndarray:
    """Range-dependent axial standard deviation, re-centred on the frame mean.

    The incidence angle plays no role: only range enters the model.
    """
    depth = np.asarray(depth, dtype=np.float64)
    valid = _valid(depth)
    if not valid.any():
        raise DegenerateFrameError("frame has no valid pixels")
    z = depth[valid]
    mu = z.mean()
    sigma = np.zeros_like(depth)
    sigma[valid] = params.a + params.b * (z - mu) ** 2 + params.c / np.sqrt(z)
    return sigma


def add_axial_noise(depth: np.ndarray, sigma: np.ndarray, rng: RngStream) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    if sigma.shape != depth.shape:
        raise InvalidInputError("sigma map does not match the depth frame")
    valid = _valid(depth)
    noisy = np.maximum(depth + sigma * rng.normal("axial", depth.shape), 0.0)
    return np.where(valid, noisy, 0.0)


def lateral_sigma(depth: np.ndarray, alpha: float, rng: RngStream) -> np.ndarray:
    """Signed lateral spread ``alpha * z * xi`` with ``xi ~ U[-1, 1]`` per pixel."""
    depth = np.asarray(depth, dtype=np.float64)
    xi = 2.0 * rng.uniform("lateral", depth.shape) - 1.0
    return np.where(_valid(depth), alpha * depth * xi, 0.0)


def total_sigma(sigma_z: np.ndarray, sigma_l: np.ndarray, w: float) -> np.ndarray:
    if w < 1.0:
        raise InvalidInputError("axial weight w must be >= 1")
    return np.sqrt(w * np.square(sigma_z) + np.square(sigma_l))


def sigma_dropout_prob(sigma_tot: np.ndarray, rho: float,
                       valid: Optional[np.ndarray] = None) -> np.ndarray:
    """Min-max normalise the uncertainty over valid pixels and scale by ``rho``."""
    if not 0.0 <= rho <= 1.0:
        raise InvalidInputError("rho must lie in [0, 1]")
    sigma_tot = np.asarray(sigma_tot, dtype=np.float64)
    if valid is None:
        valid = np.ones(sigma_tot.shape, dtype=bool)
    prob = np.zeros_like(sigma_tot)
    if rho == 0.0 or not valid.any():
        return prob
    s = sigma_tot[valid]
    lo, hi = s.min(), s.max()
    if hi == lo:
        return prob
    prob[valid] = rho * (s - lo) / (hi - lo)
    return prob


def sobel_gradient(depth: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude with replicated borders."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2 or min(depth.shape) < 3:
        raise InvalidInputError("sobel_gradient needs an image of at least 3x3")
    gx = ndimage.sobel(depth, axis=1, mode="nearest")
    gy = ndimage.sobel(depth, axis=0, mode="nearest")
    return np.hypot(gx, gy)


def edge_set(grad: np.ndarray, percentile: float,
             valid: Optional[np.ndarray] = None) -> np.ndarray:
    """Pixels whose gradient reaches the given percentile of positive gradients."""
    grad = np.asarray(grad, dtype=np.float64)
    candidates = grad > 0.0
    if valid is not None:
        candidates &= valid
    if not candidates.any():
        return candidates
    threshold = np.percentile(grad[candidates], percentile)
    return candidates & (grad >= threshold)


def edge_dropout_prob(grad: np.ndarray, params: NoiseParams,
                      valid: Optional[np.ndarray] = None) -> np.ndarray:
    grad = np.asarray(grad, dtype=np.float64)
    prob = np.zeros_like(grad)
    if params.lambda_e == 0.0:
        return prob
    edges = edge_set(grad, params.edge_percentile, valid)
    if not edges.any():
        return prob
    prob[edges] = params.lambda_e * grad[edges] / grad[edges].max()
    return prob


def dropout_mask(p_sigma: np.ndarray, p_edge: np.ndarray, rng: RngStream) -> np.ndarray:
    """One uniform draw per pixel compared against ``min(p_sigma + p_edge, 1)``."""
    if p_sigma.shape != p_edge.shape:
        raise InvalidInputError("probability maps are not aligned")
    u = rng.uniform("dropout", p_sigma.shape)
    return u < np.minimum(p_sigma + p_edge, 1.0)


def apply_dropout(depth: np.ndarray, p_sigma: np.ndarray, p_edge: np.ndarray,
                  rng: RngStream) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != p_sigma.shape:
        raise InvalidInputError("probability maps are not aligned with the depth frame")
    return np.where(dropout_mask(p_sigma, p_edge, rng), 0.0, depth)


@dataclass
class Corruption:
    """Output of :func:`corrupt_stages` with every intermediate map kept."""

    output: np.ndarray
    cropped: np.ndarray
    clipped: Optional[np.ndarray] = None
    sigma_z: Optional[np.ndarray] = None
    noisy: Optional[np.ndarray] = None
    sigma_l: Optional[np.ndarray] = None
    sigma_tot: Optional[np.ndarray] = None
    p_sigma: Optional[np.ndarray] = None
    grad: Optional[np.ndarray] = None
    p_edge: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None


def corrupt_stages(
    depth: np.ndarray,
    params: NoiseParams,
    rng: RngStream,
    *,
    crop_resize_enabled: bool = True,
    noise_model: bool = True,
    out_size: Optional[tuple[int, int]] = None,
) -> Corruption:
    """Run the corruption pipeline and keep every intermediate.

    ``out_size`` is ``(width, height)`` of the resampled frame and defaults to
    the input size. ``crop_resize_enabled=False`` skips cropping;
    ``noise_model=False`` skips clipping, noise and dropout.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if out_size is None:
        out_size = (depth.shape[1], depth.shape[0])
    if crop_resize_enabled:
        cropped = crop_resize(depth, params.margin, *out_size)
    else:
        cropped = depth.copy()
    result = Corruption(output=cropped, cropped=cropped)
    if not noise_model:
        return result

    clipped = clip_range(cropped, params.z_min, params.z_max)
    result.clipped = clipped
    result.output = clipped
    valid = _valid(clipped)
    if not valid.any():
        return result
    sigma_z = axial_sigma(clipped, params)
    noisy = add_axial_noise(clipped, sigma_z, rng)
    sigma_l = lateral_sigma(clipped, params.alpha, rng)
    sigma_tot = total_sigma(sigma_z, sigma_l, params.w)
    p_sigma = sigma_dropout_prob(sigma_tot, params.rho, valid)
    grad = sobel_gradient(noisy)
    p_edge = edge_dropout_prob(grad, params, _valid(noisy))
    mask = dropout_mask(p_sigma, p_edge, rng)
    result.sigma_z = sigma_z
    result.noisy = noisy
    result.sigma_l = sigma_l
    result.sigma_tot = sigma_tot
    result.p_sigma = p_sigma
    result.grad = grad
    result.p_edge = p_edge
    result.mask = mask
    result.output = np.where(mask, 0.0, noisy)
    return result


def corrupt(depth: np.ndarray, params: NoiseParams, rng: RngStream, **kwargs) -> np.ndarray:
    return corrupt_stages(depth, params, rng, **kwargs).output
