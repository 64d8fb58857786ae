"""Measurement-noise simulation: pre-log Poisson and Gaussian controls.

All draws use the counter-based Philox generator keyed by the caller's
seed, so regeneration is deterministic and independent of evaluation
order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError

ZERO_COUNT_CLAMP = 0.5  # keeps the post-log transform finite


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def absorption(sinogram, scale=1.0):
    """Mean of 1 - exp(-scale * y) over the nonzero entries of y."""
    y = np.asarray(sinogram, dtype=float)
    nz = y[y != 0]
    if nz.size == 0:
        raise ValueError("sinogram has no nonzero entries")
    return float(np.mean(1.0 - np.exp(-scale * nz)))


def calibrate_absorption(sinogram, alpha, tol=1e-8, lo=1e-6, hi=1e6):
    """Scale factor s such that the absorption of s * sinogram equals alpha.

    Solved by bisection; the absorption is increasing in s for nonnegative
    sinograms.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    f_lo = absorption(sinogram, lo) - alpha
    f_hi = absorption(sinogram, hi) - alpha
    if f_lo > 0 or f_hi < 0:
        raise CalibrationError(
            f"absorption {alpha} not reachable for s in [{lo}, {hi}]"
        )
    for _ in range(200):
        mid = np.sqrt(lo * hi)  # bisect in log-space; s spans 12 decades
        f_mid = absorption(sinogram, mid) - alpha
        if abs(f_mid) < tol:
            return float(mid)
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def apply_poisson(sinogram, photon_count, seed):
    """Pre-log Poisson noise: counts ~ Poisson(I0 exp(-p)), then p = -ln(c/I0).

    Zero counts are clamped to ``ZERO_COUNT_CLAMP`` before the log.
    """
    p = np.asarray(sinogram, dtype=float)
    if photon_count <= 0:
        raise ValueError("photon_count must be > 0")
    if np.any(p < 0):
        raise ValueError("sinogram must be nonnegative (calibrate first)")
    counts = _rng(seed).poisson(photon_count * np.exp(-p)).astype(float)
    counts = np.maximum(counts, ZERO_COUNT_CLAMP)
    return -np.log(counts / photon_count)


def apply_gaussian(array, sigma, seed):
    """Additive i.i.d. N(0, sigma^2) noise."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    a = np.asarray(array, dtype=float)
    return a + sigma * _rng(seed).standard_normal(a.shape)


@dataclass(frozen=True)
class NoiseModel:
    """Noise description used by the pipeline configs.

    ``kind`` is "poisson" (uses ``photon_count``) or "gaussian" (uses
    ``sigma``; ``domain`` selects sinogram- or image-domain corruption).
    """

    kind: str
    photon_count: float = 0.0
    sigma: float = 0.0
    domain: str = "sinogram"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("poisson", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "poisson" and self.photon_count <= 0:
            raise ValueError("photon_count must be > 0")
        if self.kind == "gaussian" and self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.domain not in ("sinogram", "image"):
            raise ValueError(f"unknown noise domain {self.domain!r}")

    def apply(self, array, seed=None):
        seed = self.seed if seed is None else seed
        if self.kind == "poisson":
            return apply_poisson(array, self.photon_count, seed)
        return apply_gaussian(array, self.sigma, seed)
