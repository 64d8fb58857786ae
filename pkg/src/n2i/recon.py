"""Reconstruction operators: Ram-Lak FBP, angular sub-reconstructions,
and the iterative baselines SIRT and TV-regularized least squares (FISTA).
"""

from dataclasses import dataclass

import numpy as np

from .geometry import check_image, check_sinogram, subset_geometry
from .projector import back_project, forward_project, operator_norm


@dataclass(frozen=True)
class FilterSpec:
    """Ram-Lak ramp filter realized from its sampled spatial kernel."""

    padded_length: int

    @staticmethod
    def for_geometry(geometry):
        n = 2
        while n < 2 * geometry.detector_count:
            n *= 2
        return FilterSpec(padded_length=n)


def ramlak_kernel(padded_length, det_pixel_size):
    """Sampled ramp kernel h[n] (Kak-Slaney form), wrapped for the FFT.

    h[0] = 1 / (4 d^2); h[n] = -1 / (pi n d)^2 for odd n; 0 for even n.
    Sampling the kernel in space (rather than |f| in frequency) avoids the
    DC bias of the naive frequency-domain ramp.
    """
    n = padded_length
    h = np.zeros(n)
    h[0] = 1.0 / (4.0 * det_pixel_size**2)
    k = np.arange(1, n // 2 + 1)
    odd = k[k % 2 == 1]
    vals = -1.0 / (np.pi * odd * det_pixel_size) ** 2
    h[odd] = vals
    h[-odd] = vals
    return h


def ramp_filter(sinogram, geometry, filter_spec=None):
    """Per-angle 1D Ram-Lak filtering via zero-padded FFT convolution."""
    sinogram = check_sinogram(sinogram, geometry)
    if filter_spec is None:
        filter_spec = FilterSpec.for_geometry(geometry)
    n = filter_spec.padded_length
    if n < 2 * geometry.detector_count:
        raise ValueError("padded length must be >= 2 * detector_count")
    h = ramlak_kernel(n, geometry.detector_pixel_size)
    hf = np.fft.rfft(h)
    padded = np.zeros((geometry.n_angles, n))
    padded[:, : geometry.detector_count] = sinogram
    filtered = np.fft.irfft(np.fft.rfft(padded, axis=1) * hf[None, :], n=n, axis=1)
    # Discrete convolution approximates the continuous one up to the
    # detector sampling step.
    return filtered[:, : geometry.detector_count] * geometry.detector_pixel_size


def _fbp_with_weight(sinogram, geometry, angle_weight, filter_spec=None):
    filtered = ramp_filter(sinogram, geometry, filter_spec)
    scale = angle_weight * geometry.detector_pixel_size / geometry.pixel_size**2
    return scale * back_project(filtered, geometry)


def fbp(sinogram, geometry, filter_spec=None):
    """Filtered backprojection R: ramp filter, backproject, weight by
    arc / n_angles. Linear in the sinogram."""
    return _fbp_with_weight(sinogram, geometry, geometry.angle_step, filter_spec)


def sub_reconstruct(sinogram, geometry, K, j, filter_spec=None):
    """FBP from every Kth angle starting at angle index j-1 (j = 1..K).

    The angular weight is K * arc / n_angles so that the mean of the K
    sub-reconstructions equals the full FBP exactly.
    """
    sinogram = check_sinogram(sinogram, geometry)
    if not (1 <= j <= K):
        raise ValueError(f"need 1 <= j <= K, got j={j}, K={K}")
    if geometry.n_angles % K != 0:
        raise ValueError(f"K={K} must divide n_angles={geometry.n_angles}")
    idx = list(range(j - 1, geometry.n_angles, K))
    sub_geom = subset_geometry(geometry, idx)
    return _fbp_with_weight(
        sinogram[idx], sub_geom, K * geometry.angle_step, filter_spec
    )


def sirt(sinogram, geometry, max_iters, snapshot_callback=None):
    """SIRT iteration x += C A^T R (y - A x) from a zero start.

    R and C are inverse row/column sums of A; zero sums get zero weight.
    ``snapshot_callback(k, x)`` observes every iterate so a caller can pick
    the best early-stopping point.
    """
    sinogram = check_sinogram(sinogram, geometry)
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    row_sums = forward_project(np.ones(geometry.image_shape()), geometry)
    col_sums = back_project(np.ones(geometry.sinogram_shape()), geometry)
    with np.errstate(divide="ignore"):
        inv_rows = np.where(row_sums > 0, 1.0 / np.where(row_sums > 0, row_sums, 1), 0.0)
        inv_cols = np.where(col_sums > 0, 1.0 / np.where(col_sums > 0, col_sums, 1), 0.0)
    x = np.zeros(geometry.image_shape())
    for k in range(max_iters):
        residual = sinogram - forward_project(x, geometry)
        x = x + inv_cols * back_project(inv_rows * residual, geometry)
        if snapshot_callback is not None:
            snapshot_callback(k + 1, x)
    return x


def _grad(x):
    """Forward differences with reflexive (Neumann) boundary."""
    gx = np.zeros_like(x)
    gy = np.zeros_like(x)
    gy[:-1, :] = x[1:, :] - x[:-1, :]
    gx[:, :-1] = x[:, 1:] - x[:, :-1]
    return gy, gx


def _div(py, px):
    """Negative adjoint of :func:`_grad`."""
    d = np.zeros_like(py)
    d[0, :] += py[0, :]
    d[1:-1, :] += py[1:-1, :] - py[:-2, :]
    d[-1, :] += -py[-2, :]
    d[:, 0] += px[:, 0]
    d[:, 1:-1] += px[:, 1:-1] - px[:, :-2]
    d[:, -1] += -px[:, -2]
    return d


def tv_norm(x):
    gy, gx = _grad(x)
    return float(np.sqrt(gy**2 + gx**2).sum())


def prox_tv(v, tau, n_iters=20):
    """Chambolle dual iteration for argmin_u 0.5 ||u - v||^2 + tau TV(u)."""
    if tau <= 0:
        return v.copy()
    py = np.zeros_like(v)
    px = np.zeros_like(v)
    step = 0.25
    for _ in range(n_iters):
        gy, gx = _grad(_div(py, px) - v / tau)
        mag = np.sqrt(gy**2 + gx**2)
        py = (py + step * gy) / (1.0 + step * mag)
        px = (px + step * gx) / (1.0 + step * mag)
    return v - tau * _div(py, px)


def tv_objective(x, sinogram, geometry, lam):
    residual = forward_project(x, geometry) - sinogram
    return 0.5 * float((residual**2).sum()) + lam * tv_norm(x)


def tv_min_fista(sinogram, geometry, lam, max_iters, inner_iters=20,
                 snapshot_callback=None):
    """Minimize 0.5 ||A x - y||^2 + lam * TV_iso(x) by FISTA.

    Step size is 1/L with L = ||A||^2 from 30 power-iteration steps; the
    TV proximal step runs a fixed number of Chambolle dual iterations.
    """
    sinogram = check_sinogram(sinogram, geometry)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if max_iters < 1 or inner_iters < 1:
        raise ValueError("iteration counts must be >= 1")
    L = operator_norm(geometry) ** 2
    step = 1.0 / L
    x = np.zeros(geometry.image_shape())
    z = x.copy()
    t = 1.0
    for k in range(max_iters):
        grad = back_project(forward_project(z, geometry) - sinogram, geometry)
        x_new = prox_tv(z - step * grad, lam * step, n_iters=inner_iters)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t**2))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if snapshot_callback is not None:
            snapshot_callback(k + 1, x)
    return x
