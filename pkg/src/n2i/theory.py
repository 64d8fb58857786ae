"""Monte-Carlo verification of the expected-prediction-error decomposition
and of the mean-zero noise condition, on small problem instances.

For a fixed map h, a 2-way angular split, and measurement noise that is
mean-zero conditional on the data,

    E ||h(x_in) - x_target||^2
        = E ||h(x_in) - x_clean_target||^2 + E ||x_clean_target - x_target||^2,

where x_target / x_in are the sub-reconstructions of the noisy data and
x_clean_target is the sub-reconstruction of the clean data.  The checks
estimate all three terms by sampling and compare against the combined
standard error of the per-sample residual.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import make_geometry
from .phantom import analytic_sinogram, generate_foam
from .recon import sub_reconstruct


@dataclass(frozen=True)
class TinyProblem:
    """A small 2-way-split instance with precomputed linear operators.

    ``recon_mats[j]`` applies the sub-reconstruction for target section
    j+1 to a full flattened sinogram (rows outside the section ignored).
    """

    geometry: object
    clean_sinograms: np.ndarray  # (F, n_angles, det)
    recon_mats: tuple  # (K) matrices, each (n_pixels, m)
    sigma: float
    K: int = 2


def make_tiny_problem(image_size=16, n_angles=32, detector_count=24,
                      sigma=0.5, n_phantoms=4, n_bubbles=6, seed=0):
    """Build the tiny verification instance with a small phantom family."""
    if n_angles > 64 or image_size > 16:
        raise ValueError("tiny problem must stay tiny")
    geom = make_geometry(n_angles, detector_count, image_size)
    K = 2
    sinos = []
    for f in range(n_phantoms):
        ph = generate_foam(n_bubbles, (0.05, 0.2), cylinder_radius=0.85,
                           seed=seed * 1000 + f)
        sinos.append(analytic_sinogram(ph, geom, supersampling=2))
    clean = np.stack(sinos)

    m = n_angles * detector_count
    n_pix = image_size * image_size
    mats = []
    for j in range(1, K + 1):
        mat = np.zeros((n_pix, m))
        basis = np.zeros(geom.sinogram_shape())
        for row in range(j - 1, n_angles, K):
            for col in range(detector_count):
                basis[row, col] = 1.0
                mat[:, row * detector_count + col] = sub_reconstruct(
                    basis, geom, K, j
                ).ravel()
                basis[row, col] = 0.0
        mats.append(mat)
    return TinyProblem(
        geometry=geom,
        clean_sinograms=clean,
        recon_mats=tuple(mats),
        sigma=float(sigma),
        K=K,
    )


def make_fixed_map(kind, n_pixels, seed=0, scale=0.05):
    """Deterministic test maps: zero, identity, or a fixed random linear map."""
    if kind == "zero":
        return lambda x: np.zeros_like(x)
    if kind == "identity":
        return lambda x: x
    if kind == "random-linear":
        rng = np.random.default_rng(seed)
        M = scale * rng.standard_normal((n_pixels, n_pixels))
        return lambda x: x @ M.T
    raise ValueError(f"unknown map kind {kind!r}")


@dataclass(frozen=True)
class DecompositionReport:
    lhs: float
    lhs_se: float
    term_supervised: float
    term_supervised_se: float
    term_noise_var: float
    term_noise_var_se: float
    residual: float
    residual_se: float
    n_samples: int

    def holds(self, n_se=4.0):
        return abs(self.residual) < n_se * self.residual_se

    def rows(self):
        return [
            ("lhs", self.lhs, self.lhs_se),
            ("term_supervised", self.term_supervised, self.term_supervised_se),
            ("term_noise_var", self.term_noise_var, self.term_noise_var_se),
            ("residual", self.residual, self.residual_se),
        ]


def prop1_check(problem, fixed_map_h, n_samples, seed=0, sigma=None):
    """Estimate both sides of the decomposition by Monte-Carlo.

    Each draw samples a phantom from the family, Gaussian sinogram noise
    (exactly mean-zero), and a target section J uniform over the 2-way
    partition.  Returns per-term estimates with standard errors.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    sigma = problem.sigma if sigma is None else sigma
    rng = np.random.default_rng(seed)
    geom = problem.geometry
    m = geom.n_angles * geom.detector_count
    F = problem.clean_sinograms.shape[0]

    clean_flat = problem.clean_sinograms.reshape(F, m)
    # Clean sub-reconstructions per phantom and section: (K, F, n_pix)
    clean_subs = np.stack([
        clean_flat @ mat.T for mat in problem.recon_mats
    ])

    f_idx = rng.integers(0, F, size=n_samples)
    j_idx = rng.integers(0, problem.K, size=n_samples)  # target section - 1
    lhs = np.empty(n_samples)
    t_sup = np.empty(n_samples)
    t_var = np.empty(n_samples)

    chunk = 2000
    for lo in range(0, n_samples, chunk):
        hi = min(lo + chunk, n_samples)
        nb = hi - lo
        eps = sigma * rng.standard_normal((nb, m))
        noise_subs = np.stack([eps @ mat.T for mat in problem.recon_mats])
        fi = f_idx[lo:hi]
        ji = j_idx[lo:hi]
        rows = np.arange(nb)
        # target section ji, input section is the other one (K = 2)
        x_tgt_clean = clean_subs[ji, fi]
        x_tgt = x_tgt_clean + noise_subs[ji, rows]
        x_in = clean_subs[1 - ji, fi] + noise_subs[1 - ji, rows]
        h_out = fixed_map_h(x_in)
        lhs[lo:hi] = ((h_out - x_tgt) ** 2).sum(axis=1)
        t_sup[lo:hi] = ((h_out - x_tgt_clean) ** 2).sum(axis=1)
        t_var[lo:hi] = ((x_tgt_clean - x_tgt) ** 2).sum(axis=1)

    res = lhs - t_sup - t_var
    sqn = np.sqrt(n_samples)
    return DecompositionReport(
        lhs=float(lhs.mean()),
        lhs_se=float(lhs.std(ddof=1) / sqn),
        term_supervised=float(t_sup.mean()),
        term_supervised_se=float(t_sup.std(ddof=1) / sqn),
        term_noise_var=float(t_var.mean()),
        term_noise_var_se=float(t_var.std(ddof=1) / sqn),
        residual=float(res.mean()),
        residual_se=float(res.std(ddof=1) / sqn),
        n_samples=n_samples,
    )


def analytic_noise_variance(problem, sigma=None):
    """Exact E ||R_J eps_J||^2 averaged over J for Gaussian noise.

    Equals sigma^2 times the mean squared Frobenius norm of the
    sub-reconstruction operators; cross-checks the Monte-Carlo noise term.
    """
    sigma = problem.sigma if sigma is None else sigma
    fro2 = [float((mat**2).sum()) for mat in problem.recon_mats]
    return sigma**2 * sum(fro2) / len(fro2)


@dataclass(frozen=True)
class BiasSummary:
    max_abs_bias: float
    exceedance_fraction: float
    mean_abs_bias: float
    mean_bias: float
    mean_bias_se: float
    n_samples: int


def zero_mean_check(noise_model, sinogram, n_samples, seed=0):
    """Empirical per-pixel bias of the noise model around the clean data.

    Reports the largest absolute per-pixel bias, the fraction of pixels
    whose bias exceeds four standard errors, and the spatially averaged
    bias with its Monte-Carlo standard error.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    sinogram = np.asarray(sinogram, dtype=float)
    total = np.zeros_like(sinogram)
    total_sq = np.zeros_like(sinogram)
    sample_means = np.empty(n_samples)
    for s in range(n_samples):
        noisy = noise_model.apply(sinogram, seed=seed * 100003 + s)
        delta = noisy - sinogram
        total += delta
        total_sq += delta**2
        sample_means[s] = delta.mean()
    bias = total / n_samples
    var = total_sq / n_samples - bias**2
    se = np.sqrt(np.maximum(var, 1e-300) / n_samples)
    exceed = np.abs(bias) > 4.0 * se
    return BiasSummary(
        max_abs_bias=float(np.abs(bias).max()),
        exceedance_fraction=float(exceed.mean()),
        mean_abs_bias=float(np.abs(bias).mean()),
        mean_bias=float(sample_means.mean()),
        mean_bias_se=float(sample_means.std(ddof=1) / np.sqrt(n_samples)),
        n_samples=n_samples,
    )
