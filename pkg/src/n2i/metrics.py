"""PSNR and SSIM against a clean reference, with masked evaluation.

The data range is taken from the clean reference; evaluation can be
restricted to the convex hull of the thresholded object so background
quality carries no weight.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

PSNR_INFINITE = float("inf")
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    data_range: tuple
    mask_descriptor: str

    def __post_init__(self):
        lo, hi = self.data_range
        if not hi > lo:
            raise ValueError("degenerate data range")


def data_range(clean_image, mask=None):
    """(min, max) of the clean reference, optionally restricted to a mask."""
    clean_image = np.asarray(clean_image)
    if clean_image.size == 0:
        raise ValueError("empty image")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("empty mask")
        clean_image = clean_image[mask]
    return float(clean_image.min()), float(clean_image.max())


def _convex_hull(points):
    """Monotone-chain convex hull; points is an (n, 2) integer array."""
    pts = sorted(map(tuple, points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def object_mask(clean_image, threshold_fraction=0.1):
    """Convex hull (as a boolean mask) of the thresholded foreground."""
    if not (0.0 < threshold_fraction < 1.0):
        raise ValueError("threshold_fraction must be in (0, 1)")
    clean_image = np.asarray(clean_image)
    lo, hi = data_range(clean_image)
    if hi == lo:
        raise ValueError("constant image has no foreground")
    fg = clean_image > lo + threshold_fraction * (hi - lo)
    if not fg.any():
        raise ValueError("empty foreground after thresholding")
    ys, xs = np.nonzero(fg)
    hull = _convex_hull(np.column_stack([xs, ys]))
    h, w = clean_image.shape
    gx, gy = np.meshgrid(np.arange(w), np.arange(h))
    mask = np.ones((h, w), dtype=bool)
    n = len(hull)
    if n <= 2:
        mask = np.zeros((h, w), dtype=bool)
        for (x, y) in hull:
            mask[y, x] = True
        if n == 2:  # rasterize the segment's bounding box
            (x0, y0), (x1, y1) = hull
            mask[min(y0, y1):max(y0, y1) + 1, min(x0, x1):max(x0, x1) + 1] = True
        return mask
    for k in range(n):
        x0, y0 = hull[k]
        x1, y1 = hull[(k + 1) % n]
        # hull is counter-clockwise; keep pixels on the left of each edge
        side = (x1 - x0) * (gy - y0) - (y1 - y0) * (gx - x0)
        mask &= side >= 0
    return mask


def psnr(image, reference, drange=None, mask=None):
    """10 log10(range^2 / MSE) over the (optionally masked) pixels."""
    image = np.asarray(image, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if image.shape != reference.shape:
        raise ValueError("image and reference shapes differ")
    if drange is None:
        drange = data_range(reference, mask)
    lo, hi = drange
    if not hi > lo:
        raise ValueError("degenerate data range")
    diff = image - reference
    if mask is not None:
        diff = diff[np.asarray(mask, dtype=bool)]
    mse = float((diff**2).mean())
    if mse == 0.0:
        return PSNR_INFINITE
    return 10.0 * np.log10((hi - lo) ** 2 / mse)


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _window_means(image, window):
    half = window.shape[0] // 2
    full = ndimage.correlate(image, window, mode="constant", cval=0.0)
    return full[half:-half, half:-half]


def ssim(image, reference, drange=None, mask=None):
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5).

    Local statistics are evaluated where the window fits entirely inside
    the image; the mean is restricted to the mask where one is given.
    """
    image = np.asarray(image, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if image.shape != reference.shape:
        raise ValueError("image and reference shapes differ")
    if min(image.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side")
    if drange is None:
        drange = data_range(reference, mask)
    lo, hi = drange
    if not hi > lo:
        raise ValueError("degenerate data range")
    L = hi - lo
    c1 = (0.01 * L) ** 2
    c2 = (0.03 * L) ** 2

    w = _gaussian_window()
    mu_x = _window_means(image, w)
    mu_y = _window_means(reference, w)
    xx = _window_means(image * image, w) - mu_x**2
    yy = _window_means(reference * reference, w) - mu_y**2
    xy = _window_means(image * reference, w) - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * xy + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    )
    if mask is not None:
        half = SSIM_WINDOW // 2
        inner = np.asarray(mask, dtype=bool)[half:-half, half:-half]
        if not inner.any():
            raise ValueError("mask leaves no full SSIM windows")
        return float(ssim_map[inner].mean())
    return float(ssim_map.mean())


def evaluate(image, clean_reference, threshold_fraction=0.1):
    """Masked PSNR/SSIM report against the clean reference."""
    mask = object_mask(clean_reference, threshold_fraction)
    drange = data_range(clean_reference)
    return MetricReport(
        psnr=psnr(image, clean_reference, drange, mask),
        ssim=ssim(image, clean_reference, drange, mask),
        data_range=drange,
        mask_descriptor=f"convex-hull(threshold={threshold_fraction})",
    )


def write_metric_rows(path, rows, header):
    """Append-free CSV writer for metric rows (deterministic formatting)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.10g}"
    return value
