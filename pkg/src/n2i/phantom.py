"""Analytic foam phantoms: a unit-density cylinder with vacuum bubbles.

The phantom is a set of disks in ``[-1, 1]^2``, so every line integral has
a closed form: the chord length through the cylinder minus the chord
lengths through the bubbles it punches out.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .geometry import check_sinogram  # noqa: F401  (re-export convenience)

MAX_REJECTIONS = 10**6


@dataclass(frozen=True)
class FoamPhantom:
    """Cylinder (density 1) minus non-overlapping bubbles (density 0)."""

    cylinder_center: tuple
    cylinder_radius: float
    bubbles: tuple  # of (cx, cy, r)
    seed: int

    def __post_init__(self):
        cx0, cy0 = self.cylinder_center
        for (cx, cy, r) in self.bubbles:
            dist = np.hypot(cx - cx0, cy - cy0)
            if dist + r >= self.cylinder_radius:
                raise ValueError("bubble not strictly inside the cylinder")
        for i, (xi, yi, ri) in enumerate(self.bubbles):
            for (xj, yj, rj) in self.bubbles[i + 1:]:
                if np.hypot(xi - xj, yi - yj) <= ri + rj:
                    raise ValueError("bubbles overlap")

    @property
    def n_bubbles(self):
        return len(self.bubbles)


def generate_foam(n_bubbles, radius_range, cylinder_radius=0.9, seed=0):
    """Place ``n_bubbles`` non-overlapping bubbles by rejection sampling.

    Deterministic for a fixed seed.  Raises :class:`CapacityError` after
    ``MAX_REJECTIONS`` failed placement attempts.
    """
    r_lo, r_hi = radius_range
    if not (0.0 < r_lo <= r_hi < cylinder_radius):
        raise ValueError("radius_range must satisfy 0 < lo <= hi < cylinder_radius")
    if n_bubbles < 0:
        raise ValueError("n_bubbles must be >= 0")

    rng = np.random.default_rng(seed)
    placed = []
    rejections = 0
    while len(placed) < n_bubbles:
        r = rng.uniform(r_lo, r_hi)
        # Uniform position over the disk where the bubble still fits.
        rho = (cylinder_radius - r) * np.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * np.pi)
        cx, cy = rho * np.cos(phi), rho * np.sin(phi)
        ok = all(
            np.hypot(cx - px, cy - py) > r + pr for (px, py, pr) in placed
        )
        if ok:
            placed.append((float(cx), float(cy), float(r)))
        else:
            rejections += 1
            if rejections >= MAX_REJECTIONS:
                raise CapacityError(len(placed), n_bubbles, rejections)
    return FoamPhantom(
        cylinder_center=(0.0, 0.0),
        cylinder_radius=float(cylinder_radius),
        bubbles=tuple(placed),
        seed=int(seed),
    )


def _disk_chords(centers, radii, angles, det_coords):
    """Chord lengths of lines through a batch of disks.

    centers: (D, 2), radii: (D,), angles: (A,), det_coords: (R,).
    Returns (D, A, R) chord lengths; the line for (angle, s) is the set of
    points with ``dot(p, (-sin a, cos a)) == s``.
    """
    sin = np.sin(angles)[None, :]  # (1, A)
    cos = np.cos(angles)[None, :]
    # Detector coordinate of each disk center, per angle: (D, A)
    c_det = -centers[:, 0:1] * sin + centers[:, 1:2] * cos
    # Signed distance of each line to each center: (D, A, R)
    d = c_det[:, :, None] - det_coords[None, None, :]
    h2 = radii[:, None, None] ** 2 - d**2
    return 2.0 * np.sqrt(np.maximum(h2, 0.0))


def analytic_sinogram(phantom, geometry, supersampling=4):
    """Exact line integrals averaged over supersampled rays per detector pixel.

    Each detector value is the mean over ``supersampling`` parallel rays
    offset by ``(k + 0.5) / s - 0.5`` detector pixels.
    """
    if supersampling < 1:
        raise ValueError("supersampling must be >= 1")
    s = int(supersampling)
    base = geometry.detector_coords
    offsets = ((np.arange(s) + 0.5) / s - 0.5) * geometry.detector_pixel_size
    rays = (base[:, None] + offsets[None, :]).ravel()  # (R*s,)

    angles = np.asarray(geometry.angles)
    centers = np.array(
        [phantom.cylinder_center] + [(bx, by) for (bx, by, _) in phantom.bubbles]
    )
    radii = np.array(
        [phantom.cylinder_radius] + [r for (_, _, r) in phantom.bubbles]
    )
    densities = np.array([1.0] + [-1.0] * phantom.n_bubbles)

    sino = np.zeros((geometry.n_angles, rays.size))
    # Chunk over disks to bound memory on large phantoms.
    chunk = max(1, int(4e6 / max(1, geometry.n_angles * rays.size)))
    for lo in range(0, len(radii), chunk):
        hi = lo + chunk
        chords = _disk_chords(centers[lo:hi], radii[lo:hi], angles, rays)
        sino += np.tensordot(densities[lo:hi], chords, axes=(0, 0))
    return sino.reshape(geometry.n_angles, geometry.detector_count, s).mean(axis=2)


def rasterize(phantom, image_size, subsamples=4):
    """Area-fraction image of the phantom on an ``image_size``-square grid.

    Each pixel is the mean of ``subsamples x subsamples`` analytic
    membership evaluations.
    """
    if image_size < 1:
        raise ValueError("image_size must be >= 1")
    n = image_size * subsamples
    step = 2.0 / n
    coords = -1.0 + (np.arange(n) + 0.5) * step
    xx, yy = np.meshgrid(coords, coords)

    cx0, cy0 = phantom.cylinder_center
    inside = (xx - cx0) ** 2 + (yy - cy0) ** 2 < phantom.cylinder_radius**2
    values = inside.astype(float)
    for (bx, by, br) in phantom.bubbles:
        values[(xx - bx) ** 2 + (yy - by) ** 2 < br**2] = 0.0
    return values.reshape(image_size, subsamples, image_size, subsamples).mean(
        axis=(1, 3)
    )


def save_phantom(phantom, path):
    """Write the phantom as one disk per line: cx cy r density."""
    with open(path, "w") as fh:
        fh.write(f"# foam phantom seed={phantom.seed}\n")
        cx, cy = phantom.cylinder_center
        fh.write(f"{cx!r} {cy!r} {phantom.cylinder_radius!r} 1.0\n")
        for (bx, by, br) in phantom.bubbles:
            fh.write(f"{bx!r} {by!r} {br!r} 0.0\n")


def load_phantom(path):
    seed = 0
    disks = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "seed=" in line:
                    seed = int(line.split("seed=")[1])
                continue
            cx, cy, r, density = (float(tok) for tok in line.split())
            disks.append((cx, cy, r, density))
    if not disks or disks[0][3] != 1.0:
        raise ValueError("phantom file must start with the density-1 cylinder")
    cyl = disks[0]
    bubbles = tuple((cx, cy, r) for (cx, cy, r, _) in disks[1:])
    return FoamPhantom(
        cylinder_center=(cyl[0], cyl[1]),
        cylinder_radius=cyl[2],
        bubbles=bubbles,
        seed=seed,
    )
