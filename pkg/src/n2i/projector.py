"""Joseph-kernel discrete forward projector and its exact adjoint.

The ray for (angle ``a``, detector coordinate ``s``) is driven along its
dominant axis; at each crossed pixel line the image is linearly
interpolated along the other axis, and samples are weighted by the step
length ``pixel_size / max(|cos a|, |sin a|)``.  The backprojector applies
the transposed weights, so the pair is an exact matrix adjoint.
"""

import numpy as np

from .geometry import check_image, check_sinogram


def _joseph_terms(geometry, angle):
    """Interpolation structure of one projection angle.

    Returns ``(axis, idx0, w1, dl)`` where ``axis`` is 0 when the ray is
    driven along x (interpolating across rows) and 1 when driven along y.
    ``idx0`` and ``w1`` have shape (detector_count, image_size): for driving
    position k and detector pixel r, the ray hits the cross-axis coordinate
    ``idx0 + w1`` (in pixel index units; may fall outside the grid).
    """
    n = geometry.image_size
    px = geometry.pixel_size
    s = geometry.detector_coords[:, None]  # (R, 1)
    centers = -1.0 + (np.arange(n)[None, :] + 0.5) * px  # (1, n)
    cos, sin = np.cos(angle), np.sin(angle)
    if abs(cos) >= abs(sin):
        # Drive along x; line: -x sin + y cos = s  =>  y = (s + x sin) / cos
        y = (s + centers * sin) / cos
        u = (y + 1.0) / px - 0.5
        dl = px / abs(cos)
        axis = 0
    else:
        # Drive along y; x = (y cos - s) / sin
        x = (centers * cos - s) / sin
        u = (x + 1.0) / px - 0.5
        dl = px / abs(sin)
        axis = 1
    idx0 = np.floor(u)
    w1 = u - idx0
    return axis, idx0.astype(np.int64), w1, dl


def forward_project(image, geometry):
    """Apply the discrete Radon transform A. Linear in the image."""
    image = check_image(image, geometry)
    n = geometry.image_size
    sino = np.zeros(geometry.sinogram_shape())
    for ia, angle in enumerate(geometry.angles):
        axis, idx0, w1, dl = _joseph_terms(geometry, angle)
        v0 = np.clip(idx0, 0, n - 1)
        v1 = np.clip(idx0 + 1, 0, n - 1)
        m0 = (idx0 >= 0) & (idx0 <= n - 1)
        m1 = (idx0 + 1 >= 0) & (idx0 + 1 <= n - 1)
        cols = np.broadcast_to(np.arange(n)[None, :], idx0.shape)
        if axis == 0:
            a0 = image[v0, cols]
            a1 = image[v1, cols]
        else:
            a0 = image[cols, v0]
            a1 = image[cols, v1]
        vals = (1.0 - w1) * a0 * m0 + w1 * a1 * m1
        sino[ia] = dl * vals.sum(axis=1)
    return sino


def back_project(sinogram, geometry):
    """Apply the exact adjoint A^T of :func:`forward_project`."""
    sinogram = check_sinogram(sinogram, geometry)
    n = geometry.image_size
    image = np.zeros(n * n)
    cols = np.arange(n)[None, :]
    for ia, angle in enumerate(geometry.angles):
        axis, idx0, w1, dl = _joseph_terms(geometry, angle)
        v0 = np.clip(idx0, 0, n - 1)
        v1 = np.clip(idx0 + 1, 0, n - 1)
        m0 = (idx0 >= 0) & (idx0 <= n - 1)
        m1 = (idx0 + 1 >= 0) & (idx0 + 1 <= n - 1)
        ray = dl * sinogram[ia][:, None]  # (R, 1)
        if axis == 0:
            flat0 = v0 * n + cols
            flat1 = v1 * n + cols
        else:
            flat0 = cols * n + v0
            flat1 = cols * n + v1
        np.add.at(image, flat0.ravel(), ((1.0 - w1) * ray * m0).ravel())
        np.add.at(image, flat1.ravel(), (w1 * ray * m1).ravel())
    return image.reshape(n, n)


def operator_norm(geometry, n_iters=30, seed=0):
    """Largest singular value of A, estimated by power iteration on A^T A."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(geometry.image_shape())
    x /= np.linalg.norm(x)
    sigma2 = 0.0
    for _ in range(n_iters):
        y = back_project(forward_project(x, geometry), geometry)
        sigma2 = np.linalg.norm(y)
        x = y / sigma2
    return float(np.sqrt(sigma2))
