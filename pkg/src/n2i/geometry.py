"""Parallel-beam acquisition geometry.

Conventions used throughout the package:

* Image pixels live on a regular grid covering ``[-1, 1]^2`` with
  ``pixel_size = 2 / image_size``.  Pixel ``(iy, ix)`` is centered at
  ``(-1 + (ix + 0.5) * pixel_size, -1 + (iy + 0.5) * pixel_size)``.
* The projection angle ``theta`` is measured from the x-axis.  The ray
  direction is ``(cos theta, sin theta)`` and the detector axis is the
  orthogonal ``(-sin theta, cos theta)``.  The detector coordinate of a
  point ``p`` is ``dot(p, detector_axis)``.
* Detector pixels are centered at ``(k - (detector_count - 1) / 2) *
  detector_pixel_size``; by default the detector spans the image
  diagonal ``2 * sqrt(2)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

IMAGE_EXTENT = 2.0  # side length of the reconstruction square [-1, 1]^2
DETECTOR_SPAN = 2.0 * math.sqrt(2.0)  # image diagonal


@dataclass(frozen=True)
class Geometry:
    """Immutable description of a parallel-beam acquisition."""

    n_angles: int
    angles: tuple
    arc: float
    detector_count: int
    detector_pixel_size: float
    image_size: int
    pixel_size: float

    def __post_init__(self):
        if self.n_angles < 1:
            raise ValueError(f"n_angles must be >= 1, got {self.n_angles}")
        if self.detector_count < 1:
            raise ValueError(f"detector_count must be >= 1, got {self.detector_count}")
        if self.image_size < 1:
            raise ValueError(f"image_size must be >= 1, got {self.image_size}")
        if len(self.angles) != self.n_angles:
            raise ValueError("angles length does not match n_angles")
        if not (0.0 < self.arc <= math.pi + 1e-12):
            raise ValueError(f"arc must be in (0, pi], got {self.arc}")
        angles = np.asarray(self.angles)
        if np.any(angles < -1e-12) or np.any(angles >= self.arc + 1e-12):
            raise ValueError("angles must lie in [0, arc)")
        if self.n_angles > 1:
            steps = np.diff(angles)
            if np.any(np.abs(steps - steps[0]) > 1e-12 * max(abs(steps[0]), 1.0)):
                raise ValueError("angles must be equally spaced")

    @property
    def angle_step(self):
        """Angular weight of one projection: arc / n_angles."""
        return self.arc / self.n_angles

    @property
    def detector_coords(self):
        """Detector pixel center coordinates, shape (detector_count,)."""
        k = np.arange(self.detector_count)
        return (k - (self.detector_count - 1) / 2.0) * self.detector_pixel_size

    def sinogram_shape(self):
        return (self.n_angles, self.detector_count)

    def image_shape(self):
        return (self.image_size, self.image_size)


def make_geometry(n_angles, detector_count, image_size, arc=math.pi):
    """Build an equally-spaced parallel-beam geometry.

    Angles are ``arc * j / n_angles`` for ``j = 0 .. n_angles - 1``.  The
    detector covers the image diagonal so that full-arc sampling sees the
    whole reconstruction square.
    """
    if n_angles < 1 or detector_count < 1 or image_size < 1:
        raise ValueError("counts must be positive")
    if not (0.0 < arc <= math.pi + 1e-12):
        raise ValueError(f"arc must be in (0, pi], got {arc}")
    angles = tuple(arc * j / n_angles for j in range(n_angles))
    return Geometry(
        n_angles=n_angles,
        angles=angles,
        arc=float(arc),
        detector_count=detector_count,
        detector_pixel_size=DETECTOR_SPAN / detector_count,
        image_size=image_size,
        pixel_size=IMAGE_EXTENT / image_size,
    )


def subset_geometry(geometry, angle_indices):
    """Geometry restricted to a subset of equally-spaced angle indices."""
    angles = tuple(geometry.angles[i] for i in angle_indices)
    return Geometry(
        n_angles=len(angles),
        angles=angles,
        arc=geometry.arc,
        detector_count=geometry.detector_count,
        detector_pixel_size=geometry.detector_pixel_size,
        image_size=geometry.image_size,
        pixel_size=geometry.pixel_size,
    )


def check_sinogram(sinogram, geometry):
    sinogram = np.asarray(sinogram)
    if sinogram.shape != geometry.sinogram_shape():
        raise ValueError(
            f"sinogram shape {sinogram.shape} does not match geometry "
            f"{geometry.sinogram_shape()}"
        )
    return sinogram


def check_image(image, geometry):
    image = np.asarray(image)
    if image.shape != geometry.image_shape():
        raise ValueError(
            f"image shape {image.shape} does not match geometry "
            f"{geometry.image_shape()}"
        )
    return image
