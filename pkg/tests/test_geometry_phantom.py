import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from n2i.errors import CapacityError
from n2i.geometry import (DETECTOR_SPAN, Geometry, make_geometry,
                          subset_geometry)
from n2i.phantom import (FoamPhantom, analytic_sinogram, generate_foam,
                         load_phantom, rasterize, save_phantom)
import n2i.phantom as phantom_mod


class TestMakeGeometry:
    def test_four_angles_half_turn(self):
        geom = make_geometry(4, 32, 32, math.pi)
        assert np.allclose(geom.angles, [0, math.pi / 4, math.pi / 2,
                                         3 * math.pi / 4])

    def test_limited_arc_all_angles_below_sixty_degrees(self):
        geom = make_geometry(400, 600, 512, math.pi / 3)
        assert all(a < math.radians(60) for a in geom.angles)

    def test_single_angle_is_zero(self):
        geom = make_geometry(1, 8, 8, math.pi)
        assert geom.angles == (0.0,)

    def test_equal_spacing(self):
        geom = make_geometry(7, 16, 16, math.pi)
        steps = np.diff(geom.angles)
        assert np.allclose(steps, steps[0], rtol=1e-12)

    def test_detector_covers_diagonal(self):
        geom = make_geometry(8, 24, 16, math.pi)
        assert geom.detector_count * geom.detector_pixel_size == pytest.approx(
            DETECTOR_SPAN
        )

    @pytest.mark.parametrize("bad", [
        dict(n_angles=0, detector_count=8, image_size=8),
        dict(n_angles=4, detector_count=0, image_size=8),
        dict(n_angles=4, detector_count=8, image_size=0),
        dict(n_angles=4, detector_count=8, image_size=8, arc=0.0),
        dict(n_angles=4, detector_count=8, image_size=8, arc=4.0),
    ])
    def test_invalid_arguments(self, bad):
        with pytest.raises(ValueError):
            make_geometry(**bad)

    def test_unequal_spacing_rejected(self):
        with pytest.raises(ValueError):
            Geometry(n_angles=3, angles=(0.0, 0.1, 0.5), arc=math.pi,
                     detector_count=8, detector_pixel_size=0.1,
                     image_size=8, pixel_size=0.25)

    def test_subset_geometry_keeps_grid(self):
        geom = make_geometry(8, 24, 16, math.pi)
        sub = subset_geometry(geom, [0, 2, 4, 6])
        assert sub.n_angles == 4
        assert sub.angles == geom.angles[0::2]
        assert sub.pixel_size == geom.pixel_size


class TestGenerateFoam:
    def test_zero_bubbles_is_solid_disk(self):
        ph = generate_foam(0, (0.01, 0.05), cylinder_radius=0.9, seed=3)
        assert ph.n_bubbles == 0
        assert ph.cylinder_radius == 0.9

    def test_same_seed_identical(self):
        a = generate_foam(20, (0.02, 0.1), seed=7)
        b = generate_foam(20, (0.02, 0.1), seed=7)
        assert a == b

    def test_different_seed_differs(self):
        a = generate_foam(20, (0.02, 0.1), seed=7)
        b = generate_foam(20, (0.02, 0.1), seed=8)
        assert a != b

    def test_fifty_bubbles_pairwise_non_overlapping(self):
        ph = generate_foam(50, (0.01, 0.05), cylinder_radius=0.9, seed=0)
        assert ph.n_bubbles == 50
        bubbles = ph.bubbles
        # independent O(n^2) check of both invariants
        for i in range(len(bubbles)):
            xi, yi, ri = bubbles[i]
            assert math.hypot(xi, yi) + ri < 0.9
            for j in range(i + 1, len(bubbles)):
                xj, yj, rj = bubbles[j]
                assert math.hypot(xi - xj, yi - yj) > ri + rj

    def test_capacity_error_reports_placed_count(self, monkeypatch):
        monkeypatch.setattr(phantom_mod, "MAX_REJECTIONS", 2000)
        with pytest.raises(CapacityError) as err:
            generate_foam(10, (0.4, 0.4), cylinder_radius=0.9, seed=0)
        assert err.value.placed < 10

    def test_invalid_radius_range(self):
        with pytest.raises(ValueError):
            generate_foam(1, (0.0, 0.5), cylinder_radius=0.9)
        with pytest.raises(ValueError):
            generate_foam(1, (0.5, 0.95), cylinder_radius=0.9)

    def test_overlapping_bubbles_rejected_by_type(self):
        with pytest.raises(ValueError):
            FoamPhantom(cylinder_center=(0, 0), cylinder_radius=0.9,
                        bubbles=((0.0, 0.0, 0.2), (0.1, 0.0, 0.2)), seed=0)

    def test_bubble_outside_cylinder_rejected_by_type(self):
        with pytest.raises(ValueError):
            FoamPhantom(cylinder_center=(0, 0), cylinder_radius=0.5,
                        bubbles=((0.45, 0.0, 0.2),), seed=0)


def _solid_disk(radius=1.0):
    return FoamPhantom(cylinder_center=(0.0, 0.0), cylinder_radius=radius,
                       bubbles=(), seed=0)


def _numeric_line_integral(phantom, angle, s, n_steps=200000):
    """Independent dense-sampling oracle for one ray's line integral."""
    length = 2.0 * DETECTOR_SPAN
    t = (np.arange(n_steps) + 0.5) / n_steps * length - length / 2.0
    dx, dy = math.cos(angle), math.sin(angle)
    # ray passes through s * (-sin, cos) along (cos, sin)
    x = -s * math.sin(angle) + t * dx
    y = s * math.cos(angle) + t * dy
    cx, cy = phantom.cylinder_center
    inside = (x - cx) ** 2 + (y - cy) ** 2 < phantom.cylinder_radius**2
    values = inside.astype(float)
    for (bx, by, br) in phantom.bubbles:
        values[(x - bx) ** 2 + (y - by) ** 2 < br**2] = 0.0
    return values.sum() * (length / n_steps)


class TestAnalyticSinogram:
    def test_central_ray_through_unit_disk_is_diameter(self):
        # single detector pixel centered on the axis, no supersampling
        geom = make_geometry(1, 1, 8, math.pi)
        sino = analytic_sinogram(_solid_disk(1.0), geom, supersampling=1)
        assert sino[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_tangent_ray_is_zero(self):
        geom = make_geometry(4, 33, 16, math.pi)
        r = geom.detector_coords[-1]  # outermost ray
        sino = analytic_sinogram(_solid_disk(abs(r)), geom, supersampling=1)
        assert sino[0, -1] == pytest.approx(0.0, abs=1e-12)

    def test_matches_dense_sampling_oracle(self):
        ph = generate_foam(1, (0.2, 0.3), cylinder_radius=0.8, seed=5)
        geom = make_geometry(6, 17, 16, math.pi)
        sino = analytic_sinogram(ph, geom, supersampling=1)
        for ia in (0, 2, 5):
            for ir in (4, 8, 12):
                oracle = _numeric_line_integral(
                    ph, geom.angles[ia], geom.detector_coords[ir]
                )
                if oracle > 0.05:
                    assert sino[ia, ir] == pytest.approx(oracle, rel=1e-2)

    def test_linear_in_densities(self):
        ph = generate_foam(5, (0.05, 0.15), cylinder_radius=0.8, seed=2)
        geom = make_geometry(8, 24, 16, math.pi)
        whole = analytic_sinogram(ph, geom)
        cylinder = analytic_sinogram(_solid_disk(0.8), geom)
        holes = sum(
            analytic_sinogram(
                FoamPhantom((bx, by), br + 1e-12, (), 0), geom
            )
            for (bx, by, br) in ph.bubbles
        )
        assert np.allclose(whole, cylinder - holes, atol=1e-9)

    def test_nonnegative(self):
        ph = generate_foam(10, (0.02, 0.1), seed=4)
        geom = make_geometry(16, 32, 16, math.pi)
        assert analytic_sinogram(ph, geom).min() >= -1e-12

    def test_deterministic(self):
        ph = generate_foam(10, (0.02, 0.1), seed=4)
        geom = make_geometry(16, 32, 16, math.pi)
        a = analytic_sinogram(ph, geom)
        b = analytic_sinogram(ph, geom)
        assert np.array_equal(a, b)

    def test_supersampling_validates(self):
        geom = make_geometry(2, 4, 8, math.pi)
        with pytest.raises(ValueError):
            analytic_sinogram(_solid_disk(), geom, supersampling=0)


class TestRasterize:
    def test_vanishing_cylinder_gives_zero_image(self):
        ph = FoamPhantom((0.0, 0.0), 1e-9, (), 0)
        assert np.array_equal(rasterize(ph, 16), np.zeros((16, 16)))

    def test_covering_disk_interior_ones(self):
        img = rasterize(_solid_disk(10.0), 16)
        assert np.array_equal(img, np.ones((16, 16)))

    def test_boundary_pixel_fractional(self):
        img = rasterize(_solid_disk(0.5), 8)
        interior = img == 1.0
        exterior = img == 0.0
        boundary = ~interior & ~exterior
        assert boundary.any()
        assert np.all((img[boundary] > 0) & (img[boundary] < 1))

    def test_subpixel_count_is_sixteenths(self):
        img = rasterize(_solid_disk(0.5), 8, subsamples=4)
        assert np.allclose(img * 16, np.round(img * 16))


class TestPhantomSerialization:
    def test_round_trip(self, tmp_path):
        ph = generate_foam(12, (0.02, 0.1), seed=9)
        path = tmp_path / "foam.txt"
        save_phantom(ph, path)
        again = load_phantom(path)
        assert again == ph

    def test_rejects_file_without_cylinder(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0.0 0.0 0.1 0.0\n")
        with pytest.raises(ValueError):
            load_phantom(path)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1),
       n=st.integers(0, 12))
def test_generated_foam_always_satisfies_invariants(seed, n):
    ph = generate_foam(n, (0.02, 0.08), cylinder_radius=0.85, seed=seed)
    assert ph.n_bubbles == n
    for (cx, cy, r) in ph.bubbles:
        assert math.hypot(cx, cy) + r < 0.85
