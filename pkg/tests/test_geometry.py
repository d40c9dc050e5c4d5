import numpy as np
import pytest

from radloc import geometry
from radloc.errors import ContractError, DegenerateArrayError
from radloc.geometry import (
    HULL_EPS,
    SensorArray,
    barycentric,
    barycentric_many,
    closer_pair_exists,
    contains_open,
    count_closer,
    from_barycentric,
    halfspace_closer,
    halfspace_margin,
    random_array,
    sample_interior,
)


class TestSensorArray:
    def test_shapes(self, array1, array2, array3):
        assert (array1.dim, len(array1)) == (1, 2)
        assert (array2.dim, len(array2)) == (2, 3)
        assert (array3.dim, len(array3)) == (3, 4)

    def test_bare_pair_is_one_dimensional(self):
        a = SensorArray([0.0, 1.0])
        b = SensorArray([[0.0], [1.0]])
        assert a == b
        assert hash(a) == hash(b)

    def test_diameter(self, array2, array3):
        assert array2.diameter == pytest.approx(np.hypot(150, 200))
        assert array3.diameter == pytest.approx(200 * np.sqrt(2))

    def test_immutable(self, array2):
        with pytest.raises(ValueError):
            array2.sensors[0, 0] = 5.0

    @pytest.mark.parametrize(
        "sensors",
        [
            [[0, 0], [1, 1], [2, 2]],  # collinear
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]],  # coplanar
            [[3.0], [3.0]],  # coincident
        ],
    )
    def test_degenerate_rejected(self, sensors):
        with pytest.raises(DegenerateArrayError):
            SensorArray(sensors)

    @pytest.mark.parametrize(
        "sensors",
        [
            [[0, 0], [1, 0]],  # too few for R^2
            [[0, 0, 0, 0]] * 5,  # R^4
            [[0, 0], [1, 0], [0, np.nan]],
        ],
    )
    def test_bad_shapes_rejected(self, sensors):
        with pytest.raises(ContractError):
            SensorArray(sensors)


class TestBarycentric:
    def test_centroid(self, array2):
        w = barycentric(array2, [250 / 3, 200 / 3])
        np.testing.assert_allclose(w, [1 / 3, 1 / 3, 1 / 3], atol=1e-12)

    def test_reference_source_reconstructs(self, array2):
        w = barycentric(array2, [120, 40])
        assert np.all(w > 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(from_barycentric(array2, w), [120, 40], atol=1e-9)
        # by hand: 200 b + 50 c = 120, 200 c = 40
        np.testing.assert_allclose(w, [0.25, 0.55, 0.2], atol=1e-12)

    def test_vertices_are_unit_vectors(self, array3):
        for i, x in enumerate(array3.sensors):
            np.testing.assert_allclose(barycentric(array3, x), np.eye(4)[i], atol=1e-12)

    def test_many_matches_single(self, array3, rng):
        pts = rng.uniform(-50, 250, size=(20, 3))
        many = barycentric_many(array3, pts)
        for p, w in zip(pts, many):
            np.testing.assert_allclose(w, barycentric(array3, p), atol=1e-12)

    def test_dimension_mismatch(self, array2):
        with pytest.raises(ContractError):
            barycentric(array2, [1.0, 2.0, 3.0])


class TestContains:
    def test_interior_and_exterior(self, array1, array2):
        assert contains_open(array2, [120, 40])
        assert not contains_open(array2, [-1, 0])
        assert not contains_open(array2, [1e6, 1e6])
        assert contains_open(array1, [0.5])

    def test_boundary_is_excluded(self, array2):
        assert not contains_open(array2, [100, 0])  # on an edge
        assert not contains_open(array2, [0, 0])  # a vertex

    def test_margin_is_on_weights(self, array1):
        assert contains_open(array1, [2 * HULL_EPS])
        assert not contains_open(array1, [0.5 * HULL_EPS])


class TestSampleInterior:
    def test_always_inside(self, array3, rng):
        for _ in range(500):
            assert contains_open(array3, sample_interior(array3, rng))

    def test_flat_dirichlet_mean(self, array2, rng):
        pts = np.array([sample_interior(array2, rng) for _ in range(4000)])
        w = barycentric_many(array2, pts)
        # flat Dirichlet on 3 weights: each weight has mean 1/3 and variance 1/18
        np.testing.assert_allclose(w.mean(axis=0), 1 / 3, atol=4 * np.sqrt(1 / 18 / 4000))

    def test_deterministic(self, array2):
        a = sample_interior(array2, np.random.default_rng(3))
        b = sample_interior(array2, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)


class TestHalfspaces:
    def test_forms_agree(self, rng):
        for _ in range(200):
            y, ys, eta = rng.normal(size=(3, 2)) * 100
            quad, lin = halfspace_margin(y, ys, eta)
            assert quad == pytest.approx(lin, rel=1e-9, abs=1e-7)

    def test_bisector_included_only_when_non_strict(self):
        assert halfspace_closer([0, 0], [2, 0], [1, 5])
        assert not halfspace_closer([0, 0], [2, 0], [1, 5], strict=True)

    def test_equal_points_rejected(self):
        with pytest.raises(ContractError):
            halfspace_closer([1, 1], [1, 1], [0, 0])
        with pytest.raises(ContractError):
            closer_pair_exists(SensorArray([[0, 0], [1, 0], [0, 1]]), [0.2, 0.2], [0.2, 0.2])

    def test_count_closer(self, array2):
        # y near sensor 0, y* near sensor 1
        assert count_closer(array2, [20, 5], [180, 5]) >= 1
        assert count_closer(array2, [180, 5], [20, 5]) >= 1

    def test_one_dimensional_example(self, array1):
        # sensor 0 is closer to y, sensor 1 closer to y*
        assert count_closer(array1, [0.4], [0.5]) == 1
        assert closer_pair_exists(array1, [0.4], [0.5])

    def test_two_closer_sensors_is_not_guaranteed(self):
        # only one sensor is strictly closer to y, so "at least two closer
        # sensors" would be false here while a separating pair exists
        arr = SensorArray([[0, 0], [10, 0], [0, 10]])
        y_star, y = np.array([3.0, 3.0]), np.array([2.8, 2.8])
        assert count_closer(arr, y, y_star) == 1
        assert closer_pair_exists(arr, y, y_star)


def test_random_array_quality(rng):
    for dim in (1, 2, 3):
        arr = random_array(dim, rng)
        assert arr.dim == dim
        assert np.all((arr.sensors >= 0) & (arr.sensors <= 200))


def test_geometry_module_exports_eps():
    assert geometry.HULL_EPS == 1e-9
