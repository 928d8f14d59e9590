"""Tests for transport of flat sections."""

import numpy as np
import pytest
import sympy as sp

from critset.arrangement import FiberPoint
from critset.critical import MasterContext, solve_critical, specialization_vector
from critset.errors import DiscriminantError
from critset.transport import (
    RestrictedConnection,
    TransportTask,
    direction_drift,
    loop_flatness,
    mixed_partial_defect,
    rectangle_loop,
    segment_clearance,
    transport,
)


def _point(*values):
    return FiberPoint(tuple(sp.nsimplify(v) for v in values))


class TestFix1Transport:
    @pytest.mark.parametrize("kappa", [1, 2, 1 + 1j])
    def test_power_law(self, fix1, kappa):
        # f_C = z_1 - z_2 goes from 1 to 2 and Sing is the eigenline of L_C for 2
        fam, a, _ = fix1
        task = TransportTask(
            fam=fam,
            a=a,
            kappa=kappa,
            path=[np.array([0, -1]), np.array([1, -1])],
            initial=np.array([1.0 + 0j]),
        )
        result = transport(task)
        assert result.end[0] == pytest.approx(2 ** (2 / kappa), rel=1e-7)
        assert np.allclose(result.flag_vector, result.end[0] * np.array([1, -1]))
        assert result.error_estimate < 1e-6

    def test_zero_length_path(self, fix1):
        fam, a, _ = fix1
        start = np.array([0.5 - 0.25j])
        task = TransportTask(
            fam=fam, a=a, kappa=1, path=[np.array([0, -1]), np.array([0, -1])], initial=start
        )
        result = transport(task)
        assert np.array_equal(result.end, start)
        assert result.evaluations == 0

    def test_zero_kappa(self, fix1):
        fam, a, _ = fix1
        task = TransportTask(
            fam=fam, a=a, kappa=0, path=[np.array([0, -1]), np.array([1, -1])],
            initial=np.array([1.0]),
        )
        with pytest.raises(ValueError):
            transport(task)

    def test_path_through_discriminant(self, fix1):
        fam, a, _ = fix1
        task = TransportTask(
            fam=fam, a=a, kappa=1, path=[np.array([0, -1]), np.array([-2, -1])],
            initial=np.array([1.0]),
        )
        with pytest.raises(DiscriminantError, match="too close"):
            transport(task)

    def test_wrong_initial_size(self, fix1):
        fam, a, _ = fix1
        task = TransportTask(
            fam=fam, a=a, kappa=1, path=[np.array([0, -1]), np.array([1, -1])],
            initial=np.array([1.0, 0.0]),
        )
        with pytest.raises(ValueError):
            transport(task)


class TestSegmentClearance:
    def test_closest_approach(self, fix1):
        fam, _, _ = fix1
        value, members = segment_clearance(
            fam, np.array([0, -1], dtype=complex), np.array([-2, -1], dtype=complex)
        )
        assert value == pytest.approx(0)
        assert members == (0, 1)


class TestLoops:
    @pytest.mark.parametrize("kappa", [0.5, 1])
    def test_fix2_loop(self, fix2, kappa):
        fam, a, x = fix2
        task = TransportTask(
            fam=fam,
            a=a,
            kappa=kappa,
            path=rectangle_loop(x.numeric(), 0, 1, 0.1),
            initial=np.array([1.0, -0.5j]),
        )
        result = loop_flatness(task)
        assert result.defect <= 1e-6

    def test_fix3_loop(self, fix3):
        fam, a, x = fix3
        task = TransportTask(
            fam=fam,
            a=a,
            kappa=0.5,
            path=rectangle_loop(x.numeric(), 0, 2, 0.05),
            initial=np.array([1.0]),
        )
        assert loop_flatness(task).defect <= 1e-6

    def test_open_path_rejected(self, fix2):
        fam, a, x = fix2
        task = TransportTask(
            fam=fam, a=a, kappa=1, path=[x.numeric(), x.numeric() + 0.1],
            initial=np.array([1.0, 0.0]),
        )
        with pytest.raises(ValueError):
            loop_flatness(task)

    def test_rectangle(self):
        loop = rectangle_loop([0, 0, 0], 0, 2, 0.5)
        assert len(loop) == 5
        assert np.allclose(loop[2], [0.5, 0, 0.5])
        assert np.array_equal(loop[0], loop[-1])


class TestFlatness:
    @pytest.mark.parametrize("pair", [(0, 1), (0, 2), (1, 2)])
    def test_mixed_partials(self, fix2, pair):
        fam, a, x = fix2
        defect = mixed_partial_defect(
            fam, a, x.numeric(), np.array([1.0, 2.0 - 1j]), pair[0], pair[1], kappa=0.5
        )
        assert defect <= 1e-5

    def test_restricted_connection_eigenvalues(self, fix2):
        fam, a, x = fix2
        conn = RestrictedConnection(fam, a)
        model = solve_critical(MasterContext(fam, a, x))
        K = conn.k_matrix(x.numeric(), 0)
        for point in model.points:
            coords = conn.P @ specialization_vector(model.ctx, point.u)
            y = point.lagrangian_image[0]
            assert np.allclose(K @ coords, y * coords)


class TestAdiabaticLimit:
    def test_special_vector_follows_the_fiber(self, fix2):
        fam, a, x = fix2
        angle = direction_drift(fam, a, x, _point(0.05, -1, -2), kappa=1e-4)
        assert angle <= 1e-3
