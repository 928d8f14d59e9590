"""Tests for the critical point solver and the critical algebra model."""

import numpy as np
import pytest
import sympy as sp

from critset.arrangement import (
    FiberPoint,
    WeightVector,
    discriminant_membership,
    euler_characteristic,
    is_unbalanced,
    load_family,
)
from critset.critical import (
    MasterContext,
    ParameterPath,
    SolverOptions,
    canonical_iso,
    canonical_iso_condition,
    canonical_key,
    check_relations,
    contravariant_value,
    finite_difference_hessian,
    hessian_matrix,
    identity_defect_matrix,
    marked_w_elements,
    master_gradient,
    master_hessian,
    relation_residual,
    residue_form,
    s_projection,
    solve_critical,
    special_vectors,
    specialization_vector,
    track_path,
)
from critset.errors import (
    ArrangementError,
    ConsistencyError,
    DegenerateError,
    DiscriminantError,
)

from .test_flags import FOUR_LINES


def _solve(fixture, **options):
    fam, a, x = fixture
    return solve_critical(MasterContext(fam, a, x), SolverOptions(**options))


def _rational(rng, low, high, den):
    return f"{rng.integers(low, high)}/{rng.integers(1, den)}"


def random_family(rng, k, n, complex_weights=False):
    """Family with small rational data, off the discriminant.

    Weights are positive, or nonzero Gaussian rationals with complex_weights.
    """
    while True:
        B = rng.integers(-3, 4, size=(k, n)).tolist()
        if complex_weights:
            a = [[_rational(rng, -5, 6, 4), _rational(rng, 1, 6, 4)] for _ in range(n)]
        else:
            a = [_rational(rng, 1, 6, 4) for _ in range(n)]
        x = [_rational(rng, -9, 10, 5) for _ in range(n)]
        try:
            fam, weights, point = load_family({"k": k, "n": n, "B": B, "a": a, "x": x})
        except ArrangementError:
            continue
        if discriminant_membership(fam, point).on:
            continue
        if complex_weights and not is_unbalanced(fam, weights).unbalanced:
            continue
        return fam, weights, point


class TestFixtures:
    def test_fix1(self, fix1):
        model = _solve(fix1)
        (point,) = model.points
        assert model.method == "companion"
        assert point.u[0] == pytest.approx(0.5)
        assert point.hessian == pytest.approx(-8)
        assert np.allclose(point.lagrangian_image, [2, -2])
        assert point.residual <= point.residual_tol

    def test_fix2(self, fix2):
        model = _solve(fix2)
        roots = sorted(p.u[0].real for p in model.points)
        assert roots == pytest.approx([1 - 1 / np.sqrt(3), 1 + 1 / np.sqrt(3)])
        assert model.count == abs(euler_characteristic(fix2[0])) == 2

    def test_fix3(self, fix3):
        model = _solve(fix3)
        (point,) = model.points
        assert model.method == "regions"
        assert np.allclose(point.u, [1 / 3, 1 / 3])
        assert point.hessian == pytest.approx(243)
        assert np.allclose(point.lagrangian_image, [3, 3, -3])

    def test_on_discriminant(self, fix3):
        fam, a, _ = fix3
        with pytest.raises(DiscriminantError, match=r"circuit \{1,2,3\}"):
            solve_critical(MasterContext(fam, a, FiberPoint((sp.Integer(0),) * 3)))

    def test_balanced_weight_is_rejected(self, fix1):
        fam, _, x = fix1
        a = WeightVector((sp.Integer(1), sp.Integer(-1)))
        with pytest.raises(ArrangementError, match="unbalanced"):
            solve_critical(MasterContext(fam, a, x))


class TestHessian:
    def test_matrix_determinant_matches(self, fix3):
        model = _solve(fix3)
        (point,) = model.points
        H = hessian_matrix(model.ctx, point.u)
        assert np.allclose(H, [[-18, -9], [-9, -18]])
        assert np.linalg.det(H) == pytest.approx(master_hessian(model.ctx, point.u))

    def test_finite_differences(self):
        model = _solve(load_family(FOUR_LINES))
        for point in model.points:
            numeric = finite_difference_hessian(model.ctx, point.u)
            assert abs(numeric - point.hessian) <= 1e-6 * abs(point.hessian)

    def test_finite_differences_near_a_hyperplane(self, fix3):
        ctx = MasterContext(*fix3)
        t = [1e-3, 0.4]
        exact = master_hessian(ctx, t)
        assert abs(finite_difference_hessian(ctx, t) - exact) <= 1e-6 * abs(exact)

    def test_master_function_value(self, fix1):
        model = _solve(fix1)
        # log(1/2) + log(-1/2) on the principal branch
        assert model.ctx.phi([0.5]) == pytest.approx(2 * np.log(0.5) + 1j * np.pi)

    def test_gradient_vanishes(self, fix3):
        model = _solve(fix3)
        grad, ratios = master_gradient(model.ctx, model.points[0].u)
        assert np.abs(grad).max() < 1e-12
        assert np.allclose(ratios, [3, 3, -3])


class TestRandomFamilies:
    @pytest.mark.parametrize("seed", range(60))
    def test_count_and_reality(self, seed):
        rng = np.random.default_rng(seed)
        k = 1 + seed % 3
        fam, a, x = random_family(rng, k, k + 1 + (seed // 3) % (5 if k < 3 else 3))
        model = solve_critical(MasterContext(fam, a, x))
        assert model.count == abs(euler_characteristic(fam))
        assert not model.undercount
        for point in model.points:
            assert np.abs(point.u.imag).max() <= 1e-10
            assert point.residual <= point.residual_tol

    @pytest.mark.parametrize("seed", range(40))
    def test_complex_weights_count(self, seed):
        rng = np.random.default_rng(1000 + seed)
        k = 2 + seed % 2
        fam, a, x = random_family(rng, k, k + 1 + (seed // 2) % 3, complex_weights=True)
        model = solve_critical(MasterContext(fam, a, x))
        assert model.count == abs(euler_characteristic(fam))
        assert not model.undercount
        for point in model.points:
            assert point.residual <= point.residual_tol

    def test_complex_weights_use_homotopy(self):
        document = dict(FOUR_LINES)
        document["a"] = [[1, 1], 2, [3, -1], "1/2"]
        fam, a, x = load_family(document)
        model = solve_critical(MasterContext(fam, a, x), SolverOptions(seed=7))
        assert model.method.startswith("homotopy")
        assert model.count == 3

    def test_weights_with_negative_real_parts(self):
        document = dict(FOUR_LINES)
        document["a"] = [[1, 1], [-2, 1], [3, 2], [1, 3]]
        fam, a, x = load_family(document)
        model = solve_critical(MasterContext(fam, a, x))
        assert model.method.startswith("homotopy")
        assert model.count == 3
        assert len({canonical_key(p.u) for p in model.points}) == 3

    def test_complex_fiber(self):
        document = dict(FOUR_LINES)
        document["a"] = [1, 2, 3, "1/2"]
        document["x"] = [0, [0, 1], -1, [-3, "1/2"]]
        fam, a, x = load_family(document)
        model = solve_critical(MasterContext(fam, a, x))
        assert model.method.startswith("homotopy")
        assert model.count == 3

    def test_seeded_runs_are_identical(self):
        document = dict(FOUR_LINES)
        document["a"] = [[1, 1], 2, [3, -1], "1/2"]
        fam, a, x = load_family(document)
        first = solve_critical(MasterContext(fam, a, x), SolverOptions(seed=7))
        second = solve_critical(MasterContext(fam, a, x), SolverOptions(seed=7))
        for p, q in zip(first.points, second.points):
            assert np.array_equal(p.u, q.u)


class TestHomotopy:
    def _path(self, ctx, target_weights):
        return ParameterPath(
            B=ctx.B,
            start_weights=ctx.weights,
            target_weights=np.asarray(target_weights, dtype=complex),
            start_shift=ctx.shift,
            target_shift=ctx.shift,
            gamma=complex(np.exp(0.4j * np.pi)),
        )

    def test_path_endpoints(self, fix3):
        ctx = MasterContext(*fix3)
        path = self._path(ctx, [1 + 1j, 2, 3])
        w0, x0, _, _ = path.at(0.0)
        w1, x1, _, _ = path.at(1.0)
        assert np.allclose(w0, [1, 1, 1])
        assert np.allclose(w1, [1 + 1j, 2, 3])
        assert np.allclose(x0, x1)

    def test_track_to_closed_form(self, fix3):
        # the triangle's critical point is (a_1, a_2) / (a_1 + a_2 + a_3)
        ctx = MasterContext(*fix3)
        path = self._path(ctx, [1 + 1j, 2, 3])
        end = track_path(path, np.array([1 / 3, 1 / 3], dtype=complex))
        assert end is not None
        assert np.allclose(end, np.array([1 + 1j, 2]) / (6 + 1j), atol=1e-8)

    def test_tangent_keeps_gradient_zero(self, fix3):
        ctx = MasterContext(*fix3)
        path = self._path(ctx, [1 + 1j, 2, 3])
        t = np.array([1 / 3, 1 / 3], dtype=complex)
        ds = 1e-6
        w, x, _, _ = path.at(ds)
        moved = t + ds * path.tangent(0.0, t)
        grad = ctx.B @ (w / (moved @ ctx.B + x))
        assert np.abs(grad).max() <= 1e-9


class TestContravariantIdentities:
    def setup_method(self):
        self.model = _solve(load_family(FOUR_LINES))
        self.F = [specialization_vector(self.model.ctx, p.u) for p in self.model.points]

    def test_norm_is_hessian(self):
        for point, F in zip(self.model.points, self.F):
            value = contravariant_value(self.model.ctx, F, F)
            assert value == pytest.approx(point.hessian, rel=1e-8)

    def test_orthogonality(self):
        for i in range(len(self.F)):
            for j in range(i + 1, len(self.F)):
                value = contravariant_value(self.model.ctx, self.F[i], self.F[j])
                assert abs(value) <= 1e-8 * np.linalg.norm(self.F[i]) * np.linalg.norm(self.F[j])

    def test_identity_composition(self):
        M = identity_defect_matrix(self.model)
        assert np.allclose(M, np.eye(3), atol=1e-8)

    def test_canonical_iso_of_projection(self):
        F = self.F[0]
        image = canonical_iso(self.model, s_projection(self.model, F))
        assert np.allclose(image, F)

    def test_condition_number(self):
        assert 1 <= canonical_iso_condition(self.model) < 1e8

    def test_special_vectors_shape(self):
        assert special_vectors(self.model).shape == (6, 3)


class TestResidueAndMarked:
    def test_fix1_residue(self, fix1):
        model = _solve(fix1)
        assert residue_form(model, [1], [1]) == pytest.approx(-1 / 8)

    def test_fix3_marked_w(self, fix3):
        model = _solve(fix3)
        w = marked_w_elements(model)
        assert np.allclose(w[(0, 1)], [9])
        assert np.allclose(w[(0, 2)], [-9])
        assert np.allclose(w[(1, 2)], [9])

    def test_degenerate_point_blocks_residues(self, fix1):
        model = _solve(fix1)
        model.points[0].nondegenerate = False
        with pytest.raises(DegenerateError):
            residue_form(model, [1], [1])

    def test_relation_residual(self, fix3):
        model = _solve(fix3)
        w = marked_w_elements(model, check=False)
        assert relation_residual(model.ctx.fam, w, 1) <= 1e-12
        w[(0, 1)] = np.array([10], dtype=complex)
        assert relation_residual(model.ctx.fam, w, 1) == pytest.approx(0.1)
        with pytest.raises(ConsistencyError, match="marked relation residual"):
            check_relations(model.ctx.fam, w, 1)
