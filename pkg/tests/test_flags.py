"""Tests for the Orlik-Solomon and flag complexes and the Sing subspace."""

import pytest
import sympy as sp

from critset import linalg
from critset.arrangement import WeightVector, euler_characteristic, load_family
from critset.errors import ArrangementError
from critset.flags import (
    FlagVector,
    aomoto_differential,
    contravariant_form,
    contravariant_gram,
    flag_differential,
    marked_flag_elements,
    orthogonal_projection,
    projection_matrix,
    singular_subspace,
    standard_basis,
)

FOUR_LINES = {
    "k": 2,
    "n": 4,
    "B": [[1, 0, 1, 1], [0, 1, 1, -1]],
    "a": [1, 2, 3, "1/2"],
    "x": [0, 0, -1, -3],
}


class TestStandardBasis:
    def test_fix3_top_degree(self, fix3):
        top = standard_basis(fix3[0], 2)
        assert top.subsets == ((0, 1), (0, 2), (1, 2))
        assert len(top) == 3

    def test_lookup_sorts_with_sign(self, fix3):
        top = standard_basis(fix3[0], 2)
        assert top.lookup((1, 0)) == (-1, 0)
        assert top.lookup((0, 2)) == (1, 1)
        assert top.lookup((1, 1)) == (0, None)

    def test_from_tuple(self, fix3):
        top = standard_basis(fix3[0], 2)
        vec = FlagVector.from_tuple(top, (2, 0))
        assert vec.as_dict() == {(0, 2): -1}
        assert vec.to_vector(top) == sp.Matrix([0, -1, 0])


class TestDifferentials:
    def test_fix3_aomoto_top(self, fix3):
        fam, a, _ = fix3
        D = aomoto_differential(fam, a, 2)
        assert D == sp.Matrix([[1, -1, 0], [1, 0, -1], [0, 1, -1]])

    def test_complex_squares_to_zero(self):
        fam, a, _ = load_family(FOUR_LINES)
        D1 = aomoto_differential(fam, a, 1)
        D2 = aomoto_differential(fam, a, 2)
        assert linalg.is_zero_matrix(D2 * D1)
        d0 = flag_differential(fam, 0)
        d1 = flag_differential(fam, 1)
        assert linalg.is_zero_matrix(d1 * d0)

    def test_flag_differential_is_unweighted(self, fix3):
        fam, _, _ = fix3
        ones = WeightVector((sp.Integer(1),) * 3)
        assert flag_differential(fam, 1) == aomoto_differential(fam, ones, 2)

    def test_degree_out_of_range(self, fix3):
        fam, a, _ = fix3
        with pytest.raises(ArrangementError):
            aomoto_differential(fam, a, 0)
        with pytest.raises(ArrangementError):
            flag_differential(fam, 2)


class TestContravariantForm:
    def test_gram_is_diagonal_product(self, fix3):
        fam, _, _ = fix3
        a = WeightVector((sp.Integer(2), sp.Integer(3), sp.Integer(5)))
        assert contravariant_gram(fam, a, 2) == sp.diag(6, 10, 15)

    def test_form_value(self, fix3):
        fam, _, _ = fix3
        a = WeightVector((sp.Integer(2), sp.Integer(3), sp.Integer(5)))
        u = sp.Matrix([1, 0, 1])
        v = sp.Matrix([1, 1, 2])
        assert contravariant_form(fam, a, u, v) == 6 + 30


class TestSingularSubspace:
    def test_fix1(self, fix1):
        fam, a, _ = fix1
        sing = singular_subspace(fam, a)
        assert sing.W == sp.Matrix([1, -1])
        assert sing.gram == sp.Matrix([[2]])

    def test_fix3(self, fix3):
        fam, a, _ = fix3
        sing = singular_subspace(fam, a)
        assert sing.dim == 1
        (vec,) = sing.basis(fam)
        assert vec.as_dict() == {(0, 1): 1, (0, 2): -1, (1, 2): 1}

    def test_dimension_is_euler_characteristic(self):
        fam, a, _ = load_family(FOUR_LINES)
        assert singular_subspace(fam, a).dim == abs(euler_characteristic(fam))

    def test_annihilates_image(self):
        fam, a, _ = load_family(FOUR_LINES)
        sing = singular_subspace(fam, a)
        D = aomoto_differential(fam, a, fam.k)
        assert linalg.is_zero_matrix(D.T * sing.W)

    def test_gaussian_weights(self, fix3):
        fam, _, _ = fix3
        a = WeightVector((sp.Integer(1), sp.I, sp.Integer(2)))
        assert singular_subspace(fam, a).dim == 1


class TestProjection:
    def test_idempotent(self):
        fam, a, _ = load_family(FOUR_LINES)
        P = sp.Matrix(projection_matrix(fam, a))
        assert linalg.is_zero_matrix(linalg.matmul(P, P) - P)

    def test_fixes_sing(self):
        fam, a, _ = load_family(FOUR_LINES)
        sing = singular_subspace(fam, a)
        P = sp.Matrix(projection_matrix(fam, a))
        assert linalg.is_zero_matrix(linalg.matmul(P, sing.W) - sing.W)

    def test_kernel_is_orthogonal(self):
        fam, a, _ = load_family(FOUR_LINES)
        sing = singular_subspace(fam, a)
        top = standard_basis(fam, fam.k)
        F = FlagVector.from_tuple(top, (0, 1))
        rest = F.to_vector(top) - orthogonal_projection(fam, a, F).to_vector(top)
        assert linalg.is_zero_matrix(linalg.matmul(sing.W.T, sing.ambient, rest))

    def test_fix3_marked_elements(self, fix3):
        fam, a, _ = fix3
        marked = marked_flag_elements(fam, a)
        third = sp.Rational(1, 3)
        assert marked[(0, 1)].as_dict() == {(0, 1): third, (0, 2): -third, (1, 2): third}
        assert marked[(0, 2)].as_dict() == {(0, 1): -third, (0, 2): third, (1, 2): -third}

    def test_marked_relations_hold_on_four_lines(self):
        fam, a, _ = load_family(FOUR_LINES)
        marked = marked_flag_elements(fam, a)
        assert set(marked) == set(standard_basis(fam, fam.k).subsets)
