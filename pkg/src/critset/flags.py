"""Orlik-Solomon forms and flag vectors of a normal-crossings fiber.

For a fiber off the discriminant the standard basis of OS^p and of its dual
F^p is the list of independent p-subsets in lexicographic order. Tuples are
stored increasing; an unsorted tuple is brought to that form with the sign
of the sorting permutation, and a dependent or repeated tuple is zero.

The Aomoto differential multiplies on the right by omega = sum_j a_j (H_j):
(H_S) goes to sum_j a_j (H_S, H_j). The flag differential uses the same rule
without weights, so the contravariant map intertwines the two exactly.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import sympy as sp

from . import linalg
from .config import CACHE_SIZE
from .arrangement import (
    ArrangementFamily,
    WeightVector,
    euler_characteristic,
    independent_subsets,
)
from .errors import ArrangementError, ConsistencyError

logger = logging.getLogger(__name__)

Subset = Tuple[int, ...]


@dataclass(frozen=True)
class StandardBasis:
    degree: int
    subsets: Tuple[Subset, ...]

    def __len__(self) -> int:
        return len(self.subsets)

    def index(self, subset: Subset) -> Optional[int]:
        return _positions(self.subsets).get(subset)

    def lookup(self, ordered: Sequence[int]) -> Tuple[int, Optional[int]]:
        """(sign, position) of an ordered tuple; position None when it is zero."""
        sign, key = linalg.sort_with_sign(ordered)
        if sign == 0:
            return 0, None
        position = self.index(key)
        return (sign, position) if position is not None else (0, None)


@lru_cache(maxsize=CACHE_SIZE)
def _positions(subsets: Tuple[Subset, ...]) -> Dict[Subset, int]:
    return {s: i for i, s in enumerate(subsets)}


def standard_basis(fam: ArrangementFamily, p: int) -> StandardBasis:
    return StandardBasis(degree=p, subsets=independent_subsets(fam, p))


@dataclass(frozen=True)
class _Coordinates:
    degree: int
    coords: Tuple[Tuple[Subset, sp.Expr], ...]

    @classmethod
    def from_vector(cls, basis: StandardBasis, vector: Sequence[sp.Expr]):
        items = tuple(
            (s, linalg.canonical(v)) for s, v in zip(basis.subsets, vector) if v != 0
        )
        return cls(degree=basis.degree, coords=items)

    @classmethod
    def from_tuple(cls, basis: StandardBasis, ordered: Sequence[int], coefficient=1):
        sign, position = basis.lookup(ordered)
        if position is None:
            return cls(degree=basis.degree, coords=())
        return cls(
            degree=basis.degree,
            coords=((basis.subsets[position], sp.sympify(sign * coefficient)),),
        )

    def as_dict(self) -> Mapping[Subset, sp.Expr]:
        return dict(self.coords)

    def to_vector(self, basis: StandardBasis) -> sp.Matrix:
        values = self.as_dict()
        return sp.Matrix([values.get(s, 0) for s in basis.subsets])

    def is_zero(self) -> bool:
        return not self.coords


class OSForm(_Coordinates):
    """Element of OS^p in the standard basis."""


class FlagVector(_Coordinates):
    """Element of F^p in the standard basis."""


@dataclass(frozen=True)
class SingularSubspace:
    """Sing_a F^k: basis as columns of W and the Gram matrix of S^(a) on it."""

    W: sp.ImmutableMatrix
    gram: sp.ImmutableMatrix
    ambient: sp.ImmutableMatrix  # diagonal contravariant form on F^k

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def basis(self, fam: ArrangementFamily) -> List[FlagVector]:
        top = standard_basis(fam, fam.k)
        return [FlagVector.from_vector(top, self.W[:, i]) for i in range(self.dim)]

    @property
    def coordinate_map(self) -> sp.Matrix:
        """P with P F = coordinates of the projection of F in the basis W."""
        return linalg.matmul(linalg.inverse(self.gram), self.W.T, self.ambient)


def _right_multiplication(
    fam: ArrangementFamily, p: int, weights: Sequence[sp.Expr]
) -> sp.Matrix:
    """Matrix of (H_S) -> sum_j w_j (H_S, H_j) from degree p-1 to degree p."""
    source = standard_basis(fam, p - 1)
    target = standard_basis(fam, p)
    D = sp.zeros(len(target), len(source))
    for col, S in enumerate(source.subsets):
        for j in range(fam.n):
            sign, row = target.lookup(S + (j,))
            if row is not None:
                D[row, col] += sign * weights[j]
    return D


def aomoto_differential(fam: ArrangementFamily, a: WeightVector, p: int) -> sp.Matrix:
    """Matrix of d^(a): OS^{p-1} -> OS^p."""
    if not 1 <= p <= fam.k:
        raise ArrangementError(f"degree p={p} out of range 1..{fam.k}")
    return _right_multiplication(fam, p, a.a)


def flag_differential(fam: ArrangementFamily, p: int) -> sp.Matrix:
    """Matrix of d: F^p -> F^{p+1}."""
    if not 0 <= p < fam.k:
        raise ArrangementError(f"degree p={p} out of range 0..{fam.k - 1}")
    return _right_multiplication(fam, p + 1, [1] * fam.n)


def contravariant_gram(fam: ArrangementFamily, a: WeightVector, p: int) -> sp.Matrix:
    basis = standard_basis(fam, p)
    return sp.diag(
        *[linalg.canonical(sp.prod([a.a[j] for j in s])) for s in basis.subsets]
    ) if len(basis) else sp.zeros(0, 0)


def contravariant_form(
    fam: ArrangementFamily, a: WeightVector, u: sp.Matrix, v: sp.Matrix
) -> sp.Expr:
    """S^(a)(u, v) for coordinate vectors in the degree-k standard basis."""
    G = contravariant_gram(fam, a, fam.k)
    return linalg.canonical(linalg.matmul(sp.Matrix(u).T, G, sp.Matrix(v))[0, 0])


@lru_cache(maxsize=CACHE_SIZE)
def singular_subspace(fam: ArrangementFamily, a: WeightVector) -> SingularSubspace:
    """Flag vectors annihilating the image of d^(a) into OS^k."""
    D = aomoto_differential(fam, a, fam.k)
    W_cols = linalg.nullspace(D.T)
    chi = abs(euler_characteristic(fam))
    if len(W_cols) != chi:
        raise ConsistencyError(f"dim Sing = {len(W_cols)} but |chi| = {chi}")
    W = sp.Matrix.hstack(*W_cols) if W_cols else sp.zeros(D.shape[0], 0)
    G = contravariant_gram(fam, a, fam.k)
    gram = linalg.matmul(W.T, G, W)
    if linalg.rank(gram) < gram.shape[0]:
        raise ConsistencyError("contravariant form is degenerate on Sing")
    logger.debug("Sing has dimension %d", W.shape[1])
    return SingularSubspace(
        W=sp.ImmutableMatrix(W), gram=sp.ImmutableMatrix(gram), ambient=sp.ImmutableMatrix(G)
    )


@lru_cache(maxsize=CACHE_SIZE)
def projection_matrix(fam: ArrangementFamily, a: WeightVector) -> sp.ImmutableMatrix:
    """Exact matrix of the S^(a)-orthogonal projection F^k -> Sing."""
    sing = singular_subspace(fam, a)
    return sp.ImmutableMatrix(linalg.matmul(sing.W, sing.coordinate_map))


def orthogonal_projection(
    fam: ArrangementFamily, a: WeightVector, F: FlagVector
) -> FlagVector:
    top = standard_basis(fam, fam.k)
    image = linalg.matmul(projection_matrix(fam, a), F.to_vector(top))
    return FlagVector.from_vector(top, image)


def signed_subset_value(values: Mapping[Subset, object], ordered: Sequence[int], zero):
    """Value of a skew family at an ordered tuple: sign times the sorted entry."""
    sign, key = linalg.sort_with_sign(ordered)
    if sign == 0 or key not in values:
        return zero
    return sign * values[key]


def relation_residuals(fam: ArrangementFamily, values: Mapping[Subset, object], zero):
    """sum_j value(j, i_2, ..., i_k) for each independent (k-1)-subset."""
    out = {}
    for rest in independent_subsets(fam, fam.k - 1):
        total = zero
        for j in range(fam.n):
            total = total + signed_subset_value(values, (j,) + rest, zero)
        out[rest] = total
    return out


def marked_flag_elements(
    fam: ArrangementFamily, a: WeightVector
) -> Dict[Subset, FlagVector]:
    """v_I = projection of F(H_I) for each independent k-subset I."""
    top = standard_basis(fam, fam.k)
    P = projection_matrix(fam, a)
    vectors = {s: sp.Matrix(P[:, i]) for i, s in enumerate(top.subsets)}

    zero = sp.zeros(len(top), 1)
    for rest, total in relation_residuals(fam, vectors, zero).items():
        if not linalg.is_zero_matrix(total):
            raise ConsistencyError(f"marked relation fails at {rest}")
    return {s: FlagVector.from_vector(top, v) for s, v in vectors.items()}
