"""Circuit operators L_C and the Gauss-Manin coefficients K_j(x).

K_j(x) = sum_C lam^C_j / f_C(x) L_C acts on the top flag space F^k. The
operators are symmetric for the contravariant form and preserve Sing; on Sing
they commute and are simultaneously diagonalized by special vectors.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from . import linalg
from .arrangement import (
    ArrangementFamily,
    Circuit,
    FiberPoint,
    WeightVector,
    circuits,
    discriminant_membership,
)
from .config import CACHE_SIZE, NEAR_DISC_REL
from .errors import ConsistencyError, DiscriminantError
from .flags import singular_subspace, standard_basis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OperatorMatrix:
    """Matrix on F^k in the standard basis, with its block on the Sing basis."""

    matrix: sp.ImmutableMatrix
    restricted: Optional[sp.ImmutableMatrix]
    provenance: str


@lru_cache(maxsize=CACHE_SIZE)
def _l_c(fam: ArrangementFamily, a: WeightVector, circuit: Circuit) -> sp.ImmutableMatrix:
    top = standard_basis(fam, fam.k)
    members = circuit.members
    r = len(members)
    L = sp.zeros(len(top), len(top))
    for col, T in enumerate(top.subsets):
        present = [i for i in members if i in T]
        if len(present) < r - 1:
            continue
        # An independent T never contains a whole circuit.
        m = next(pos for pos, i in enumerate(members, start=1) if i not in T)
        rest = tuple(s for s in T if s not in members)
        omit_m = members[: m - 1] + members[m:] + rest
        outer = linalg.permutation_sign(omit_m) * (-1) ** m
        for l, i_l in enumerate(members, start=1):
            sign, row = top.lookup(members[: l - 1] + members[l:] + rest)
            if row is None:
                continue
            L[row, col] += outer * (-1) ** l * sign * a.a[i_l]
    return sp.ImmutableMatrix(L.applyfunc(linalg.canonical))


def l_c_matrix(fam: ArrangementFamily, a: WeightVector, circuit: Circuit) -> OperatorMatrix:
    L = _l_c(fam, a, circuit)
    return OperatorMatrix(
        matrix=L,
        restricted=_maybe_restrict(fam, a, L),
        provenance=f"L_C, C={circuit.label()}",
    )


def restrict_to_sing(fam: ArrangementFamily, a: WeightVector, M: sp.Matrix) -> sp.Matrix:
    """R with M W = W R, computed through the orthogonal projection."""
    sing = singular_subspace(fam, a)
    return linalg.matmul(sing.coordinate_map, sp.Matrix(M), sing.W)


def preserves_sing(fam: ArrangementFamily, a: WeightVector, M: sp.Matrix) -> bool:
    sing = singular_subspace(fam, a)
    R = restrict_to_sing(fam, a, M)
    return linalg.is_zero_matrix(linalg.matmul(sp.Matrix(M), sing.W) - linalg.matmul(sing.W, R))


def is_s_symmetric(fam: ArrangementFamily, a: WeightVector, M: sp.Matrix) -> bool:
    """S^(a)(Mv, w) = S^(a)(v, Mw) for all v, w."""
    G = singular_subspace(fam, a).ambient
    GM = linalg.matmul(G, sp.Matrix(M))
    return linalg.is_zero_matrix(GM - GM.T)


def _maybe_restrict(fam, a, M) -> Optional[sp.ImmutableMatrix]:
    try:
        return sp.ImmutableMatrix(restrict_to_sing(fam, a, M))
    except ConsistencyError:
        return None


def _require_off_discriminant(fam: ArrangementFamily, x: FiberPoint) -> None:
    report = discriminant_membership(fam, x)
    if report.on:
        raise DiscriminantError([c.members for c in report.violating])


def k_j_matrix(
    fam: ArrangementFamily, a: WeightVector, x: FiberPoint, j: int
) -> OperatorMatrix:
    """Exact K_j(x) for a rational (or Gaussian-rational) fiber point."""
    if not x.is_exact:
        raise TypeError("k_j_matrix needs an exact fiber point; use k_j_numeric")
    _require_off_discriminant(fam, x)
    top = standard_basis(fam, fam.k)
    K = sp.zeros(len(top), len(top))
    for circuit in circuits(fam):
        if circuit.lam[j] == 0:
            continue
        K += (circuit.lam[j] / circuit.f_value(x.x)) * _l_c(fam, a, circuit)
    K = K.applyfunc(linalg.canonical)
    return OperatorMatrix(
        matrix=sp.ImmutableMatrix(K),
        restricted=_maybe_restrict(fam, a, K),
        provenance=f"K_{j + 1}(x)",
    )


def circuit_denominators(
    fam: ArrangementFamily, x: Sequence[complex]
) -> List[Tuple[Circuit, complex]]:
    """f_C(x) for numeric x, guarded against the discriminant."""
    guard = NEAR_DISC_REL * max(1.0, float(np.linalg.norm(np.asarray(x, dtype=complex))))
    values = []
    near = []
    for circuit in circuits(fam):
        value = circuit.f_value(x)
        if abs(value) <= guard:
            near.append(circuit.members)
        values.append((circuit, value))
    if near:
        raise DiscriminantError(near, detail="near-discriminant numeric fiber")
    return values


def k_j_numeric(
    fam: ArrangementFamily, a: WeightVector, x: Sequence[complex], j: int
) -> np.ndarray:
    """Complex-double K_j(x) on F^k."""
    N = len(standard_basis(fam, fam.k))
    K = np.zeros((N, N), dtype=complex)
    for circuit, value in circuit_denominators(fam, x):
        lam = complex(circuit.lam[j])
        if lam:
            K += (lam / value) * linalg.to_complex_array(_l_c(fam, a, circuit))
    return K


@lru_cache(maxsize=CACHE_SIZE)
def restricted_circuit_blocks(
    fam: ArrangementFamily, a: WeightVector
) -> Tuple[Tuple[Circuit, np.ndarray], ...]:
    """L_C restricted to Sing for every circuit, as complex arrays."""
    return tuple(
        (c, linalg.to_complex_array(restrict_to_sing(fam, a, _l_c(fam, a, c))))
        for c in circuits(fam)
    )


def k_j_restricted_numeric(
    fam: ArrangementFamily, a: WeightVector, x: Sequence[complex], j: int
) -> np.ndarray:
    """K_j(x) restricted to Sing, for numeric x."""
    dim = singular_subspace(fam, a).dim
    R = np.zeros((dim, dim), dtype=complex)
    denominators = dict((c.members, v) for c, v in circuit_denominators(fam, x))
    for circuit, block in restricted_circuit_blocks(fam, a):
        lam = complex(circuit.lam[j])
        if lam:
            R += (lam / denominators[circuit.members]) * block
    return R


def sing_commutator(
    fam: ArrangementFamily, a: WeightVector, x: FiberPoint, i: int, j: int
) -> sp.Matrix:
    """[K_i, K_j] restricted to Sing, exactly."""
    Ki = k_j_matrix(fam, a, x, i).restricted
    Kj = k_j_matrix(fam, a, x, j).restricted
    return (linalg.matmul(Ki, Kj) - linalg.matmul(Kj, Ki)).applyfunc(linalg.canonical)


def full_commutator_norms(
    fam: ArrangementFamily, a: WeightVector, x: FiberPoint
) -> Dict[Tuple[int, int], float]:
    """Frobenius norms of [K_i, K_j] on all of F^k (diagnostic only)."""
    xs = x.numeric()
    mats = [k_j_numeric(fam, a, xs, j) for j in range(fam.n)]
    return {
        (i, j): float(np.linalg.norm(mats[i] @ mats[j] - mats[j] @ mats[i]))
        for i in range(fam.n)
        for j in range(i + 1, fam.n)
    }


@dataclass(frozen=True)
class MarkedAction:
    """Action of K_j(x) written on the marked spanning set {w_I}."""

    labels: Tuple[Tuple[int, ...], ...]
    matrix: sp.ImmutableMatrix  # column I holds the coefficients of K_j w_I

    def apply_to_values(self, values: np.ndarray) -> np.ndarray:
        """sum_J M[J, I] w_J(u) for a (labels x points) array of w values."""
        return linalg.to_complex_array(self.matrix).T @ values


def marked_multiplication(
    fam: ArrangementFamily, a: WeightVector, x: FiberPoint, j: int
) -> MarkedAction:
    """K_j(x) on {w_I}: the circuit operators act on w_I as they act on F(H_I)."""
    K = k_j_matrix(fam, a, x, j)
    top = standard_basis(fam, fam.k)
    return MarkedAction(labels=top.subsets, matrix=K.matrix)


def closedness_check(fam: ArrangementFamily, a: WeightVector) -> bool:
    """Symbolically verify d K_i / dz_j = d K_j / dz_i for all i, j."""
    z = sp.symbols(f"z1:{fam.n + 1}")
    size = len(standard_basis(fam, fam.k))
    K = []
    for j in range(fam.n):
        total = sp.zeros(size, size)
        for circuit in circuits(fam):
            f_C = sum(circuit.lam[i] * z[i] for i in circuit.members)
            total += (circuit.lam[j] / f_C) * _l_c(fam, a, circuit)
        K.append(total)
    for i in range(fam.n):
        for j in range(i + 1, fam.n):
            difference = (K[i].diff(z[j]) - K[j].diff(z[i])).applyfunc(sp.simplify)
            if any(entry != 0 for entry in difference):
                logger.warning("closedness fails for (%d, %d)", i + 1, j + 1)
                return False
    return True
