"""Exact linear algebra over the rationals and Gaussian rationals.

Matrices are sympy ``Matrix`` objects with canonical numeric entries. Heavy
operations go through ``DomainMatrix`` over QQ or QQ_I so that complex
rational entries are reduced exactly.
"""

from fractions import Fraction
from typing import Any, Callable, List, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from sympy.polys.matrices import DomainMatrix

from .errors import ArrangementError

Scalar = sp.Expr


def parse_scalar(value: Any) -> Scalar:
    """Parse an int, a "p/q" string, a finite decimal or a [re, im] pair."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ArrangementError(f"complex value must be [re, im]: {value!r}")
        re, im = (parse_scalar(v) for v in value)
        if not (re.is_real and im.is_real):
            raise ArrangementError(f"nested complex value: {value!r}")
        return canonical(re + sp.I * im)
    if isinstance(value, bool):
        raise ArrangementError(f"not a number: {value!r}")
    if isinstance(value, int):
        return sp.Integer(value)
    if isinstance(value, float):
        if not np.isfinite(value):
            raise ArrangementError(f"not a finite number: {value!r}")
        return sp.Rational(str(value))
    if isinstance(value, str):
        try:
            return sp.Rational(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ArrangementError(f"not a rational: {value!r}") from exc
    if isinstance(value, sp.Basic) and value.is_number:
        return canonical(value)
    raise ArrangementError(f"not a number: {value!r}")


def format_scalar(value: Any) -> Union[str, List[str], List[float]]:
    """Render an exact scalar as "p/q" (or a pair of them); floats as [re, im]."""
    if isinstance(value, (complex, float, int, np.number)) and not isinstance(
        value, bool
    ):
        if isinstance(value, int):
            return str(value)
        z = complex(value)
        return [float(z.real), float(z.imag)]
    value = canonical(value)
    re, im = value.as_real_imag()
    if im == 0:
        return str(re)
    return [str(re), str(im)]


def canonical(value: Any) -> Scalar:
    """Bring a rational or Gaussian-rational expression to the form re + im*I."""
    return sp.expand(sp.radsimp(sp.sympify(value)))


def is_real(value: Scalar) -> bool:
    return bool(sp.im(value) == 0)


def is_exact(value: Any) -> bool:
    return isinstance(value, sp.Basic) and value.is_number


def _to_domain(M: sp.Matrix) -> DomainMatrix:
    return DomainMatrix.from_Matrix(sp.Matrix(M)).to_field()


def _unified(*mats: sp.Matrix) -> List[DomainMatrix]:
    dms = [_to_domain(M) for M in mats]
    domain = dms[0].domain
    for dm in dms[1:]:
        domain = domain.unify(dm.domain)
    return [dm.convert_to(domain) for dm in dms]


def rank(M: sp.Matrix) -> int:
    if 0 in M.shape:
        return 0
    return _to_domain(M).rank()


def rref(M: sp.Matrix) -> Tuple[sp.Matrix, Tuple[int, ...]]:
    reduced, pivots = _to_domain(M).rref()
    return reduced.to_Matrix(), tuple(pivots)


def nullspace(M: sp.Matrix) -> List[sp.Matrix]:
    """Exact nullspace basis, each vector scaled so its first nonzero entry is 1."""
    rows, cols = M.shape
    if cols == 0:
        return []
    if rows == 0:
        return [sp.Matrix([1 if i == j else 0 for i in range(cols)]) for j in range(cols)]
    reduced, pivots = rref(M)
    basis = []
    for free in (c for c in range(cols) if c not in pivots):
        vec = sp.zeros(cols, 1)
        vec[free] = 1
        for row, pivot in enumerate(pivots):
            vec[pivot] = -reduced[row, free]
        basis.append(normalize_leading(vec))
    return basis


def normalize_leading(vec: sp.Matrix) -> sp.Matrix:
    for entry in vec:
        if entry != 0:
            return (vec / entry).applyfunc(canonical)
    return vec


def matmul(*mats: sp.Matrix) -> sp.Matrix:
    """Exact product of a chain of matrices."""
    if any(0 in M.shape for M in mats):
        return sp.zeros(mats[0].shape[0], mats[-1].shape[1])
    dms = _unified(*mats)
    out = dms[0]
    for dm in dms[1:]:
        out = out * dm
    return out.to_Matrix()


def det(M: sp.Matrix) -> Scalar:
    if M.shape[0] == 0:
        return sp.Integer(1)
    dm = _to_domain(M)
    return dm.domain.to_sympy(dm.det())


def inverse(M: sp.Matrix) -> sp.Matrix:
    if M.shape[0] == 0:
        return sp.zeros(0, 0)
    if rank(M) < M.shape[0]:
        raise ZeroDivisionError("singular matrix")
    return _to_domain(M).inv().to_Matrix()


def solve(A: sp.Matrix, b: sp.Matrix) -> sp.Matrix:
    """Solve A X = b exactly for square invertible A."""
    return matmul(inverse(A), b)


def is_zero_matrix(M: sp.Matrix) -> bool:
    return all(canonical(entry) == 0 for entry in M)


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation that sorts seq (0 when seq has repeats)."""
    if len(set(seq)) < len(seq):
        return 0
    inversions = sum(
        1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j]
    )
    return -1 if inversions % 2 else 1


def sort_with_sign(seq: Sequence[int]) -> Tuple[int, Tuple[int, ...]]:
    return permutation_sign(seq), tuple(sorted(seq))


def central_jacobian(
    func: Callable[[np.ndarray], np.ndarray], base: np.ndarray, steps: np.ndarray
) -> np.ndarray:
    """Jacobian of func at base by central differences with Richardson extrapolation.

    Column i uses steps[i] and steps[i] / 2, so the truncation error is fourth
    order in the step. Steps must be small against the distance to any pole.
    """
    base = np.asarray(base, dtype=complex)

    def central(i: int, h: float) -> np.ndarray:
        e = np.zeros(base.shape, dtype=complex)
        e[i] = h
        return (np.asarray(func(base + e)) - np.asarray(func(base - e))) / (2 * h)

    columns = []
    for i, h in enumerate(steps):
        coarse, fine = central(i, h), central(i, h / 2)
        columns.append((4 * fine - coarse) / 3)
    return np.column_stack(columns)


def to_complex_array(M: Any) -> np.ndarray:
    """Convert an exact matrix or vector to a complex numpy array."""
    if isinstance(M, sp.MatrixBase):
        return np.array(
            [[complex(M[i, j]) for j in range(M.shape[1])] for i in range(M.shape[0])],
            dtype=complex,
        ).reshape(M.shape)
    return np.array([complex(v) for v in M], dtype=complex)
