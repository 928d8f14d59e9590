"""Weighted families of parallel-transported affine hyperplane arrangements.

A family is given by n nonzero linear forms g_j(t) = sum_i B[i, j] t_i on C^k.
The fiber over x in C^n is the arrangement of hyperplanes f_j = g_j + x_j = 0.
Everything here is exact; numeric fiber points are only compared against a
tolerance in ``discriminant_membership``.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp

from . import linalg
from .config import CACHE_SIZE, MAX_EDGE_ENUMERATION_N, NEAR_DISC_REL
from .errors import ArrangementError

logger = logging.getLogger(__name__)

INFINITY = -1  # Index of the hyperplane at infinity in the projective closure


@dataclass(frozen=True)
class ArrangementFamily:
    """Coefficient matrix B (k x n) of the linear forms g_j."""

    k: int
    n: int
    B: sp.ImmutableMatrix
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.labels:
            object.__setattr__(
                self, "labels", tuple(str(j + 1) for j in range(self.n))
            )

    def column(self, j: int) -> sp.Matrix:
        return self.B[:, j]

    def columns(self, subset: Sequence[int]) -> sp.Matrix:
        if not subset:
            return sp.zeros(self.k, 0)
        return sp.Matrix.hstack(*(self.B[:, j] for j in subset))

    def rank_of(self, subset: Sequence[int]) -> int:
        return linalg.rank(self.columns(subset))

    def is_independent(self, subset: Sequence[int]) -> bool:
        return len(set(subset)) == len(subset) and self.rank_of(subset) == len(subset)

    def minor(self, subset: Sequence[int]) -> sp.Expr:
        """d_I: determinant of the columns of B in the given order."""
        if len(subset) != self.k:
            raise ArrangementError(f"minor needs {self.k} columns, got {len(subset)}")
        return linalg.det(self.columns(subset))

    def numeric_B(self) -> np.ndarray:
        return linalg.to_complex_array(self.B)


@dataclass(frozen=True)
class WeightVector:
    a: Tuple[sp.Expr, ...]

    @property
    def a_infinity(self) -> sp.Expr:
        return linalg.canonical(-sum(self.a))

    @property
    def is_real_positive(self) -> bool:
        return all(linalg.is_real(v) and v > 0 for v in self.a)

    def numeric(self) -> np.ndarray:
        return linalg.to_complex_array(self.a)


@dataclass(frozen=True)
class FiberPoint:
    """Base point x; exact sympy numbers or complex doubles after transport."""

    x: Tuple[Any, ...]

    @property
    def is_exact(self) -> bool:
        return all(linalg.is_exact(v) for v in self.x)

    @property
    def is_real(self) -> bool:
        if self.is_exact:
            return all(linalg.is_real(v) for v in self.x)
        return all(abs(complex(v).imag) == 0 for v in self.x)

    def numeric(self) -> np.ndarray:
        return linalg.to_complex_array(self.x)

    def norm(self) -> float:
        return float(np.linalg.norm(self.numeric())) if self.x else 0.0


@dataclass(frozen=True)
class Circuit:
    """Minimal dependent set with its relation sum_j lam_j b_j = 0."""

    members: Tuple[int, ...]
    lam: Tuple[sp.Expr, ...]

    def f_value(self, x: Sequence[Any]) -> Any:
        """f_C(x) = sum_j lam_j x_j, exact when x is exact."""
        if all(linalg.is_exact(v) for v in x):
            return linalg.canonical(sum(self.lam[j] * x[j] for j in self.members))
        return sum(complex(self.lam[j]) * complex(x[j]) for j in self.members)

    def label(self) -> str:
        return "{" + ",".join(str(j + 1) for j in self.members) + "}"


@dataclass
class DiscriminantReport:
    on: bool
    violating: List[Circuit] = field(default_factory=list)
    values: Dict[Tuple[int, ...], Any] = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "on" if self.on else "off"


@dataclass
class DenseEdge:
    """A dense edge of the projective closure; INFINITY marks H_infinity."""

    members: Tuple[int, ...]
    rank: int
    weight: sp.Expr


@dataclass
class UnbalanceReport:
    unbalanced: bool
    dense_edges: List[DenseEdge] = field(default_factory=list)
    shortcut: bool = False


def _require_list(value: Any, name: str) -> None:
    if not isinstance(value, list):
        raise ArrangementError(
            f"schema error: {name} must be a JSON list, got {type(value).__name__}"
        )


def load_family(
    document: Union[str, Mapping[str, Any]],
) -> Tuple[ArrangementFamily, WeightVector, FiberPoint]:
    """Validate an input document and build the family, weight and fiber."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ArrangementError(f"parse error: {exc}") from exc
    if not isinstance(document, Mapping):
        raise ArrangementError("parse error: document must be a JSON object")

    try:
        k, n = document["k"], document["n"]
        rows = document["B"]
        weights = document["weights"] if "weights" in document else document["a"]
        x = document["x"]
    except KeyError as exc:
        raise ArrangementError(f"schema error: missing field {exc.args[0]!r}") from exc

    if not (isinstance(k, int) and isinstance(n, int)) or k < 1 or n <= k:
        raise ArrangementError(f"schema error: need integers 1 <= k < n, got k={k}, n={n}")
    _require_list(rows, "B")
    for row in rows:
        _require_list(row, "each row of B")
    _require_list(weights, "weights")
    _require_list(x, "x")
    if len(rows) != k or any(len(row) != n for row in rows):
        raise ArrangementError(f"schema error: B must be {k} rows of {n} entries")
    if len(weights) != n or len(x) != n:
        raise ArrangementError(f"schema error: weights and x must have {n} entries")

    B = sp.ImmutableMatrix([[linalg.parse_scalar(v) for v in row] for row in rows])
    raw_labels = document.get("labels")
    if raw_labels is not None:
        _require_list(raw_labels, "labels")
    labels = tuple(str(v) for v in raw_labels or ())
    if labels and len(labels) != n:
        raise ArrangementError(f"schema error: labels must have {n} entries")

    for j in range(n):
        if all(entry == 0 for entry in B[:, j]):
            raise ArrangementError(f"zero linear form: column {j + 1} of B")
    if linalg.rank(B) < k:
        raise ArrangementError(f"rank(B) < k: forms do not span the dual of C^{k}")
    if any(not linalg.is_real(v) for v in B):
        raise ArrangementError("B must be real rational")

    a = tuple(linalg.parse_scalar(v) for v in weights)
    for j, value in enumerate(a):
        if value == 0:
            raise ArrangementError(f"weight a_{j + 1} = 0")

    fam = ArrangementFamily(k=k, n=n, B=B, labels=labels)
    logger.debug("loaded family k=%d n=%d", k, n)
    return fam, WeightVector(a), FiberPoint(tuple(linalg.parse_scalar(v) for v in x))


def load_family_file(path: Union[str, Path]):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ArrangementError(f"cannot read {path}: {exc}") from exc
    return load_family(text)


@lru_cache(maxsize=CACHE_SIZE)
def independent_subsets(fam: ArrangementFamily, p: int) -> Tuple[Tuple[int, ...], ...]:
    """Independent p-subsets of J in lexicographic order."""
    if not 0 <= p <= fam.k:
        raise ArrangementError(f"degree p={p} out of range 0..{fam.k}")
    return tuple(s for s in combinations(range(fam.n), p) if fam.rank_of(s) == p)


def matroid_circuits(vectors: sp.Matrix) -> List[Circuit]:
    """Circuits of the column matroid of ``vectors``, by size then lexicographically."""
    dim, count = vectors.shape
    found: List[Circuit] = []
    for size in range(1, min(dim + 1, count) + 1):
        for subset in combinations(range(count), size):
            if any(set(c.members) <= set(subset) for c in found):
                continue
            block = sp.Matrix.hstack(*(vectors[:, j] for j in subset))
            if linalg.rank(block) != size - 1:
                continue
            (kernel,) = linalg.nullspace(block)
            lam = [sp.Integer(0)] * count
            for pos, j in enumerate(subset):
                lam[j] = kernel[pos]
            found.append(Circuit(members=subset, lam=tuple(lam)))
    return found


@lru_cache(maxsize=CACHE_SIZE)
def circuits(fam: ArrangementFamily) -> Tuple[Circuit, ...]:
    found = tuple(sorted(matroid_circuits(sp.Matrix(fam.B)), key=lambda c: c.members))
    logger.debug("family has %d circuits", len(found))
    return found


def deletion(fam: ArrangementFamily, j: int) -> ArrangementFamily:
    """The family with the form g_j removed."""
    keep = [i for i in range(fam.n) if i != j]
    B = sp.ImmutableMatrix(fam.columns(keep))
    if fam.n - 1 <= fam.k or linalg.rank(B) < fam.k:
        raise ArrangementError(f"deleting column {j + 1} drops the rank below k")
    return ArrangementFamily(
        k=fam.k, n=fam.n - 1, B=B, labels=tuple(fam.labels[i] for i in keep)
    )


def discriminant_membership(
    fam: ArrangementFamily, x: FiberPoint, tol: Optional[float] = None
) -> DiscriminantReport:
    """Off iff f_C(x) != 0 for every circuit (|f_C(x)| > tol for numeric x)."""
    exact = x.is_exact
    if tol is None:
        tol = NEAR_DISC_REL * max(1.0, x.norm())
    report = DiscriminantReport(on=False)
    for circuit in circuits(fam):
        value = circuit.f_value(x.x)
        report.values[circuit.members] = value
        vanishes = value == 0 if exact else abs(value) <= tol
        if vanishes:
            report.on = True
            report.violating.append(circuit)
    return report


def euler_characteristic(fam: ArrangementFamily) -> int:
    return sum((-1) ** p * len(independent_subsets(fam, p)) for p in range(fam.k + 1))


def _closure_rank(fam: ArrangementFamily, subset: Sequence[int]) -> int:
    """Rank in the projective closure of a fiber off the discriminant."""
    finite = [j for j in subset if j != INFINITY]
    r = fam.rank_of(finite)
    if INFINITY in subset or r < len(finite):
        r += 1
    return r


def _is_connected(fam: ArrangementFamily, flat: Sequence[int]) -> bool:
    """Every pair of elements of the flat lies on a common circuit of it."""
    parent = {e: e for e in flat}

    def find(e):
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        return e

    top = _closure_rank(fam, flat)
    for size in range(2, top + 2):
        for subset in combinations(flat, size):
            if _closure_rank(fam, subset) != size - 1:
                continue
            if any(_closure_rank(fam, [e for e in subset if e != d]) < size - 1
                   for d in subset):
                continue
            root = find(subset[0])
            for e in subset[1:]:
                parent[find(e)] = root
    return len({find(e) for e in flat}) == 1


def dense_edges(fam: ArrangementFamily, a: WeightVector) -> List[DenseEdge]:
    """Dense edges of the projective closure with their weights."""
    if fam.n > MAX_EDGE_ENUMERATION_N:
        raise ArrangementError(
            f"edge enumeration is capped at n <= {MAX_EDGE_ENUMERATION_N}"
        )
    ground = list(range(fam.n)) + [INFINITY]
    flats = set()
    for size in range(1, fam.k + 1):
        for subset in combinations(ground, size):
            r = _closure_rank(fam, subset)
            if r != size:
                continue
            closure = tuple(
                e for e in ground if e in subset or _closure_rank(fam, subset + (e,)) == r
            )
            flats.add(closure)

    edges = []
    for flat in sorted(flats, key=lambda f: (len(f), f)):
        if not _is_connected(fam, flat):
            continue
        weight = sum(a.a_infinity if e == INFINITY else a.a[e] for e in flat)
        edges.append(
            DenseEdge(members=flat, rank=_closure_rank(fam, flat), weight=linalg.canonical(weight))
        )
    return edges


def is_unbalanced(fam: ArrangementFamily, a: WeightVector) -> UnbalanceReport:
    """True iff no dense edge of the projective closure has zero weight."""
    if a.is_real_positive:
        return UnbalanceReport(unbalanced=True, shortcut=True)
    edges = dense_edges(fam, a)
    zero = [e for e in edges if e.weight == 0]
    if zero:
        logger.info("balanced dense edges: %s", [e.members for e in zero])
    return UnbalanceReport(unbalanced=not zero, dense_edges=edges)


def edge_label(members: Sequence[int]) -> str:
    return "{" + ",".join("inf" if e == INFINITY else str(e + 1) for e in members) + "}"
