"""Bounded regions of a real fiber arrangement, found by a vertex sweep.

Around a vertex v cut out by an independent k-subset I the 2^k orthants
w = (B_I^T)^{-1} s, s in {+1,-1}^k, meet every region adjacent to v. The sign
vector of such a region is s on I and the sign of f_l(v) elsewhere, since no
other hyperplane passes through v off the discriminant. A region is bounded
when its recession cone is trivial, which is a small linear program.
"""

import logging
from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.optimize import linprog

from . import linalg
from .arrangement import ArrangementFamily, FiberPoint, independent_subsets

logger = logging.getLogger(__name__)

Signs = Tuple[int, ...]


@dataclass(frozen=True)
class Region:
    signs: Signs
    vertices: Tuple[Tuple[sp.Expr, ...], ...]

    def centroid(self) -> Tuple[sp.Expr, ...]:
        count = len(self.vertices)
        return tuple(
            sum(v[i] for v in self.vertices) / count for i in range(len(self.vertices[0]))
        )

    def contains(self, values: np.ndarray) -> bool:
        """True when the numeric f-values lie strictly inside the region."""
        return bool(np.all(np.asarray(self.signs) * values.real > 0))


def _f_exact(fam: ArrangementFamily, x: FiberPoint, t: Sequence[sp.Expr]) -> List[sp.Expr]:
    return [
        sum(fam.B[i, j] * t[i] for i in range(fam.k)) + x.x[j] for j in range(fam.n)
    ]


def vertices(fam: ArrangementFamily, x: FiberPoint) -> List[Tuple[Tuple[int, ...], Tuple]]:
    """Exact vertices of the real fiber, one per independent k-subset."""
    found = []
    for subset in independent_subsets(fam, fam.k):
        system = fam.columns(subset).T
        rhs = sp.Matrix([-x.x[j] for j in subset])
        point = linalg.solve(system, rhs)
        found.append((subset, tuple(point)))
    return found


def _sign(value: sp.Expr) -> int:
    return 1 if value > 0 else -1


def _is_bounded(fam: ArrangementFamily, signs: Signs) -> bool:
    rows = np.array(
        [[signs[j] * float(fam.B[i, j]) for i in range(fam.k)] for j in range(fam.n)]
    )
    result = linprog(
        -rows.sum(axis=0),
        A_ub=-rows,
        b_ub=np.zeros(fam.n),
        bounds=[(-1.0, 1.0)] * fam.k,
        method="highs",
    )
    return result.status == 0 and -result.fun <= 1e-9


def bounded_regions(fam: ArrangementFamily, x: FiberPoint) -> List[Region]:
    """All bounded regions of a real rational fiber off the discriminant."""
    verts = vertices(fam, x)
    f_at = {subset: _f_exact(fam, x, point) for subset, point in verts}

    candidates: Dict[Signs, None] = {}
    for subset, point in verts:
        values = f_at[subset]
        for orthant in product((1, -1), repeat=fam.k):
            signs = []
            for j in range(fam.n):
                if j in subset:
                    signs.append(orthant[subset.index(j)])
                else:
                    signs.append(_sign(values[j]))
            candidates.setdefault(tuple(signs))

    regions = []
    for signs in candidates:
        if not _is_bounded(fam, signs):
            continue
        corners = tuple(
            point
            for subset, point in verts
            if all(signs[j] * f_at[subset][j] >= 0 for j in range(fam.n))
        )
        regions.append(Region(signs=signs, vertices=corners))
    logger.debug("%d bounded regions among %d sign vectors", len(regions), len(candidates))
    return sorted(regions, key=lambda r: r.signs)
