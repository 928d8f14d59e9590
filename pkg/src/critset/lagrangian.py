"""The Lagrangian variety L_{Y,a} in T*C^n and its fibers over the base.

Y is the row space of B and Y^perp its annihilator. L_{Y,a} is the image of
Y x Y^perp under (q, p) -> (q + a/p, p). It is cut out by the Laurent
generators F_alpha = sum_j alpha_j p_j for alpha in Y and
G_beta = sum_j beta_j (q_j - a_j / p_j) for beta in Y^perp, built as sympy
expressions in the symbols q1..qn, p1..pn.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.linalg import eig
from scipy.optimize import linear_sum_assignment

from . import config, linalg
from .arrangement import ArrangementFamily, FiberPoint, WeightVector, circuits
from .critical import (
    CriticalAlgebraModel,
    MasterContext,
    SolverOptions,
    check_relations,
    solve_critical,
)
from .errors import ArrangementError, DegenerateError, SpectrumError
from .flags import singular_subspace
from .operators import k_j_restricted_numeric

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LagrangianModel:
    fam: ArrangementFamily
    a: WeightVector
    Y: sp.ImmutableMatrix       # k x n, rows b^i
    Yperp: sp.ImmutableMatrix   # (n-k) x n, reduced circuit relations
    normalization: sp.Expr      # det([B; Yperp]) / det(B B^T)

    @property
    def n(self) -> int:
        return self.fam.n

    @property
    def k(self) -> int:
        return self.fam.k


@dataclass
class LagrangianPoint:
    x: np.ndarray
    p: np.ndarray
    residual: float


@lru_cache(maxsize=config.CACHE_SIZE)
def build_model(fam: ArrangementFamily, a: WeightVector) -> LagrangianModel:
    """Y from the rows of B, Y^perp reduced from the circuit vectors."""
    rows: List[sp.Matrix] = []
    for circuit in circuits(fam):
        if len(rows) == fam.n - fam.k:
            break
        candidate = sp.Matrix([list(circuit.lam)])
        if linalg.rank(sp.Matrix.vstack(*rows, candidate)) > len(rows):
            rows.append(candidate)
    if len(rows) != fam.n - fam.k:
        raise ArrangementError("circuit relations do not span the annihilator of Y")
    Yperp = sp.Matrix.vstack(*rows)
    B = sp.Matrix(fam.B)

    if not linalg.is_zero_matrix(linalg.matmul(B, Yperp.T)):
        raise ArrangementError("Y^perp basis is not orthogonal to Y")
    for j in range(fam.n):
        unit = sp.Matrix([[1 if i == j else 0 for i in range(fam.n)]])
        if linalg.rank(sp.Matrix.vstack(B, unit)) == fam.k:
            raise ArrangementError(
                f"coordinate vector e_{j + 1} lies in Y; Y^perp is inside p_{j + 1} = 0"
            )

    normalization = linalg.canonical(
        linalg.det(sp.Matrix.vstack(B, Yperp)) / linalg.det(linalg.matmul(B, B.T))
    )
    return LagrangianModel(
        fam=fam,
        a=a,
        Y=sp.ImmutableMatrix(B),
        Yperp=sp.ImmutableMatrix(Yperp),
        normalization=normalization,
    )


def canonical_coordinates(n: int) -> Tuple[Tuple[sp.Symbol, ...], Tuple[sp.Symbol, ...]]:
    """Symbols (q_1..q_n, p_1..p_n) of T*C^n."""
    return tuple(sp.symbols(f"q1:{n + 1}")), tuple(sp.symbols(f"p1:{n + 1}"))


def generators(model: LagrangianModel) -> Tuple[List[sp.Expr], List[sp.Expr]]:
    """(F_alpha for rows of Y, G_beta for rows of Y^perp) as Laurent expressions."""
    q, p = canonical_coordinates(model.n)
    F = [
        sp.Add(*(alpha * p_j for alpha, p_j in zip(model.Y.row(i), p)))
        for i in range(model.k)
    ]
    G = [
        sp.Add(
            *(
                beta * (q_j - w / p_j)
                for beta, q_j, p_j, w in zip(model.Yperp.row(i), q, p, model.a.a)
            )
        )
        for i in range(model.n - model.k)
    ]
    return F, G


def poisson_bracket(fa: sp.Expr, fb: sp.Expr, n: int) -> sp.Expr:
    """sum_j (dfa/dq_j dfb/dp_j - dfa/dp_j dfb/dq_j), expanded."""
    q, p = canonical_coordinates(n)
    allowed = set(q) | set(p)
    for form in (fa, fb):
        extra = sp.sympify(form).free_symbols - allowed
        if extra:
            raise ValueError(f"unsupported variable(s) {sorted(map(str, extra))} for n={n}")
    return sp.expand(
        sp.Add(
            *(
                sp.diff(fa, q_j) * sp.diff(fb, p_j) - sp.diff(fa, p_j) * sp.diff(fb, q_j)
                for q_j, p_j in zip(q, p)
            )
        )
    )


def involution_brackets(model: LagrangianModel) -> Dict[Tuple[str, str], sp.Expr]:
    """Poisson brackets of all generator pairs, labelled F1.., G1.."""
    F, G = generators(model)
    named = [(f"F{i + 1}", f) for i, f in enumerate(F)] + [
        (f"G{i + 1}", g) for i, g in enumerate(G)
    ]
    return {
        (na, nb): poisson_bracket(fa, fb, model.n)
        for (na, fa), (nb, fb) in combinations(named, 2)
    }


def in_involution(model: LagrangianModel) -> bool:
    return all(b == 0 for b in involution_brackets(model).values())


def generator_values(model: LagrangianModel, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    Y = linalg.to_complex_array(model.Y)
    L = linalg.to_complex_array(model.Yperp)
    weights = model.a.numeric()
    return np.concatenate([Y @ p, L @ (x - weights / p)])


def generator_residual(model: LagrangianModel, x: np.ndarray, p: np.ndarray) -> float:
    """Largest generator value relative to the size of the point."""
    scale = max(1.0, float(np.abs(p).max()), float(np.abs(x).max(initial=0.0)))
    return float(np.abs(generator_values(model, x, p)).max()) / scale


def psi_map(ctx: MasterContext, u: Sequence[complex]) -> LagrangianPoint:
    """p_j = a_j / f_j(u) over the base point x."""
    p = ctx.weights / ctx.checked_f(u)
    model = build_model(ctx.fam, ctx.a)
    return LagrangianPoint(
        x=ctx.shift.copy(), p=p, residual=generator_residual(model, ctx.shift, p)
    )


def fiber_points(
    model: LagrangianModel,
    x: FiberPoint,
    critical: Optional[CriticalAlgebraModel] = None,
    options: Optional[SolverOptions] = None,
) -> List[LagrangianPoint]:
    """The fiber of L_{Y,a} over x, as the image of the critical set."""
    if critical is None:
        critical = solve_critical(MasterContext(model.fam, model.a, x), options)
    points = [psi_map(critical.ctx, cp.u) for cp in critical.points]
    worst = max((pt.residual for pt in points), default=0.0)
    if worst > config.GENERATOR_TOL:
        logger.warning("fiber point generator residual %.3e", worst)
    return points


@lru_cache(maxsize=config.CACHE_SIZE)
def _minors(model: LagrangianModel) -> List[Tuple[Tuple[int, ...], complex]]:
    return [
        (s, complex(model.fam.minor(s)))
        for s in combinations(range(model.n), model.k)
    ]


def jacobian_I(model: LagrangianModel, point: LagrangianPoint, I: Sequence[int]) -> complex:
    """d_I^2 Jac_I = (-1)^{n-k} sum_{|M|=n-k} d_{M-bar}^2 prod_{j in M} a_j/p_j^2."""
    if model.fam.minor(tuple(I)) == 0:
        raise ArrangementError(f"q_I is not a chart on Y for I={[i + 1 for i in I]}")
    ratios = model.a.numeric() / point.p**2
    total = 0j
    for subset, d in _minors(model):
        rest = [j for j in range(model.n) if j not in subset]
        total += d**2 * np.prod(ratios[rest])
    return complex((-1) ** (model.n - model.k) * total)


def _chart_map(model: LagrangianModel, I: Sequence[int], c: np.ndarray) -> np.ndarray:
    """q as a function of (q_I, p_{I-bar}), coordinates ordered by index."""
    B = model.fam.numeric_B()
    weights = model.a.numeric()
    I = list(I)
    rest = [j for j in range(model.n) if j not in I]
    p = np.zeros(model.n, dtype=complex)
    p[rest] = c[rest]
    p[I] = -np.linalg.solve(B[:, I], B[:, rest] @ p[rest])
    t = np.linalg.solve(B[:, I].T, c[I] - weights[I] / p[I])
    return t @ B + weights / p


def chart_jacobian(
    model: LagrangianModel,
    point: LagrangianPoint,
    I: Sequence[int],
    step: float = config.FINITE_DIFF_STEP,
) -> complex:
    """d_I^2 times the extrapolated central-difference Jacobian of the I chart.

    The p coordinates are stepped by a fraction of min |p_j| divided by how
    strongly p_I follows p_{I-bar}; the chart is linear in q_I.
    """
    I = list(I)
    rest = [j for j in range(model.n) if j not in I]
    B = model.fam.numeric_B()
    base = point.p.copy()
    base[I] = point.x[I]
    gain = max(1.0, float(np.abs(np.linalg.solve(B[:, I], B[:, rest])).max(initial=0.0)))
    steps = np.full(model.n, step * float(np.abs(point.p).min()) / gain)
    steps[I] = step * (1.0 + np.abs(base[I]))
    J = linalg.central_jacobian(lambda c: _chart_map(model, I, c), base, steps)
    d = complex(model.fam.minor(tuple(I)))
    return d**2 * complex(np.linalg.det(J))


def hessian_on_L(model: LagrangianModel, point: LagrangianPoint) -> complex:
    """(-1)^k sum_{|I|=k} d_I^2 prod_{i in I} p_i^2 / a_i."""
    ratios = point.p**2 / model.a.numeric()
    total = sum(d**2 * np.prod(ratios[list(s)]) for s, d in _minors(model))
    return complex((-1) ** model.k * total)


def system_jacobian(model: LagrangianModel, p: np.ndarray) -> complex:
    """det of the p-derivatives of the n generators."""
    Y = linalg.to_complex_array(model.Y)
    L = linalg.to_complex_array(model.Yperp)
    D = model.a.numeric() / p**2
    return complex(np.linalg.det(np.vstack([Y, L * D])))


def residue_form_L(
    model: LagrangianModel,
    points: Sequence[LagrangianPoint],
    f_values: Sequence[complex],
    g_values: Sequence[complex],
) -> complex:
    """sum f g prod(a/p^2) (-1)^n / (d_I^2 Jac_I), Jac_I read off the system Jacobian."""
    c = complex(model.normalization)
    weights = model.a.numeric()
    total = 0j
    for pt, f, g in zip(points, f_values, g_values):
        jac = (-1) ** (model.n - model.k) * system_jacobian(model, pt.p) / c
        if abs(jac) == 0:
            raise DegenerateError("fiber point with vanishing Jacobian")
        total += f * g * np.prod(weights / pt.p**2) * (-1) ** model.n / jac
    return complex(total)


def marked_p_elements(
    model: LagrangianModel, points: Sequence[LagrangianPoint], check: bool = True
) -> Dict[Tuple[int, ...], np.ndarray]:
    """p_I = d_I prod_{i in I} p_i at every fiber point, relations checked if asked."""
    values = {}
    for subset, d in _minors(model):
        if d == 0:
            continue
        values[subset] = np.array(
            [d * np.prod(pt.p[list(subset)]) for pt in points], dtype=complex
        )
    if check:
        check_relations(model.fam, values, len(points))
    return values


def char_variety_fiber(
    fam: ArrangementFamily,
    a: WeightVector,
    x: FiberPoint,
    seed: int = config.DEFAULT_SEED,
    retries: int = config.SPECTRUM_RETRIES,
) -> List[np.ndarray]:
    """Joint eigenvalue tuples (y_1..y_n) of the K_j(x) restricted to Sing."""
    xs = x.numeric()
    blocks = [k_j_restricted_numeric(fam, a, xs, j) for j in range(fam.n)]
    dim = singular_subspace(fam, a).dim
    if dim == 0:
        return []
    rng = np.random.default_rng(seed)
    for attempt in range(retries):
        weights = rng.integers(1, 97, size=fam.n) / rng.integers(1, 13, size=fam.n)
        pencil = sum(w * M for w, M in zip(weights, blocks))
        values, vectors = eig(pencil)
        scale = 1.0 + float(np.abs(values).max())
        gaps = [
            abs(values[i] - values[j]) for i in range(dim) for j in range(i + 1, dim)
        ]
        if min(gaps, default=scale) > 1e-8 * scale and np.linalg.cond(vectors) < 1e8:
            break
        logger.warning("defective pencil on attempt %d, re-randomizing", attempt + 1)
    else:
        raise SpectrumError(f"restricted pencil stayed defective after {retries} tries")

    tuples = []
    for i in range(dim):
        v = vectors[:, i]
        norm = np.vdot(v, v)
        tuples.append(np.array([np.vdot(v, M @ v) / norm for M in blocks]))
    return sorted(tuples, key=lambda y: tuple((round(c.real, 9), round(c.imag, 9)) for c in y))


@dataclass
class SpectrumMatch:
    assignment: List[Tuple[int, int]]
    max_discrepancy: float
    scale: float


def match_spectrum(
    spectrum: Sequence[np.ndarray], images: Sequence[np.ndarray]
) -> SpectrumMatch:
    """Bipartite assignment of eigen-tuples to p-vectors by max coordinate distance."""
    if len(spectrum) != len(images):
        return SpectrumMatch([], float("inf"), 1.0)
    if not spectrum:
        return SpectrumMatch([], 0.0, 1.0)
    cost = np.array([[np.abs(y - p).max() for p in images] for y in spectrum])
    rows, cols = linear_sum_assignment(cost)
    scale = max(1.0, max(float(np.abs(p).max()) for p in images))
    return SpectrumMatch(
        assignment=list(zip(rows.tolist(), cols.tolist())),
        max_discrepancy=float(cost[rows, cols].max()) / scale,
        scale=scale,
    )
