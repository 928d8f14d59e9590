"""Critical points of the master function on a fiber and their algebra.

The master function is Phi(t) = sum_j a_j log f_j(t) with f_j = g_j + x_j.
Its critical set is finite for an unbalanced weight, of size |chi| counted
with multiplicity. The algebra of functions on it is modelled by evaluation
at nondegenerate points.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.polynomial.polynomial as npp
import sympy as sp

from . import config
from .arrangement import (
    ArrangementFamily,
    FiberPoint,
    WeightVector,
    discriminant_membership,
    euler_characteristic,
    is_unbalanced,
)
from .errors import ArrangementError, ConsistencyError, DegenerateError, DiscriminantError
from .linalg import central_jacobian, to_complex_array
from .flags import relation_residuals, singular_subspace, standard_basis
from .regions import Region, bounded_regions

logger = logging.getLogger(__name__)


class MasterContext:
    """Fiber data with numeric arrays for fast evaluation of f_j and Phi."""

    def __init__(self, fam: ArrangementFamily, a: WeightVector, x: FiberPoint):
        self.fam = fam
        self.a = a
        self.x = x
        self.B = fam.numeric_B()
        self.weights = a.numeric()
        self.shift = x.numeric()
        self.top = standard_basis(fam, fam.k).subsets
        self.top_index = np.array(self.top, dtype=int).reshape(len(self.top), fam.k)
        self.exact_minors = [fam.minor(s) for s in self.top]
        self.minors = np.array([complex(d) for d in self.exact_minors], dtype=complex)
        self.gram = np.prod(self.weights[self.top_index], axis=1)

    @property
    def k(self) -> int:
        return self.fam.k

    @property
    def n(self) -> int:
        return self.fam.n

    @property
    def real_positive(self) -> bool:
        return self.a.is_real_positive and self.x.is_exact and self.x.is_real

    def f(self, t: Sequence[complex]) -> np.ndarray:
        return np.asarray(t, dtype=complex) @ self.B + self.shift

    def checked_f(self, t: Sequence[complex]) -> np.ndarray:
        values = self.f(t)
        tiny = 1e-300 + 1e-15 * np.abs(values).max(initial=1.0)
        on = np.flatnonzero(np.abs(values) <= tiny)
        if on.size:
            raise ArrangementError(f"t lies on hyperplane H_{on[0] + 1}")
        return values

    def phi(self, t: Sequence[complex]) -> complex:
        return complex(np.sum(self.weights * np.log(self.f(t).astype(complex))))


@dataclass
class SolverOptions:
    residual_tol: float = config.RESIDUAL_TOL
    dedup_tol: float = config.DEDUP_TOL
    degeneracy_tol: float = config.DEGENERACY_TOL
    cluster_tol: float = config.ROOT_CLUSTER_TOL
    max_iter: int = config.NEWTON_MAX_ITER
    max_halvings: int = config.NEWTON_MAX_HALVINGS
    budget_factor: int = config.MULTISTART_FACTOR
    seed: int = config.DEFAULT_SEED


@dataclass
class CriticalPoint:
    u: np.ndarray
    residual: float
    residual_tol: float
    hessian: complex
    lagrangian_image: np.ndarray
    multiplicity: int = 1
    nondegenerate: bool = True


@dataclass
class CriticalAlgebraModel:
    ctx: MasterContext
    points: List[CriticalPoint]
    expected: int
    method: str
    undercount: bool = False
    notes: List[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return sum(p.multiplicity for p in self.points)

    @property
    def certifying(self) -> bool:
        return not self.undercount and all(p.nondegenerate for p in self.points)

    def evaluate(self, func: Callable[[CriticalPoint], complex]) -> np.ndarray:
        return np.array([func(p) for p in self.points], dtype=complex)

    def require_nondegenerate(self) -> None:
        bad = [i for i, p in enumerate(self.points) if not p.nondegenerate]
        if bad:
            raise DegenerateError(f"degenerate critical point(s) at index {bad}")


def master_gradient(ctx: MasterContext, t: Sequence[complex]) -> Tuple[np.ndarray, np.ndarray]:
    """(dPhi/dt_i, dPhi/dz_j) at t."""
    ratios = ctx.weights / ctx.checked_f(t)
    return ctx.B @ ratios, ratios


def hessian_matrix(ctx: MasterContext, t: Sequence[complex]) -> np.ndarray:
    values = ctx.checked_f(t)
    return -(ctx.B * (ctx.weights / values**2)) @ ctx.B.T


def _hessian_terms(ctx: MasterContext, values: np.ndarray) -> np.ndarray:
    ratios = ctx.weights / values**2
    return ctx.minors**2 * np.prod(ratios[ctx.top_index], axis=1)


def master_hessian(ctx: MasterContext, t: Sequence[complex]) -> complex:
    """(-1)^k sum_I d_I^2 prod_{i in I} a_i / f_i^2."""
    terms = _hessian_terms(ctx, ctx.checked_f(t))
    return complex((-1) ** ctx.k * terms.sum())


def finite_difference_hessian(
    ctx: MasterContext, t: Sequence[complex], step: float = config.FINITE_DIFF_STEP
) -> complex:
    """Determinant of the extrapolated central-difference Jacobian of the gradient.

    The step is ``step`` times the distance from t to the nearest hyperplane,
    measured in t.
    """
    t = np.asarray(t, dtype=complex)
    reach = np.abs(ctx.B).sum(axis=0)
    h = step * float((np.abs(ctx.checked_f(t)) / reach).min())
    J = central_jacobian(lambda s: master_gradient(ctx, s)[0], t, np.full(ctx.k, h))
    return complex(np.linalg.det(J))


def _residual(ctx: MasterContext, t: np.ndarray) -> float:
    grad, _ = master_gradient(ctx, t)
    return float(np.abs(grad).max())


def _residual_tol(ctx: MasterContext, t: np.ndarray, options: SolverOptions) -> float:
    values = np.abs(ctx.f(t))
    return options.residual_tol * (1.0 + np.linalg.norm(ctx.weights) / values.min())


def _newton(
    ctx: MasterContext,
    start: np.ndarray,
    options: SolverOptions,
    region: Optional[Region] = None,
) -> Optional[np.ndarray]:
    """Damped Newton on the gradient; halving keeps t inside ``region`` if given."""
    t = np.asarray(start, dtype=complex)
    escape = 1e8 * (1.0 + float(np.abs(ctx.shift).max(initial=0.0)))
    for _ in range(options.max_iter):
        try:
            grad, _ = master_gradient(ctx, t)
            step = np.linalg.solve(hessian_matrix(ctx, t), -grad)
        except (ArrangementError, np.linalg.LinAlgError):
            return None
        norm = np.linalg.norm(grad)
        if norm <= _residual_tol(ctx, t, options):
            return _polish(ctx, t)
        alpha = 1.0
        for _ in range(options.max_halvings):
            candidate = t + alpha * step
            values = ctx.f(candidate)
            inside = region is None or region.contains(values)
            if inside and np.all(values != 0):
                if np.linalg.norm(ctx.B @ (ctx.weights / values)) < norm:
                    break
            alpha /= 2
        else:
            return None
        t = candidate
        if np.abs(t).max() > escape:
            return None
    return None


def _polish(ctx: MasterContext, t: np.ndarray, steps: int = 2) -> np.ndarray:
    """Full Newton steps kept only while they lower the residual."""
    best, best_residual = t, _residual(ctx, t)
    for _ in range(steps):
        try:
            grad, _ = master_gradient(ctx, best)
            candidate = best + np.linalg.solve(hessian_matrix(ctx, best), -grad)
            residual = _residual(ctx, candidate)
        except (ArrangementError, np.linalg.LinAlgError):
            break
        if residual >= best_residual:
            break
        best, best_residual = candidate, residual
    return best


def _cleared_newton(
    ctx: MasterContext, start: np.ndarray, options: SolverOptions
) -> Optional[np.ndarray]:
    """Damped Newton on P(t) = prod_l f_l(t) * grad Phi(t).

    P is polynomial, so far-away iterates are pulled back instead of running
    off along grad Phi ~ 1/t. With c = sum_l b_l / f_l the Newton step is
    -(H + grad c^T)^{-1} grad and the merit log|P| never forms the product.
    Iterates drifting onto an intersection of two hyperplanes, where P also
    vanishes, are dropped.
    """
    t = np.asarray(start, dtype=complex)
    escape = 1e8 * (1.0 + float(np.abs(ctx.shift).max(initial=0.0)))

    def merit(values: np.ndarray, grad: np.ndarray) -> float:
        return float(np.sum(np.log(np.abs(values))) + np.log(np.linalg.norm(grad)))

    for _ in range(options.max_iter):
        values = ctx.f(t)
        if np.abs(values).min() <= 1e-9 * (1.0 + float(np.abs(t).max())):
            return None
        ratios = ctx.weights / values
        grad = ctx.B @ ratios
        if np.linalg.norm(grad) <= _residual_tol(ctx, t, options):
            return _polish(ctx, t)
        H = -(ctx.B * (ratios / values)) @ ctx.B.T
        c = ctx.B @ (1.0 / values)
        try:
            step = np.linalg.solve(H + np.outer(grad, c), -grad)
        except np.linalg.LinAlgError:
            return None
        current = merit(values, grad)
        alpha = 1.0
        for _ in range(options.max_halvings):
            candidate = t + alpha * step
            moved = ctx.f(candidate)
            if np.all(moved != 0):
                moved_grad = ctx.B @ (ctx.weights / moved)
                if np.linalg.norm(moved_grad) > 0 and merit(moved, moved_grad) < current:
                    break
            alpha /= 2
        else:
            return None
        t = candidate
        if np.abs(t).max() > escape:
            return None
    return None


@dataclass
class ParameterPath:
    """Weights and shift moved from a start fiber to a target fiber.

    Both follow start + phi(s) (target - start) for real s in [0, 1], where
    phi(s) = s / (s + gamma (1 - s)) bends the segment through the complex
    plane. For generic gamma the path misses the discriminant and the
    weights where two critical points collide.
    """

    B: np.ndarray
    start_weights: np.ndarray
    target_weights: np.ndarray
    start_shift: np.ndarray
    target_shift: np.ndarray
    gamma: complex

    def at(self, s: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(weights, shift, d weights / ds, d shift / ds) at s."""
        denominator = s + self.gamma * (1.0 - s)
        phi = s / denominator
        dphi = self.gamma / denominator**2
        dw = self.target_weights - self.start_weights
        dx = self.target_shift - self.start_shift
        return (
            self.start_weights + phi * dw,
            self.start_shift + phi * dx,
            dphi * dw,
            dphi * dx,
        )

    def tangent(self, s: float, t: np.ndarray) -> np.ndarray:
        """dt/ds keeping grad Phi = 0 along the path."""
        w, x, dw, dx = self.at(s)
        values = t @ self.B + x
        H = -(self.B * (w / values**2)) @ self.B.T
        dgrad = self.B @ (dw / values - w * dx / values**2)
        return np.linalg.solve(H, -dgrad)

    def correct(self, s: float, t: np.ndarray) -> Optional[np.ndarray]:
        """Newton at fixed s; None unless the corrections contract."""
        w, x, _, _ = self.at(s)
        previous = np.inf
        for _ in range(config.HOMOTOPY_CORRECTOR_ITER):
            values = t @ self.B + x
            if np.abs(values).min() <= 1e-12 * (1.0 + float(np.abs(t).max())):
                return None
            H = -(self.B * (w / values**2)) @ self.B.T
            delta = np.linalg.solve(H, -(self.B @ (w / values)))
            size = float(np.linalg.norm(delta))
            t = t + delta
            if size <= 1e-10 * (1.0 + float(np.linalg.norm(t))):
                return t
            if size > 0.5 * previous:
                return None
            previous = size
        return None


def track_path(path: ParameterPath, start: np.ndarray) -> Optional[np.ndarray]:
    """Follow one critical point from s = 0 to s = 1 by predictor-corrector steps."""
    t = np.asarray(start, dtype=complex)
    s, ds = 0.0, config.HOMOTOPY_INITIAL_STEP
    while s < 1.0:
        ds = min(ds, 1.0 - s)
        try:
            corrected = path.correct(s + ds, t + ds * path.tangent(s, t))
        except np.linalg.LinAlgError:
            corrected = None
        if corrected is None:
            ds /= 2
            if ds < config.HOMOTOPY_MIN_STEP:
                logger.debug("path lost at s=%.6f", s)
                return None
            continue
        t, s = corrected, s + ds
        ds = min(2 * ds, config.HOMOTOPY_MAX_STEP)
    return t


def _start_fiber(ctx: MasterContext, rng: np.random.Generator) -> FiberPoint:
    """x itself when it is real and exact, else a random real fiber off the discriminant."""
    if ctx.x.is_exact and ctx.x.is_real:
        return ctx.x
    for _ in range(config.HOMOTOPY_START_ATTEMPTS):
        candidate = FiberPoint(
            tuple(
                sp.Rational(int(rng.integers(-9, 10)), int(rng.integers(1, 5)))
                for _ in range(ctx.n)
            )
        )
        if not discriminant_membership(ctx.fam, candidate).on:
            return candidate
    raise ArrangementError("no real start fiber off the discriminant")


def _make_point(
    ctx: MasterContext, u: np.ndarray, options: SolverOptions, multiplicity: int = 1
) -> CriticalPoint:
    values = ctx.checked_f(u)
    terms = _hessian_terms(ctx, values)
    hessian = complex((-1) ** ctx.k * terms.sum())
    scale = float(np.abs(terms).sum())
    return CriticalPoint(
        u=np.asarray(u, dtype=complex),
        residual=_residual(ctx, u),
        residual_tol=_residual_tol(ctx, u, options),
        hessian=hessian,
        lagrangian_image=ctx.weights / values,
        multiplicity=multiplicity,
        nondegenerate=multiplicity == 1 and abs(hessian) > options.degeneracy_tol * scale,
    )


def _is_new(u: np.ndarray, found: Sequence[np.ndarray], tol: float) -> bool:
    return all(
        np.linalg.norm(u - v) > tol * (1.0 + max(np.linalg.norm(u), np.linalg.norm(v)))
        for v in found
    )


def canonical_key(u: np.ndarray) -> Tuple[float, ...]:
    key = []
    for value in np.atleast_1d(u):
        key.extend((round(float(value.real), 9), round(float(value.imag), 9)))
    return tuple(key)


def _solve_univariate(ctx: MasterContext, options: SolverOptions) -> List[CriticalPoint]:
    """Roots of sum_j a_j b_j prod_{i != j} f_i by companion-matrix eigenvalues."""
    b = ctx.B[0]
    coeffs = np.zeros(1, dtype=complex)
    for j in range(ctx.n):
        term = np.array([ctx.weights[j] * b[j]], dtype=complex)
        for i in range(ctx.n):
            if i != j:
                term = npp.polymul(term, np.array([ctx.shift[i], b[i]]))
        coeffs = npp.polyadd(coeffs, term)
    coeffs = npp.polytrim(coeffs, tol=0)
    roots = npp.polyroots(coeffs) if len(coeffs) > 1 else np.array([], dtype=complex)

    clusters: List[List[complex]] = []
    for root in sorted(roots, key=lambda r: (r.real, r.imag)):
        for cluster in clusters:
            centre = np.mean(cluster)
            if abs(root - centre) <= options.cluster_tol * (1.0 + abs(centre)):
                cluster.append(root)
                break
        else:
            clusters.append([root])

    points = []
    for cluster in clusters:
        centre = np.array([np.mean(cluster)], dtype=complex)
        if np.abs(ctx.f(centre)).min() <= 1e-12 * (1.0 + np.abs(centre).max()):
            logger.debug("dropping root %s on a hyperplane", centre)
            continue
        if len(cluster) == 1:
            polished = _newton(ctx, centre, options)
            centre = polished if polished is not None else centre
        points.append(_make_point(ctx, centre, options, multiplicity=len(cluster)))
    return points


def _solve_bounded_regions(
    ctx: MasterContext, options: SolverOptions
) -> List[np.ndarray]:
    """One critical point per bounded region, by Newton from region centroids."""
    found = []
    for region in bounded_regions(ctx.fam, ctx.x):
        start = np.array([complex(c) for c in region.centroid()], dtype=complex)
        u = _newton(ctx, start, options, region=region)
        if u is None:
            logger.warning("Newton failed in region %s", region.signs)
            continue
        found.append(u.real.astype(complex))
    return found


def _solve_homotopy(ctx: MasterContext, options: SolverOptions) -> List[np.ndarray]:
    """Critical points of a real positive start fiber, continued to the target data."""
    rng = np.random.default_rng(options.seed)
    if ctx.a.is_real_positive:
        start_a = ctx.a
    else:
        start_a = WeightVector(tuple(sp.Integer(1) for _ in range(ctx.n)))
    start = MasterContext(ctx.fam, start_a, _start_fiber(ctx, rng))
    path = ParameterPath(
        B=ctx.B,
        start_weights=start.weights,
        target_weights=ctx.weights,
        start_shift=start.shift,
        target_shift=ctx.shift,
        gamma=complex(np.exp(2j * np.pi * rng.uniform(0.05, 0.45))),
    )
    found: List[np.ndarray] = []
    lost = 0
    for u0 in _solve_bounded_regions(start, options):
        end = track_path(path, u0)
        u = _newton(ctx, end, options) if end is not None else None
        if u is None:
            lost += 1
        elif _is_new(u, found, options.dedup_tol):
            found.append(u)
        else:
            logger.debug("two paths ended at the same point")
    if lost:
        logger.warning("%d homotopy path(s) lost", lost)
    return found


def _solve_multistart(
    ctx: MasterContext,
    options: SolverOptions,
    expected: int,
    found: List[np.ndarray],
) -> List[np.ndarray]:
    rng = np.random.default_rng(options.seed)
    scale = 1.0 + float(np.abs(ctx.shift).max(initial=0.0))
    budget = options.budget_factor * max(expected, 1)
    for attempt in range(budget):
        if len(found) >= expected:
            break
        start = scale * (rng.standard_normal(ctx.k) + 1j * rng.standard_normal(ctx.k))
        u = _cleared_newton(ctx, start, options)
        if u is not None and _is_new(u, found, options.dedup_tol):
            logger.debug("seed %d found point %d", attempt, len(found) + 1)
            found.append(u)
    return found


def solve_critical(
    ctx: MasterContext, options: Optional[SolverOptions] = None
) -> CriticalAlgebraModel:
    """Find all critical points of the master function on the fiber."""
    options = options or SolverOptions()
    report = discriminant_membership(ctx.fam, ctx.x)
    if report.on:
        raise DiscriminantError([c.members for c in report.violating])
    if not is_unbalanced(ctx.fam, ctx.a).unbalanced:
        raise ArrangementError("weight is not unbalanced: critical set is not finite")
    expected = abs(euler_characteristic(ctx.fam))

    if ctx.k == 1:
        method = "companion"
        points = _solve_univariate(ctx, options)
    else:
        found: List[np.ndarray] = []
        if ctx.real_positive:
            method = "regions"
            for u in _solve_bounded_regions(ctx, options):
                if _is_new(u, found, options.dedup_tol):
                    found.append(u)
        else:
            method = "homotopy"
            found = _solve_homotopy(ctx, options)
        if len(found) < expected:
            method += "+multistart"
            found = _solve_multistart(ctx, options, expected, found)
        points = [_make_point(ctx, u, options) for u in found]

    points.sort(key=lambda p: canonical_key(p.u))
    model = CriticalAlgebraModel(ctx=ctx, points=points, expected=expected, method=method)
    if model.count != expected:
        model.undercount = model.count < expected
        message = f"found {model.count} critical points, expected |chi| = {expected}"
        model.notes.append(message)
        logger.warning(message)
    degenerate = sum(1 for p in points if not p.nondegenerate)
    if degenerate:
        model.notes.append(f"{degenerate} degenerate point(s); run is not certifying")
        logger.warning("%d degenerate critical point(s)", degenerate)
    logger.info("solved fiber by %s: %d point(s)", method, len(points))
    return model


def specialization_vector(ctx: MasterContext, u: Sequence[complex]) -> np.ndarray:
    """F(u) in the standard basis: d_I / prod_{i in I} f_i(u)."""
    values = ctx.checked_f(u)
    return ctx.minors / np.prod(values[ctx.top_index], axis=1)


def special_vectors(model: CriticalAlgebraModel) -> np.ndarray:
    """Columns F(u) for every point of the model."""
    return np.column_stack(
        [specialization_vector(model.ctx, p.u) for p in model.points]
    ) if model.points else np.zeros((len(model.ctx.top), 0), dtype=complex)


def contravariant_value(ctx: MasterContext, u: np.ndarray, v: np.ndarray) -> complex:
    return complex(np.sum(ctx.gram * u * v))


def canonical_iso(model: CriticalAlgebraModel, g_values: Sequence[complex]) -> np.ndarray:
    """E(g) = sum_u g(u) / Hess(u) F(u)."""
    model.require_nondegenerate()
    hess = model.evaluate(lambda p: p.hessian)
    return special_vectors(model) @ (np.asarray(g_values, dtype=complex) / hess)


def canonical_iso_condition(model: CriticalAlgebraModel) -> float:
    model.require_nondegenerate()
    hess = model.evaluate(lambda p: p.hessian)
    return float(np.linalg.cond(special_vectors(model) / hess))


def s_projection(model: CriticalAlgebraModel, F: Sequence[complex]) -> np.ndarray:
    """Values S^(a)(F, F(u)) at every point."""
    F = np.asarray(F, dtype=complex)
    return np.array(
        [contravariant_value(model.ctx, F, specialization_vector(model.ctx, p.u))
         for p in model.points],
        dtype=complex,
    )


def identity_defect_matrix(model: CriticalAlgebraModel) -> np.ndarray:
    """Matrix of E o [S^(a)] on the Sing basis, which should be (-1)^k id."""
    W = to_complex_array(singular_subspace(model.ctx.fam, model.ctx.a).W)
    columns = []
    for i in range(W.shape[1]):
        image = canonical_iso(model, s_projection(model, W[:, i]))
        coords, *_ = np.linalg.lstsq(W, image, rcond=None)
        columns.append(coords)
    return np.column_stack(columns) if columns else np.zeros((0, 0), dtype=complex)


def marked_w_elements(
    model: CriticalAlgebraModel, check: bool = True
) -> Dict[Tuple[int, ...], np.ndarray]:
    """w_I = d_I prod_{i in I} a_i / f_i at every point, relations checked if asked."""
    ctx = model.ctx
    values = {}
    for pos, subset in enumerate(ctx.top):
        values[subset] = np.array(
            [ctx.minors[pos] * np.prod(p.lagrangian_image[list(subset)]) for p in model.points],
            dtype=complex,
        )
    if check:
        check_relations(ctx.fam, values, len(model.points))
    return values


def relation_residual(
    fam: ArrangementFamily, values: Dict[Tuple[int, ...], np.ndarray], size: int
) -> float:
    """Largest relative residual of sum_j value(j, i_2, ..., i_k) = 0."""
    zero = np.zeros(size, dtype=complex)
    scale = max([float(np.abs(v).max(initial=0.0)) for v in values.values()] + [1.0])
    worst = 0.0
    for total in relation_residuals(fam, values, zero).values():
        worst = max(worst, float(np.abs(total).max(initial=0.0)) / scale)
    return worst


def check_relations(
    fam: ArrangementFamily, values: Dict[Tuple[int, ...], np.ndarray], size: int
) -> float:
    worst = relation_residual(fam, values, size)
    if worst > config.RELATION_TOL:
        raise ConsistencyError(f"marked relation residual {worst:.3e}")
    return worst


def residue_form(
    model: CriticalAlgebraModel, f_values: Sequence[complex], g_values: Sequence[complex]
) -> complex:
    """sum_u f(u) g(u) / Hess(u)."""
    model.require_nondegenerate()
    hess = model.evaluate(lambda p: p.hessian)
    return complex(np.sum(np.asarray(f_values) * np.asarray(g_values) / hess))
