"""Transport of flat sections kappa dI/dz_j = K_j(z) I along paths in the base.

The system is integrated on Sing coordinates, where it has dimension |chi|.
Along a straight segment x(s) = x0 + s dx the equations collapse to
dI/ds = (1/kappa) sum_C (df_C(dx) / f_C(x(s))) L_C|Sing I.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from . import config, linalg
from .arrangement import ArrangementFamily, FiberPoint, WeightVector, circuits
from .critical import MasterContext, SolverOptions, solve_critical, specialization_vector
from .errors import DiscriminantError, TransportError
from .flags import singular_subspace
from .operators import restricted_circuit_blocks

logger = logging.getLogger(__name__)


@dataclass
class TransportTask:
    fam: ArrangementFamily
    a: WeightVector
    kappa: complex
    path: List[np.ndarray]
    initial: np.ndarray  # coordinates in the Sing basis at path[0]

    def length(self) -> float:
        return float(
            sum(np.linalg.norm(b - a) for a, b in zip(self.path[:-1], self.path[1:]))
        )


@dataclass
class TransportResult:
    end: np.ndarray           # Sing coordinates at the path end
    flag_vector: np.ndarray   # the same vector in the standard basis of F^k
    error_estimate: float
    evaluations: int


@dataclass
class LoopResult:
    defect: float
    budget: float
    error_estimate: float

    @property
    def flat(self) -> bool:
        return self.defect <= self.budget


class RestrictedConnection:
    """Numeric K_j restricted to Sing, assembled from per-circuit blocks."""

    def __init__(self, fam: ArrangementFamily, a: WeightVector):
        self.fam = fam
        self.blocks = restricted_circuit_blocks(fam, a)
        self.lams = [linalg.to_complex_array(c.lam) for c, _ in self.blocks]
        sing = singular_subspace(fam, a)
        self.W = linalg.to_complex_array(sing.W)
        self.P = linalg.to_complex_array(sing.coordinate_map)
        self.dim = sing.dim

    def along(self, x: np.ndarray, dx: np.ndarray) -> np.ndarray:
        """sum_j dx_j K_j(x) on Sing."""
        A = np.zeros((self.dim, self.dim), dtype=complex)
        for lam, (_, block) in zip(self.lams, self.blocks):
            rate = lam @ dx
            if rate:
                A += (rate / (lam @ x)) * block
        return A

    def k_matrix(self, x: np.ndarray, j: int) -> np.ndarray:
        e = np.zeros(self.fam.n, dtype=complex)
        e[j] = 1.0
        return self.along(x, e)


def segment_clearance(fam: ArrangementFamily, x0: np.ndarray, x1: np.ndarray):
    """Smallest |f_C| on the segment and the circuit attaining it."""
    best: Tuple[float, Optional[Tuple[int, ...]]] = (np.inf, None)
    for circuit in circuits(fam):
        lam = linalg.to_complex_array(circuit.lam)
        f0, df = lam @ x0, lam @ (x1 - x0)
        s = 0.0 if df == 0 else float(np.clip(-(np.conj(f0) * df).real / abs(df) ** 2, 0, 1))
        value = abs(f0 + s * df)
        if value < best[0]:
            best = (value, circuit.members)
    return best


def check_path(task: TransportTask, near_disc_tol: float = config.NEAR_DISC_TOL) -> float:
    """Raise when a segment comes within near_disc_tol * |x| of the discriminant."""
    clearance = np.inf
    for x0, x1 in zip(task.path[:-1], task.path[1:]):
        value, members = segment_clearance(task.fam, x0, x1)
        scale = max(1.0, float(np.linalg.norm(x0)), float(np.linalg.norm(x1)))
        if value <= near_disc_tol * scale:
            raise DiscriminantError([members], detail="path passes too close")
        clearance = min(clearance, value)
    return clearance


def _integrate(
    conn: RestrictedConnection,
    path: Sequence[np.ndarray],
    kappa: complex,
    initial: np.ndarray,
    rtol: float,
) -> Tuple[np.ndarray, int]:
    state = np.asarray(initial, dtype=complex)
    evaluations = 0
    for x0, x1 in zip(path[:-1], path[1:]):
        dx = x1 - x0
        if not np.any(dx):
            continue

        def rhs(s, y, x0=x0, dx=dx):
            return conn.along(x0 + s * dx, dx) @ y / kappa

        atol = rtol * 1e-3 * max(1.0, float(np.linalg.norm(state)))
        sol = solve_ivp(rhs, (0.0, 1.0), state, method="RK45", rtol=rtol, atol=atol)
        if not sol.success:
            raise TransportError(f"integration failed: {sol.message}")
        state = sol.y[:, -1]
        evaluations += sol.nfev
    return state, evaluations


def transport(
    task: TransportTask,
    ode_tol: float = config.ODE_TOL,
    near_disc_tol: float = config.NEAR_DISC_TOL,
) -> TransportResult:
    """Flat section at the end of the path, with a two-tolerance error estimate."""
    if task.kappa == 0:
        raise ValueError("kappa must be nonzero")
    path = [np.asarray(x, dtype=complex) for x in task.path]
    task.path = path
    check_path(task, near_disc_tol)
    conn = RestrictedConnection(task.fam, task.a)
    initial = np.asarray(task.initial, dtype=complex)
    if initial.shape != (conn.dim,):
        raise ValueError(f"initial vector needs {conn.dim} Sing coordinates")

    coarse, n1 = _integrate(conn, path, task.kappa, initial, ode_tol)
    fine, n2 = _integrate(conn, path, task.kappa, initial, ode_tol / 10)
    estimate = float(np.linalg.norm(coarse - fine))
    logger.debug("transport used %d rhs evaluations, error estimate %.2e", n1 + n2, estimate)
    return TransportResult(
        end=fine, flag_vector=conn.W @ fine, error_estimate=estimate, evaluations=n1 + n2
    )


def rectangle_loop(x: Sequence[complex], i: int, j: int, side: float) -> List[np.ndarray]:
    """Closed rectangle through x in the (z_i, z_j) plane."""
    x = np.asarray(x, dtype=complex)
    ei = np.zeros_like(x)
    ej = np.zeros_like(x)
    ei[i] = side
    ej[j] = side
    return [x, x + ei, x + ei + ej, x + ej, x.copy()]


def loop_flatness(
    task: TransportTask,
    ode_tol: float = config.ODE_TOL,
    near_disc_tol: float = config.NEAR_DISC_TOL,
) -> LoopResult:
    """Relative change of a section transported around a closed loop."""
    if np.linalg.norm(np.asarray(task.path[0]) - np.asarray(task.path[-1])) > 0:
        raise ValueError("loop must start and end at the same point")
    result = transport(task, ode_tol, near_disc_tol)
    start = np.asarray(task.initial, dtype=complex)
    defect = float(np.linalg.norm(result.end - start) / np.linalg.norm(start))
    return LoopResult(
        defect=defect,
        budget=10 * ode_tol * task.length(),
        error_estimate=result.error_estimate,
    )


def mixed_partial_defect(
    fam: ArrangementFamily,
    a: WeightVector,
    x: Sequence[complex],
    I: Sequence[complex],
    i: int,
    j: int,
    kappa: complex,
    step: float = 1e-5,
) -> float:
    """|d_i(K_j I) - d_j(K_i I)| for the flat section through I, by central differences."""
    conn = RestrictedConnection(fam, a)
    x = np.asarray(x, dtype=complex)
    I = np.asarray(I, dtype=complex)
    h = step * (1.0 + float(np.abs(x).max()))

    def derivative(m: int, target: int) -> np.ndarray:
        e = np.zeros_like(x)
        e[m] = h
        return (conn.k_matrix(x + e, target) - conn.k_matrix(x - e, target)) / (2 * h)

    Ki, Kj = conn.k_matrix(x, i), conn.k_matrix(x, j)
    value = (derivative(i, j) - derivative(j, i)) @ I + (Kj @ Ki - Ki @ Kj) @ I / kappa
    scale = float(np.linalg.norm(I)) * (1.0 + max(np.abs(Ki).max(), np.abs(Kj).max()))
    return float(np.linalg.norm(value)) / scale


def direction_drift(
    fam: ArrangementFamily,
    a: WeightVector,
    x_start: FiberPoint,
    x_end: FiberPoint,
    kappa: float = 1e-4,
    options: Optional[SolverOptions] = None,
    ode_tol: float = config.ODE_TOL,
) -> float:
    """Angle between a transported special vector and the continued special vector.

    The special vector whose eigenvalue along the segment has the largest real
    part is transported for small kappa. A scalar shift keeps the section of
    unit size without changing its direction.
    """
    conn = RestrictedConnection(fam, a)
    x0, x1 = x_start.numeric(), x_end.numeric()
    dx = x1 - x0
    start = solve_critical(MasterContext(fam, a, x_start), options)
    chosen = max(start.points, key=lambda p: (p.lagrangian_image @ dx).real)
    state = conn.P @ specialization_vector(start.ctx, chosen.u)
    state = state / np.linalg.norm(state)

    def rhs(s, y):
        A = conn.along(x0 + s * dx, dx)
        shift = np.vdot(y, A @ y) / np.vdot(y, y)
        return (A @ y - shift * y) / kappa

    sol = solve_ivp(rhs, (0.0, 1.0), state, method="RK45", rtol=ode_tol, atol=ode_tol * 1e-3)
    if not sol.success:
        raise TransportError(f"integration failed: {sol.message}")
    moved = conn.W @ sol.y[:, -1]

    end = solve_critical(MasterContext(fam, a, x_end), options)
    follower = min(end.points, key=lambda p: np.linalg.norm(p.u - chosen.u))
    target = specialization_vector(end.ctx, follower.u)
    cosine = abs(np.vdot(moved, target)) / (np.linalg.norm(moved) * np.linalg.norm(target))
    return float(np.arccos(min(1.0, cosine)))
