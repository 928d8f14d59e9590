"""Certificate of all identities checked on one weighted fiber.

Every check is recorded as pass, fail or skipped together with the largest
residual seen and the tolerance it was judged against. A check that raises
is recorded as failed; the runner itself never raises for a bad fiber.
"""

import logging
from dataclasses import asdict, dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, config, linalg
from .arrangement import ArrangementFamily, FiberPoint, WeightVector
from .critical import (
    CriticalAlgebraModel,
    MasterContext,
    SolverOptions,
    canonical_iso_condition,
    contravariant_value,
    finite_difference_hessian,
    identity_defect_matrix,
    marked_w_elements,
    relation_residual,
    residue_form,
    solve_critical,
    specialization_vector,
)
from .errors import CritsetError
from .flags import marked_flag_elements, standard_basis
from .lagrangian import (
    LagrangianModel,
    LagrangianPoint,
    build_model,
    chart_jacobian,
    char_variety_fiber,
    fiber_points,
    hessian_on_L,
    in_involution,
    jacobian_I,
    marked_p_elements,
    match_spectrum,
    residue_form_L,
)
from .operators import (
    full_commutator_norms,
    is_s_symmetric,
    k_j_matrix,
    k_j_numeric,
    preserves_sing,
    sing_commutator,
)

logger = logging.getLogger(__name__)

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"

SOLVER_CHECKS = (
    "count",
    "shapovalov_norm",
    "orthogonality",
    "canonical_identity",
    "hessian_finite_difference",
    "reality",
)


@dataclass
class CheckRecord:
    name: str
    status: str
    max_residual: Optional[float] = None
    tolerance: Optional[float] = None
    details: str = ""


@dataclass
class Certificate:
    checks: List[CheckRecord] = field(default_factory=list)
    environment: Dict[str, object] = field(default_factory=dict)
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    def to_dict(self) -> Dict[str, object]:
        return {
            "certified": self.certified,
            "checks": [asdict(c) for c in self.checks],
            "diagnostics": self.diagnostics,
            "environment": self.environment,
        }


def _judge(name: str, residual: float, tolerance: float, details: str = "") -> CheckRecord:
    status = PASS if residual <= tolerance else FAIL
    return CheckRecord(name, status, float(residual), float(tolerance), details)


def _exact(name: str, ok: bool, details: str = "") -> CheckRecord:
    return CheckRecord(name, PASS if ok else FAIL, 0.0 if ok else 1.0, 0.0, details)


class CertificateRunner:
    """Runs the checks in order, sharing the solved fiber between them."""

    def __init__(
        self,
        fam: ArrangementFamily,
        a: WeightVector,
        x: FiberPoint,
        options: Optional[SolverOptions] = None,
        critical: Optional[CriticalAlgebraModel] = None,
    ):
        self.fam = fam
        self.a = a
        self.x = x
        self.options = options or SolverOptions()
        if critical is not None:
            self.__dict__["critical"] = critical

    @cached_property
    def critical(self) -> CriticalAlgebraModel:
        return solve_critical(MasterContext(self.fam, self.a, self.x), self.options)

    @property
    def ctx(self) -> MasterContext:
        return self.critical.ctx

    @cached_property
    def special(self) -> List[np.ndarray]:
        return [specialization_vector(self.ctx, p.u) for p in self.critical.points]

    @cached_property
    def lagrangian(self) -> LagrangianModel:
        return build_model(self.fam, self.a)

    @cached_property
    def fiber(self) -> List[LagrangianPoint]:
        return fiber_points(self.lagrangian, self.x, critical=self.critical)

    def run(self, names: Optional[Sequence[str]] = None) -> Certificate:
        certificate = Certificate(environment=self.environment())
        for name, check in self.checks():
            if names is not None and name not in names:
                continue
            try:
                record = check()
            except (CritsetError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                logger.warning("check %s raised: %s", name, exc)
                record = CheckRecord(name, FAIL, details=f"{type(exc).__name__}: {exc}")
            logger.info("check %-26s %s", name, record.status)
            certificate.checks.append(record)
        certificate.diagnostics = self.diagnostics()
        return certificate

    def diagnostics(self) -> Dict[str, object]:
        """Reported numbers that never decide the verdict."""
        out: Dict[str, object] = {
            "canonical_iso_condition": None,
            "full_commutator_norms": None,
        }
        try:
            out["canonical_iso_condition"] = canonical_iso_condition(self.critical)
        except (CritsetError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            logger.info("no condition number: %s", exc)
        try:
            norms = full_commutator_norms(self.fam, self.a, self.x)
            out["full_commutator_norms"] = {
                f"{i + 1},{j + 1}": value for (i, j), value in norms.items()
            }
        except (CritsetError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            logger.info("no commutator norms: %s", exc)
        return out

    def environment(self) -> Dict[str, object]:
        return {
            "seed": self.options.seed,
            "version": __version__,
            "tolerances": {
                "residual_tol": self.options.residual_tol,
                "dedup_tol": self.options.dedup_tol,
                "degeneracy_tol": self.options.degeneracy_tol,
                "identity_tol": config.IDENTITY_TOL,
                "relation_tol": config.RELATION_TOL,
                "generator_tol": config.GENERATOR_TOL,
                "finite_diff_tol": config.FINITE_DIFF_TOL,
                "residue_tol": config.RESIDUE_TOL,
                "reality_tol": config.REALITY_TOL,
            },
        }

    def checks(self) -> List[Tuple[str, Callable[[], CheckRecord]]]:
        return [
            ("count", self.check_count),
            ("shapovalov_norm", self.check_norm),
            ("orthogonality", self.check_orthogonality),
            ("canonical_identity", self.check_identity),
            ("hessian_finite_difference", self.check_hessian_fd),
            ("eigenvalue_law", self.check_eigenvalues),
            ("k_symmetry", self.check_symmetry),
            ("k_preservation", self.check_preservation),
            ("sing_commutativity", self.check_commutativity),
            ("marked_relations", self.check_relations),
            ("poisson_involution", self.check_involution),
            ("psi_residuals", self.check_psi),
            ("chart_independence", self.check_charts),
            ("hessian_jacobian", self.check_hessian_jacobian),
            ("residue_comparison", self.check_residues),
            ("spectrum_match", self.check_spectrum),
            ("reality", self.check_reality),
        ]

    def check_count(self) -> CheckRecord:
        model = self.critical
        details = f"found {model.count}, |chi| = {model.expected}, method {model.method}"
        record = _judge("count", abs(model.count - model.expected), 0, details)
        if not model.certifying:
            record.status = FAIL
            record.details += "; " + "; ".join(model.notes)
        return record

    def check_norm(self) -> CheckRecord:
        sign = (-1) ** self.fam.k
        worst = 0.0
        for point, F in zip(self.critical.points, self.special):
            value = contravariant_value(self.ctx, F, F)
            worst = max(worst, abs(value - sign * point.hessian) / abs(point.hessian))
        return _judge("shapovalov_norm", worst, config.IDENTITY_TOL)

    def check_orthogonality(self) -> CheckRecord:
        worst = 0.0
        for F1, F2 in combinations(self.special, 2):
            value = contravariant_value(self.ctx, F1, F2)
            worst = max(worst, abs(value) / (np.linalg.norm(F1) * np.linalg.norm(F2)))
        return _judge("orthogonality", worst, config.IDENTITY_TOL)

    def check_identity(self) -> CheckRecord:
        M = identity_defect_matrix(self.critical)
        target = (-1) ** self.fam.k * np.eye(M.shape[0])
        worst = float(np.abs(M - target).max(initial=0.0))
        return _judge("canonical_identity", worst, config.IDENTITY_TOL)

    def check_hessian_fd(self) -> CheckRecord:
        worst = 0.0
        for point in self.critical.points:
            numeric = finite_difference_hessian(self.ctx, point.u)
            worst = max(worst, abs(numeric - point.hessian) / abs(point.hessian))
        return _judge("hessian_finite_difference", worst, config.FINITE_DIFF_TOL)

    def check_eigenvalues(self) -> CheckRecord:
        worst = 0.0
        xs = self.x.numeric()
        for j in range(self.fam.n):
            K = k_j_numeric(self.fam, self.a, xs, j)
            for point, F in zip(self.critical.points, self.special):
                y = point.lagrangian_image[j]
                defect = np.linalg.norm(K @ F - y * F)
                worst = max(worst, defect / (np.linalg.norm(F) * max(1.0, abs(y))))
        return _judge("eigenvalue_law", worst, config.GENERATOR_TOL)

    def _exact_fiber(self, name: str) -> Optional[CheckRecord]:
        if not self.x.is_exact:
            return CheckRecord(name, SKIPPED, details="fiber point is not exact")
        return None

    def check_symmetry(self) -> CheckRecord:
        skipped = self._exact_fiber("k_symmetry")
        if skipped:
            return skipped
        ok = all(
            is_s_symmetric(self.fam, self.a, k_j_matrix(self.fam, self.a, self.x, j).matrix)
            for j in range(self.fam.n)
        )
        return _exact("k_symmetry", ok)

    def check_preservation(self) -> CheckRecord:
        skipped = self._exact_fiber("k_preservation")
        if skipped:
            return skipped
        ok = all(
            preserves_sing(self.fam, self.a, k_j_matrix(self.fam, self.a, self.x, j).matrix)
            for j in range(self.fam.n)
        )
        return _exact("k_preservation", ok)

    def check_commutativity(self) -> CheckRecord:
        skipped = self._exact_fiber("sing_commutativity")
        if skipped:
            return skipped
        ok = all(
            linalg.is_zero_matrix(sing_commutator(self.fam, self.a, self.x, i, j))
            for i, j in combinations(range(self.fam.n), 2)
        )
        return _exact("sing_commutativity", ok)

    def check_relations(self) -> CheckRecord:
        # v_I relations are exact and raise on failure
        marked_flag_elements(self.fam, self.a)
        w = relation_residual(
            self.fam, marked_w_elements(self.critical, check=False), len(self.critical.points)
        )
        p = relation_residual(
            self.fam, marked_p_elements(self.lagrangian, self.fiber, check=False), len(self.fiber)
        )
        return _judge(
            "marked_relations", max(w, p), config.RELATION_TOL, f"v exact, w {w:.2e}, p {p:.2e}"
        )

    def check_involution(self) -> CheckRecord:
        return _exact("poisson_involution", in_involution(self.lagrangian))

    def check_psi(self) -> CheckRecord:
        worst = max((pt.residual for pt in self.fiber), default=0.0)
        distinct = all(
            np.abs(p1.p - p2.p).max() > config.DEDUP_TOL * max(1.0, np.abs(p1.p).max())
            for p1, p2 in combinations(self.fiber, 2)
        )
        record = _judge("psi_residuals", worst, config.GENERATOR_TOL)
        if not distinct:
            record.status = FAIL
            record.details = "two critical points share a Lagrangian image"
        return record

    def check_charts(self) -> CheckRecord:
        charts = list(standard_basis(self.fam, self.fam.k).subsets)[:3]
        worst = 0.0
        for point in self.fiber:
            reference = jacobian_I(self.lagrangian, point, charts[0])
            for I in charts:
                numeric = chart_jacobian(self.lagrangian, point, I)
                worst = max(worst, abs(numeric - reference) / abs(reference))
        return _judge(
            "chart_independence", worst, config.FINITE_DIFF_TOL, f"{len(charts)} charts"
        )

    def check_hessian_jacobian(self) -> CheckRecord:
        I = standard_basis(self.fam, self.fam.k).subsets[0]
        weights = self.a.numeric()
        worst = 0.0
        for point, pt in zip(self.critical.points, self.fiber):
            jac = jacobian_I(self.lagrangian, pt, I)
            via_jacobian = (-1) ** self.fam.n * jac * np.prod(pt.p**2 / weights)
            worst = max(
                worst,
                abs(via_jacobian - point.hessian) / abs(point.hessian),
                abs(hessian_on_L(self.lagrangian, pt) - point.hessian) / abs(point.hessian),
            )
        return _judge("hessian_jacobian", worst, config.IDENTITY_TOL)

    def check_residues(self) -> CheckRecord:
        ones = np.ones(len(self.fiber), dtype=complex)
        pairs = [(ones, ones)]
        for j in range(self.fam.n):
            pairs.append((np.array([pt.p[j] for pt in self.fiber]), ones))
        worst = 0.0
        for f, g in pairs:
            left = residue_form(self.critical, f, g)
            right = residue_form_L(self.lagrangian, self.fiber, f, g)
            worst = max(worst, abs(left - right) / max(abs(left), 1e-300))
        return _judge("residue_comparison", worst, config.RESIDUE_TOL)

    def check_spectrum(self) -> CheckRecord:
        spectrum = char_variety_fiber(self.fam, self.a, self.x, seed=self.options.seed)
        match = match_spectrum(spectrum, [pt.p for pt in self.fiber])
        return _judge(
            "spectrum_match",
            match.max_discrepancy,
            config.IDENTITY_TOL,
            f"{len(spectrum)} eigen-tuples, {len(self.fiber)} fiber points",
        )

    def check_reality(self) -> CheckRecord:
        if not (self.a.is_real_positive and self.x.is_real):
            return CheckRecord("reality", SKIPPED, details="data not real-positive")
        worst = max(
            (float(np.abs(p.u.imag).max()) for p in self.critical.points), default=0.0
        )
        record = _judge("reality", worst, config.REALITY_TOL)
        if self.critical.count != self.critical.expected:
            record.status = FAIL
            record.details = "count differs from |chi|"
        return record


def certify(
    fam: ArrangementFamily,
    a: WeightVector,
    x: FiberPoint,
    options: Optional[SolverOptions] = None,
    names: Optional[Sequence[str]] = None,
) -> Certificate:
    return CertificateRunner(fam, a, x, options).run(names)
