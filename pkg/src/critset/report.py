"""JSON and CSV renderings of the results of each command.

Reports are plain dicts with a fixed key order, so that the same input, flags
and seed always serialize to the same bytes. Exact values are "p/q" strings,
numeric complex values are [re, im] pairs and all labels are 1-based.
"""

import csv
import json
import logging
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np
import sympy as sp

from . import config
from .arrangement import (
    ArrangementFamily,
    FiberPoint,
    WeightVector,
    circuits,
    dense_edges,
    discriminant_membership,
    edge_label,
    euler_characteristic,
    independent_subsets,
    is_unbalanced,
)
from .certificate import SOLVER_CHECKS, Certificate, CertificateRunner
from .critical import CriticalAlgebraModel, MasterContext, SolverOptions, solve_critical
from .errors import ArrangementError
from .flags import singular_subspace, standard_basis
from .lagrangian import build_model, char_variety_fiber, fiber_points, match_spectrum
from .linalg import format_scalar
from .operators import full_commutator_norms, k_j_matrix
from .transport import TransportResult, TransportTask

logger = logging.getLogger(__name__)


def subset_label(subset: Sequence[int]) -> str:
    return "{" + ",".join(str(i + 1) for i in subset) + "}"


def _number(value: complex) -> List[float]:
    z = complex(value)
    return [float(z.real), float(z.imag)]


def _vector(values: Sequence[complex]) -> List[List[float]]:
    return [_number(v) for v in values]


def _matrix(M: Optional[sp.Matrix]) -> Optional[List[List[Any]]]:
    if M is None:
        return None
    return [[format_scalar(M[i, j]) for j in range(M.cols)] for i in range(M.rows)]


def dumps(report: Dict[str, Any]) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False, allow_nan=True)


def analyze_report(fam: ArrangementFamily, a: WeightVector, x: FiberPoint) -> Dict[str, Any]:
    """Combinatorics of the family and the position of x."""
    disc = discriminant_membership(fam, x)
    unbalance = is_unbalanced(fam, a)
    report: Dict[str, Any] = {
        "k": fam.k,
        "n": fam.n,
        "chi": euler_characteristic(fam),
        "independent_counts": [len(independent_subsets(fam, p)) for p in range(fam.k + 1)],
        "circuits": len(circuits(fam)),
        "circuit_list": [
            {
                "members": c.label(),
                "lambda": [format_scalar(c.lam[j]) for j in c.members],
                "f_C": format_scalar(disc.values[c.members]),
            }
            for c in circuits(fam)
        ],
        "discriminant": disc.status,
        "violating": [c.label() for c in disc.violating],
        "unbalanced": unbalance.unbalanced,
    }
    if fam.n <= config.MAX_EDGE_ENUMERATION_N:
        edges = unbalance.dense_edges if not unbalance.shortcut else dense_edges(fam, a)
        report["dense_edges"] = [
            {"members": edge_label(e.members), "rank": e.rank, "weight": format_scalar(e.weight)}
            for e in edges
        ]
    return report


def solve_report(
    model: CriticalAlgebraModel, certificate: Optional[Certificate] = None
) -> Dict[str, Any]:
    """Critical points with residuals, Hessians and Lagrangian images."""
    report: Dict[str, Any] = {
        "chi": model.expected,
        "count": model.count,
        "method": model.method,
        "undercount": model.undercount,
        "notes": list(model.notes),
        "points": [
            {
                "u": _vector(p.u),
                "residual": p.residual,
                "residual_tol": p.residual_tol,
                "hessian": _number(p.hessian),
                "p": _vector(p.lagrangian_image),
                "multiplicity": p.multiplicity,
                "nondegenerate": p.nondegenerate,
            }
            for p in model.points
        ],
    }
    if certificate is not None:
        report["certificate"] = certificate.to_dict()
    return report


def csv_header(k: int, n: int) -> List[str]:
    header = []
    for i in range(1, k + 1):
        header += [f"re_u{i}", f"im_u{i}"]
    header += ["hess_re", "hess_im"]
    for j in range(1, n + 1):
        header += [f"p{j}_re", f"p{j}_im"]
    return header


def write_csv(model: CriticalAlgebraModel, stream: TextIO) -> int:
    """Write the real critical points as a flat table and return the row count."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(csv_header(model.ctx.k, model.ctx.n))
    rows = 0
    for p in model.points:
        scale = max(1.0, float(np.abs(p.u).max()))
        if float(np.abs(p.u.imag).max()) > config.REALITY_TOL * scale:
            continue
        row: List[str] = []
        for value in list(p.u) + [p.hessian] + list(p.lagrangian_image):
            row += [repr(float(value.real)), repr(float(value.imag))]
        writer.writerow(row)
        rows += 1
    logger.debug("wrote %d real solution row(s)", rows)
    return rows


def gm_report(fam: ArrangementFamily, a: WeightVector, x: FiberPoint) -> Dict[str, Any]:
    """Exact K_j(x) on F^k and on the Sing basis."""
    top = standard_basis(fam, fam.k)
    sing = singular_subspace(fam, a)
    operators = []
    for j in range(fam.n):
        K = k_j_matrix(fam, a, x, j)
        operators.append(
            {"j": j + 1, "matrix": _matrix(K.matrix), "restricted": _matrix(K.restricted)}
        )
    return {
        "basis": [subset_label(s) for s in top.subsets],
        "sing_basis": [
            {subset_label(s): format_scalar(c) for s, c in sorted(v.as_dict().items())}
            for v in sing.basis(fam)
        ],
        "operators": operators,
        "full_commutator_norms": [
            {"pair": [i + 1, j + 1], "norm": value}
            for (i, j), value in full_commutator_norms(fam, a, x).items()
        ],
    }


def specvar_report(
    fam: ArrangementFamily,
    a: WeightVector,
    x: FiberPoint,
    options: Optional[SolverOptions] = None,
) -> Dict[str, Any]:
    """Joint spectrum of the restricted K_j next to the Lagrangian fiber."""
    options = options or SolverOptions()
    critical = solve_critical(MasterContext(fam, a, x), options)
    images = [pt.p for pt in fiber_points(build_model(fam, a), x, critical=critical)]
    spectrum = char_variety_fiber(fam, a, x, seed=options.seed)
    match = match_spectrum(spectrum, images)
    return {
        "spectrum": [_vector(y) for y in spectrum],
        "psi_images": [_vector(p) for p in images],
        "assignment": [[i + 1, j + 1] for i, j in match.assignment],
        "max_discrepancy": match.max_discrepancy,
        "tolerance": config.IDENTITY_TOL,
        "matched": match.max_discrepancy <= config.IDENTITY_TOL,
    }


def transport_report(task: TransportTask, result: TransportResult) -> Dict[str, Any]:
    return {
        "kappa": _number(task.kappa),
        "path": [_vector(x) for x in task.path],
        "initial": _vector(task.initial),
        "end": _vector(result.end),
        "flag_vector": _vector(result.flag_vector),
        "error_estimate": result.error_estimate,
        "evaluations": result.evaluations,
    }


def solve_with_certificate(
    fam: ArrangementFamily,
    a: WeightVector,
    x: FiberPoint,
    options: Optional[SolverOptions] = None,
) -> Dict[str, Any]:
    """Solve the fiber and attach the solver-level checks."""
    options = options or SolverOptions()
    model = solve_critical(MasterContext(fam, a, x), options)
    certificate = CertificateRunner(fam, a, x, options, critical=model).run(SOLVER_CHECKS)
    return solve_report(model, certificate)


def parse_complex(text: str) -> complex:
    """'1', '0.5', '1+1j' or '2/3' as a complex number."""
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        pass
    try:
        return complex(sp.Rational(text))
    except (TypeError, ValueError) as exc:
        raise ArrangementError(f"not a complex number: {text!r}") from exc
