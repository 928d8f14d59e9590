"""critset command line."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import config, linalg
from .arrangement import load_family_file
from .certificate import CertificateRunner
from .critical import MasterContext, SolverOptions, solve_critical
from .errors import ArrangementError, CritsetError, DiscriminantError
from .flags import singular_subspace
from .report import (
    analyze_report,
    dumps,
    gm_report,
    parse_complex,
    solve_with_certificate,
    specvar_report,
    transport_report,
    write_csv,
)
from .transport import TransportTask, transport

logger = logging.getLogger(__name__)

EXIT_ERROR = 1
EXIT_DISCRIMINANT = 2
EXIT_NOT_CERTIFIED = 3


def _json_argument(text: str):
    """Inline JSON, or the path of a file holding it."""
    path = Path(text)
    if not text.lstrip().startswith(("[", "{")) and path.exists():
        text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArrangementError(f"parse error: {exc}") from exc


def _complex_points(document, name: str) -> List[np.ndarray]:
    if not isinstance(document, list):
        raise ArrangementError(f"{name} must be a JSON list")
    return [np.array([complex(linalg.parse_scalar(v)) for v in row]) for row in document]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critset",
        description="Critical sets, Gauss-Manin operators and Lagrangian fibers "
        "of weighted hyperplane arrangement families",
    )
    parser.add_argument(
        "--residual-tol",
        type=float,
        default=config.RESIDUAL_TOL,
        help=f"Gradient residual tolerance (default: {config.RESIDUAL_TOL})",
    )
    parser.add_argument(
        "--dedup-tol",
        type=float,
        default=config.DEDUP_TOL,
        help=f"Relative distance merging critical points (default: {config.DEDUP_TOL})",
    )
    parser.add_argument(
        "--ode-tol",
        type=float,
        default=config.ODE_TOL,
        help=f"Relative tolerance of the transport integrator (default: {config.ODE_TOL})",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=config.DEFAULT_SEED,
        help=f"Seed for multistart and spectrum pencils (default: {config.DEFAULT_SEED})",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log progress at DEBUG level"
    )

    commands = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("analyze", "Circuits, Euler characteristic, discriminant and balance"),
        ("solve", "Critical points of the master function"),
        ("gm", "Exact Gauss-Manin operators K_j(x)"),
        ("specvar", "Joint spectrum of K_j(x) against the Lagrangian fiber"),
        ("transport", "Transport a flat section along a path"),
        ("certify", "Run every identity check on the fiber"),
    ):
        sub = commands.add_parser(name, help=text)
        sub.add_argument("file", type=Path, help="Input JSON document")
        if name == "solve":
            sub.add_argument(
                "--csv", action="store_true", help="Emit real solutions as CSV"
            )
        if name == "transport":
            sub.add_argument("--kappa", default="1", help="Nonzero complex kappa (default: 1)")
            sub.add_argument(
                "--path", required=True, help="JSON list of base points, or a file"
            )
            sub.add_argument(
                "--initial",
                help="JSON list of Sing coordinates at the first point "
                "(default: first Sing basis vector)",
            )
            sub.add_argument(
                "--near-disc-tol",
                type=float,
                default=config.NEAR_DISC_TOL,
                help=f"Discriminant clearance along the path (default: {config.NEAR_DISC_TOL})",
            )
    return parser


def run(args: argparse.Namespace) -> int:
    fam, a, x = load_family_file(args.file)
    options = SolverOptions(
        residual_tol=args.residual_tol, dedup_tol=args.dedup_tol, seed=args.seed
    )

    if args.command == "analyze":
        print(dumps(analyze_report(fam, a, x)))
        return 0

    if args.command == "solve":
        if args.csv:
            model = solve_critical(MasterContext(fam, a, x), options)
            write_csv(model, sys.stdout)
        else:
            print(dumps(solve_with_certificate(fam, a, x, options)))
        return 0

    if args.command == "gm":
        print(dumps(gm_report(fam, a, x)))
        return 0

    if args.command == "specvar":
        print(dumps(specvar_report(fam, a, x, options)))
        return 0

    if args.command == "transport":
        path = _complex_points(_json_argument(args.path), "path")
        if args.initial is None:
            initial = np.zeros(singular_subspace(fam, a).dim, dtype=complex)
            initial[0] = 1.0
        else:
            initial = _complex_points([_json_argument(args.initial)], "initial")[0]
        task = TransportTask(
            fam=fam, a=a, kappa=parse_complex(args.kappa), path=path, initial=initial
        )
        result = transport(task, ode_tol=args.ode_tol, near_disc_tol=args.near_disc_tol)
        print(dumps(transport_report(task, result)))
        return 0

    # certify: refuse a fiber on the discriminant before any check runs
    model = solve_critical(MasterContext(fam, a, x), options)
    certificate = CertificateRunner(fam, a, x, options, critical=model).run()
    print(dumps(certificate.to_dict()))
    if not certificate.certified:
        failed = [c.name for c in certificate.checks if c.status == "fail"]
        print(f"not certified: {', '.join(failed)}", file=sys.stderr)
        return EXIT_NOT_CERTIFIED
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return run(args)
    except DiscriminantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISCRIMINANT
    except CritsetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
