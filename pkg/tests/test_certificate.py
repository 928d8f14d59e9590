"""Tests for the certificate runner."""

import numpy as np
import pytest

from critset import config
from critset.arrangement import load_family
from critset.certificate import FAIL, PASS, SKIPPED, SOLVER_CHECKS, CertificateRunner, certify
from critset.critical import MasterContext, solve_critical
from critset.errors import ArrangementError
from critset.lagrangian import build_model

from .test_critical import random_family
from .test_flags import FOUR_LINES


class TestCertify:
    @pytest.mark.parametrize("name", ["fix1", "fix3"])
    def test_fixtures_certify(self, name, request):
        fam, a, x = request.getfixturevalue(name)
        certificate = certify(fam, a, x)
        failed = [(c.name, c.details) for c in certificate.checks if c.status == FAIL]
        assert failed == []
        assert certificate.certified

    def test_four_lines(self):
        certificate = certify(*load_family(FOUR_LINES))
        assert certificate.certified
        names = [c.name for c in certificate.checks]
        assert names[:5] == list(SOLVER_CHECKS[:5])
        assert names[-1] == "reality"

    def test_every_check_has_a_tolerance(self, fix3):
        certificate = certify(*fix3)
        for check in certificate.checks:
            if check.status == PASS:
                assert check.tolerance is not None
                assert check.max_residual <= check.tolerance

    def test_reality_skipped_for_complex_weights(self):
        document = dict(FOUR_LINES)
        document["a"] = [[1, 1], 2, [3, -1], "1/2"]
        certificate = certify(*load_family(document), names=["reality"])
        (check,) = certificate.checks
        assert check.status == SKIPPED

    def test_selected_checks(self, fix1):
        certificate = certify(*fix1, names=SOLVER_CHECKS)
        assert [c.name for c in certificate.checks] == list(SOLVER_CHECKS)

    def test_environment(self, fix1):
        data = certify(*fix1, names=["count"]).to_dict()
        assert data["environment"]["seed"] == 20240607
        assert data["environment"]["tolerances"]["identity_tol"] == 1e-8
        assert data["certified"] is True

    def test_diagnostics(self):
        certificate = certify(*load_family(FOUR_LINES), names=["count"])
        diagnostics = certificate.to_dict()["diagnostics"]
        assert 1 <= diagnostics["canonical_iso_condition"] < 1e8
        assert sorted(diagnostics["full_commutator_norms"]) == [
            "1,2", "1,3", "1,4", "2,3", "2,4", "3,4"
        ]

    def test_relation_residual_is_recorded(self, fix3):
        (check,) = certify(*fix3, names=["marked_relations"]).checks
        assert check.status == PASS
        assert check.tolerance == config.RELATION_TOL
        assert 0 <= check.max_residual <= 1e-12
        assert check.details.startswith("v exact, w ")


class TestFiniteDifferenceChecks:
    def test_point_close_to_a_hyperplane(self):
        document = {
            "k": 3,
            "n": 5,
            "B": [[1, 3, -2, -2, 2], [2, 0, -2, -1, -2], [-2, -2, 1, 1, 1]],
            "a": [1, 1, 1, 1, 1],
            "x": ["-3/4", "1/3", "-9/4", 3, "-5/3"],
        }
        certificate = certify(
            *load_family(document), names=["hessian_finite_difference", "chart_independence"]
        )
        assert [c.status for c in certificate.checks] == [PASS, PASS]


def _certifiable_family(rng, k, n):
    """A random family whose Lagrangian model exists (no e_j inside Y)."""
    while True:
        fam, a, x = random_family(rng, k, n)
        try:
            build_model(fam, a)
        except ArrangementError:
            continue
        return fam, a, x


class TestRandomFamilies:
    @pytest.mark.parametrize("k, n", [(1, 4), (2, 4), (2, 5), (3, 5), (3, 6)])
    @pytest.mark.parametrize("seed", [0, 1])
    def test_certified(self, k, n, seed):
        rng = np.random.default_rng(500 + 10 * k + n + seed)
        certificate = certify(*_certifiable_family(rng, k, n))
        failed = [(c.name, c.details) for c in certificate.checks if c.status == FAIL]
        assert failed == []


class TestFailuresAreRecorded:
    def test_undercount_fails_count(self, fix2):
        fam, a, x = fix2
        model = solve_critical(MasterContext(fam, a, x))
        model.points = model.points[:1]
        model.undercount = True
        certificate = CertificateRunner(fam, a, x, critical=model).run(["count"])
        (check,) = certificate.checks
        assert check.status == FAIL
        assert not certificate.certified

    def test_raising_check_becomes_failure(self, fix1):
        fam, a, x = fix1
        model = solve_critical(MasterContext(fam, a, x))
        model.points[0].nondegenerate = False
        certificate = CertificateRunner(fam, a, x, critical=model).run(["canonical_identity"])
        (check,) = certificate.checks
        assert check.status == FAIL
        assert "DegenerateError" in check.details
