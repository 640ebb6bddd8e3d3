"""Acceptance criteria 1 to 14, run once through the ``verify`` experiment.

Each test prints ``criterion N: PASS`` or ``criterion N: FAIL`` with the
failing checks, and the same lines are repeated in the terminal summary.
"""
import json

import pytest

from bbm_attractor.harness import config as cfgmod
from bbm_attractor.harness.experiments import run

from conftest import ACCEPTANCE_LINES

TITLES = {
    1: "many-to-one identity",
    2: "FKPP duality",
    3: "front law",
    4: "Bramson sandwich",
    5: "R_s convergence in probability",
    6: "cubic rate and tightness",
    7: "Cesaro criterion",
    8: "extremal approximant surrogate",
    9: "quenched Kronecker corollary",
    10: "probabilistic HLK",
    11: "shift estimator",
    12: "metric and membership properties",
    13: "Feller probe",
    14: "determinism",
}


@pytest.fixture(scope="session")
def verify_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    cfg = cfgmod.resolve({"experiment": "verify", "seed": 0, "out": str(out), "verify": {"scale": "full"}})
    report, _ = run(cfg, out)
    timing = json.loads((out / "timing.json").read_text())
    return report, timing


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(TITLES))
def test_criterion(verify_report, number):
    report, timing = verify_report
    prefix = f"c{number:02d}."
    verdicts = [v for v in report["verdicts"] if v["name"].startswith(prefix)]
    assert verdicts, f"criterion {number} produced no verdicts"
    failed = [v["name"][len(prefix):] for v in verdicts if not v["passed"]]
    secs = timing[str(number)]["seconds"]
    status = "PASS" if not failed else "FAIL"
    line = f"criterion {number}: {status} ({TITLES[number]}, {secs:.1f}s)"
    if failed:
        line += " failed checks: " + ", ".join(failed)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line
