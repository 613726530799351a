"""Golden-file pins for the serialized formats.

These freeze the on-disk layout documented in docs/formats.md: a seeded
build must reproduce the committed instance files byte for byte, and the
committed files must load into valid problems. The certificate golden
pins the check-report schema (values vary with solver timing only
through nothing; the whole certificate is deterministic).
"""

import json
from pathlib import Path

import numpy as np
import pytest

from foliosolve.cli import main as cli_main
from foliosolve.generate import GeneratorConfig, build_single_instance, extend_multi, gen_market_data
from foliosolve.model import MultiPeriodProblem, SinglePeriodProblem
from foliosolve.serialize import load_instance, save_instance

DATA = Path(__file__).parent / "data"


def golden_problems():
    # explicit terminal portfolio keeps the files backend independent
    # (a solved terminal would differ across kernels in the last ulp)
    cfg = GeneratorConfig(seed=314, n=3, days=80, p=2, missing_iv_fraction=0.0)
    panel = gen_market_data(cfg)
    single = build_single_instance(panel, cfg.default_date_index(), (1e-6, 5.0, 5.0), cfg)
    return single, extend_multi(single, 3, w_terminal=np.zeros(3))


class TestGoldenInstances:
    def test_single_reproduced_byte_for_byte(self, tmp_path):
        single, _ = golden_problems()
        out = tmp_path / "inst.json"
        save_instance(single, out)
        assert out.read_bytes() == (DATA / "golden_instance_single.json").read_bytes()

    def test_multi_reproduced_byte_for_byte(self, tmp_path):
        _, multi = golden_problems()
        out = tmp_path / "inst.json"
        save_instance(multi, out)
        assert out.read_bytes() == (DATA / "golden_instance_multi.json").read_bytes()

    def test_golden_files_load_as_valid_problems(self):
        single = load_instance(DATA / "golden_instance_single.json")
        multi = load_instance(DATA / "golden_instance_multi.json")
        assert isinstance(single, SinglePeriodProblem)
        assert isinstance(multi, MultiPeriodProblem)
        assert single.n == multi.n == 3
        assert multi.horizon == 3

    def test_documented_field_set(self):
        doc = json.loads((DATA / "golden_instance_single.json").read_text())
        assert set(doc) == {
            "schema_version", "kind", "gmv", "n", "exponent", "lambda1",
            "lambda2", "lambda3", "risk", "exposures", "w0",
            "alpha", "spread", "impact",
        }
        multi_doc = json.loads((DATA / "golden_instance_multi.json").read_text())
        assert set(multi_doc) == {
            "schema_version", "kind", "gmv", "n", "exponent", "lambda1",
            "lambda2", "lambda3", "risk", "exposures", "w0",
            "horizon", "w_terminal", "alpha_t", "spread_t", "impact_t",
        }


class TestGoldenCertificate:
    @pytest.mark.skipif(
        __import__("foliosolve._accel", fromlist=["BACKEND"]).BACKEND != "numba",
        reason="certificate values embed solver output; golden pinned to numba")
    def test_check_reproduces_golden(self, tmp_path):
        sol = tmp_path / "sol.json"
        cert = tmp_path / "cert.json"
        inst = str(DATA / "golden_instance_single.json")
        assert cli_main(["solve", "--instance", inst, "--out", str(sol)]) == 0
        assert cli_main(["check", "--instance", inst, "--solution", str(sol),
                         "--out", str(cert)]) == 0
        assert cert.read_bytes() == (DATA / "golden_certificate.json").read_bytes()
