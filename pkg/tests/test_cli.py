import csv
import io
import json
import math
import subprocess
import sys
from fractions import Fraction

import pytest

from su2ent import cli
from su2ent.errors import NumericalError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, [json.loads(line) for line in out.splitlines() if line.startswith("{")], out, err


@pytest.fixture(autouse=True)
def no_cache(monkeypatch):
    monkeypatch.delenv("SU2ENT_CACHE_DIR", raising=False)


def test_dims_example(capsys):
    code, recs, _, _ = run(capsys, "dims", "--V", "4", "--twoJ", "2", "--VA", "2")
    assert code == 0
    (r,) = recs
    assert r["schema"] == 1 and r["kind"] == "dims"
    assert r["d"] == "3"
    assert sorted(map(tuple, r["pairs"])) == [(0, 2), (2, 0), (2, 2)]


def test_dims_completeness(capsys):
    code, recs, _, _ = run(capsys, "dims", "--check-completeness", "--V", "64")
    assert code == 0 and all(r["passed"] for r in recs)


def test_dims_asymptotic_residual(capsys):
    code, recs, _, _ = run(capsys, "dims", "--V", "100", "--j", "0.5", "--compare-asymptotic")
    assert code == 0 and recs[0]["relative_residual"] < 0.01


def test_entropy_single_state_sector(capsys):
    code, recs, _, _ = run(capsys, "entropy", "--V", "4", "--twoJ", "4", "--VA", "2")
    r = recs[0]
    assert code == 0
    assert r["entropy"] == pytest.approx(0.8675632284814612, abs=1e-12)
    assert r["entropy_stderr"] == 0.0
    assert r["n_samples"] > 0 and r["seed"] is not None


def test_entropy_singlet_is_ln2(capsys):
    _, recs, _, _ = run(capsys, "entropy", "--V", "2", "--twoJ", "0", "--VA", "1")
    assert recs[0]["entropy"] == pytest.approx(math.log(2), abs=1e-12)


def test_entropy_bits_divides_by_ln2(capsys):
    _, nats, _, _ = run(capsys, "entropy", "--V", "2", "--twoJ", "0", "--VA", "1")
    _, bits, _, _ = run(capsys, "entropy", "--V", "2", "--twoJ", "0", "--VA", "1", "--bits")
    assert bits[0]["entropy"] == pytest.approx(nats[0]["entropy"] / math.log(2), rel=1e-15)
    assert bits[0]["unit"] == "bits"


def test_entropy_oracle_agrees(capsys):
    code, recs, _, _ = run(capsys, "entropy", "--V", "8", "--twoJ", "2", "--VA", "3", "--n", "4000", "--oracle")
    assert code == 0
    r = recs[0]
    o, so = r["oracle"], r["oracle_stderr"]
    assert r["oracle_agree"]
    assert abs(r["entropy"] - o) <= 3 * math.hypot(r["entropy_stderr"], so)


def test_entropy_is_deterministic(capsys):
    args = ("entropy", "--V", "8", "--twoJ", "2", "--VA", "3", "--n", "300", "--seed", "5")
    assert run(capsys, *args)[2] == run(capsys, *args)[2]


def test_moments_census(capsys):
    _, recs, _, _ = run(capsys, "moments", "--L", "3", "--census")
    assert recs[0]["trees"] == 4 and recs[0]["multiplicities"] == [1, 2, 1, 1]


def test_moments_mc_check(capsys):
    code, recs, _, _ = run(capsys, "moments", "--V", "8", "--twoJ", "2", "--VA", "3", "--L", "2",
                           "--mc-check", "--n", "4000")
    assert code == 0
    (r,) = recs
    target = Fraction(r["normalized_purity"])
    assert target == Fraction(701, 4060)
    assert r["mc_agree"] and abs(r["mc_purity"] - float(target)) <= 3 * r["mc_stderr"]


def test_moments_dominance(capsys):
    _, recs, _, _ = run(capsys, "moments", "--dominance", "--j", "0.5", "--f", "0.25",
                        "--V", "12,16,20,24", "--L", "2")
    res = [r["residual"] for r in recs if r["kind"] == "dominance"]
    assert recs[-1]["strictly_decreasing"]
    assert len(res) == 4 and all(b < a for a, b in zip(res, res[1:]))


def test_cg_exact_and_probe(capsys):
    _, recs, _, _ = run(capsys, "cg", "--twoJA", "1", "--twoJB", "1", "--twoJ", "0")
    assert [r["value"] for r in recs] == ["1/2", "1/2"]
    _, recs, _, _ = run(capsys, "cg", "--probe", "--V", "200", "--j", "0.5", "--VA", "100", "--k", "0,1")
    assert recs[0]["relative_error"] < 0.02
    assert recs[1]["oscillator"] == 0.0 and recs[1]["relative_error"] is None


def read_surface(text):
    lines = text.splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(l for l in lines if not l.startswith("#")))))
    return comments, rows


def test_surface_columns_and_grid_point(capsys):
    code, _, out, _ = run(capsys, "surface", "--V", "100", "--f", "0.25,0.75", "--j", "0.5,0.999,0.999999")
    assert code == 0
    comments, rows = read_surface(out)
    assert any("units" in c and "nats" in c for c in comments)
    assert any("provenance" in c for c in comments)
    p = next(r for r in rows if r["f"] == "0.25" and r["j"] == "0.5")
    assert float(p["volume_density"]) == pytest.approx(0.14058, abs=5e-6)
    assert float(p["constant"]) == pytest.approx(-0.9475, abs=5e-5)
    for r in rows:
        assert float(r["reflection_diff"]) <= 1e-12
    near_one = [float(r["volume_density"]) for r in rows if r["f"] == "0.25"]
    assert near_one[1] < 1e-2 and near_one[2] < 1e-4 and near_one[2] < near_one[1] < near_one[0]


def test_surface_rejects_endpoint_spin(capsys):
    assert cli.main(["surface", "--f", "0.25", "--j", "1.0"]) == 3


def test_surface_default_grid_is_reflection_symmetric(capsys):
    _, _, out, _ = run(capsys, "surface", "--nf", "8", "--nj", "5")
    _, rows = read_surface(out)
    assert len(rows) == 40
    assert max(float(r["reflection_diff"]) for r in rows) <= 1e-12


def test_surface_bits_header(capsys):
    _, _, out, _ = run(capsys, "surface", "--f", "0.25", "--j", "0.5", "--bits")
    comments, _ = read_surface(out)
    assert "bits" in comments[0]


def test_surface_cold_and_warm_cache_match(capsys, tmp_path, monkeypatch):
    from su2ent import cg
    from su2ent.sectors import MULTIPLICITIES

    monkeypatch.setenv("SU2ENT_CACHE_DIR", str(tmp_path))
    MULTIPLICITIES.clear()
    cg.cache_clear()
    args = ("surface", "--nf", "6", "--nj", "4")
    cold = run(capsys, *args)[2]
    assert (tmp_path / "tables.json").exists()
    warm = run(capsys, *args)[2]
    assert cold == warm


def test_metadata_goes_to_separate_file(capsys, tmp_path):
    meta = tmp_path / "meta.json"
    _, _, out, _ = run(capsys, "dims", "--V", "6", "--twoJ", "2", "--metadata", str(meta))
    assert "started" not in out
    assert meta.exists() and "started" in meta.read_text()


@pytest.mark.parametrize(
    "argv,code",
    [
        (("dims", "--V", "4", "--twoJ", "3"), 3),
        (("entropy", "--V", "5", "--twoJ", "1", "--VA", "9"), 3),
        (("moments", "--L", "9", "--census"), 3),
        (("entropy", "--V", "8", "--twoJ", "2", "--VA", "3", "--max-dim", "100000"), 4),
        (("entropy", "--V", "20", "--twoJ", "0", "--VA", "10", "--oracle"), 4),
        (("entropy", "--V", "30", "--twoJ", "0", "--VA", "15"), 4),
    ],
)
def test_exit_codes(capsys, argv, code):
    assert cli.main(list(argv)) == code
    assert "su2ent:" in capsys.readouterr().err


def test_unsafe_caps_allows_override(capsys):
    code, _, _, _ = run(capsys, "entropy", "--V", "4", "--twoJ", "4", "--VA", "2",
                        "--max-dim", "100000", "--unsafe-caps")
    assert code == 0


def test_numerical_failure_exit_code(capsys, monkeypatch):
    def boom(*a, **k):
        raise NumericalError("forced")

    monkeypatch.setitem(cli.COMMANDS, "dims", boom)
    assert cli.main(["dims", "--V", "4", "--twoJ", "2"]) == 5


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "su2ent", "dims", "--V", "4", "--twoJ", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["multiplicity"] == "3"
