import json
from pathlib import Path

import numpy as np
import pytest

from impstab import cli
from impstab import io as iox
from impstab.criteria import StabilityReport, Verdict
from impstab.errors import ConfigError, SchemaError
from impstab.logderiv import FreqResponse, stability_from_loops
from impstab.ratfun import RatFun

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
CANONICAL = SCENARIOS / "canonical.ini"
UNSTABLE = SCENARIOS / "canonical_unstable.ini"
TWO_PI = 2 * np.pi

FAST = """
[grid]
L_g = {L_g}
[analysis]
criteria = {criteria}
domains = dq
logderiv_step_hz = 0.02
"""


def write(tmp_path, text, name="sc.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(args, capsys):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_canonical_scenario_loads():
    sc = iox.load_scenario(CANONICAL)
    assert sc.sweep.name == "L_g" and sc.sweep.steps == 20
    assert sc.sweep.start < 2.04e-3 < sc.sweep.stop
    assert sc.vsc == iox.VscParams()
    assert sc.grid.L_g == 1.0e-3


@pytest.mark.parametrize("text, key", [
    ("[vsc]\nbogus = 1\n", "'bogus'"),
    ("[grid]\nL_g = abc\n", "[grid] L_g"),
    ("[grid]\nL_g = -1\n", "[grid]"),
    ("[sweep]\nparameter = grid.L_g\nfrom = 1\nto = 2\n", "'steps'"),
    ("[sweep]\nparameter = grid.nope\nfrom = 1\nto = 2\nsteps = 3\n", "grid.nope"),
    ("[analysis]\ncriteria = nyquist\n", "criteria"),
    ("[analysis]\nf_min_hz = 10\nf_max_hz = 5\n", "f_min_hz"),
    ("[analysis]\nframe = 3\n", "frame"),
    ("[extra]\na = 1\n", "[extra]"),
    ("no section header\n", "malformed"),
])
def test_config_errors_name_the_key(tmp_path, capsys, text, key):
    p = write(tmp_path, text)
    with pytest.raises(ConfigError, match=None) as exc:
        iox.load_scenario(p)
    assert key in str(exc.value)
    code, _, err = run(["analyze", "--config", p], capsys)
    assert code == cli.EXIT_ERROR
    assert err.startswith("error:") and key in err


def test_flag_errors(tmp_path, capsys):
    p = write(tmp_path, FAST.format(L_g=1e-3, criteria="determinant"))
    code, _, err = run(["analyze", "--config", p, "--criteria", "determinant,foo"], capsys)
    assert code == cli.EXIT_ERROR and "--criteria" in err and "'foo'" in err
    code, _, err = run(["analyze", "--config", p, "--domains", "abc"], capsys)
    assert code == cli.EXIT_ERROR and "--domains" in err
    code, _, err = run(["analyze", "--config", p, "--step-hz", "-1"], capsys)
    assert code == cli.EXIT_ERROR and "--step-hz" in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["analyze", "--config", tmp_path / "absent.ini"], capsys)
    assert code == cli.EXIT_ERROR and "absent.ini" in err


def test_mismatched_fundamental(tmp_path, capsys):
    p = write(tmp_path, "[grid]\nomega0 = 376.99\n")
    code, _, err = run(["analyze", "--config", p], capsys)
    assert code == cli.EXIT_ERROR and "omega0" in err


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def _rep(v):
    return StabilityReport("determinant", "dq", v)


def test_exit_code_precedence():
    S, U, I = Verdict.STABLE, Verdict.UNSTABLE, Verdict.INDETERMINATE
    assert cli.exit_code([_rep(S), _rep(S)]) == cli.EXIT_STABLE
    assert cli.exit_code([_rep(S), _rep(I)]) == cli.EXIT_INDETERMINATE
    assert cli.exit_code([_rep(I), _rep(U)]) == cli.EXIT_UNSTABLE


def test_stable_point_exits_zero(tmp_path, capsys):
    p = write(tmp_path, FAST.format(L_g=1e-3, criteria="determinant,schur-loop,logderiv"))
    code, out, _ = run(["analyze", "--config", p, "--out", tmp_path / "o"], capsys)
    assert code == cli.EXIT_STABLE
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    det = [r for r in doc["reports"] if r["criterion"] == "determinant"][0]
    assert det["encirclements"] == 0 and det["verdict"] == "Stable"
    assert doc["oracle"]["verdict"] == "Stable"


def test_unstable_point_lists_logderiv_mode(tmp_path, capsys):
    p = write(tmp_path, FAST.format(L_g=2.2e-3, criteria="determinant,logderiv"))
    code, out, _ = run(["analyze", "--config", p, "--out", tmp_path / "o"], capsys)
    assert code == cli.EXIT_UNSTABLE
    assert "alpha=" in out
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    ld = [r for r in doc["reports"] if r["criterion"] == "logderiv"][0]
    top = doc["oracle"]["max_real"]
    alphas = [m["alpha_z"] for m in ld["modes"]]
    assert alphas and min(abs(a - top) for a in alphas) < 0.02 * top


def test_eigen_hazard_point_exits_three(tmp_path, capsys):
    # stable side of the boundary where an eigenvalue locus turns anticlockwise
    p = write(tmp_path, FAST.format(L_g=1.7e-3, criteria="eigenvalue"))
    code, out, _ = run(["analyze", "--config", p], capsys)
    assert code == cli.EXIT_INDETERMINATE
    assert "anticlockwise" in out


def test_output_files(tmp_path, capsys):
    p = write(tmp_path, FAST.format(L_g=1e-3, criteria="determinant,eigenvalue,logderiv"))
    run(["analyze", "--config", p, "--out", tmp_path / "o"], capsys)
    o = tmp_path / "o"
    header = (o / "loci.csv").read_text().splitlines()[0]
    assert header == "freq_hz,re,im,channel,domain"
    traces = sorted(x.name for x in o.glob("trace_*.csv"))
    assert traces == ["trace_dq_loop_d.csv", "trace_dq_loop_q.csv"]
    assert (o / traces[0]).read_text().splitlines()[0] == "freq_hz,re_dl,im_dl,mask"
    doc = json.loads((o / "report.json").read_text())
    assert list(doc) == sorted(doc)


def test_analyze_is_deterministic(tmp_path, capsys):
    p = write(tmp_path, FAST.format(L_g=2.2e-3, criteria="determinant,eigenvalue,logderiv"))
    for d in ("a", "b"):
        run(["analyze", "--config", p, "--out", tmp_path / d], capsys)
    names = sorted(x.name for x in (tmp_path / "a").iterdir())
    assert names == sorted(x.name for x in (tmp_path / "b").iterdir())
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


# ---------------------------------------------------------------------------
# sweep and oracle comparison
# ---------------------------------------------------------------------------

SWEEP = FAST + """
[sweep]
parameter = grid.L_g
from = 1.0e-3
to = 2.3e-3
steps = 3
"""


def test_sweep_writes_points(tmp_path, capsys):
    p = write(tmp_path, SWEEP.format(L_g=1e-3, criteria="determinant"))
    code, out, _ = run(["sweep", "--config", p, "--out", tmp_path / "o"], capsys)
    assert code == cli.EXIT_UNSTABLE
    assert len(out.strip().splitlines()) == 4
    lines = (tmp_path / "o" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "value,oracle,max_real,determinant/dq"
    assert [l.split(",")[1] for l in lines[1:]] == ["Stable", "Stable", "Unstable"]
    assert sorted(x.name for x in (tmp_path / "o").glob("point_*")) == \
        ["point_000", "point_001", "point_002"]


def test_sweep_requires_section(tmp_path, capsys):
    p = write(tmp_path, FAST.format(L_g=1e-3, criteria="determinant"))
    code, _, err = run(["sweep", "--config", p], capsys)
    assert code == cli.EXIT_ERROR and "[sweep]" in err


def test_compare_oracle_across_boundary(tmp_path, capsys):
    p = write(tmp_path, SWEEP.format(L_g=1e-3, criteria="determinant,eigenvalue,logderiv"))
    code, out, _ = run(["compare-oracle", "--config", p, "--out", tmp_path / "o"], capsys)
    assert code == cli.EXIT_STABLE
    cmp = json.loads((tmp_path / "o" / "compare.json").read_text())
    assert cmp["ok"] and not cmp["mismatches"]
    assert [r["oracle"] for r in cmp["rows"]] == ["Stable", "Stable", "Unstable"]
    assert all(r["determinant/dq"] == r["oracle"] for r in cmp["rows"])
    assert cmp["rows"][-1]["alpha_error"] < 0.02


def test_compare_oracle_single_stable_point(tmp_path, capsys):
    p = write(tmp_path, FAST.format(L_g=1e-3, criteria="determinant,eigenvalue,schur-loop,logderiv"))
    cfg = cli.make_run_config(p)
    cmp = cli.compare_oracle(cfg)
    assert cmp.ok and len(cmp.rows) == 1
    row = cmp.rows[0]
    assert all(row[c] == "Stable" for c in cmp.columns)


def test_compare_oracle_flags_disagreement(tmp_path, capsys, monkeypatch):
    p = write(tmp_path, FAST.format(L_g=2.2e-3, criteria="determinant"))

    def wrong(*a, **k):
        return [StabilityReport("determinant", "dq", Verdict.STABLE)], []
    monkeypatch.setattr(cli, "analyze_point", wrong)
    code, out, _ = run(["compare-oracle", "--config", p], capsys)
    assert code == cli.EXIT_MISMATCH and "MISMATCH" in out


# ---------------------------------------------------------------------------
# response import
# ---------------------------------------------------------------------------

def _loop_response(step_hz=0.01, alpha=2.0, f_z=7.0):
    g = RatFun.from_roots([alpha + 1j * TWO_PI * f_z, alpha - 1j * TWO_PI * f_z, -40.0],
                          [-5.0 + 60j, -5.0 - 60j, -15.0, -90.0], 3.0)
    f = np.arange(-30.0, 30.0 + step_hz / 2, step_hz)
    return FreqResponse.from_function(g, TWO_PI * f, name="loop_d")


def test_export_import_round_trip(tmp_path):
    resp = _loop_response()
    iox.write_response(tmp_path / "a.csv", resp)
    back = iox.read_responses(tmp_path / "a.csv")["loop_d"]
    assert np.array_equal(back.values, resp.values)
    np.testing.assert_array_equal(back.freq_hz, TWO_PI * (resp.omega / TWO_PI) / TWO_PI)
    iox.write_response(tmp_path / "b.csv", back)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_decimated_trace_still_finds_mode(tmp_path):
    alpha = 2.0
    fine = _loop_response(0.01, alpha)
    keep = np.arange(0, fine.omega.size, 5)
    coarse = FreqResponse(fine.omega[keep], fine.values[keep], "loop_d")
    iox.write_response(tmp_path / "coarse.csv", coarse)
    chans = cli.import_response(tmp_path / "coarse.csv", step_hz=0.01)
    assert chans["loop_d"].uniform_step() == pytest.approx(TWO_PI * 0.01)
    rep = stability_from_loops(list(chans.values()))
    assert rep.verdict is Verdict.UNSTABLE
    for m in rep.modes:
        assert m["alpha_z"] == pytest.approx(alpha, rel=0.05)
        assert abs(abs(m["freq_hz"]) - 7.0) < 0.05


def test_import_response_command(tmp_path, capsys):
    iox.write_response(tmp_path / "r.csv", _loop_response())
    code, out, _ = run(["import-response", "--csv", tmp_path / "r.csv", "--out", tmp_path / "o"],
                       capsys)
    assert code == cli.EXIT_UNSTABLE and "alpha=" in out
    assert (tmp_path / "o" / "report.json").exists()


def test_missing_column_names_it(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("freq_hz,re\n0,1\n1,2\n")
    with pytest.raises(SchemaError, match="'im'"):
        iox.read_responses(tmp_path / "bad.csv")
    code, _, err = run(["import-response", "--csv", tmp_path / "bad.csv"], capsys)
    assert code == cli.EXIT_ERROR and "'im'" in err


def test_non_monotone_frequency_rejected(tmp_path):
    (tmp_path / "bad.csv").write_text("freq_hz,re,im\n0,1,0\n2,1,0\n1,1,0\n")
    with pytest.raises(SchemaError, match="strictly increasing"):
        iox.read_responses(tmp_path / "bad.csv")


def test_import_unknown_domain(tmp_path, capsys):
    iox.write_response(tmp_path / "r.csv", _loop_response())
    code, _, err = run(["import-response", "--csv", tmp_path / "r.csv", "--domain", "abc"], capsys)
    assert code == cli.EXIT_ERROR and "--domain" in err
