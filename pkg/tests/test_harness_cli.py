import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from imexpeer import builtin_tableau, save_tableau
from imexpeer.harness import (
    ReferenceSolution,
    fit_order,
    global_error,
    load_reference,
    make_reference,
    packaged_reference,
    problem_by_name,
    run_sigma_study,
    run_work_precision,
    save_reference,
    sigma_step_sequence,
    verify_method,
)
from imexpeer.problems import dahlquist_split, prothero_robinson


def test_global_error_metric():
    Y = np.array([2.0, -0.5])
    Yh = np.array([2.2, -0.5])
    assert global_error(Y, Yh) == pytest.approx(0.2 / 3.0)


def test_sigma_sequence_constant():
    dts = sigma_step_sequence(0.05, 1.0, 5.0)
    assert len(dts) == 100
    np.testing.assert_allclose(dts, 0.05)


def test_sigma_sequence_alternation():
    dts = sigma_step_sequence(0.05, 1.2, 5.0)
    assert dts[0] == pytest.approx(0.1 / 2.2)
    assert dts[1] == pytest.approx(dts[0] * 1.2)
    assert dts[2] == pytest.approx(dts[1] / 1.2)
    assert dts.sum() == pytest.approx(5.0, abs=1e-12)
    # pattern average equals the nominal step
    assert (dts[0] + dts[1]) / 2 == pytest.approx(0.05)


def test_fit_order_recovers_synthetic_slope():
    dts = np.array([0.1, 0.05, 0.025, 0.0125])
    errs = 3.7 * dts ** 2.5
    assert fit_order(dts, errs) == pytest.approx(2.5, abs=1e-6)
    # floor excludes polluted points
    errs2 = errs.copy()
    errs2[-1] = 1e-30
    assert fit_order(dts, errs2, floor=1e-20) == pytest.approx(2.5, abs=1e-6)


def test_run_sigma_study_report():
    rep = run_sigma_study(builtin_tableau("2sve"), prothero_robinson(), 1.1,
                          [0.05, 0.025])
    assert rep.fitted_slope == pytest.approx(3.0, abs=0.4)
    rows = list(rep.rows())
    assert rows[0]["sigma"] == 1.1
    assert np.isnan(rows[0]["pair_order"])
    assert rows[1]["pair_order"] == pytest.approx(rep.fitted_slope, abs=0.2)


def test_run_sigma_study_four_stage_unstable_at_sigma_12():
    # the 4-stage methods lose stability for sigma = 1.2: the error grows
    # (catastrophically for 4sv) as the steps shrink and the pattern repeats
    rep = run_sigma_study(builtin_tableau("4sv"), prothero_robinson(), 1.2,
                          [0.05, 0.05 / 6])
    errs = [e for _, e in rep.entries]
    assert errs[1] > 1e6 * errs[0]
    assert errs[1] > 1.0


def test_work_precision_rows():
    p = dahlquist_split(-1.0, -100.0, T=1.0)
    rows = run_work_precision(builtin_tableau("2sve"), p, [1e-4, 1e-6],
                              tau_rule="sqrt", repeats=1)
    assert [r["tol"] for r in rows] == [1e-4, 1e-6]
    assert rows[1]["error"] < rows[0]["error"]
    for r in rows:
        for key in ("cpu_time", "n_accept", "n_reject", "n_f0", "n_f1",
                    "n_newton", "n_jac", "n_lu"):
            assert key in r
    assert rows[0]["status"] == "completed"


def test_reference_round_trip_and_hash():
    p = dahlquist_split(-1.0, -10.0, T=1.0)
    ref = make_reference(p, tol=1e-10, tau=1e-5)
    text = save_reference(ref)
    back = load_reference(text)
    np.testing.assert_array_equal(back.y, ref.y)
    assert back.problem == "dahlquist_split"
    assert back.atol == 1e-10
    lines = text.splitlines()
    lines[-1] = lines[-1].split(",")[0] + ",0.12345"
    with pytest.raises(ValueError, match="hash"):
        load_reference("\n".join(lines))
    # the fully implicit reference reproduces the exact solution
    assert global_error(p.exact(1.0), ref.y) < 1e-9


def test_packaged_references_load():
    for name in ("van_der_pol", "burgers_dx400", "advreac_m400",
                 "advreac_m400_fine"):
        ref = packaged_reference(name)
        assert len(ref.y) > 0
        assert ref.meta["sha256"]


def test_problem_by_name():
    assert problem_by_name("burgers", dx=1 / 50).m == 99
    with pytest.raises(ValueError, match="unknown problem"):
        problem_by_name("lorenz")


def test_verify_method_pass_and_expected_failures():
    rep = verify_method("IMEX-Peer3sv")
    assert rep.passed
    names = [c[0] for c in rep.checks]
    assert any("imex-variable" in n for n in names)
    rep2 = verify_method("IMEX-Peer2sve")
    assert rep2.passed
    assert any("fail as expected" in c[0] and c[3] for c in rep2.checks)
    assert rep2.condition_rows


def test_verify_method_catches_corruption():
    t = builtin_tableau("3sv")
    bad = save_tableau(t).replace(f"{t.gamma:.17g}", "0.9", 3)
    from imexpeer import load_tableau
    rep = verify_method(load_tableau(bad))
    assert not rep.passed


# ---------------------------------------------------------------------------
# CLI

def _run(*args):
    return subprocess.run([sys.executable, "-m", "imexpeer", *args],
                          capture_output=True, text=True)


def test_cli_verify_exit_codes(tmp_path):
    ok = _run("verify", "IMEX-Peer4sve")
    assert ok.returncode == 0
    assert "PASS" in ok.stdout

    bad_file = tmp_path / "bad.tab"
    t = builtin_tableau("3sv")
    lines = save_tableau(t).splitlines()
    i = lines.index("R")
    rows = [line.split() for line in lines[i + 1:i + 1 + t.s]]
    for k in range(t.s):
        rows[k][k] = "0"           # gamma -> 0: diagonal no longer positive
    lines[i + 1:i + 1 + t.s] = [" ".join(r) for r in rows]
    bad_file.write_text("\n".join(lines) + "\n")
    bad = _run("verify", str(bad_file))
    assert bad.returncode != 0
    assert "not positive" in bad.stderr + bad.stdout


def test_cli_tableau_show_round_trip(tmp_path):
    shown = _run("tableau", "show", "IMEX-Peer2sve")
    assert shown.returncode == 0
    f = tmp_path / "t.tab"
    f.write_text(shown.stdout)
    loaded = _run("tableau", "load", str(f))
    assert loaded.returncode == 0
    assert "IMEX-Peer2sve" in loaded.stdout


def test_cli_converge_csv(tmp_path):
    out = tmp_path / "conv.csv"
    r = _run("converge", "3sv", "prothero_robinson", "--sigma", "1.1",
             "--dt-list", "0.05,0.025", "--out", str(out))
    assert r.returncode == 0, r.stderr
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2
    assert float(rows[1]["fitted_slope"]) > 3.0


def test_cli_wp_csv(tmp_path):
    out = tmp_path / "wp.csv"
    r = _run("wp", "2sve", "dahlquist", "--tols", "1e-4,1e-6",
             "--lambda0", "-1", "--lambda1", "-100", "--repeats", "1",
             "--out", str(out))
    assert r.returncode == 0, r.stderr
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2
    assert float(rows[1]["error"]) < float(rows[0]["error"])
    header = rows[0].keys()
    for col in ("method", "tol", "error", "cpu_time", "n_accept", "n_reject",
                "n_f0", "n_f1", "n_newton", "n_jac", "n_lu"):
        assert col in header


def test_cli_reference_and_reuse(tmp_path):
    out = tmp_path / "ref.csv"
    r = _run("reference", "dahlquist", "--lambda0", "-1", "--lambda1", "-50",
             "--tol", "1e-10", "--tau", "1e-4", "--out", str(out))
    assert r.returncode == 0, r.stderr
    ref = load_reference(out.read_text())
    p = dahlquist_split(-1.0, -50.0)
    assert global_error(p.exact(1.0), ref.y) < 1e-8
    # feed it back into a converge run
    r2 = _run("converge", "2sve", "dahlquist", "--lambda0", "-1",
              "--lambda1", "-50", "--sigma", "1.0", "--dt-list", "0.02,0.01",
              "--reference", str(out))
    assert r2.returncode == 0, r2.stderr
    assert "fitted_slope" in r2.stdout


def test_cli_stability_summary_runs(tmp_path):
    out = tmp_path / "stab.csv"
    r = _run("stability", "2sve", "--alpha", "0", "--resolution", "60",
             "--out", str(out))
    assert r.returncode == 0, r.stderr
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["method"] == "IMEX-Peer2sve"
    assert float(rows[0]["area"]) > 0


def test_cli_unknown_method_message():
    r = _run("verify", "IMEX-Peer9x")
    assert r.returncode != 0
    assert "available" in (r.stderr + r.stdout)


def test_converge_csv_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"conv{k}.csv"
        r = _run("converge", "2sve", "prothero_robinson", "--sigma", "1.2",
                 "--dt-list", "0.05,0.025", "--out", str(out))
        assert r.returncode == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_verify_with_regions_compares_table():
    rep = verify_method("IMEX-Peer2sve", regions=True)
    names = [c[0] for c in rep.checks]
    assert any(n.startswith("region ") for n in names)
    assert rep.passed
