import csv
import io
import json
import math
import os
import subprocess
import sys

import pytest

from cs_limits import cli
from cs_limits.decoders import ContainmentReport


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def write_config(tmp_path, **kw):
    cfg = dict(n=[8], k=[1], m=[3, 5], snr=[2.0, 20.0], trials_per_cell=30, master_seed=1)
    cfg.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_bounds_sufficiency_row(capsys):
    code, out, _ = run(capsys, "bounds", "--n", "1024", "--k", "4", "--beta", "1", "--channel", "output")
    assert code == 0
    row = next(r for r in rows_of(out) if r["theorem_id"] == "output-sufficiency")
    assert float(row["snr_threshold"]) == pytest.approx(243.99, abs=1e-2)
    assert int(row["m_threshold"]) == 117


def test_bounds_out_of_regime_is_flagged_not_fatal(capsys):
    code, out, _ = run(capsys, "bounds", "--n", "10", "--k", "9")
    assert code == 0
    row = next(r for r in rows_of(out) if r["theorem_id"] == "output-sufficiency")
    assert row["out_of_regime"] == "true" and row["m_floor"] == "19"


def test_bounds_missing_n_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bounds", "--k", "2"])
    assert exc.value.code == 2


def test_bounds_channel_flags_exclusive(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bounds", "--n", "10", "--k", "1", "--channel", "input", "--output-noise"])
    assert exc.value.code == 2


def test_bounds_bad_k_is_usage_error(capsys):
    code, _, err = run(capsys, "bounds", "--n", "10", "--k", "10")
    assert code == 2 and "k" in err


def test_bounds_input_channel_and_json(capsys):
    code, out, _ = run(capsys, "bounds", "--n", "100", "--alpha", "0.1", "--d0", "0.05", "--input-noise",
                       "--format", "json")
    ids = [r["theorem_id"] for r in json.loads(out)]
    assert code == 0 and ids[0] == "input-necessity" and "bayes-input-binary-necessity" in ids


def test_json_and_csv_carry_same_values(capsys):
    args = ["bounds", "--n", "100", "--k", "3", "--d0", "0.02"]
    _, c, _ = run(capsys, *args)
    _, j, _ = run(capsys, *args, "--format", "json")
    for rc, rj in zip(rows_of(c), json.loads(j)):
        for key, val in rj.items():
            if isinstance(val, bool):
                assert rc[key] == str(val).lower()
            elif val is None:
                assert rc[key] == ""
            elif isinstance(val, float):
                assert float(rc[key]) == val
            else:
                assert rc[key] == str(val)


def test_rd_bits_is_display_only(capsys):
    _, nats, _ = run(capsys, "rd", "--alpha", "0.1", "--d0", "0.05")
    _, bits, _ = run(capsys, "rd", "--alpha", "0.1", "--d0", "0.05", "--bits")
    assert float(rows_of(bits)[0]["rate"]) == pytest.approx(float(rows_of(nats)[0]["rate"]) / math.log(2))
    assert rows_of(bits)[0]["unit"] == "bits"


def test_rd_out_of_regime_is_usage_error(capsys):
    code, _, _ = run(capsys, "rd", "--alpha", "0.1", "--d0", "0.3")
    assert code == 2


def test_simulate_and_output_file(capsys, tmp_path):
    cfg = write_config(tmp_path)
    dest = tmp_path / "out.csv"
    code, out, _ = run(capsys, "simulate", cfg, "--out", str(dest), "--threads", "2")
    assert code == 0 and out == ""
    assert dest.read_text().splitlines()[0].startswith("n,k,m,snr,d0,channel")


def test_simulate_bad_config(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", write_config(tmp_path, k=[9]))
    assert code == 2
    code, _, _ = run(capsys, "simulate", str(tmp_path / "missing.json"))
    assert code == 2


def test_simulate_budget_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", write_config(tmp_path, n=[30], k=[6], m=[13], budget=100))
    assert code == 3 and "budget" in err


def test_phase_requires_two_axes(capsys, tmp_path):
    code, out, _ = run(capsys, "phase", write_config(tmp_path))
    assert code == 0 and len(rows_of(out)) == 4
    code, _, _ = run(capsys, "phase", write_config(tmp_path, n=[8, 9]))
    assert code == 2


def test_verify_superposition(capsys):
    code, out, _ = run(capsys, "verify", "--lemma", "superposition", "--n", "10", "--k", "2", "--m", "5",
                       "--trials", "10000", "--seed", "7")
    row = rows_of(out)[0]
    assert code == 0 and row["violations"] == "0" and row["pass"] == "true"


def test_verify_zero_trials_vacuous(capsys):
    for lemma in ("superposition", "concentration", "e1e2", "fano"):
        code, out, _ = run(capsys, "verify", "--lemma", lemma, "--n", "10", "--k", "1", "--trials", "0")
        row = rows_of(out)[0]
        assert code == 0 and row["vacuous"] == "true" and row["pass"] == "true"


def test_verify_violation_exit_code(capsys, monkeypatch):
    def fake(*a, **k):
        return ContainmentReport(10, 1, 0, 1, 0.5, 1.0, 1.0, 1.0, 1.0, True)
    monkeypatch.setattr(cli, "verify_superposition_containment", fake)
    code, out, _ = run(capsys, "verify", "--lemma", "superposition", "--n", "6", "--k", "1", "--trials", "10")
    assert code == 1 and rows_of(out)[0]["pass"] == "false"


def test_verify_concentration_and_fano(capsys):
    code, out, _ = run(capsys, "verify", "--lemma", "concentration", "--n", "100", "--m", "200",
                       "--trials", "20000")
    row = rows_of(out)[0]
    assert code == 0 and float(row["norm_tail_freq"]) <= float(row["delta2"])
    code, out, _ = run(capsys, "verify", "--lemma", "fano", "--n", "10", "--k", "1", "--m", "5",
                       "--trials", "200", "--threads", "2")
    assert code == 0 and len(rows_of(out)) == 3


def test_module_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "cs_limits", "rd", "--alpha", "0.2", "--d0", "0.1"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("source,alpha,d0,rate,unit")


def test_thread_env_does_not_change_output(tmp_path):
    cfg = write_config(tmp_path)
    outs = []
    for threads in ("1", "3"):
        env = dict(os.environ, CS_LIMITS_THREADS=threads)
        outs.append(subprocess.run([sys.executable, "-m", "cs_limits", "simulate", cfg],
                                   capture_output=True, env=env, check=True).stdout)
    assert outs[0] == outs[1]
