import json
import subprocess
import sys

from sthirring.cli import main


def run_cli(*argv):
    """Invoke the entry point in-process, capturing stdout."""
    import io
    from contextlib import redirect_stdout
    buf = io.StringIO()
    with redirect_stdout(buf):
        rc = main(list(argv))
    return rc, buf.getvalue()


def test_expand_tex_lists_f2_monomials():
    rc, out = run_cli("expand", "--order", "2", "--format", "tex")
    assert rc == 0
    assert "3 monomials" in out
    assert out.count(r"\circledast") >= 6  # two propagators per monomial


def test_expand_json_roundtrips():
    from sthirring.terms import term_from_json
    rc, out = run_cli("expand", "--order", "2", "--format", "json")
    assert rc == 0
    data = json.loads(out)
    assert len(data["monomials"]) == 3
    for td in data["monomials"]:
        term_from_json(td)  # lossless decode


def test_expect_prints_zero():
    rc, out = run_cli("expect", "--order", "3")
    assert rc == 0
    assert out.startswith("0")
    assert "876" in out  # 12 monomials x 73 patterns each


def test_power_count_table_d2():
    rc, out = run_cli("power-count", "--dim", "2", "--max-order", "5",
                      "--format", "table")
    assert rc == 0
    rhos = [line.split()[5] for line in out.strip().splitlines()[1:]]
    assert rhos == ["1", "0", "-1", "-2", "-3", "-4"]


def test_correlate_json():
    rc, out = run_cli("correlate", "--order", "1", "--branches", "psi-psibar",
                      "--format", "json")
    assert rc == 0
    data = json.loads(out)
    assert len(data["orders"]["0"]["diagrams"]) == 1
    assert len(data["orders"]["1"]["diagrams"]) == 2
    tags = sorted(t[0] for d in data["orders"]["1"]["diagrams"]
                  for t in d["counterterm_tags"])
    assert tags == ["C", "Ctilde"]


def test_correlate_same_species_empty():
    rc, out = run_cli("correlate", "--order", "0", "--branches", "psi-psi",
                      "--format", "json")
    assert rc == 0
    assert json.loads(out)["orders"]["0"]["diagrams"] == []


def test_gamma_check_reports_zero_failures():
    rc, out = run_cli("gamma-check", "--seed", "3", "--trials", "4")
    assert rc == 0
    assert json.loads(out)["failures"] == 0


def test_kernel_check_d1():
    rc, out = run_cli("kernel-check", "--dim", "1", "--mass", "1.0",
                      "--trials", "5", "--seed", "9")
    assert rc == 0
    rep = json.loads(out)
    assert rep["pass"] and rep["worst_tolerance_fraction"] <= 1.0


def test_counterterms_order_2():
    rc, out = run_cli("counterterms", "--order", "2")
    assert rc == 0
    rep = json.loads(out)
    assert rep["orders"]["1"]["residual_zero"]
    assert rep["orders"]["2"]["residual_zero"]
    assert len(rep["orders"]["1"]["operators"]) == 1


def test_byte_identical_reruns():
    a = run_cli("correlate", "--order", "1", "--format", "json")
    b = run_cli("correlate", "--order", "1", "--format", "json")
    assert a == b
    a = run_cli("gamma-check", "--seed", "11", "--trials", "3")
    b = run_cli("gamma-check", "--seed", "11", "--trials", "3")
    assert a == b


def test_output_file(tmp_path):
    path = tmp_path / "out.json"
    rc, out = run_cli("expect", "--order", "1", "--format", "json",
                      "--output", str(path))
    assert rc == 0 and out == ""
    assert json.loads(path.read_text())["value"] == "0"


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("order = 2\nformat = json\n")
    rc, out = run_cli("--config", str(cfg), "expect")
    assert rc == 0
    assert json.loads(out)["order"] == 2
    rc, out = run_cli("--config", str(cfg), "expect", "--order", "1")
    assert json.loads(out)["order"] == 1


def test_usage_error_exit_code():
    proc = subprocess.run(
        [sys.executable, "-m", "sthirring.cli", "expand", "--order", "x"],
        capture_output=True)
    assert proc.returncode == 2
    proc = subprocess.run(
        [sys.executable, "-m", "sthirring.cli", "no-such-command"],
        capture_output=True)
    assert proc.returncode == 2


def test_dot_output_loadable_shape():
    rc, out = run_cli("correlate", "--order", "0", "--format", "dot")
    assert rc == 0
    assert out.lstrip().startswith("digraph")
    assert out.count("->") >= 2


def test_threads_env_validation(monkeypatch):
    monkeypatch.setenv("STHIRRING_THREADS", "zero")
    rc, _ = run_cli("expect", "--order", "0")
    assert rc == 3
    monkeypatch.setenv("STHIRRING_THREADS", "2")
    rc, _ = run_cli("expect", "--order", "0")
    assert rc == 0


def test_gamma_check_export_rep():
    rc, out = run_cli("gamma-check", "--seed", "1", "--trials", "2",
                      "--export-rep", "3")
    assert rc == 0
    rep = json.loads(out)["gamma_rep"]
    assert rep["dim_spinor"] == 2 and len(rep["gammas"]) == 3
    assert rep["clifford_defect"] == 0.0


def test_domain_errors_exit_usage():
    assert run_cli("power-count", "--dim", "0", "--max-order", "2")[0] == 2
    assert run_cli("expand", "--order", "9")[0] == 2
    assert run_cli("kernel-check", "--dim", "1", "--mass", "-1.0")[0] == 2


def test_expand_dot_at_order_zero():
    rc, out = run_cli("expand", "--order", "0", "--format", "dot")
    assert rc == 0 and out.lstrip().startswith("digraph")
