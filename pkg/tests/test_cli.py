import csv
import json
import shutil

import numpy as np
import pytest

from conftest import fci_energy, problem
from pqesim.cli import main
from pqesim.molecule import determinant_hamiltonian, fixture_path


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture
def h4(tmp_path):
    """Private copy of a fixture so the FCI cache lands in the temp directory."""
    dst = tmp_path / "h4_1.00.fcidump"
    shutil.copy(fixture_path("h4_1.00"), dst)
    return dst


def test_run_pqe_outputs_and_determinism(tmp_path, h4):
    cfg = write(tmp_path, f"[experiment]\nfixture = {h4}\nmethod = pqe\nseed = 3\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    for f in ("trace.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["converged"] and summary["n_par"] == 26
    assert summary["delta_e"] == pytest.approx(summary["energy"] - fci_energy("h4_1.00"))
    prov = summary["provenance"]
    assert prov["seed"] == 3 and len(prov["fixture_sha256"]) == 64
    assert prov["thresholds"]["omega_r"] == 1e-5
    assert (tmp_path / "h4_1.00.fcidump.fci.json").exists()
    rows = list(csv.DictReader(open(tmp_path / "a" / "trace.csv")))
    assert int(rows[-1]["n_res_evals"]) == summary["n_res"]


def test_fci_subcommand_matches_dense_oracle(capsys):
    assert main(["fci", "--fixture", "h2_0.75"]) == 0
    value = float(capsys.readouterr().out.strip())
    H = determinant_hamiltonian(problem("h2_0.75"))[0].toarray()
    assert value == pytest.approx(np.linalg.eigvalsh(H)[0], abs=1e-10)


def test_spqe_large_threshold(tmp_path, h4):
    cfg = write(tmp_path, f"[experiment]\nfixture = {h4}\nmethod = spqe\n[spqe]\nomega = 10\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["n_par"] == 0
    assert summary["energy"] == pytest.approx(problem("h4_1.00").hf_energy())


@pytest.mark.parametrize("method", ["vqe", "adapt-vqe"])
def test_variational_methods(tmp_path, h4, method):
    cfg = write(tmp_path, f"[experiment]\nfixture = {h4}\nmethod = {method}\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["n_grad_elements"] > 0


def test_noise_study(tmp_path, h4):
    cfg = write(tmp_path, f"[experiment]\nfixture = {h4}\nmethod = pqe\n[ansatz]\n"
                          "pool = particle-hole-full\n[noise]\nsigmas = 0, 1e-3\nensemble = 4\n"
                          "iterations = 6\n")
    assert main(["noise-study", "--config", cfg, "--out", str(tmp_path / "n"), "--threads", "2"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "n" / "noise.csv")))
    assert len(rows) == 12
    noiseless = [r for r in rows if float(r["sigma"]) == 0]
    assert all(float(r["std_error"]) == 0 for r in noiseless)
    noisy = [r for r in rows if float(r["sigma"]) > 0]
    assert all(float(r["std_error"]) > 0 for r in noisy)


def test_noise_study_rejects_tiny_ensemble(tmp_path, h4):
    cfg = write(tmp_path, f"[experiment]\nfixture = {h4}\n[noise]\nsigmas = 1e-3\nensemble = 1\n")
    assert main(["noise-study", "--config", cfg, "--out", str(tmp_path / "n")]) == 1


def test_single_point_scan_equals_run(tmp_path, h4):
    cfg = write(tmp_path, f"[experiment]\nfixture = {h4}\nmethod = pqe\n[scan]\nfixtures = {h4}\n")
    assert main(["scan", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    assert ((tmp_path / "s" / "h4_1.00" / "trace.csv").read_bytes()
            == (tmp_path / "r" / "trace.csv").read_bytes())
    assert len((tmp_path / "s" / "scan.csv").read_text().splitlines()) == 2


def test_scan_over_parameter_reports_partial_failure(tmp_path, h4):
    cfg = write(tmp_path, f"[experiment]\nfixture = {h4}\nmethod = spqe\n[scan]\n"
                          f"fixtures = {h4}, missing_fixture\nparameter = spqe.omega\nvalues = 0.1, 10\n")
    assert main(["scan", "--config", cfg, "--out", str(tmp_path / "s"), "--threads", "2"]) == 1
    rows = list(csv.DictReader(open(tmp_path / "s" / "scan.csv")))
    assert len(rows) == 4
    assert [r["converged"] for r in rows] == ["True", "True", "False", "False"]
    assert int(rows[1]["n_par"]) == 0 < int(rows[0]["n_par"])


@pytest.mark.parametrize("text", [
    "[experiment]\nfixture = h2_0.75\nmethod = dmrg\n",
    "[experiment]\nfixture = nowhere\nmethod = pqe\n",
    "[experiment]\nmethod = pqe\n",
    "[pqe]\nomega_r = 1e-5\n",
    "[experiment]\nfixture = h2_0.75\nmethod = pqe\n[pqe]\nomega_r = tiny\n",
    "[experiment]\nfixture = h2_0.75\nmethod = pqe\n[pqe]\nomega_r = -1\n",
])
def test_user_errors_exit_one(tmp_path, text, capsys):
    cfg = write(tmp_path, text)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err


def test_nonconvergence_exits_two(tmp_path, h4):
    cfg = write(tmp_path, f"[experiment]\nfixture = {h4}\nmethod = pqe\n[pqe]\nmax_micro = 1\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert (tmp_path / "o" / "trace.csv").exists()


def test_bad_fixture_contents_exit_one(tmp_path):
    bad = tmp_path / "bad.fcidump"
    bad.write_text(" &FCI NORB=2, &END\n")
    cfg = write(tmp_path, f"[experiment]\nfixture = {bad}\nmethod = fci\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
