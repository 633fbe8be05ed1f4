import math
import os

import numpy as np
import pytest

import hjbpod


def test_care_scalar_root():
    one = np.ones((1, 1))
    p, gain, residual = hjbpod.solve_care(-one, one, one, one)
    assert p[0, 0] == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-14)
    assert gain[0, 0] == pytest.approx(p[0, 0], abs=1e-14)
    assert residual <= 1e-14


def test_lyapunov_residual():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 4))
    a -= (np.linalg.eigvals(a).real.max() + 1.0) * np.eye(4)
    q = np.eye(4)
    x = hjbpod.solve_lyapunov(a, q)
    assert np.abs(a.T @ x + x @ a + q).max() <= 1e-10


def test_pod_basis_is_mass_orthonormal():
    psi, eigenvalues, mass = hjbpod.pod_basis("test2", 4)
    assert psi.shape[1] == 4
    assert np.abs(psi.T @ mass @ psi - np.eye(4)).max() <= 1e-12
    assert np.all(np.diff(eigenvalues) <= 0.0)


def test_bad_input_raises():
    with pytest.raises(hjbpod.ConfigError):
        hjbpod.run_experiment(preset="nope")
    with pytest.raises(hjbpod.ConfigError):
        hjbpod.run_experiment()
    with pytest.raises(hjbpod.RankDeficiencyError):
        hjbpod.pod_basis("test2", 500)


def test_small_experiment_round_trip(tmp_path):
    cfg = tmp_path / "small.ini"
    cfg.write_text(
        "[pde]\n"
        "n_x = 39\n"
        "t_e = 1\n"
        "w0 = parabola 2\n"
        "u_min = -1\n"
        "u_max = 1\n"
        "[snapshots]\n"
        "controls = -1 0 1\n"
        "dt = 0.05\n"
        "[pod]\n"
        "ell = 2\n"
        "[hjb]\n"
        "K = 0.2\n"
    )
    out = tmp_path / "out"
    result = hjbpod.run_experiment(config=str(cfg), out_dir=str(out), seed=1)
    assert result["failed_cells"] == 0
    (row,) = result["rows"]
    assert row["ell"] == 2 and row["status"] == "ok"
    assert row["cost"] > 0.0 and math.isfinite(row["gap_l2"])
    assert (out / "report.csv").exists()
    again = hjbpod.run_experiment(config=str(cfg), out_dir=str(tmp_path / "b"), seed=1)
    assert again["rows"][0]["cost"] == row["cost"]
