"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``. The benchmark pipelines go
through the command-line interface so report files exist for the determinism
criterion; heavy runs are shared through session fixtures. The extended
hypercube benchmark (criterion 8, non-blocking, ~10 minutes) is enabled with
``QUDIM_SLOW=1``.
"""

import filecmp
import os
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import finite_difference_gradient, random_configuration
from qudim.cli import main, read_key_values
from qudim.datasets import load_table
from qudim.geometry import (
    point_cloud,
    quantum_metric,
    spectral_gap_ratio,
    spectral_gap_rmt,
)
from qudim.model import energy_decomposition, load_config, quasi_coherent
from qudim.training import loss_gradient


@contextmanager
def criterion(label):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE criterion {label}: FAIL")
        raise
    print(f"\nACCEPTANCE criterion {label}: PASS")


def run_cli(*argv):
    code = main([str(a) for a in argv])
    assert code == 0, f"command failed: {argv}"


# ---------------------------------------------------------------------------
# Benchmark pipelines (criteria 3-6), shared and replayable for criterion 9.
# Report files compared for byte-identity exclude the resolved-config files,
# which embed the differing output paths.
# ---------------------------------------------------------------------------

REPORT_FILES = [
    "c3/train0/train_report.txt", "c3/train0/loss_history.csv",
    "c3/est0/estimate_report.txt", "c3/est0/local_dims.csv",
    "c3/est0/spectra.csv",
    "c3/train2/train_report.txt", "c3/train2/loss_history.csv",
    "c3/est2/estimate_report.txt", "c3/est2/local_dims.csv",
    "c3/est2/spectra.csv",
    "c4/sweep.csv",
    "c5/train3/train_report.txt", "c5/est3/estimate_report.txt",
    "c5/est3/local_dims.csv", "c5/est3/spectra.csv",
    "c5/train4/train_report.txt", "c5/est4/estimate_report.txt",
    "c5/est4/local_dims.csv",
    "c6/w0/train_report.txt", "c6/w0/loss_history.csv",
    "c6/w05/train_report.txt", "c6/w05/loss_history.csv",
    "c6/w1/train_report.txt", "c6/w1/loss_history.csv",
]

MODEL_FILES = ["c3/train0/model.npz", "c5/train3/model.npz", "c6/w1/model.npz"]


def run_pipelines(base):
    base.mkdir(parents=True, exist_ok=True)

    # criterion 3: fuzzy sphere at noise 0 and 0.2
    for tag, noise in (("0", "0"), ("2", "0.2")):
        run_cli("generate", "sphere", "--t", 500, "--noise", noise,
                "--seed", 1, "--out", base / f"c3/gen{tag}")
        run_cli("train", base / f"c3/gen{tag}/sphere.csv", "--n", 3,
                "--epochs", 300, "--seed", 1, "--out", base / f"c3/train{tag}")
        run_cli("estimate", base / f"c3/train{tag}/model.npz",
                base / f"c3/gen{tag}/sphere.csv", "--out", base / f"c3/est{tag}")

    # criterion 4: noise-robustness sweep against the classical baselines
    run_cli("sweep", "sphere", "--noise-grid", "0:0.2:0.05",
            "--methods", "qmetric,twonn,mle", "--t", 500, "--n", 3,
            "--epochs", 300, "--seed", 11, "--out", base / "c4")

    # criterion 5: swiss roll at two Hilbert dimensions
    run_cli("generate", "swissroll", "--t", 1000, "--noise", "0",
            "--seed", 1, "--out", base / "c5/gen")
    run_cli("train", base / "c5/gen/swissroll.csv", "--n", 3, "--epochs", 300,
            "--seed", 1, "--out", base / "c5/train3")
    run_cli("estimate", base / "c5/train3/model.npz",
            base / "c5/gen/swissroll.csv", "--out", base / "c5/est3")
    run_cli("train", base / "c5/gen/swissroll.csv", "--n", 4, "--epochs", 1000,
            "--seed", 1, "--out", base / "c5/train4")
    run_cli("estimate", base / "c5/train4/model.npz",
            base / "c5/gen/swissroll.csv", "--out", base / "c5/est4")

    # criterion 6: circle fluctuation-weight sweep
    run_cli("generate", "circle", "--t", 1000, "--noise", "0.1",
            "--seed", 1, "--out", base / "c6/gen")
    for tag, w, epochs in (("w0", "0", 1000), ("w05", "0.5", 1000),
                           ("w1", "1", 3000)):
        run_cli("train", base / "c6/gen/circle.csv", "--n", 4, "--w", w,
                "--epochs", epochs, "--seed", 1, "--out", base / f"c6/{tag}")
    return base


@pytest.fixture(scope="session")
def pipelines(tmp_path_factory):
    return run_pipelines(tmp_path_factory.mktemp("acceptance") / "run1")


def local_dims_from_csv(path):
    rows = path.read_text().splitlines()[1:]
    dims = []
    for row in rows:
        cell = row.split(",")[1]
        dims.append(int(cell) if cell else None)
    return dims


def circle_cloud_stats(base, tag):
    config, _ = load_config(base / f"c6/{tag}/model.npz")
    data = load_table(base / "c6/gen/circle.csv")
    cloud = point_cloud(config, data)
    dist = float(np.linalg.norm(cloud.positions - data.points, axis=1).mean())
    radial = float(np.abs(np.linalg.norm(cloud.positions, axis=1) - 1.0).mean())
    return cloud.positions, dist, radial


def distinct_positions(positions, tol=0.05):
    centers = []
    for p in positions:
        if not any(np.linalg.norm(p - c) <= tol for c in centers):
            centers.append(p)
    return len(centers)


# ---------------------------------------------------------------------------
# Criterion 1: formula correctness on >= 100 seeded random instances
# ---------------------------------------------------------------------------

def test_criterion_1_formula_correctness():
    with criterion("1 (formula correctness)"):
        rng = np.random.default_rng(2024)
        cases = 0
        while cases < 100:
            d = int(rng.integers(2, 5))
            n = int(rng.integers(2, 6))
            config = random_configuration(rng, d, n)
            x = rng.standard_normal(d)

            qc = quasi_coherent(config, x)
            gap = qc.spectrum.eigenvalues[1] - qc.spectrum.eigenvalues[0]
            if gap < 1e-6:  # resample near-degenerate draws
                continue
            cases += 1

            # (a) ground energy = (squared bias + fluctuation) / 2
            dec = energy_decomposition(config, x)
            assert abs(dec.energy - 0.5 * (dec.bias_sq + dec.fluctuation)) < 1e-9

            # (b) energy Hessian matches central finite differences
            step = 1e-4
            numeric = np.zeros((d, d))
            for m in range(d):
                for k in range(m, d):
                    if m == k:
                        up = x.copy(); up[m] += step
                        dn = x.copy(); dn[m] -= step
                        numeric[m, m] = (
                            quasi_coherent(config, up).energy
                            - 2 * dec.energy
                            + quasi_coherent(config, dn).energy) / step**2
                    else:
                        pp = x.copy(); pp[m] += step; pp[k] += step
                        pm = x.copy(); pm[m] += step; pm[k] -= step
                        mp = x.copy(); mp[m] -= step; mp[k] += step
                        mm = x.copy(); mm[m] -= step; mm[k] -= step
                        numeric[m, k] = numeric[k, m] = (
                            quasi_coherent(config, pp).energy
                            - quasi_coherent(config, pm).energy
                            - quasi_coherent(config, mp).energy
                            + quasi_coherent(config, mm).energy) / (4 * step**2)
            metric = quantum_metric(config, x[None, :])
            analytic = np.eye(d) - metric.entries
            assert np.max(np.abs(analytic - numeric)) < 1e-5

            # (c) metric positive semi-definite
            assert metric.eigenvalues[0] >= -1e-8

            # (d) loss gradient matches central finite differences
            analytic_grad = loss_gradient(config, x[None, :], w=0.5)
            numeric_grad = finite_difference_gradient(config, x[None, :], 0.5)
            rel = (np.max(np.abs(analytic_grad - numeric_grad))
                   / (np.max(np.abs(numeric_grad)) + 1e-12))
            assert rel < 1e-4

            # (e) rank bound
            assert int(np.sum(metric.eigenvalues > 0.5)) <= 2 * (n - 1)
        assert cases >= 100


# ---------------------------------------------------------------------------
# Criterion 2: exact two-level oracle
# ---------------------------------------------------------------------------

def test_criterion_2_pauli_oracle(pauli):
    with criterion("2 (exact two-level oracle)"):
        metric = quantum_metric(pauli, [[0.0, 0.0, 1.0]])
        assert np.max(np.abs(metric.entries - np.diag([1.0, 1.0, 0.0]))) < 1e-10
        estimate = spectral_gap_ratio(metric.eigenvalues)
        assert estimate.local_dim == 2


# ---------------------------------------------------------------------------
# Criterion 3: fuzzy-sphere benchmark at desk scale
# ---------------------------------------------------------------------------

def test_criterion_3_fuzzy_sphere(pipelines):
    with criterion("3 (fuzzy sphere, noise 0 and 0.2)"):
        dims0 = local_dims_from_csv(pipelines / "c3/est0/local_dims.csv")
        frac2 = sum(1 for v in dims0 if v == 2) / len(dims0)
        assert frac2 >= 0.95

        report2 = read_key_values(pipelines / "c3/est2/estimate_report.txt")
        mean_local = float(report2["mean_local"])
        assert 1.90 <= mean_local <= 2.00


# ---------------------------------------------------------------------------
# Criterion 4: noise-robustness contrast against the classical baselines
# ---------------------------------------------------------------------------

def test_criterion_4_noise_robustness(pipelines):
    with criterion("4 (noise-robustness contrast)"):
        rows = (pipelines / "c4/sweep.csv").read_text().splitlines()[1:]
        table = {}
        for row in rows:
            cells = row.split(",")
            table[(cells[0], cells[1])] = float(cells[2])
        levels = ["0.0", "0.05", "0.1", "0.15", "0.2"]
        assert len(rows) == 15
        for level in levels:
            assert table[(level, "qmetric")] == 2.0
        assert table[("0.2", "twonn")] - table[("0.0", "twonn")] >= 0.5
        assert table[("0.2", "mle")] - table[("0.0", "mle")] >= 0.5


# ---------------------------------------------------------------------------
# Criterion 5: swiss-roll Hilbert-dimension sweep
# ---------------------------------------------------------------------------

def test_criterion_5_swiss_roll(pipelines):
    with criterion("5 (swiss roll, N=3 and N=4)"):
        dims3 = local_dims_from_csv(pipelines / "c5/est3/local_dims.csv")
        frac2 = sum(1 for v in dims3 if v == 2) / len(dims3)
        assert frac2 >= 0.99

        dims4 = local_dims_from_csv(pipelines / "c5/est4/local_dims.csv")
        assert any(v == 1 for v in dims4)
        assert any(v == 2 for v in dims4)


# ---------------------------------------------------------------------------
# Criterion 6: circle fluctuation-weight sweep
# ---------------------------------------------------------------------------

def test_criterion_6a_fluctuation_weight_distance(pipelines):
    with criterion("6a (w=0 cloud hugs the data more closely than w=0.5)"):
        _, dist0, _ = circle_cloud_stats(pipelines, "w0")
        _, dist05, _ = circle_cloud_stats(pipelines, "w05")
        assert dist0 < dist05


def test_criterion_6b_fluctuation_weight_radial(pipelines):
    """Contract: the w=0.5 cloud should sit closer to the unit circle than
    the w=0 cloud. The trained optimum at w=0.5 shrinks the cloud radius to
    about 0.88 (the fluctuation term trades radius for variance), which the
    |norm - 1| statistic counts as radial error, so this assertion fails
    against the converged optimum; it is kept as stated."""
    with criterion("6b (w=0.5 cloud closer to the unit circle than w=0)"):
        _, _, radial0 = circle_cloud_stats(pipelines, "w0")
        _, _, radial05 = circle_cloud_stats(pipelines, "w05")
        assert radial05 < radial0


def test_criterion_6c_full_energy_collapse(pipelines):
    with criterion("6c (w=1 cloud collapses to at most 4 positions)"):
        positions, _, _ = circle_cloud_stats(pipelines, "w1")
        assert distinct_positions(positions, tol=0.05) <= 4


# ---------------------------------------------------------------------------
# Criterion 7: threshold detector on planted low-rank spectra
# ---------------------------------------------------------------------------

def rmt_recovery_counts():
    counts = {}
    for dim, planted in ((40, 3), (40, 10), (72, 3), (72, 10)):
        hits = 0
        for trial in range(100):
            rng = np.random.default_rng(7000 + 13 * dim + planted * 101 + trial)
            bulk_size = dim - planted
            noise = 0.1 * rng.standard_normal((bulk_size, bulk_size))
            bulk = np.linalg.svd(noise / np.sqrt(bulk_size), compute_uv=False)
            eigs = np.sort(np.concatenate([bulk, np.ones(planted)]))
            estimate = spectral_gap_rmt(eigs, aspect=1.0)
            hits += int(estimate.local_dim == planted)
        counts[(dim, planted)] = hits
    return counts


def test_criterion_7_rmt_detector():
    with criterion("7 (threshold detector recovers planted rank)"):
        for key, hits in rmt_recovery_counts().items():
            assert hits >= 95, f"recovery {hits}/100 for (D, r)={key}"


# ---------------------------------------------------------------------------
# Criterion 8: extended hypercube benchmark (non-blocking, ~10 minutes)
# ---------------------------------------------------------------------------

@pytest.mark.skipif(not os.environ.get("QUDIM_SLOW"),
                    reason="extended benchmark; enable with QUDIM_SLOW=1")
def test_criterion_8_hypercube_extended(tmp_path):
    with criterion("8 (17-dimensional hypercube, extended)"):
        run_cli("generate", "hypercube", "--t", 2500, "--seed", 8,
                "--out", tmp_path / "gen")
        run_cli("train", tmp_path / "gen/hypercube.csv", "--n", 10,
                "--epochs", 500, "--seed", 8, "--out", tmp_path / "train")
        run_cli("estimate", tmp_path / "train/model.npz",
                tmp_path / "gen/hypercube.csv", "--aggregation", "median",
                "--out", tmp_path / "est")
        report = read_key_values(tmp_path / "est/estimate_report.txt")
        assert 15.0 <= float(report["global_median"]) <= 17.0
        # visible gap in the mean spectrum between lowest and second eigenvalue
        rows = (tmp_path / "est/spectra.csv").read_text().splitlines()[1:]
        spectra = np.array([[float(c) for c in row.split(",")[1:]]
                            for row in rows])
        mean_spectrum = spectra.mean(axis=0)
        assert mean_spectrum[1] / max(mean_spectrum[0], 1e-12) > 10.0


# ---------------------------------------------------------------------------
# Criterion 9: determinism of the benchmark pipelines
# ---------------------------------------------------------------------------

def test_criterion_9_determinism(pipelines, tmp_path_factory):
    with criterion("9 (identical seeds give identical reports)"):
        replay = run_pipelines(tmp_path_factory.mktemp("acceptance") / "run2")
        for rel in REPORT_FILES:
            first = pipelines / rel
            second = replay / rel
            assert filecmp.cmp(first, second, shallow=False), \
                f"report differs between reruns: {rel}"
        for rel in MODEL_FILES:
            a, _ = load_config(pipelines / rel)
            b, _ = load_config(replay / rel)
            assert np.array_equal(a.operators, b.operators)
        counts = rmt_recovery_counts()
        assert counts == rmt_recovery_counts()
