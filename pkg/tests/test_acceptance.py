"""Acceptance gate: one test per shipping criterion.

Each test prints a single PASS or FAIL line (written past pytest's capture
so the lines always reach the console) and then asserts. Criteria with
runtime budgets measure wall time and enforce it.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from ffselect.cli import entry
from ffselect.core import (
    KernelSpec,
    bandwidth_rule_of_thumb,
    center_columns,
    kernel_pdf,
    local_linear_smooth,
    _pipeline_arrays,
)
from ffselect.io import read_report
from ffselect.selectors import (
    FtcvConfig,
    LadleConfig,
    ftcv_select,
    icp_select,
    ladle_select,
)
from ffselect.simlab import ScenarioSpec, gen_scenario1, gen_scenario2, run_grid

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def verdict(capsys):
    # verdict lines must reach the console even for passing tests, so they
    # print inside a capture-disabled window before asserting
    def _verdict(ok: bool, label: str, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}", flush=True)
        assert ok, f"{label}: {detail}"

    return _verdict


def _freqs(result):
    return {
        (c.spec.scenario, c.spec.regime, c.spec.theta, c.method): c.frequency
        for c in result.cells
    }


def test_criterion_1_smoother_matches_wls_oracle(verdict):
    # independent oracle: an explicit per-point weighted least squares fit
    # of a line, intercept evaluated at the point
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(20):
        u = rng.uniform(-1.0, 1.0, 200)
        y = rng.standard_normal((200, 5))
        data = center_columns(y, u)
        h = bandwidth_rule_of_thumb(u)
        for family in ("gaussian", "epanechnikov"):
            kern = KernelSpec(family, h)
            got = local_linear_smooth(data, kern).values
            want = np.empty_like(got)
            for i in range(200):
                w = kernel_pdf(family, (u - u[i]) / h)
                X = np.column_stack([np.ones(200), u - u[i]])
                beta = np.linalg.solve((X.T * w) @ X, (X.T * w) @ data.y)
                want[i] = beta[0]
            worst = max(worst, float(np.max(np.abs(got - want))))
    elapsed = time.perf_counter() - t0
    verdict(
        worst <= 1e-10 and elapsed < 5.0,
        "criterion 1 (smoother vs WLS oracle)",
        f"max abs diff {worst:.3e} (limit 1e-10), {elapsed:.2f}s (limit 5s)",
    )


def test_criterion_2_identification_invariants(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst_diag = 0.0
    worst_resid = 0.0
    for _ in range(20):
        n, m = 120, 10
        u = rng.uniform(-1.0, 1.0, n)
        f = np.column_stack([np.cos(2 * np.pi * u), np.sin(2 * np.pi * u)])
        y = f @ rng.standard_normal((m, 2)).T + 0.7 * rng.standard_normal((n, m))
        data = center_columns(y, u)
        h = bandwidth_rule_of_thumb(u)
        ghat, lam, v = _pipeline_arrays(u, data.y, h, 1)
        for p in range(0, 9):
            fhat = ghat @ v[:, :p]
            gram = fhat.T @ fhat / n
            diag_err = np.max(np.abs(gram - np.diag(lam[:p]))) if p else 0.0
            worst_diag = max(worst_diag, diag_err / lam[0])
            resid = ghat - fhat @ v[:, :p].T
            lhs = np.sum(resid * resid)
            rhs = n * lam[p:].sum()
            scale = max(lhs, rhs, n * lam[0] * 1e-10)
            worst_resid = max(worst_resid, abs(lhs - rhs) / scale)
    elapsed = time.perf_counter() - t0
    verdict(
        worst_diag <= 1e-8 and worst_resid <= 1e-8 and elapsed < 5.0,
        "criterion 2 (identification invariants)",
        f"diag rel err {worst_diag:.3e}, energy rel err {worst_resid:.3e} "
        f"(limits 1e-8), {elapsed:.2f}s (limit 5s)",
    )


def test_criterion_3_ftcv_orthogonality(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    panel, _ = gen_scenario1(80, 80, 1.0, "e1", rng)
    kern = KernelSpec("gaussian", bandwidth_rule_of_thumb(panel.u))
    report = ftcv_select(
        panel, kern, FtcvConfig(k_folds=10, p_min=1, p_max=8, rng_seed=0),
        diagnostics=True,
    )
    cosine = report.diagnostics["orthogonality_max_cosine"]
    elapsed = time.perf_counter() - t0
    verdict(
        cosine <= 1e-8 and elapsed < 60.0,
        "criterion 3 (FTCV residual orthogonality)",
        f"max |<resid, F>| / (|resid||F|) = {cosine:.3e} (limit 1e-8), "
        f"{elapsed:.1f}s (limit 60s)",
    )


def test_criterion_4_low_noise_correctness(verdict):
    t0 = time.perf_counter()
    s1 = run_grid(
        [ScenarioSpec("s1", "e1", 150, 150, 0.25)],
        replications=100, master_seed=0,
    )
    s2 = run_grid(
        [ScenarioSpec("s2", "e1", 150, 150, 0.25)],
        replications=100, master_seed=0, methods=("ftcv1", "ftcv10"),
    )
    freqs = {**_freqs(s1), **_freqs(s2)}
    elapsed = time.perf_counter() - t0
    checks = [
        (("s1", "e1", 0.25, meth), 0.90) for meth in ("icp", "ladle", "ftcv1", "ftcv10")
    ] + [(("s2", "e1", 0.25, meth), 0.85) for meth in ("ftcv1", "ftcv10")]
    detail = ", ".join(
        f"{key[0]}/{key[3]}={freqs[key]:.2f} (>= {thr})" for key, thr in checks
    )
    ok = all(freqs[key] >= thr for key, thr in checks) and elapsed < 1800.0
    verdict(ok, "criterion 4 (low-noise correctness, R=100)", f"{detail}, {elapsed:.0f}s")


def test_criterion_5_degradation_shape(verdict):
    cells = [ScenarioSpec("s1", "e1", 150, 150, th) for th in (0.25, 1.0, 4.0)]
    result = run_grid(cells, replications=100, master_seed=0, methods=("ftcv10",))
    freqs = _freqs(result)
    seq = [freqs[("s1", "e1", th, "ftcv10")] for th in (0.25, 1.0, 4.0)]
    ok = seq[0] >= seq[1] - 0.10 and seq[1] >= seq[2] - 0.10
    verdict(
        ok,
        "criterion 5 (degradation across theta)",
        f"ftcv10 frequencies at theta 0.25/1/4 = {seq[0]:.2f}/{seq[1]:.2f}/{seq[2]:.2f} "
        "(non-increasing, slack 0.10)",
    )


@pytest.mark.parametrize("regime", ["e2", "e3"])
def test_criterion_6_robustness_regimes(regime, verdict):
    result = run_grid(
        [ScenarioSpec("s1", regime, 150, 150, 0.25)],
        replications=100, master_seed=0, methods=("ftcv1", "ftcv10"),
    )
    freqs = _freqs(result)
    f1 = freqs[("s1", regime, 0.25, "ftcv1")]
    f10 = freqs[("s1", regime, 0.25, "ftcv10")]
    ok = f1 >= 0.90 and f10 >= 0.90
    note = ""
    if regime == "e3" and not ok:
        # Cross-correlated noise is genuinely predictable one series out, so
        # the cross-validation criterion rewards extra components: including a
        # noise-covariance eigendirection with eigenvalue mu changes the score
        # by about theta*(mu-1)/m, and half the AR(1) spectrum has mu > 1.
        # This is honest method behavior, left failing rather than tuned away.
        note = " (known faithful-implementation limit under cross-correlated noise)"
    verdict(
        ok,
        f"criterion 6 (robustness under {regime.upper()})",
        f"ftcv1={f1:.2f}, ftcv10={f10:.2f} (>= 0.90 each){note}",
    )


def test_criterion_7_determinism_across_thread_counts(monkeypatch, verdict):
    rng = np.random.default_rng(707)
    panel, _ = gen_scenario1(60, 12, 1.0, "e1", rng)
    kern = KernelSpec("gaussian", bandwidth_rule_of_thumb(panel.u))
    selector_ok = True
    for make in (
        lambda: icp_select(panel, kern, p_max=6, p_min=0).criterion_values,
        lambda: ladle_select(panel, kern, LadleConfig(p_max=6, rng_seed=4)).criterion_values,
        lambda: ftcv_select(panel, kern, FtcvConfig(k_folds=10, p_max=6, rng_seed=4)).criterion_values,
        lambda: ftcv_select(panel, kern, FtcvConfig(k_folds=None, p_max=6, rng_seed=4)).criterion_values,
    ):
        selector_ok = selector_ok and np.array_equal(make(), make())

    grid = [ScenarioSpec("s1", "e1", 60, 12, 0.5), ScenarioSpec("s2", "e1", 60, 12, 0.5)]
    kwargs = dict(replications=6, master_seed=9, p_min=1, p_max=6)
    monkeypatch.setenv("FFSELECT_THREADS", "1")
    one = run_grid(grid, **kwargs)
    monkeypatch.setenv("FFSELECT_THREADS", "4")
    four = run_grid(grid, **kwargs)
    explicit = run_grid(grid, workers=4, **kwargs)
    grid_ok = one.cells == four.cells == explicit.cells
    verdict(
        selector_ok and grid_ok,
        "criterion 7 (bitwise determinism, threads 1 vs 4)",
        f"selectors identical: {selector_ok}, grid identical: {grid_ok}",
    )


def test_criterion_8_real_data_pipeline_shape(tmp_path, verdict):
    out = tmp_path / "report.json"
    code = entry([
        "select", str(DATA / "treasury_synthetic.csv"),
        "--u-column", "vix", "--date-column", "date", "--log-u",
        "--method", "all", "--out", str(out),
    ])
    report = read_report(str(out))  # validates schema marker and all fields
    raw = json.loads(out.read_text())
    shape_ok = (
        code == 0
        and (report.n, report.m) == (1019, 12)
        and report.log_u is True
        and [r.method for r in report.results] == ["icp", "ladle", "ftcv1", "ftcv10"]
        and all(r.p_min <= r.p_hat <= r.p_max for r in report.results)
        and all(
            len(r.criterion_values) == r.p_max - r.p_min + 1 for r in report.results
        )
        and raw["schema"] == "ffselect/run-report/1"
    )
    picks = ", ".join(f"{r.method}={r.p_hat}" for r in report.results)
    verdict(
        shape_ok,
        "criterion 8 (real-data pipeline shape)",
        f"exit {code}, n={report.n}, m={report.m}, {picks}",
    )


def test_criterion_9_analytic_moments(verdict):
    n = 2000
    bound1 = 4.0 / np.sqrt(n)
    bound2 = 10.0 / np.sqrt(n)
    worst_var = 0.0
    pooled = np.zeros(3)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        _, t1 = gen_scenario1(n, 5, 1.0, "e1", rng)
        worst_var = max(worst_var, abs(float(np.mean(t1.factors[:, 0] ** 2)) - 0.5))
        rng = np.random.default_rng(seed)
        _, t2 = gen_scenario2(n, 5, 1.0, "e1", rng)
        f = t2.factors
        pooled += [
            np.mean(f[:, 0] * f[:, 1]),
            np.mean(f[:, 0] * f[:, 2]),
            np.mean(f[:, 1] * f[:, 2]),
        ]
    cross = float(np.max(np.abs(pooled / 100)))
    ok = worst_var <= bound1 and cross <= bound2
    verdict(
        ok,
        "criterion 9 (analytic factor moments)",
        f"S1 worst |var(F1) - 1/2| = {worst_var:.4f} (limit {bound1:.4f} per seed), "
        f"S2 worst pooled cross-moment = {cross:.4f} (limit {bound2:.4f} over 100 seeds)",
    )
