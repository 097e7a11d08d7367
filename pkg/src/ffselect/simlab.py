"""Seeded Monte-Carlo study of the selectors on synthetic factor panels.

Two scenarios are built in: a pair of cosine and sine factors driven by a
uniform covariate, and a trio of orthogonal polynomial factors driven by a
standard normal covariate with one loading zeroed per series. Panels are
returned exactly as generated, with ``column_means`` set to zero; the
selectors do not require centered input, and subtracting full-sample
column means would couple every held-out entry to the training rows
through its share of the column mean, which biases cross-validated
selection toward spurious extra factors.

Error regimes: ``e1`` draws independent unit normals, ``e2`` doubles the
variance of every even-numbered series, ``e3`` gives each row an AR-like
covariance with correlation 0.5^|k-l| between series k and l.

The grid runner derives every random stream from a master seed through
``numpy.random.SeedSequence`` spawn keys built from the cell coordinates
and replication index, so results are reproducible bit for bit regardless
of worker count or cell ordering. The noise level never enters the spawn
key: panels at different ``theta`` share the same covariate, loadings and
noise draws, scaled by ``sqrt(theta)``.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import KernelSpec, PanelData, bandwidth_rule_of_thumb
from .errors import (
    CholeskyFailure,
    ConfigError,
    FfselectError,
    ReplicationBudgetExceeded,
    ShapeMismatch,
)
from .selectors import (
    FtcvConfig,
    LadleConfig,
    ftcv_select,
    icp_select,
    ladle_select,
)

__all__ = [
    "TruthRecord",
    "ScenarioSpec",
    "CellResult",
    "GridResult",
    "gen_errors",
    "gen_scenario1",
    "gen_scenario2",
    "run_grid",
    "emit_frequency_curves",
    "METHODS",
    "SCENARIOS",
    "REGIMES",
]

REGIMES = ("e1", "e2", "e3")
SCENARIOS = ("s1", "s2")
METHODS = ("icp", "ladle", "ftcv1", "ftcv10")

# default noise grid; spans low to high signal-to-noise
DEFAULT_THETAS = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
FAILURE_BUDGET = 0.05


@dataclass(frozen=True)
class TruthRecord:
    """Ground truth behind one generated panel.

    ``factors`` holds the factor functions evaluated at the drawn
    covariate, one column per factor; ``loadings`` the coefficients that
    mixed them into the responses.
    """

    p0: int
    factors: np.ndarray
    loadings: np.ndarray
    u: np.ndarray

    def __post_init__(self) -> None:
        factors = np.asarray(self.factors, dtype=np.float64)
        loadings = np.asarray(self.loadings, dtype=np.float64)
        u = np.asarray(self.u, dtype=np.float64)
        if factors.shape != (u.shape[0], self.p0):
            raise ShapeMismatch(
                f"factors must be {(u.shape[0], self.p0)}, got {factors.shape}"
            )
        if loadings.ndim != 2 or loadings.shape[1] != self.p0:
            raise ShapeMismatch(
                f"loadings must have {self.p0} columns, got shape {loadings.shape}"
            )
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "loadings", loadings)
        object.__setattr__(self, "u", u)


@dataclass(frozen=True)
class ScenarioSpec:
    """One grid cell: scenario, error regime, panel shape and noise level."""

    scenario: str
    regime: str
    n: int
    m: int
    theta: float

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}, expected one of {SCENARIOS}")
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}, expected one of {REGIMES}")
        if self.n < 3 or self.m < 3:
            raise ConfigError(f"panel must be at least 3x3, got n={self.n}, m={self.m}")
        theta = float(self.theta)
        if not np.isfinite(theta) or theta < 0.0:
            raise ConfigError(f"theta must be finite and non-negative, got {self.theta!r}")
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class CellResult:
    """Selection outcomes of one cell for one method."""

    spec: ScenarioSpec
    method: str
    frequency: float
    replications: int
    failures: int
    picks: tuple = ()


@dataclass(frozen=True)
class GridResult:
    """Everything a grid run produced, with its seed provenance."""

    cells: tuple
    replications: int
    master_seed: int
    seed_scheme: str
    p_min: int
    p_max: int
    kernel_family: str


def gen_errors(regime: str, n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an n by m noise matrix under the named regime."""
    if regime == "e1":
        return rng.standard_normal((n, m))
    if regime == "e2":
        e = rng.standard_normal((n, m))
        # even series (1-based) get variance 2
        scale = np.where(np.arange(1, m + 1) % 2 == 0, math.sqrt(2.0), 1.0)
        return e * scale[np.newaxis, :]
    if regime == "e3":
        cov = 0.5 ** np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise CholeskyFailure(f"noise covariance is not positive definite: {exc}") from exc
        return rng.standard_normal((n, m)) @ chol.T
    raise ConfigError(f"unknown regime {regime!r}, expected one of {REGIMES}")


def gen_scenario1(
    n: int, m: int, theta: float, regime: str, rng: np.random.Generator
) -> tuple[PanelData, TruthRecord]:
    """Panel with a cosine and a sine factor of a uniform covariate.

    ``u`` is uniform on (-1, 1), the factors are cos(2*pi*u) and
    sin(2*pi*u), and the loadings are independent unit normals. Responses
    are the loaded factors plus ``sqrt(theta)`` times regime noise, passed
    through as generated.
    """
    if n < 3 or m < 3:
        raise ConfigError(f"panel must be at least 3x3, got n={n}, m={m}")
    u = rng.uniform(-1.0, 1.0, n)
    factors = np.column_stack([np.cos(2.0 * np.pi * u), np.sin(2.0 * np.pi * u)])
    loadings = rng.standard_normal((m, 2))
    noise = gen_errors(regime, n, m, rng)
    y = factors @ loadings.T + math.sqrt(theta) * noise
    panel = PanelData(y=y, u=u, column_means=np.zeros(m))
    return panel, TruthRecord(p0=2, factors=factors, loadings=loadings, u=u)


def gen_scenario2(
    n: int, m: int, theta: float, regime: str, rng: np.random.Generator
) -> tuple[PanelData, TruthRecord]:
    """Panel with three orthogonal polynomial factors of a normal covariate.

    ``u`` is standard normal and the factors are u, u^2 - 1 and
    0.4*(u^4 - 6u^2 + 3), which are pairwise uncorrelated under the
    covariate law. Each series draws three unit-normal loadings and then
    has exactly one of them, chosen uniformly, set to zero, so every
    response mixes only two of the three factors.
    """
    if n < 3 or m < 3:
        raise ConfigError(f"panel must be at least 3x3, got n={n}, m={m}")
    u = rng.standard_normal(n)
    factors = np.column_stack([u, u * u - 1.0, 0.4 * (u**4 - 6.0 * u * u + 3.0)])
    loadings = rng.standard_normal((m, 3))
    zero_col = rng.integers(0, 3, size=m)
    loadings[np.arange(m), zero_col] = 0.0
    noise = gen_errors(regime, n, m, rng)
    y = factors @ loadings.T + math.sqrt(theta) * noise
    panel = PanelData(y=y, u=u, column_means=np.zeros(m))
    return panel, TruthRecord(p0=3, factors=factors, loadings=loadings, u=u)


_GENERATORS = {"s1": gen_scenario1, "s2": gen_scenario2}

SEED_SCHEME = (
    "SeedSequence(master_seed, spawn_key=(scenario_index, regime_index, n, m, rep, stage)); "
    "stage 0 draws the panel, stages 1 and 2 seed the ladle bootstrap and the fold split; "
    "theta is applied outside the key so noise levels share draws"
)


def _stream_seed(master_seed: int, spec: ScenarioSpec, rep: int, stage: int) -> np.random.SeedSequence:
    key = (
        SCENARIOS.index(spec.scenario),
        REGIMES.index(spec.regime),
        spec.n,
        spec.m,
        rep,
        stage,
    )
    return np.random.SeedSequence(master_seed, spawn_key=key)


def _one_replication(
    spec: ScenarioSpec,
    methods: tuple,
    rep: int,
    master_seed: int,
    p_min: int,
    p_max: int,
    kernel_family: str,
) -> dict:
    """Generate one panel and run every requested selector on it.

    Returns a mapping from method name to the selected order, or to the
    raised error's class name when the selector failed.
    """
    rng = np.random.default_rng(_stream_seed(master_seed, spec, rep, 0))
    panel, truth = _GENERATORS[spec.scenario](spec.n, spec.m, spec.theta, spec.regime, rng)
    kernel = KernelSpec(kernel_family, bandwidth_rule_of_thumb(panel.u))
    ladle_seed = int(_stream_seed(master_seed, spec, rep, 1).generate_state(1)[0])
    fold_seed = int(_stream_seed(master_seed, spec, rep, 2).generate_state(1)[0])
    out: dict = {"p0": truth.p0}
    for method in methods:
        try:
            if method == "icp":
                report = icp_select(panel, kernel, p_max=p_max, p_min=p_min)
            elif method == "ladle":
                cfg = LadleConfig(p_max=p_max, p_min=p_min, rng_seed=ladle_seed)
                report = ladle_select(panel, kernel, cfg)
            elif method == "ftcv1":
                cfg = FtcvConfig(k_folds=None, p_max=p_max, p_min=p_min, rng_seed=fold_seed)
                report = ftcv_select(panel, kernel, cfg)
            elif method == "ftcv10":
                cfg = FtcvConfig(k_folds=10, p_max=p_max, p_min=p_min, rng_seed=fold_seed)
                report = ftcv_select(panel, kernel, cfg)
            else:
                raise ConfigError(f"unknown method {method!r}, expected a subset of {METHODS}")
            out[method] = report.p_hat
        except FfselectError as exc:
            out[method] = type(exc).__name__
    return out


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        if workers < 1:
            raise ConfigError(f"workers must be at least 1, got {workers}")
        return workers
    env = os.environ.get("FFSELECT_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigError(f"FFSELECT_THREADS must be an integer, got {env!r}") from exc
        if cap < 1:
            raise ConfigError(f"FFSELECT_THREADS must be at least 1, got {cap}")
        return cap
    return 1


def run_grid(
    cells,
    replications: int,
    master_seed: int,
    methods=METHODS,
    p_min: int = 1,
    p_max: int = 8,
    kernel_family: str = "gaussian",
    workers: int | None = None,
) -> GridResult:
    """Run every selector on every cell for the given replication count.

    Each replication draws its panel from a stream keyed by the cell
    coordinates and replication index, runs the requested methods, and
    records whether each one recovered the true order. Failures raised by
    a selector count against that method's cell; once they exceed 5
    percent of the replications the whole run aborts.

    The default kernel family is gaussian: its unbounded support keeps
    every local fit well posed when the covariate has unbounded range, as
    in the polynomial scenario, where a compact kernel would leave
    isolated tail points with singular fits.
    """
    cells = tuple(cells)
    if not cells:
        raise ConfigError("grid must contain at least one cell")
    for spec in cells:
        if not isinstance(spec, ScenarioSpec):
            raise ConfigError(f"grid entries must be ScenarioSpec, got {type(spec).__name__}")
    methods = tuple(methods)
    if not methods:
        raise ConfigError("at least one method is required")
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}, expected a subset of {METHODS}")
    if replications < 1:
        raise ConfigError(f"replications must be at least 1, got {replications}")
    for spec in cells:
        # tightest order cap among the selectors: m - 1 for the one-series-out
        # methods and the ladle, m for the information criterion
        cap = spec.m if methods == ("icp",) else spec.m - 1
        if p_max > cap:
            raise ConfigError(
                f"p_max={p_max} exceeds the selector cap {cap} for a cell with m={spec.m}"
            )
    n_workers = _worker_count(workers)

    tasks = [(ci, rep) for ci in range(len(cells)) for rep in range(replications)]
    # one slot per (cell, replication); filled out of order under threads
    outcomes: list[list[dict | None]] = [[None] * replications for _ in cells]

    def run_task(task: tuple) -> None:
        ci, rep = task
        outcomes[ci][rep] = _one_replication(
            cells[ci], methods, rep, master_seed, p_min, p_max, kernel_family
        )

    if n_workers == 1:
        for task in tasks:
            run_task(task)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            # consume the iterator to surface worker exceptions
            list(pool.map(run_task, tasks))

    allowed = FAILURE_BUDGET * replications
    results = []
    for ci, spec in enumerate(cells):
        for method in methods:
            picks = tuple(outcomes[ci][rep][method] for rep in range(replications))
            p0 = outcomes[ci][0]["p0"]
            failures = sum(1 for pick in picks if isinstance(pick, str))
            if failures > allowed:
                raise ReplicationBudgetExceeded(
                    f"cell (scenario={spec.scenario}, regime={spec.regime}, n={spec.n}, "
                    f"m={spec.m}, theta={spec.theta}) method {method}: {failures} of "
                    f"{replications} replications failed, budget is {allowed:.1f}"
                )
            correct = sum(1 for pick in picks if pick == p0)
            results.append(
                CellResult(
                    spec=spec,
                    method=method,
                    frequency=correct / replications,
                    replications=replications,
                    failures=failures,
                    picks=picks,
                )
            )
    return GridResult(
        cells=tuple(results),
        replications=replications,
        master_seed=master_seed,
        seed_scheme=SEED_SCHEME,
        p_min=p_min,
        p_max=p_max,
        kernel_family=kernel_family,
    )


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_frequency_curves(result: GridResult, path: str) -> None:
    """Write one CSV row per cell and method, plus a JSON sidecar.

    The CSV columns are ``n,m,theta,regime,method,frequency,replications,
    failures``; rows are sorted so identical grids always serialize
    identically. The sidecar (same path with a .json suffix) echoes the
    full configuration, including scenario names the CSV has no column
    for.
    """
    if not result.cells:
        raise ConfigError("grid result has no cells to emit")
    order = sorted(
        result.cells,
        key=lambda c: (c.spec.n, c.spec.m, c.spec.theta, c.spec.regime, c.method),
    )
    lines = ["n,m,theta,regime,method,frequency,replications,failures"]
    for cell in order:
        s = cell.spec
        lines.append(
            f"{s.n},{s.m},{s.theta!r},{s.regime},{cell.method},"
            f"{cell.frequency!r},{cell.replications},{cell.failures}"
        )
    try:
        _atomic_write_text(path, "\n".join(lines) + "\n")
        sidecar = {
            "master_seed": result.master_seed,
            "seed_scheme": result.seed_scheme,
            "replications": result.replications,
            "p_min": result.p_min,
            "p_max": result.p_max,
            "kernel_family": result.kernel_family,
            "cells": [
                {
                    "scenario": c.spec.scenario,
                    "regime": c.spec.regime,
                    "n": c.spec.n,
                    "m": c.spec.m,
                    "theta": c.spec.theta,
                    "method": c.method,
                    "frequency": c.frequency,
                    "replications": c.replications,
                    "failures": c.failures,
                }
                for c in order
            ],
        }
        root, ext = os.path.splitext(path)
        _atomic_write_text(root + ".json", json.dumps(sidecar, indent=2) + "\n")
    except OSError as exc:
        raise FfselectError(f"cannot write frequency curves to {path}: {exc}") from exc
