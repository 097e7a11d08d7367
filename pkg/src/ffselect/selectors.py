"""Selectors for the number of common functional factors.

Three methods share one estimation pipeline (local-linear smoothing,
covariance, eigendecomposition) and differ in how they score candidate
orders:

* ``icp_select``: information criterion, log residual variance plus a
  penalty that grows with the order.
* ``ladle_select``: combines the scree of scaled eigenvalues with the
  bootstrap instability of the leading eigenvector subspace.
* ``ftcv_select``: K-fold cross-validation that refits factors on the
  training rows and scores one-series-out predictions on the held-out rows.

All methods return a :class:`SelectionReport`; the chosen order is the
candidate with the smallest criterion value, ties going to the smallest
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import FactorEstimate, KernelSpec, PanelData, _pipeline_arrays
from .errors import (
    BootstrapDegenerate,
    ConfigError,
    FoldTooSmall,
    OrderOutOfRange,
    ShapeMismatch,
    ZeroLoadingColumn,
)

__all__ = [
    "FtcvConfig",
    "LadleConfig",
    "SelectionReport",
    "residual_variance",
    "icp_penalty",
    "icp_select",
    "ladle_select",
    "ftcv_select",
]

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class SelectionReport:
    """Outcome of one selector run.

    ``criterion_values[i]`` is the criterion at order ``p_min + i``;
    ``p_hat`` is the order minimizing it, with ties resolved toward the
    smallest order. ``config`` echoes every input that determined the
    result, ``warnings`` lists non-fatal events and ``diagnostics`` holds
    method-specific extras.
    """

    method: str
    p_hat: int
    p_min: int
    p_max: int
    criterion_values: np.ndarray
    config: dict
    warnings: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.array(self.criterion_values, dtype=np.float64, copy=True)
        values.setflags(write=False)
        object.__setattr__(self, "criterion_values", values)
        object.__setattr__(self, "warnings", tuple(self.warnings))


def _argmin_first(values: np.ndarray) -> int:
    # np.argmin already returns the first index on ties; keep the intent
    # explicit and guarded in one place
    return int(np.argmin(values))


def _check_range(p_min: int, p_max: int, limit: int) -> tuple[int, int]:
    p_min, p_max = int(p_min), int(p_max)
    if p_min < 0 or p_max < p_min:
        raise OrderOutOfRange(f"need 0 <= p_min <= p_max, got p_min={p_min}, p_max={p_max}")
    if p_max > limit:
        raise OrderOutOfRange(f"p_max={p_max} exceeds the largest usable order {limit}")
    return p_min, p_max


def residual_variance(data: PanelData, fit: FactorEstimate) -> float:
    """Mean squared residual of the panel given a factor fit.

    Averages ``(y - factors @ loadings.T)**2`` over all n*m entries.
    """
    if fit.factors.shape[0] != data.n or fit.loadings.shape[0] != data.m:
        raise ShapeMismatch(
            f"fit of shape {fit.factors.shape}/{fit.loadings.shape} does not "
            f"match panel with n={data.n}, m={data.m}"
        )
    resid = data.y - fit.factors @ fit.loadings.T
    return float(np.mean(resid * resid))


def icp_penalty(n: int, m: int) -> float:
    """Per-order penalty ``((n+m)/(n*m)) * log(n*m/(n+m))``."""
    if n < 1 or m < 1:
        raise ConfigError(f"n and m must be positive, got {n}, {m}")
    nm = float(n) * float(m)
    s = float(n) + float(m)
    return (s / nm) * math.log(nm / s)


def icp_select(
    data: PanelData,
    kernel: KernelSpec,
    p_max: int,
    p_min: int = 0,
) -> SelectionReport:
    """Select the order by the information criterion.

    For each candidate order ``p`` the criterion is
    ``log(max(sigma2_p, 1e-12)) + p * icp_penalty(n, m)`` where
    ``sigma2_p`` is the mean squared residual after removing ``p``
    estimated factors. The variance floor keeps the logarithm finite on
    noiseless panels.
    """
    p_min, p_max = _check_range(p_min, p_max, data.m)
    ghat, w, v = _pipeline_arrays(
        data.u, data.y, kernel.bandwidth, kernel.family_code
    )
    g = icp_penalty(data.n, data.m)
    values = np.empty(p_max - p_min + 1)
    for i, p in enumerate(range(p_min, p_max + 1)):
        loadings = v[:, :p]
        resid = data.y - (ghat @ loadings) @ loadings.T
        sigma2 = float(np.mean(resid * resid))
        values[i] = math.log(max(sigma2, VARIANCE_FLOOR)) + p * g
    p_hat = p_min + _argmin_first(values)
    return SelectionReport(
        method="icp",
        p_hat=p_hat,
        p_min=p_min,
        p_max=p_max,
        criterion_values=values,
        config={
            "kernel": kernel.family.value,
            "bandwidth": kernel.bandwidth,
            "p_min": p_min,
            "p_max": p_max,
            "penalty": g,
        },
    )


@dataclass(frozen=True)
class LadleConfig:
    """Configuration of the bootstrap eigenvector-instability selector.

    ``n_boot`` defaults to ``min(n, 500)`` when left unset. The seed feeds
    a deterministic per-replicate stream, so identical configurations give
    bit-identical reports.
    """

    p_max: int = 8
    p_min: int = 0
    n_boot: int | None = None
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_boot is not None and self.n_boot < 1:
            raise ConfigError(f"n_boot must be at least 1, got {self.n_boot}")


def _bootstrap_rows(rng: np.random.Generator, n: int) -> np.ndarray:
    # resample rows jointly with replacement; insist on at least 3 distinct
    # rows so the resampled panel can be smoothed
    for _ in range(100):
        idx = rng.integers(0, n, size=n)
        if np.unique(idx).size >= 3:
            return idx
    raise BootstrapDegenerate(
        f"could not draw a bootstrap sample with 3 distinct rows out of {n} in 100 attempts"
    )


def ladle_select(
    data: PanelData,
    kernel: KernelSpec,
    config: LadleConfig = LadleConfig(),
) -> SelectionReport:
    """Select the order by the ladle criterion.

    Adds a scaled eigenvalue scree to the bootstrap instability of the
    leading eigenvector subspace: for each candidate order ``p`` the
    instability is the average over bootstrap replicates of
    ``1 - |det(B.T @ B_b)|`` with ``B`` the leading ``p`` full-sample
    eigenvectors and ``B_b`` their bootstrap counterpart. Replicates
    resample rows jointly with replacement, leave the values untouched,
    and reuse the full-sample bandwidth.
    """
    p_min, p_max = _check_range(config.p_min, config.p_max, data.m - 1)
    n = data.n
    n_boot = min(n, 500) if config.n_boot is None else int(config.n_boot)
    _, w, v = _pipeline_arrays(data.u, data.y, kernel.bandwidth, kernel.family_code)

    scree_scale = 1.0 + float(w[: p_max + 1].sum())
    phi = w[: p_max + 1] / scree_scale

    f0 = np.zeros(p_max + 1)
    lead = v[:, :p_max]
    for b in range(n_boot):
        rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed, spawn_key=(b,)))
        idx = _bootstrap_rows(rng, n)
        _, _, v_b = _pipeline_arrays(
            data.u[idx], data.y[idx], kernel.bandwidth, kernel.family_code
        )
        cross = lead.T @ v_b[:, :p_max]
        for p in range(1, p_max + 1):
            f0[p] += 1.0 - abs(float(np.linalg.det(cross[:p, :p])))
    f0 /= n_boot
    fn = f0 / (1.0 + f0.sum())

    g_all = phi + fn
    values = g_all[p_min : p_max + 1]
    p_hat = p_min + _argmin_first(values)
    return SelectionReport(
        method="ladle",
        p_hat=p_hat,
        p_min=p_min,
        p_max=p_max,
        criterion_values=values,
        config={
            "kernel": kernel.family.value,
            "bandwidth": kernel.bandwidth,
            "p_min": p_min,
            "p_max": p_max,
            "n_boot": n_boot,
            "rng_seed": config.rng_seed,
        },
        diagnostics={
            "scree": phi.tolist(),
            "eigenvector_instability": fn.tolist(),
        },
    )


@dataclass(frozen=True)
class FtcvConfig:
    """Configuration of the K-fold cross-validation selector.

    ``k_folds=None`` means leave-one-out (K equal to the number of rows),
    which partitions deterministically and draws nothing from the seed.
    """

    k_folds: int | None = None
    p_max: int = 8
    p_min: int = 0
    rng_seed: int = 0


def _make_folds(n: int, k: int, rng_seed: int) -> list[np.ndarray]:
    """Partition rows into k folds whose sizes differ by at most one.

    With ``k == n`` every row is its own fold and no random number is
    drawn; otherwise a seeded permutation is cut into contiguous blocks.
    """
    if k == n:
        return [np.array([i]) for i in range(n)]
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    perm = rng.permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start : start + size]))
        start += size
    return folds


def _ftcv_fold(
    u: np.ndarray,
    y: np.ndarray,
    fold: np.ndarray,
    h: float,
    family_code: int,
    p_max: int,
    collect: bool,
) -> tuple[np.ndarray, int, int, float]:
    """Squared prediction errors of one fold for every order up to p_max.

    Returns ``(errors, zero_denominators, pinv_fallbacks, orthogonality)``
    where ``errors[p]`` is the sum over held-out entries of the squared
    one-series-out prediction error using ``p`` factors.
    """
    n = u.shape[0]
    train = np.delete(np.arange(n), fold)
    ghat_tr, _, v_tr = _pipeline_arrays(u[train], y[train], h, family_code)
    B = v_tr[:, :p_max]
    F1 = ghat_tr @ B
    S = F1.T @ F1
    C = B.T @ B
    y_I = y[fold]
    c = y_I @ B
    ni, m = y_I.shape

    tilde = np.empty((p_max, ni, m))
    hat = np.empty((p_max, ni, m))
    running = np.zeros((ni, m))
    zero_events = 0
    pinv_events = 0
    orth_max = 0.0
    for j in range(p_max):
        # one-series-out least squares of the running residual on the j-th
        # loading column: numerator and denominator drop series s
        denom = C[j, j] - B[:, j] ** 2
        total = c[:, j][:, np.newaxis]
        if j > 0:
            total = total - np.tensordot(C[:j, j], hat[:j], axes=(0, 0))
        numer = total - (y_I - running) * B[:, j][np.newaxis, :]
        tiny = 1e-12 * max(float(C[j, j]), np.finfo(np.float64).tiny)
        mask = denom <= tiny
        if mask.all():
            raise ZeroLoadingColumn(
                f"loading column {j + 1} vanishes after removing any single series"
            )
        if mask.any():
            zero_events += int(mask.sum())
            t_j = np.where(
                mask[np.newaxis, :], 0.0, numer / np.where(mask, 1.0, denom)[np.newaxis, :]
            )
        else:
            t_j = numer / denom[np.newaxis, :]
        tilde[j] = t_j
        if j == 0:
            hat[0] = t_j
        else:
            # orthogonalize against the previous candidate vectors, which
            # take their training values on the training rows and their
            # one-series-out values on every held-out row; one regression
            # per left-out series, shared by all rows of the fold
            T = tilde[:j]
            G = S[:j, :j][np.newaxis] + np.einsum("ais,bis->sab", T, T)
            rhs = S[:j, j][np.newaxis] + np.einsum("ais,is->sa", T, t_j)
            try:
                gamma = np.linalg.solve(G, rhs[..., np.newaxis])[..., 0]
            except np.linalg.LinAlgError:
                pinv_events += 1
                gamma = (np.linalg.pinv(G) @ rhs[..., np.newaxis])[..., 0]
            hat[j] = t_j - np.einsum("sl,lis->is", gamma, T)
            if collect:
                g_gamma = np.einsum("sab,sb->sa", G, gamma)
                r_norm2 = np.maximum(
                    S[j, j]
                    + np.einsum("is,is->s", t_j, t_j)
                    - 2.0 * np.einsum("sa,sa->s", gamma, rhs)
                    + np.einsum("sa,sa->s", gamma, g_gamma),
                    0.0,
                )
                r_dots = np.abs(rhs - g_gamma)
                b_norms = np.sqrt(np.maximum(np.einsum("saa->sa", G), 0.0))
                scale = np.sqrt(r_norm2)[:, np.newaxis] * b_norms
                ratios = np.where(scale > 0.0, r_dots / scale, 0.0)
                orth_max = max(orth_max, float(ratios.max()))
        running = running + hat[j] * B[:, j][np.newaxis, :]

    prefix = np.cumsum(hat * B.T[:, np.newaxis, :], axis=0)
    errors = np.empty(p_max + 1)
    errors[0] = float((y_I * y_I).sum())
    for p in range(1, p_max + 1):
        resid = y_I - prefix[p - 1]
        errors[p] = float((resid * resid).sum())
    return errors, zero_events, pinv_events, orth_max


def ftcv_select(
    data: PanelData,
    kernel: KernelSpec,
    config: FtcvConfig = FtcvConfig(),
    diagnostics: bool = False,
) -> SelectionReport:
    """Select the order by factor-targeted cross-validation.

    For every fold the pipeline is refit on the remaining rows without
    re-centering, reusing the full-sample bandwidth. Predictions for a
    held-out entry ``(i, s)`` use factor values recovered from the other
    series of row ``i`` by a sequence of one-series-out regressions, each
    orthogonalized against the factors already extracted, so the criterion
    at every order is untouched by raising ``p_max``. ``criterion[p]`` is
    the mean squared one-series-out prediction error with ``p`` factors;
    order 0 predicts zero for everything.

    With ``diagnostics=True`` the report records the worst absolute cosine
    between each orthogonalized candidate vector and its predecessors.
    """
    p_min, p_max = _check_range(config.p_min, config.p_max, data.m - 1)
    if p_max < 1:
        raise OrderOutOfRange(f"cross-validation needs p_max >= 1, got {p_max}")
    n = data.n
    k = n if config.k_folds is None else int(config.k_folds)
    if k < 2 or k > n:
        raise ConfigError(f"k_folds must satisfy 2 <= k <= {n}, got {k}")
    folds = _make_folds(n, k, config.rng_seed)
    largest = max(f.shape[0] for f in folds)
    needed = max(3, p_max + 2)
    if n - largest < needed:
        raise FoldTooSmall(
            f"a fold of size {largest} leaves {n - largest} training rows, "
            f"need at least {needed}"
        )

    totals = np.zeros(p_max + 1)
    zero_events = 0
    pinv_events = 0
    orth_max = 0.0
    for fold in folds:
        errors, zeros, pinvs, orth = _ftcv_fold(
            data.u, data.y, fold, kernel.bandwidth, kernel.family_code, p_max, diagnostics
        )
        totals += errors
        zero_events += zeros
        pinv_events += pinvs
        orth_max = max(orth_max, orth)

    values_all = totals / (n * data.m)
    values = values_all[p_min : p_max + 1]
    p_hat = p_min + _argmin_first(values)
    warnings = []
    if zero_events:
        warnings.append(
            f"{zero_events} one-series-out regression(s) had a zero regressor; "
            "their factor values were set to 0"
        )
    if pinv_events:
        warnings.append(
            f"{pinv_events} orthogonalization system(s) were singular and used "
            "a pseudoinverse"
        )
    diag = {"zero_denominators": zero_events, "pinv_fallbacks": pinv_events}
    if diagnostics:
        diag["orthogonality_max_cosine"] = orth_max
    method = "ftcv1" if k == n else f"ftcv{k}"
    return SelectionReport(
        method=method,
        p_hat=p_hat,
        p_min=p_min,
        p_max=p_max,
        criterion_values=values,
        config={
            "kernel": kernel.family.value,
            "bandwidth": kernel.bandwidth,
            "p_min": p_min,
            "p_max": p_max,
            "k_folds": k,
            "rng_seed": config.rng_seed,
        },
        warnings=warnings,
        diagnostics=diag,
    )
