"""Core estimation pipeline for semiparametric functional factor models.

The observed panel ``y`` (n rows, m series) is modeled as a low-rank signal
whose factors are smooth functions of a scalar covariate ``u`` plus noise.
Estimation proceeds in three steps: smooth every series on ``u`` with a
local-linear kernel regression, form the covariance of the smoothed panel,
and read factors and loadings off its leading eigenvectors.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._backend import build_weights
from .errors import (
    BandwidthTooSmall,
    ConfigError,
    DegenerateU,
    NonFinite,
    NotSymmetric,
    NumericalFailure,
    OrderOutOfRange,
    ShapeMismatch,
    TooSmall,
)

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "PanelData",
    "SmootherWeights",
    "SmoothedSurface",
    "EigenSystem",
    "FactorEstimate",
    "kernel_pdf",
    "center_columns",
    "bandwidth_rule_of_thumb",
    "bandwidth_cv",
    "local_linear_smooth",
    "covariance_of_smoothed",
    "eigendecompose",
    "estimate_factors",
]


class KernelFamily(str, Enum):
    EPANECHNIKOV = "epanechnikov"
    GAUSSIAN = "gaussian"


_FAMILY_CODES = {KernelFamily.EPANECHNIKOV: 0, KernelFamily.GAUSSIAN: 1}


def kernel_pdf(family: KernelFamily | str, x: np.ndarray) -> np.ndarray:
    """Evaluate the kernel density function of ``family`` at ``x``."""
    family = KernelFamily(family)
    x = np.asarray(x, dtype=np.float64)
    if family is KernelFamily.EPANECHNIKOV:
        return 0.75 * np.maximum(0.0, 1.0 - x * x)
    return np.exp(-0.5 * x * x) * 0.3989422804014327


@functools.lru_cache(maxsize=None)
def _validate_family(family: KernelFamily) -> None:
    # one-time sanity check: unit mass and symmetry, by trapezoid quadrature
    if family is KernelFamily.EPANECHNIKOV:
        grid = np.linspace(-1.0, 1.0, 2001)
    else:
        grid = np.linspace(-8.5, 8.5, 8001)
    dens = kernel_pdf(family, grid)
    mass = np.trapezoid(dens, grid)
    if abs(mass - 1.0) > 1e-6:
        raise ConfigError(f"kernel {family.value} does not integrate to 1: {mass!r}")
    if not np.array_equal(dens, kernel_pdf(family, -grid)):
        raise ConfigError(f"kernel {family.value} is not symmetric")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth, the full smoother configuration.

    Parameters
    ----------
    family : KernelFamily or str
        "epanechnikov" (default throughout the library) or "gaussian".
    bandwidth : float
        Smoothing bandwidth, strictly positive and finite.
    """

    family: KernelFamily
    bandwidth: float

    def __post_init__(self) -> None:
        family = KernelFamily(self.family)
        object.__setattr__(self, "family", family)
        _validate_family(family)
        h = float(self.bandwidth)
        if not np.isfinite(h) or h <= 0.0:
            raise ConfigError(f"bandwidth must be finite and positive, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", h)

    @property
    def family_code(self) -> int:
        return _FAMILY_CODES[self.family]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C", copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PanelData:
    """Response panel paired with its covariate.

    ``y`` has one row per observation of the covariate ``u`` and one column
    per series. ``column_means`` records what :func:`center_columns`
    subtracted from each column; it is all zeros for panels used as
    generated.
    """

    y: np.ndarray
    u: np.ndarray
    column_means: np.ndarray

    def __post_init__(self) -> None:
        y = _readonly(self.y)
        u = _readonly(self.u)
        means = _readonly(self.column_means)
        if y.ndim != 2:
            raise ShapeMismatch(f"y must be 2-dimensional, got ndim={y.ndim}")
        if u.ndim != 1 or u.shape[0] != y.shape[0]:
            raise ShapeMismatch(
                f"u must be 1-dimensional with length {y.shape[0]}, got shape {u.shape}"
            )
        if means.shape != (y.shape[1],):
            raise ShapeMismatch(
                f"column_means must have shape ({y.shape[1]},), got {means.shape}"
            )
        if not np.isfinite(y).all() or not np.isfinite(u).all() or not np.isfinite(means).all():
            raise NonFinite("panel contains NaN or infinite values")
        if y.shape[0] < 3 or y.shape[1] < 2:
            raise TooSmall(f"panel needs at least 3 rows and 2 columns, got {y.shape}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "column_means", means)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def m(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class SmootherWeights:
    """Kernel moment sums of the local-linear fit at each evaluation point.

    ``denominator`` is ``s2*s0 - s1**2``, the quantity that must stay
    strictly positive for the fit to be well posed.
    """

    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    denominator: np.ndarray


@dataclass(frozen=True)
class SmoothedSurface:
    """Local-linear fitted values for every series at the evaluation points."""

    values: np.ndarray
    eval_points: np.ndarray
    kernel: KernelSpec
    weights: SmootherWeights
    at_observations: bool


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (descending) and matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self) -> None:
        w = _readonly(self.eigenvalues)
        v = _readonly(self.eigenvectors)
        if w.ndim != 1 or v.ndim != 2 or v.shape != (w.shape[0], w.shape[0]):
            raise ShapeMismatch(
                f"need eigenvalues (m,) and eigenvectors (m, m), got {w.shape} and {v.shape}"
            )
        if not np.isfinite(w).all() or not np.isfinite(v).all():
            raise NonFinite("eigendecomposition produced non-finite values")
        if np.any(np.diff(w) > 0.0):
            raise NumericalFailure("eigenvalues are not in descending order")
        gram = v.T @ v
        if np.abs(gram - np.eye(w.shape[0])).max() > 1e-8:
            raise NumericalFailure("eigenvectors are not orthonormal")
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)


@dataclass(frozen=True)
class FactorEstimate:
    """Estimated factors and loadings for a given order ``p``.

    ``factors`` (n, p) are the smoothed panel projected on the leading
    ``p`` eigenvectors and ``loadings`` (m, p) are those eigenvectors.
    """

    p: int
    factors: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.factors.shape[1] != self.p or self.loadings.shape[1] != self.p:
            raise ShapeMismatch(
                f"factors and loadings must have {self.p} columns, got "
                f"{self.factors.shape} and {self.loadings.shape}"
            )
        object.__setattr__(self, "factors", _readonly(self.factors))
        object.__setattr__(self, "loadings", _readonly(self.loadings))
        object.__setattr__(self, "eigenvalues", _readonly(self.eigenvalues))


def center_columns(y: np.ndarray, u: np.ndarray) -> PanelData:
    """Validate a raw panel and subtract each column's mean.

    Parameters
    ----------
    y : ndarray, shape (n, m)
        Raw responses, one column per series. Must be finite with n >= 3
        and m >= 2.
    u : ndarray, shape (n,)
        Scalar covariate observed alongside each row.

    Returns
    -------
    PanelData
        Centered panel; ``column_means`` holds the subtracted means.
    """
    y = np.asarray(y, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if y.ndim != 2:
        raise ShapeMismatch(f"y must be 2-dimensional, got ndim={y.ndim}")
    if u.ndim != 1 or u.shape[0] != y.shape[0]:
        raise ShapeMismatch(
            f"u must be 1-dimensional with length {y.shape[0]}, got shape {u.shape}"
        )
    if not np.isfinite(y).all():
        raise NonFinite("y contains NaN or infinite values")
    if not np.isfinite(u).all():
        raise NonFinite("u contains NaN or infinite values")
    if y.shape[0] < 3 or y.shape[1] < 2:
        raise TooSmall(f"panel needs at least 3 rows and 2 columns, got {y.shape}")
    means = y.mean(axis=0)
    return PanelData(y=y - means, u=u, column_means=means)


def bandwidth_rule_of_thumb(u: np.ndarray) -> float:
    """Normal-reference bandwidth ``1.06 * A * n**(-1/5)``.

    ``A`` is the smaller of the sample standard deviation and the
    interquartile range divided by 1.34.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise ShapeMismatch(f"u must be 1-dimensional, got ndim={u.ndim}")
    if not np.isfinite(u).all():
        raise NonFinite("u contains NaN or infinite values")
    n = u.shape[0]
    if n < 3:
        raise TooSmall(f"need at least 3 observations, got {n}")
    sd = float(np.std(u, ddof=1))
    q75, q25 = np.percentile(u, [75.0, 25.0])
    spread = min(sd, float(q75 - q25) / 1.34)
    if spread <= 0.0:
        raise DegenerateU("covariate has zero spread")
    return 1.06 * spread * n ** (-0.2)


def bandwidth_cv(
    data: PanelData,
    family: KernelFamily | str = KernelFamily.EPANECHNIKOV,
    n_grid: int = 20,
) -> float:
    """Leave-one-out cross-validated bandwidth.

    Scores ``n_grid`` log-spaced candidates spanning ``[h0/4, 4*h0]`` around
    the rule-of-thumb value ``h0`` by the mean squared leave-one-out
    prediction error, computed exactly through the smoother diagonal. Returns
    the candidate with the smallest score; ties go to the smaller bandwidth.
    Candidates for which some fit is ill posed are skipped.
    """
    family = KernelFamily(family)
    if n_grid < 1:
        raise ConfigError(f"n_grid must be at least 1, got {n_grid}")
    h0 = bandwidth_rule_of_thumb(data.u)
    grid = np.geomspace(h0 / 4.0, 4.0 * h0, n_grid)
    code = _FAMILY_CODES[family]
    best_h = None
    best_score = np.inf
    for h in grid:
        nw, _, _, _, denom, cnt = build_weights(data.u, data.u, float(h), code)
        if np.any(denom <= 0.0) or np.any(cnt < 2):
            continue
        lev = np.diag(nw)
        if np.any(lev >= 1.0):
            continue
        resid = (data.y - nw @ data.y) / (1.0 - lev)[:, np.newaxis]
        score = float(np.mean(resid * resid))
        if np.isfinite(score) and score < best_score:
            best_score = score
            best_h = float(h)
    if best_h is None:
        raise BandwidthTooSmall(
            "no candidate bandwidth produced a well-posed fit at every observation"
        )
    return best_h


def _smooth_values(
    u_obs: np.ndarray,
    y: np.ndarray,
    h: float,
    family_code: int,
    u_eval: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fitted values plus moment sums; raises on ill-posed evaluation points."""
    nw, s0, s1, s2, denom, cnt = build_weights(u_obs, u_eval, h, family_code)
    bad = np.flatnonzero((denom <= 0.0) | (cnt < 2))
    if bad.size:
        j = int(bad[0])
        raise BandwidthTooSmall(
            f"bandwidth {h!r} leaves the fit at evaluation point "
            f"{u_eval[j]!r} (index {j}) ill posed: effective denominator "
            f"{denom[j]!r}, {int(cnt[j])} observation(s) in the kernel support"
        )
    ghat = nw @ y
    if not np.isfinite(ghat).all():
        raise NonFinite("smoothed values are not finite")
    return ghat, s0, s1, s2, denom


def local_linear_smooth(
    data: PanelData,
    kernel: KernelSpec,
    eval_points: np.ndarray | None = None,
) -> SmoothedSurface:
    """Smooth every series of the panel on the covariate.

    Parameters
    ----------
    data : PanelData
        Centered panel.
    kernel : KernelSpec
        Kernel family and bandwidth.
    eval_points : ndarray, optional
        Points at which to evaluate the fit. Defaults to the observed
        covariate values, which is what the factor pipeline requires.

    Returns
    -------
    SmoothedSurface
        Fitted values with the kernel moment sums used to compute them.

    Raises
    ------
    BandwidthTooSmall
        If at some evaluation point the local fit is ill posed, that is the
        effective denominator ``s2*s0 - s1**2`` is not strictly positive or
        fewer than two observations carry positive kernel weight.
    """
    if eval_points is None:
        at_obs = True
        u_eval = data.u
    else:
        u_eval = np.asarray(eval_points, dtype=np.float64)
        if u_eval.ndim != 1 or u_eval.shape[0] < 1:
            raise ShapeMismatch(
                f"eval_points must be a non-empty 1-dimensional array, got shape {u_eval.shape}"
            )
        if not np.isfinite(u_eval).all():
            raise NonFinite("eval_points contains NaN or infinite values")
        at_obs = u_eval.shape[0] == data.n and np.array_equal(u_eval, data.u)
    ghat, s0, s1, s2, denom = _smooth_values(
        data.u, data.y, kernel.bandwidth, kernel.family_code, u_eval
    )
    weights = SmootherWeights(s0=s0, s1=s1, s2=s2, denominator=denom)
    return SmoothedSurface(
        values=ghat,
        eval_points=np.array(u_eval, copy=True),
        kernel=kernel,
        weights=weights,
        at_observations=at_obs,
    )


def _covariance(ghat: np.ndarray) -> np.ndarray:
    n = ghat.shape[0]
    lam = ghat.T @ ghat
    lam /= n
    return (lam + lam.T) * 0.5


def covariance_of_smoothed(surface: SmoothedSurface) -> np.ndarray:
    """Sample second-moment matrix of the smoothed panel, symmetrized.

    The surface must have been evaluated at the observation points, since
    the averaging is over observations.
    """
    if not surface.at_observations:
        raise ShapeMismatch(
            "covariance requires a surface evaluated at the observation points"
        )
    return _covariance(surface.values)


def _eigh_descending(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition, descending, with deterministic conventions.

    Each eigenvector is flipped so its largest-magnitude entry (first such
    index on ties) is non-negative; runs of exactly equal eigenvalues are
    ordered by the lexicographic order of their sign-fixed eigenvectors.
    """
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition did not converge: {exc}") from None
    w = w[::-1].copy()
    v = v[:, ::-1]
    m = w.shape[0]
    idx = np.argmax(np.abs(v), axis=0)
    flip = v[idx, np.arange(m)] < 0.0
    v = np.where(flip[np.newaxis, :], -v, v)
    start = 0
    while start < m:
        stop = start + 1
        while stop < m and w[stop] == w[start]:
            stop += 1
        if stop - start > 1:
            order = np.lexsort(v[::-1, start:stop])
            v[:, start:stop] = v[:, start + order]
        start = stop
    return w, np.ascontiguousarray(v)


def eigendecompose(matrix: np.ndarray) -> EigenSystem:
    """Eigendecomposition of a symmetric positive semidefinite matrix.

    The input must be symmetric up to a small tolerance; it is symmetrized
    exactly before factorization. Eigenvalues come out in descending order
    with at most round-off-level negative values, and eigenvectors follow a
    deterministic sign and tie-ordering convention so that repeated runs on
    the same input produce identical output.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"matrix must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ShapeMismatch("matrix must be at least 1 x 1")
    if not np.isfinite(a).all():
        raise NonFinite("matrix contains NaN or infinite values")
    scale = float(np.abs(a).max())
    asym = float(np.abs(a - a.T).max())
    if asym > 1e-10 * (1.0 + scale):
        raise NotSymmetric(f"matrix is not symmetric: max|A - A.T| = {asym!r}")
    w, v = _eigh_descending((a + a.T) * 0.5)
    if w[-1] < -1e-10 * (1.0 + max(float(w[0]), 0.0)):
        raise NumericalFailure(
            f"matrix is not positive semidefinite: smallest eigenvalue {w[-1]!r}"
        )
    return EigenSystem(eigenvalues=w, eigenvectors=v)


def _pipeline_arrays(
    u: np.ndarray, y: np.ndarray, h: float, family_code: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Smooth, covariance, eigendecompose; array-level path shared by all selectors.

    Returns ``(ghat, eigenvalues, eigenvectors)`` with the same conventions
    as the public pipeline, so results are bit-identical to going through
    :func:`local_linear_smooth`, :func:`covariance_of_smoothed` and
    :func:`eigendecompose` in sequence.
    """
    ghat, _, _, _, _ = _smooth_values(u, y, h, family_code, u)
    w, v = _eigh_descending(_covariance(ghat))
    return ghat, w, v


def estimate_factors(data: PanelData, kernel: KernelSpec, p: int) -> FactorEstimate:
    """Estimate ``p`` functional factors and their loadings.

    Runs the full pipeline: local-linear smoothing at the observation
    points, covariance of the smoothed panel, eigendecomposition. The
    loadings are the ``p`` leading eigenvectors and the factors are the
    smoothed panel projected on them.
    """
    p = int(p)
    if p < 0 or p > data.m:
        raise OrderOutOfRange(f"p must satisfy 0 <= p <= {data.m}, got {p}")
    surface = local_linear_smooth(data, kernel)
    system = eigendecompose(covariance_of_smoothed(surface))
    loadings = system.eigenvectors[:, :p]
    factors = surface.values @ loadings
    return FactorEstimate(
        p=p,
        factors=factors,
        loadings=loadings,
        eigenvalues=system.eigenvalues[:p],
    )
