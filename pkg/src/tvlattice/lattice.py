"""Circular lattice filter over the interlaced series.

Stage ``m`` of channel ``k`` regresses the forward error ``f^{(m-1)}_n`` on
the delayed backward error ``b^{(m-1)}_{n-1}`` (forward PARCOR) and vice
versa (backward PARCOR), for the channel-``k`` positions ``n`` only.  Each
regression is a scalar discount DLM; both directions share one discount
pair, chosen on their summed predictive likelihood.

Because ``n - 1`` belongs to the previous channel, the backward predictor
that pairs with channel ``k`` at stage ``m`` is that of position ``n - 1``.
The PARCOR-to-AR recursion below follows the same pairing.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .dlm import (
    DiscountPair,
    DlmPosterior,
    DlmPriors,
    default_priors,
    discount_grid,
    dlm_filter,
    dlm_smooth,
    grid_loglik,
    pick_best,
)
from .errors import DimensionError, DomainError, InsufficientDataError
from .periodic import (
    PeriodicCoefficients,
    TvVarModel,
    as_series,
    assemble_tvvar,
    channel_order,
    interlace,
)

log = logging.getLogger(__name__)

__all__ = [
    "BclfFit",
    "FitConfig",
    "LatticeFit",
    "StageFit",
    "fit",
    "lattice_stage",
    "levinson_periodic",
    "parcor_to_ar",
    "run_lattice",
]


@dataclass(frozen=True)
class FitConfig:
    """Options for :func:`fit`.

    ``priors.kappa0`` is replaced per regression by the sample variance of
    the first ``n_init`` active responses unless ``auto_kappa`` is false.
    """

    p_max: int = 5
    grid: tuple = field(default_factory=lambda: tuple(discount_grid()))
    priors: DlmPriors = DlmPriors()
    n_init: int = 40
    auto_kappa: bool = True
    criterion: str = "bic"
    n_samples: int = 500
    all_criteria: bool = False
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.p_max < 1:
            raise DomainError("p_max must be >= 1")
        if self.criterion not in ("bic", "dic", "waic"):
            raise DomainError(f"unknown criterion {self.criterion!r}")
        if len(self.grid) == 0:
            raise DomainError("discount grid is empty")


@dataclass
class StageFit:
    """Stage ``m`` of channel ``k`` (both 1-based); trajectories have length ``T``."""

    k: int
    m: int
    alpha_f: np.ndarray
    alpha_b: np.ndarray
    var_f: np.ndarray
    var_b: np.ndarray
    f_err: np.ndarray
    b_err: np.ndarray
    disc: DiscountPair
    logpredlik: float
    post_f: DlmPosterior
    post_b: DlmPosterior


def _fill_prefix(values: np.ndarray, active: np.ndarray) -> np.ndarray:
    out = values.copy()
    first = int(np.argmax(active))
    out[:first] = out[first]
    return out


def _channel_regression(prev_f, prev_b, k: int, K: int, m: int):
    N = prev_f.shape[0]
    idx = np.arange(k - 1, N, K)
    resp = prev_f[idx]
    reg = np.full(idx.shape, np.nan)
    has_prev = idx >= 1
    reg[has_prev] = prev_b[idx[has_prev] - 1]
    active = (idx >= m) & np.isfinite(resp) & np.isfinite(reg)
    return idx, resp, reg, active


def lattice_stage(prev_f, prev_b, k: int, m: int, K: int, priors: DlmPriors | None = None,
                  grid: Sequence[DiscountPair] | None = None, n_init: int = 40,
                  auto_kappa: bool = True) -> StageFit:
    """Fit stage ``m`` for channel ``k`` from the stage ``m - 1`` errors.

    ``prev_f`` and ``prev_b`` are full interlaced error sequences.  Positions
    whose regressor is undefined (``n - 1 < m``) are masked; the smoothed
    trajectories are extended backward over them by their first value.
    """
    prev_f = np.asarray(prev_f, dtype=float)
    prev_b = np.asarray(prev_b, dtype=float)
    if prev_f.shape != prev_b.shape or prev_f.ndim != 1 or prev_f.size % K:
        raise DimensionError("forward and backward errors must be equal-length interlaced vectors")
    grid = list(grid) if grid is not None else discount_grid()
    base = priors or DlmPriors()
    _, resp, reg, active = _channel_regression(prev_f, prev_b, k, K, m)
    if not active.any():
        raise InsufficientDataError(f"channel {k} has no usable data at stage {m}")

    pri_f = default_priors(resp, active, n_init, base) if auto_kappa else base
    pri_b = default_priors(reg, active, n_init, base) if auto_kappa else base
    ll = grid_loglik(resp, reg, pri_f, grid, active) + grid_loglik(reg, resp, pri_b, grid, active)
    disc = grid[pick_best(grid, ll)]
    post_f = dlm_smooth(dlm_filter(resp, reg, pri_f, disc, active))
    post_b = dlm_smooth(dlm_filter(reg, resp, pri_b, disc, active))

    alpha_f = _fill_prefix(post_f.mu_s, active)
    alpha_b = _fill_prefix(post_b.mu_s, active)
    f_err = np.where(active, resp - alpha_f * reg, np.nan)
    b_err = np.where(active, reg - alpha_b * resp, np.nan)
    return StageFit(
        k=k, m=m,
        alpha_f=alpha_f, alpha_b=alpha_b,
        var_f=_fill_prefix(post_f.s_s, active), var_b=_fill_prefix(post_b.s_s, active),
        f_err=f_err, b_err=b_err, disc=disc,
        logpredlik=post_f.logpredlik + post_b.logpredlik,
        post_f=post_f, post_b=post_b,
    )


@numba.njit(cache=True, nogil=True)
def _levinson_kernel(af, ab, target, a, d):
    # af, ab, a, d: (B, N, M); target: (N,)
    nb, N, M = af.shape
    tmp = np.empty(M)
    mstop = 0
    for n in range(N):
        mstop = max(mstop, target[n])
    for bb in range(nb):
        for m in range(1, mstop + 1):
            # descending n keeps position n-1 at stage m-1 when it is read
            for n in range(N - 1, -1, -1):
                if target[n] < m:
                    continue
                kf = af[bb, n, m - 1]
                kb = ab[bb, n, m - 1]
                for j in range(m - 1):
                    tmp[j] = a[bb, n, j]
                for j in range(1, m):
                    dprev = d[bb, n - 1, m - j - 1] if n >= 1 else 0.0
                    a[bb, n, j - 1] = tmp[j - 1] - kf * dprev
                    dj = d[bb, n - 1, j - 1] if n >= 1 else 0.0
                    d[bb, n, j - 1] = dj - kb * tmp[m - j - 1]
                a[bb, n, m - 1] = kf
                d[bb, n, m - 1] = kb


def levinson_periodic(alpha_f, alpha_b, target):
    """Forward/backward AR coefficients from per-position PARCOR coefficients.

    Parameters
    ----------
    alpha_f, alpha_b : ndarray, shape (N, M) or (B, N, M)
        PARCOR coefficient of stage ``m`` at interlaced position ``n`` in
        column ``m - 1``.
    target : ndarray of int, shape (N,)
        Stage at which to stop each position.  Must satisfy
        ``target[n - 1] >= target[n] - 1``.

    Returns
    -------
    a, d : ndarray
        Same shape as the input; row ``n`` holds ``a^{(target[n])}_{j,n}``
        for ``j = 1..target[n]`` and zeros beyond.
    """
    af = np.asarray(alpha_f, dtype=float)
    ab = np.asarray(alpha_b, dtype=float)
    squeeze = af.ndim == 2
    if squeeze:
        af, ab = af[None], ab[None]
    if af.shape != ab.shape or af.ndim != 3:
        raise DimensionError("alpha_f and alpha_b must share shape (N, M) or (B, N, M)")
    target = np.ascontiguousarray(target, dtype=np.int64)
    if target.shape != (af.shape[1],) or target.max(initial=0) > af.shape[2]:
        raise DimensionError("target does not fit the PARCOR arrays")
    a = np.zeros_like(af)
    d = np.zeros_like(af)
    _levinson_kernel(np.ascontiguousarray(af), np.ascontiguousarray(ab), target, a, d)
    return (a[0], d[0]) if squeeze else (a, d)


@dataclass
class LatticeFit:
    """All stage fits of the circular lattice up to ``p_max``."""

    K: int
    T: int
    p_max: int
    stages: dict
    fwd_err: np.ndarray
    bwd_err: np.ndarray

    def n_stages(self, k: int, P: int | None = None) -> int:
        return channel_order(self.K, self.p_max if P is None else P, k)

    @property
    def max_stage(self) -> int:
        return self.n_stages(self.K)

    def targets(self, P: int) -> np.ndarray:
        """Stage count ``M_k(P)`` of every interlaced position."""
        per_channel = np.array([self.n_stages(k, P) for k in range(1, self.K + 1)], dtype=np.int64)
        return np.tile(per_channel, self.T)

    def stage_arrays(self, attr: str, M: int | None = None) -> np.ndarray:
        """Stack a per-stage trajectory into an ``(N, M)`` interlaced array."""
        M = self.max_stage if M is None else M
        out = np.zeros((self.T * self.K, M))
        for (k, m), st in self.stages.items():
            if m <= M:
                out[k - 1 :: self.K, m - 1] = getattr(st, attr)
        return out

    def coefficients(self, P: int) -> PeriodicCoefficients:
        """Periodic AR coefficients at VAR order ``P``."""
        if not 1 <= P <= self.p_max:
            raise DomainError(f"order {P} outside 1..{self.p_max}")
        M = self.n_stages(self.K, P)
        a, _ = levinson_periodic(self.stage_arrays("alpha_f", M), self.stage_arrays("alpha_b", M), self.targets(P))
        return _split_channels(a, None, self, P)[0]

    def model(self, P: int) -> TvVarModel:
        return assemble_tvvar(self.coefficients(P), P)

    def ar(self, P: int):
        """Forward and backward AR trajectories per channel at order ``P``."""
        M = self.n_stages(self.K, P)
        a, d = levinson_periodic(self.stage_arrays("alpha_f", M), self.stage_arrays("alpha_b", M), self.targets(P))
        coeffs, back = _split_channels(a, d, self, P)
        return coeffs.a, back


def _split_channels(a, d, lat: LatticeFit, P: int):
    K, T = lat.K, lat.T
    ak, dk = [], []
    w = np.empty((T, K))
    for k in range(1, K + 1):
        M = lat.n_stages(k, P)
        ak.append(a[k - 1 :: K, :M].copy())
        if d is not None:
            dk.append(d[k - 1 :: K, :M].copy())
        w[:, k - 1] = lat.stages[(k, M)].var_f
    return PeriodicCoefficients(a=tuple(ak), w=w), tuple(dk)


def run_lattice(y, K: int, p_max: int, priors: DlmPriors | None = None,
                grid: Sequence[DiscountPair] | None = None, n_init: int = 40,
                auto_kappa: bool = True, threads: int = 1) -> LatticeFit:
    """Run every stage ``m = 1..max_k M_k`` with ``M_k = K*p_max + k - 1``."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size % K:
        raise DimensionError(f"interlaced length {y.size} is not a multiple of K={K}")
    if p_max < 1:
        raise DomainError("p_max must be >= 1")
    T = y.size // K
    orders = [channel_order(K, p_max, k) for k in range(1, K + 1)]
    mmax = max(orders)
    F = np.full((mmax + 1, y.size), np.nan)
    B = np.full((mmax + 1, y.size), np.nan)
    F[0] = y
    B[0] = y
    stages = {}

    def one(k, m):
        return lattice_stage(F[m - 1], B[m - 1], k, m, K, priors, grid, n_init, auto_kappa)

    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for m in range(1, mmax + 1):
            ks = [k for k in range(1, K + 1) if m <= orders[k - 1]]
            fits = list(pool.map(one, ks, [m] * len(ks))) if pool else [one(k, m) for k in ks]
            for st in fits:
                F[m, st.k - 1 :: K] = st.f_err
                B[m, st.k - 1 :: K] = st.b_err
                stages[(st.k, m)] = st
    finally:
        if pool:
            pool.shutdown()
    return LatticeFit(K=K, T=T, p_max=p_max, stages=stages, fwd_err=F, bwd_err=B)


def parcor_to_ar(lattice: LatticeFit, k: int, M: int):
    """AR trajectories ``a^{(M)}`` and ``d^{(M)}`` of channel ``k``, each ``(T, M)``.

    Other channels are carried to their full stage count so the backward
    coefficients paired with channel ``k`` are available.
    """
    K = lattice.K
    if not 1 <= M <= lattice.n_stages(k):
        raise DomainError(f"channel {k} has {lattice.n_stages(k)} stages, asked for {M}")
    full = np.array([lattice.n_stages(j) for j in range(1, K + 1)], dtype=np.int64)
    full[k - 1] = M
    target = np.tile(full, lattice.T)
    a, d = levinson_periodic(lattice.stage_arrays("alpha_f"), lattice.stage_arrays("alpha_b"), target)
    return a[k - 1 :: K, :M].copy(), d[k - 1 :: K, :M].copy()


@dataclass
class BclfFit:
    """Result of :func:`fit` at the selected order."""

    x: np.ndarray
    lattice: LatticeFit
    order: int
    model: TvVarModel
    report: object
    config: FitConfig
    ar: tuple = ()
    ar_backward: tuple = ()

    @property
    def stages(self) -> dict:
        return self.lattice.stages

    @property
    def K(self) -> int:
        return self.lattice.K

    @property
    def T(self) -> int:
        return self.lattice.T

    def model_at(self, P: int) -> TvVarModel:
        return self.model if P == self.order else self.lattice.model(P)


def fit(x, config: FitConfig | None = None, **overrides) -> BclfFit:
    """Fit a TV-VAR by the circular lattice and select its order.

    Parameters
    ----------
    x : array_like, shape (T, K)
    config : FitConfig, optional
    **overrides
        Field overrides applied to ``config``.

    Raises
    ------
    InsufficientDataError
        If ``T <= K * p_max + K``.
    """
    from .selection import select_order

    cfg = config or FitConfig()
    if overrides:
        cfg = FitConfig(**{**cfg.__dict__, **overrides})
    x = as_series(x)
    T, K = x.shape
    if T <= K * cfg.p_max + K:
        raise InsufficientDataError(f"T={T} too short for K={K}, p_max={cfg.p_max}")
    lat = run_lattice(interlace(x), K, cfg.p_max, cfg.priors, cfg.grid, cfg.n_init, cfg.auto_kappa, cfg.threads)
    report, model = select_order(lat, x, cfg)
    a, d = lat.ar(report.chosen)
    radius = model.companion_radius()
    if np.any(radius > 1.0):
        log.info("fitted coefficients are explosive at %d of %d timesteps", int(np.sum(radius > 1.0)), T)
    return BclfFit(x=x, lattice=lat, order=report.chosen, model=model, report=report, config=cfg, ar=a, ar_backward=d)
