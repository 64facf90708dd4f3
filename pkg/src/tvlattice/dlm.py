"""Scalar discount-factor dynamic linear model.

Observation ``y_t = F_t * alpha_t + eps_t`` with ``eps_t ~ N(0, sigma_t^2)``.
The coefficient follows a random walk whose evolution variance is set by the
discount ``gamma`` (``R_t = C_{t-1} / gamma``); the precision follows a
multiplicative beta random walk set by ``delta`` (``nu_t = delta*nu_{t-1} + 1``).
Filtering is conjugate, so every quantity has a closed-form update.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numba
import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    FilterDivergenceError,
    GridSearchError,
    StateError,
)

__all__ = [
    "APP_GRID",
    "SIM_GRID",
    "DiscountPair",
    "DlmPosterior",
    "DlmPriors",
    "default_priors",
    "discount_grid",
    "dlm_filter",
    "dlm_smooth",
    "dlm_step",
    "grid_loglik",
    "grid_search",
    "pick_best",
]

SIM_GRID = (0.99, 0.992, 0.994, 0.996, 0.998, 1.0)
APP_GRID = (0.90, 0.92, 0.94, 0.96, 0.98, 1.0)


@dataclass(frozen=True, order=True)
class DiscountPair:
    """Coefficient discount ``gamma`` and variance discount ``delta``."""

    gamma: float
    delta: float

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0) or not (0.0 < self.delta <= 1.0):
            raise DomainError(f"discount factors must lie in (0, 1], got {self}")


@dataclass(frozen=True)
class DlmPriors:
    mu0: float = 0.0
    c0: float = 1.0
    nu0: float = 1.0
    kappa0: float = 1.0

    def __post_init__(self):
        if not (self.c0 > 0 and self.nu0 > 0 and self.kappa0 > 0):
            raise DomainError(f"c0, nu0 and kappa0 must be positive, got {self}")


def discount_grid(gammas: Sequence[float] = SIM_GRID, deltas: Sequence[float] | None = None) -> list[DiscountPair]:
    """Cartesian product of coefficient and variance discounts."""
    deltas = gammas if deltas is None else deltas
    return [DiscountPair(float(g), float(d)) for g in gammas for d in deltas]


def default_priors(response, active=None, n_init: int = 40, base: DlmPriors | None = None) -> DlmPriors:
    """Priors with ``kappa0`` set to the sample variance of the first active responses."""
    base = base or DlmPriors()
    r = np.asarray(response, dtype=float)
    if active is not None:
        r = r[np.asarray(active, dtype=bool)]
    r = r[np.isfinite(r)][:n_init]
    v = float(np.var(r, ddof=1)) if r.size > 1 else 0.0
    if not v > 0:
        v = base.kappa0 / base.nu0
    return replace(base, kappa0=v * base.nu0)


@dataclass
class DlmPosterior:
    """Filtered (and optionally smoothed) moments for ``t = 1..N``.

    Index ``t - 1`` holds the posterior after observation ``t``.  ``s`` is the
    point estimate ``kappa / nu`` of the observation variance.
    """

    priors: DlmPriors
    disc: DiscountPair
    active: np.ndarray
    mu: np.ndarray
    C: np.ndarray
    nu: np.ndarray
    kappa: np.ndarray
    s: np.ndarray
    e: np.ndarray
    q: np.ndarray
    z: np.ndarray
    R: np.ndarray
    G: np.ndarray
    logpredlik: float
    mu_s: np.ndarray | None = None
    C_s: np.ndarray | None = None
    nu_s: np.ndarray | None = None
    s_s: np.ndarray | None = None
    kappa_s: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.mu.shape[0]

    @property
    def smoothed(self) -> bool:
        return self.mu_s is not None

    def last_state(self):
        """``(mu, C, nu, kappa)`` after the final observation."""
        return float(self.mu[-1]), float(self.C[-1]), float(self.nu[-1]), float(self.kappa[-1])


_LOG_PI = math.log(math.pi)


@numba.njit(cache=True, nogil=True)
def _t_logpdf(e, q, df):
    return (
        math.lgamma(0.5 * (df + 1.0))
        - math.lgamma(0.5 * df)
        - 0.5 * (math.log(df) + _LOG_PI + math.log(q))
        - 0.5 * (df + 1.0) * math.log1p(e * e / (df * q))
    )


@numba.njit(cache=True, nogil=True)
def _filter_kernel(y, F, active, mu0, c0, nu0, kappa0, gamma, delta, out):
    # out rows: mu, C, nu, kappa, s, e, q, z, R, G
    N = y.shape[0]
    mu, C, nu, kappa = mu0, c0, nu0, kappa0
    s = kappa / nu
    ll = 0.0
    for t in range(N):
        G = C * (1.0 - gamma) / gamma
        R = C + G
        if active[t]:
            f = F[t]
            q = f * f * R + s
            if not q > 0.0:
                return ll, t, 0
            e = y[t] - f * mu
            z = R * f / q
            ll += _t_logpdf(e, q, delta * nu)
            nu_new = delta * nu + 1.0
            kappa_new = delta * kappa + s * e * e / q
            s_new = kappa_new / nu_new
            mu = mu + z * e
            C_new = (R - z * z * q) * (s_new / s)
            if not C_new > 0.0:
                return ll, t, 1
            C, nu, kappa, s = C_new, nu_new, kappa_new, s_new
        else:
            e = 0.0
            q = np.nan
            z = 0.0
            C = R
        out[0, t] = mu
        out[1, t] = C
        out[2, t] = nu
        out[3, t] = kappa
        out[4, t] = s
        out[5, t] = e
        out[6, t] = q
        out[7, t] = z
        out[8, t] = R
        out[9, t] = G
    return ll, -1, 0


@numba.njit(cache=True, nogil=True)
def _grid_kernel(y, F, active, mu0, c0, nu0, kappa0, gammas, deltas):
    ngrid = gammas.shape[0]
    res = np.empty(ngrid)
    N = y.shape[0]
    for g in range(ngrid):
        gamma = gammas[g]
        delta = deltas[g]
        mu, C, nu, kappa = mu0, c0, nu0, kappa0
        s = kappa / nu
        ll = 0.0
        ok = True
        for t in range(N):
            R = C / gamma
            if active[t]:
                f = F[t]
                q = f * f * R + s
                if not q > 0.0:
                    ok = False
                    break
                e = y[t] - f * mu
                z = R * f / q
                ll += _t_logpdf(e, q, delta * nu)
                nu_new = delta * nu + 1.0
                kappa_new = delta * kappa + s * e * e / q
                s_new = kappa_new / nu_new
                mu = mu + z * e
                C = (R - z * z * q) * (s_new / s)
                if not C > 0.0:
                    ok = False
                    break
                nu, kappa, s = nu_new, kappa_new, s_new
            else:
                C = R
        res[g] = ll if ok else -np.inf
    return res


@numba.njit(cache=True, nogil=True)
def _smooth_kernel(mu, C, nu, s, beta, delta, out):
    # out rows: mu_s, C_s, nu_s, s_s
    N = mu.shape[0]
    out[0, N - 1] = mu[N - 1]
    out[1, N - 1] = C[N - 1]
    out[2, N - 1] = nu[N - 1]
    out[3, N - 1] = s[N - 1]
    for t in range(N - 2, -1, -1):
        out[0, t] = (1.0 - beta) * mu[t] + beta * out[0, t + 1]
        out[2, t] = (1.0 - delta) * nu[t] + delta * out[2, t + 1]
        out[3, t] = 1.0 / ((1.0 - delta) / s[t] + delta / out[3, t + 1])
        # smooth the scale-free C/s, then rescale; rescaling the already
        # scaled C_{t+1,N} again would compound the ratios
        out[1, t] = out[3, t] * ((1.0 - beta) * C[t] / s[t] + beta * beta * out[1, t + 1] / out[3, t + 1])


def _check_inputs(response, regressor, active):
    y = np.ascontiguousarray(response, dtype=float)
    F = np.ascontiguousarray(regressor, dtype=float)
    if y.ndim != 1 or y.shape != F.shape:
        raise DimensionError(f"response {y.shape} and regressor {F.shape} must be equal-length vectors")
    if active is None:
        act = np.isfinite(y) & np.isfinite(F)
    else:
        act = np.ascontiguousarray(active, dtype=np.bool_)
        if act.shape != y.shape:
            raise DimensionError("active mask length differs from the series")
        act = act & np.isfinite(y) & np.isfinite(F)
    return y, F, act


def dlm_filter(response, regressor, priors: DlmPriors, disc: DiscountPair, active=None) -> DlmPosterior:
    """Forward filtering with one-step Student-t predictive likelihood.

    Timesteps with ``active`` false (or a non-finite response/regressor) are
    treated as missing: the coefficient variance still evolves, everything
    else carries over and no likelihood is accrued.

    Raises
    ------
    FilterDivergenceError
        If ``q_t`` or ``C_t`` becomes non-positive; ``err.t`` is 1-based.
    """
    y, F, act = _check_inputs(response, regressor, active)
    N = y.shape[0]
    out = np.full((10, N), np.nan)
    ll, bad, which = _filter_kernel(
        y, F, act, priors.mu0, priors.c0, priors.nu0, priors.kappa0, disc.gamma, disc.delta, out
    )
    if bad >= 0:
        raise FilterDivergenceError(bad + 1, "q" if which == 0 else "C")
    mu, C, nu, kappa, s, e, q, z, R, G = out
    return DlmPosterior(
        priors=priors, disc=disc, active=act,
        mu=mu, C=C, nu=nu, kappa=kappa, s=s, e=e, q=q, z=z, R=R, G=G,
        logpredlik=float(ll),
    )


def dlm_smooth(post: DlmPosterior, disc: DiscountPair | None = None) -> DlmPosterior:
    """Backward smoothing; returns ``post`` with the smoothed fields set."""
    if post is None or post.N == 0 or not np.all(np.isfinite(post.s)):
        raise StateError("smoothing requires a completed filter pass")
    disc = disc or post.disc
    out = np.empty((4, post.N))
    _smooth_kernel(post.mu, post.C, post.nu, post.s, disc.gamma, disc.delta, out)
    post.mu_s, post.C_s, post.nu_s, post.s_s = out[0], out[1], out[2], out[3]
    post.kappa_s = post.nu_s * post.s_s
    return post


def dlm_step(state, y: float, F: float, disc: DiscountPair):
    """One filtering step from ``state = (mu, C, nu, kappa)``.

    Returns the new state and the log predictive density of ``y``.
    Used to extend a fitted filter with new observations.
    """
    mu, C, nu, kappa = state
    s = kappa / nu
    R = C / disc.gamma
    q = F * F * R + s
    if not q > 0:
        raise FilterDivergenceError(1, "q")
    e = y - F * mu
    z = R * F / q
    lp = _t_logpdf(e, q, disc.delta * nu)
    nu_new = disc.delta * nu + 1.0
    kappa_new = disc.delta * kappa + s * e * e / q
    s_new = kappa_new / nu_new
    C_new = (R - z * z * q) * (s_new / s)
    if not C_new > 0:
        raise FilterDivergenceError(1, "C")
    return (mu + z * e, C_new, nu_new, kappa_new), float(lp)


def grid_loglik(response, regressor, priors: DlmPriors, grid: Sequence[DiscountPair], active=None) -> np.ndarray:
    """Log predictive likelihood for every grid pair (``-inf`` where the filter diverges)."""
    y, F, act = _check_inputs(response, regressor, active)
    gammas = np.array([d.gamma for d in grid], dtype=float)
    deltas = np.array([d.delta for d in grid], dtype=float)
    return _grid_kernel(y, F, act, priors.mu0, priors.c0, priors.nu0, priors.kappa0, gammas, deltas)


def pick_best(grid: Sequence[DiscountPair], ll) -> int:
    """Index of the maximal likelihood; ties go to larger gamma, then larger delta."""
    ll = np.asarray(ll, dtype=float)
    if len(grid) == 0:
        raise GridSearchError("empty discount grid")
    if not np.any(np.isfinite(ll)):
        raise GridSearchError(f"all {len(grid)} discount pairs diverged")
    return max(range(len(grid)), key=lambda i: (ll[i], grid[i].gamma, grid[i].delta) if np.isfinite(ll[i]) else (-np.inf, -1.0, -1.0))


def grid_search(response, regressor, priors: DlmPriors, grid: Sequence[DiscountPair], active=None):
    """Select the discount pair maximising the predictive likelihood.

    Returns
    -------
    best : DiscountPair
    post : DlmPosterior
        Filtered and smoothed posterior at ``best``.
    """
    grid = list(grid)
    ll = grid_loglik(response, regressor, priors, grid, active)
    best = grid[pick_best(grid, ll)]
    post = dlm_filter(response, regressor, priors, best, active)
    return best, dlm_smooth(post)
