"""Order selection by BIC, DIC and WAIC."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError
from .periodic import TvVarModel, _assemble_arrays, as_series

__all__ = [
    "OrderReport",
    "bic",
    "dic",
    "n_theta",
    "plug_in_loglik",
    "pointwise_loglik",
    "posterior_criteria",
    "sample_parameters",
    "select_order",
    "waic",
]

_LOG2PI = math.log(2.0 * math.pi)


def n_theta(P: int, K: int) -> int:
    """Number of time-varying quantities estimated at order ``P``."""
    return 2 * P * K * K + (K - 1) * K


def _residuals(phi, x, P):
    T = x.shape[0]
    u = x[P:]
    for p in range(1, P + 1):
        u = u - np.einsum("...tij,tj->...ti", phi[..., P:T, p - 1, :, :], x[P - p : T - p])
    return u


def _gauss_logpdf(u, sigma):
    try:
        c = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise DomainError("innovation covariance is not positive definite") from exc
    diag = np.diagonal(c, axis1=-2, axis2=-1)
    if np.any(diag <= 1e-300):
        raise DomainError("innovation covariance is singular")
    z = np.linalg.solve(c, u[..., None])[..., 0]
    K = u.shape[-1]
    return -0.5 * (K * _LOG2PI + np.sum(z * z, axis=-1)) - np.sum(np.log(diag), axis=-1)


def pointwise_loglik(model: TvVarModel, x) -> np.ndarray:
    """``log N(x_t | sum_p phi_{p,t} x_{t-p}, sigma_t)`` for ``t = P+1..T``."""
    x = as_series(x)
    if x.shape != (model.T, model.K):
        raise DomainError(f"series shape {x.shape} does not match model (T={model.T}, K={model.K})")
    P = model.P
    return _gauss_logpdf(_residuals(model.phi, x, P), model.sigma[P:])


def plug_in_loglik(model: TvVarModel, x) -> float:
    """Conditional Gaussian log likelihood, first ``P`` observations held fixed."""
    return float(np.sum(pointwise_loglik(model, x)))


def bic(model: TvVarModel, x) -> float:
    """``-2 logL + n_theta * log(K T)``."""
    x = as_series(x)
    T, K = x.shape
    return -2.0 * plug_in_loglik(model, x) + n_theta(model.P, K) * math.log(K * T)


@dataclass
class OrderReport:
    """Per-order criteria; arrays are indexed by ``P - 1``."""

    orders: np.ndarray
    logl: np.ndarray
    n_theta: np.ndarray
    bic: np.ndarray
    dic: np.ndarray
    waic: np.ndarray
    p_dic: np.ndarray
    p_waic: np.ndarray
    criterion: str
    chosen: int
    S: int = 0
    extra: dict = field(default_factory=dict)

    def values(self, criterion: str | None = None) -> np.ndarray:
        return getattr(self, criterion or self.criterion)

    def rows(self):
        for i, P in enumerate(self.orders):
            yield {
                "P": int(P), "n_theta": int(self.n_theta[i]), "logl": float(self.logl[i]),
                "bic": float(self.bic[i]), "dic": float(self.dic[i]), "waic": float(self.waic[i]),
                "p_dic": float(self.p_dic[i]), "p_waic": float(self.p_waic[i]),
            }


def _stage_posteriors(lattice, M):
    """Smoothed Student-t / gamma parameters stacked to ``(N, M)`` arrays."""
    K, T = lattice.K, lattice.T
    shape = (T * K, M)
    # entries of stages a channel does not have are masked after drawing
    out = {key: np.zeros(shape) for key in ("mf", "cf", "mb", "cb")}
    out["nf"] = np.ones(shape)
    out["nb"] = np.ones(shape)
    for (k, m), st in lattice.stages.items():
        if m > M:
            continue
        for tag, post in (("f", st.post_f), ("b", st.post_b)):
            act = post.active
            first = int(np.argmax(act))
            for key, arr in (("m", post.mu_s), ("c", post.C_s), ("n", post.nu_s)):
                v = arr.copy()
                v[:first] = v[first]
                out[key + tag][k - 1 :: K, m - 1] = v
    return out


def _variance_params(lattice, P):
    K, T = lattice.K, lattice.T
    nu = np.empty((T, K))
    kappa = np.empty((T, K))
    for k in range(1, K + 1):
        post = lattice.stages[(k, lattice.n_stages(k, P))].post_f
        first = int(np.argmax(post.active))
        n = post.nu_s.copy()
        kp = post.kappa_s.copy()
        n[:first] = n[first]
        kp[:first] = kp[first]
        nu[:, k - 1] = n
        kappa[:, k - 1] = kp
    return nu, kappa


def sample_parameters(lattice, P: int, S: int, rng: np.random.Generator | int | None = None, batch: int = 50):
    """Posterior draws of ``(phi, sigma)`` at order ``P``.

    PARCOR coefficients are drawn from their smoothed Student-t marginals
    and precisions from the smoothed gamma marginals, then pushed through
    the PARCOR-to-AR recursion and the LDL assembly.

    Yields
    ------
    phi : ndarray, shape (b, T, P, K, K)
    sigma : ndarray, shape (b, T, K, K)
        One chunk of ``b <= batch`` draws at a time.
    """
    from .lattice import levinson_periodic

    rng = np.random.default_rng(rng)
    K, T = lattice.K, lattice.T
    M = lattice.n_stages(K, P)
    par = _stage_posteriors(lattice, M)
    nu, kappa = _variance_params(lattice, P)
    target = lattice.targets(P)
    mask = np.arange(M)[None, :] < target[:, None]
    done = 0
    while done < S:
        b = min(batch, S - done)
        af = par["mf"] + np.sqrt(par["cf"]) * rng.standard_t(par["nf"], size=(b,) + par["mf"].shape)
        ab = par["mb"] + np.sqrt(par["cb"]) * rng.standard_t(par["nb"], size=(b,) + par["mb"].shape)
        af *= mask
        ab *= mask
        prec = rng.gamma(nu / 2.0, 2.0 / kappa, size=(b, T, K))
        a, _ = levinson_periodic(af, ab, target)
        chans = tuple(a[:, k - 1 :: K, : lattice.n_stages(k, P)] for k in range(1, K + 1))
        phi, sigma, _ = _assemble_arrays(chans, 1.0 / prec, P)
        done += b
        yield phi, sigma


def posterior_criteria(lattice, x, P: int, S: int = 500, rng=None, plug_in: TvVarModel | None = None) -> dict:
    """DIC and WAIC at order ``P`` from ``S`` posterior draws.

    Per-observation log densities are accumulated with log-sum-exp.
    """
    if S < 1:
        raise DomainError("S must be positive")
    x = as_series(x)
    model = plug_in if plug_in is not None else lattice.model(P)
    ll_hat_t = pointwise_loglik(model, x)
    ll_hat = float(ll_hat_t.sum())
    sum_ll = 0.0
    sum_log_t = np.zeros_like(ll_hat_t)
    lse_t = np.full_like(ll_hat_t, -np.inf)
    for phi, sigma in sample_parameters(lattice, P, S, rng):
        lp = _gauss_logpdf(_residuals(phi, x, P), sigma[:, P:])
        sum_ll += float(lp.sum())
        sum_log_t += lp.sum(axis=0)
        lse_t = np.logaddexp(lse_t, logsumexp(lp, axis=0))
    if not np.all(np.isfinite(lse_t)):
        raise DomainError("per-observation predictive density underflowed")
    mean_ll = sum_ll / S
    p_dic = 2.0 * (ll_hat - mean_ll)
    p_waic = 2.0 * float(np.sum((lse_t - math.log(S)) - sum_log_t / S))
    if p_dic < 0:
        warnings.warn(f"negative effective parameter count p_DIC={p_dic:.3g} at P={P}", RuntimeWarning)
    return {
        "logl": ll_hat,
        "p_dic": p_dic,
        "p_waic": p_waic,
        "dic": -2.0 * ll_hat + 2.0 * p_dic,
        "waic": -2.0 * ll_hat + 2.0 * p_waic,
    }


def dic(fit, x=None, S: int = 500, seed=0) -> float:
    """DIC of a fitted model at its selected order."""
    x = fit.x if x is None else x
    return posterior_criteria(fit.lattice, x, fit.order, S, seed, fit.model)["dic"]


def waic(fit, x=None, S: int = 500, seed=0) -> float:
    """WAIC of a fitted model at its selected order."""
    x = fit.x if x is None else x
    return posterior_criteria(fit.lattice, x, fit.order, S, seed, fit.model)["waic"]


def select_order(lattice, x, config):
    """Evaluate criteria for ``P = 1..p_max`` and return ``(report, model)``.

    Only the model at the chosen order is kept.
    """
    x = as_series(x)
    T, K = x.shape
    crit = config.criterion
    want_mc = config.all_criteria or crit in ("dic", "waic")
    orders = np.arange(1, lattice.p_max + 1)
    cols = {key: np.full(orders.size, np.nan) for key in ("logl", "bic", "dic", "waic", "p_dic", "p_waic")}
    seeds = np.random.SeedSequence(config.seed).spawn(orders.size)
    best, best_val, best_model = None, np.inf, None
    for i, P in enumerate(orders):
        model = lattice.model(int(P))
        ll = plug_in_loglik(model, x)
        cols["logl"][i] = ll
        cols["bic"][i] = -2.0 * ll + n_theta(int(P), K) * math.log(K * T)
        if want_mc:
            res = posterior_criteria(lattice, x, int(P), config.n_samples, np.random.default_rng(seeds[i]), model)
            for key in ("dic", "waic", "p_dic", "p_waic"):
                cols[key][i] = res[key]
        val = cols[crit][i]
        if val < best_val:
            best, best_val, best_model = int(P), val, model
    if best is None:
        raise DomainError(f"criterion {crit} is not finite for any order")
    report = OrderReport(
        orders=orders, n_theta=np.array([n_theta(int(P), K) for P in orders]),
        criterion=crit, chosen=best, S=config.n_samples if want_mc else 0, **cols,
    )
    return report, best_model
