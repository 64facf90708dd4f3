"""h-step forecasting from PARCOR predictive draws, and rolling MSPE.

Each PARCOR coefficient is projected forward as a random walk whose
variance grows by ``G = C_T (1 - gamma) / gamma`` per step.  Draws are
pushed through the periodic Durbin-Levinson recursion to TV-VAR
coefficients and the forecast is propagated without innovation noise, so
the spread of the draws reflects parameter uncertainty only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .dlm import DiscountPair, dlm_step
from .errors import DimensionError, DomainError, InsufficientDataError
from .periodic import _assemble_arrays, as_series, channel_order

log = logging.getLogger(__name__)

__all__ = ["ForecastResult", "LatticeState", "forecast", "mspe", "predict_parcor", "rolling_mspe"]


@dataclass(frozen=True)
class ForecastResult:
    """Forecast draws for ``x_{T+1..T+h}``.

    Attributes
    ----------
    samples : ndarray, shape (J, h, K)
    mean : ndarray, shape (h, K)
        Average of ``samples`` over draws.
    n_outside : int
        PARCOR draws that fell outside ``(-1, 1)``.  They are used as drawn.
    """

    horizon: int
    samples: np.ndarray
    mean: np.ndarray
    n_outside: int = 0
    n_draws_parcor: int = 0
    mspe: float | None = None

    @property
    def J(self) -> int:
        return self.samples.shape[0]

    def std_error(self) -> np.ndarray:
        """Monte Carlo standard error of ``mean``."""
        if self.J < 2:
            return np.zeros_like(self.mean)
        return self.samples.std(axis=0, ddof=1) / np.sqrt(self.J)


def predict_parcor(state, disc: DiscountPair, h: int):
    """Predictive ``(mu(h), C(h))`` of a PARCOR coefficient ``h`` steps ahead.

    ``state`` is ``(mu, C, ...)`` at the last observation.  ``h = 0`` returns
    the current posterior.
    """
    if h < 0:
        raise DomainError("h must be >= 0")
    mu, C = float(state[0]), float(state[1])
    G = C * (1.0 - disc.gamma) / disc.gamma
    return mu, C + h * G


def mspe(pred, truth) -> float:
    """Squared error averaged over channels and times."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    return float(np.mean((pred - truth) ** 2))


@dataclass
class LatticeState:
    """Filter state of every lattice stage at the end of the data.

    Holds the last filtered DLM state of each forward and backward
    regression up to ``M_k(P)``, the backward errors of the last interlaced
    position, a short window of PARCOR trajectories and the last ``P``
    observations.  :meth:`update` extends every filter by one time step
    with the discount pairs fixed.
    """

    K: int
    P: int
    disc: dict
    state_f: dict
    state_b: dict
    b_last: np.ndarray
    alpha_f: np.ndarray
    alpha_b: np.ndarray
    x_tail: np.ndarray
    T: int
    window: int = field(default=0)

    def __post_init__(self):
        if self.window == 0:
            self.window = self.P + 2

    @property
    def M(self) -> int:
        return channel_order(self.K, self.P, self.K)

    def n_stages(self, k: int) -> int:
        return channel_order(self.K, self.P, k)

    @classmethod
    def from_fit(cls, fit, P: int | None = None) -> LatticeState:
        lat = fit.lattice
        P = fit.order if P is None else P
        K, T = lat.K, lat.T
        M = channel_order(K, P, K)
        W = min(P + 2, T)
        disc, sf, sb = {}, {}, {}
        for k in range(1, K + 1):
            for m in range(1, channel_order(K, P, k) + 1):
                st = lat.stages[(k, m)]
                disc[(k, m)] = st.disc
                sf[(k, m)] = st.post_f.last_state()
                sb[(k, m)] = st.post_b.last_state()
        af = lat.stage_arrays("alpha_f", M)[-W * K :].copy()
        ab = lat.stage_arrays("alpha_b", M)[-W * K :].copy()
        # backward errors of the last position, stages 0..M
        b_last = lat.bwd_err[: M + 1, -1].copy()
        return cls(K=K, P=P, disc=disc, state_f=sf, state_b=sb, b_last=b_last,
                   alpha_f=af, alpha_b=ab, x_tail=fit.x[-P:].copy(), T=T, window=W)

    def update(self, x_t) -> float:
        """Filter one new observation; returns its summed log predictive density."""
        x_t = np.asarray(x_t, dtype=float)
        if x_t.shape != (self.K,):
            raise DimensionError(f"expected a length-{self.K} observation")
        M = self.M
        new_f = np.zeros((self.K, M))
        new_b = np.zeros((self.K, M))
        b_prev = self.b_last
        lp_total = 0.0
        for k in range(1, self.K + 1):
            Mk = self.n_stages(k)
            f = np.empty(Mk + 1)
            b = np.empty(Mk + 1)
            f[0] = b[0] = x_t[k - 1]
            for m in range(1, Mk + 1):
                d = self.disc[(k, m)]
                resp, reg = f[m - 1], b_prev[m - 1]
                self.state_f[(k, m)], lp_f = dlm_step(self.state_f[(k, m)], resp, reg, d)
                self.state_b[(k, m)], lp_b = dlm_step(self.state_b[(k, m)], reg, resp, d)
                lp_total += lp_f + lp_b
                a_f = self.state_f[(k, m)][0]
                a_b = self.state_b[(k, m)][0]
                new_f[k - 1, m - 1] = a_f
                new_b[k - 1, m - 1] = a_b
                f[m] = resp - a_f * reg
                b[m] = reg - a_b * resp
            b_prev = np.full(M + 1, np.nan)
            b_prev[: Mk + 1] = b
        self.b_last = b_prev
        self.alpha_f = np.vstack([self.alpha_f, new_f])[-self.window * self.K :]
        self.alpha_b = np.vstack([self.alpha_b, new_b])[-self.window * self.K :]
        self.x_tail = np.vstack([self.x_tail, x_t])[-self.P :]
        self.T += 1
        return lp_total

    def parcor_draws(self, h: int, J: int, rng: np.random.Generator, sample: bool = True):
        """PARCOR draws for times ``T+1..T+h`` as ``(J, h*K, M)`` arrays."""
        K, M = self.K, self.M
        out = {}
        for tag, states in (("f", self.state_f), ("b", self.state_b)):
            mu = np.zeros((h, K, M))
            sd = np.zeros((h, K, M))
            for (k, m), st in states.items():
                for i in range(h):
                    mu_h, c_h = predict_parcor(st, self.disc[(k, m)], i + 1)
                    mu[i, k - 1, m - 1] = mu_h
                    sd[i, k - 1, m - 1] = np.sqrt(max(c_h, 0.0))
            draw = mu + sd * rng.standard_normal((J, h, K, M)) if sample else np.broadcast_to(mu, (J, h, K, M))
            out[tag] = draw.reshape(J, h * K, M)
        return out["f"], out["b"]


def forecast(fit_or_state, h: int = 1, J: int = 1000, seed=None, sample: bool = True) -> ForecastResult:
    """Sample ``J`` forecast paths ``h`` steps past the end of the data.

    Parameters
    ----------
    fit_or_state : BclfFit or LatticeState
    h : int
        Horizon, at least 1.
    J : int
        Number of PARCOR draws.
    seed : int or Generator, optional
    sample : bool
        If false every draw equals the predictive mean of the PARCORs.

    Notes
    -----
    For horizon ``h'`` and lag ``p`` the regressor is the observed
    ``x_{T+h'-p}`` whenever ``h' - p <= 0`` and the draw's own forecast
    otherwise.
    """
    from .lattice import levinson_periodic

    if h < 1:
        raise DomainError("h must be >= 1")
    if J < 1:
        raise DomainError("J must be >= 1")
    state = fit_or_state if isinstance(fit_or_state, LatticeState) else LatticeState.from_fit(fit_or_state)
    rng = np.random.default_rng(seed)
    K, P, M = state.K, state.P, state.M
    df, db = state.parcor_draws(h, J, rng, sample)
    n_out = int(np.sum(np.abs(df) >= 1.0) + np.sum(np.abs(db) >= 1.0))
    if n_out:
        log.info("%d PARCOR draws fall outside (-1, 1)", n_out)

    # stage-m entries past M_k are zero-masked so each channel stops at its own order
    per_channel = np.array([state.n_stages(k) for k in range(1, K + 1)], dtype=np.int64)
    mask = (np.arange(M)[None, :] < per_channel[:, None]).astype(float)
    df *= np.tile(mask, (h, 1))
    db *= np.tile(mask, (h, 1))
    hist_f = np.broadcast_to(state.alpha_f, (J,) + state.alpha_f.shape)
    hist_b = np.broadcast_to(state.alpha_b, (J,) + state.alpha_b.shape)
    af = np.concatenate([hist_f, df], axis=1)
    ab = np.concatenate([hist_b, db], axis=1)
    W = state.alpha_f.shape[0] // K
    target = np.tile(per_channel, W + h)
    a, _ = levinson_periodic(af, ab, target)
    fut = a[:, W * K :]
    chans = tuple(fut[:, k - 1 :: K, : per_channel[k - 1]] for k in range(1, K + 1))
    phi, _, _ = _assemble_arrays(chans, np.ones((J, h, K)), P)  # (J, h, P, K, K)

    path = np.empty((J, P + h, K))
    path[:, :P] = state.x_tail
    for i in range(h):
        acc = np.zeros((J, K))
        for p in range(1, P + 1):
            acc += np.einsum("jik,jk->ji", phi[:, i, p - 1], path[:, P + i - p])
        path[:, P + i] = acc
    samples = path[:, P:]
    return ForecastResult(horizon=h, samples=samples, mean=samples.mean(axis=0),
                          n_outside=n_out, n_draws_parcor=int(df.size + db.size))


def rolling_mspe(x, holdout: int, cfg=None, mode: str = "extend", n_draws: int = 1000, seed=0) -> dict:
    """Rolling one-step forecasts over the last ``holdout`` observations.

    Parameters
    ----------
    x : array_like, shape (T, K)
    holdout : int
        Number of held-out times; forecasts target ``T-holdout+1 .. T``.
    cfg : FitConfig, optional
    mode : {"extend", "refit"}
        ``extend`` fits once on the first ``T - holdout`` observations and
        filters each new one with discounts and order held fixed; ``refit``
        refits the whole model at every origin.

    Returns
    -------
    dict
        ``mspe``, per-time ``errors`` (holdout, K), ``pred`` and ``truth``.
    """
    from .lattice import FitConfig, fit

    x = as_series(x)
    T, K = x.shape
    if not 1 <= holdout < T:
        raise DomainError("holdout must satisfy 1 <= holdout < T")
    if mode not in ("extend", "refit"):
        raise DomainError(f"unknown rolling mode {mode!r}")
    cfg = cfg or FitConfig()
    origin = T - holdout
    ss = np.random.SeedSequence(seed).spawn(holdout)
    pred = np.empty((holdout, K))
    if mode == "refit":
        for i in range(holdout):
            res = fit(x[: origin + i], replace(cfg, seed=cfg.seed + i))
            pred[i] = forecast(res, 1, n_draws, np.random.default_rng(ss[i])).mean[0]
    else:
        res = fit(x[:origin], cfg)
        state = LatticeState.from_fit(res)
        for i in range(holdout):
            pred[i] = forecast(state, 1, n_draws, np.random.default_rng(ss[i])).mean[0]
            if i + 1 < holdout:
                state.update(x[origin + i])
    truth = x[origin:]
    if origin <= K:
        raise InsufficientDataError("too few observations before the holdout")
    return {"mspe": mspe(pred, truth), "errors": pred - truth, "pred": pred, "truth": truth, "mode": mode}
