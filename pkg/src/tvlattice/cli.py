"""Command-line interface: ``tvlattice {simulate,fit,spectrum,forecast,experiment}``.

Settings are resolved with the precedence command line > ``TVLATTICE_SEED``
(seed only) > ``--config`` JSON file > built-in defaults.  A ``manifest.json``
written by any command is itself a valid ``--config`` file, so rerunning it
reproduces the artifacts.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
Failures print a one-line JSON record to stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dlm import DiscountPair, discount_grid
from .errors import (
    DimensionError,
    DomainError,
    FilterDivergenceError,
    GridSearchError,
    InsufficientDataError,
    NotPositiveDefiniteError,
    SingularityError,
    TvLatticeError,
)
from .periodic import TvVarModel

log = logging.getLogger("tvlattice")

SEED_ENV = "TVLATTICE_SEED"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

DEFAULTS = {
    "p_max": 5,
    "criterion": "bic",
    "grid_min": 0.99,
    "grid_max": 1.0,
    "grid_step": 0.002,
    "delta_min": None,
    "delta_max": None,
    "delta_step": None,
    "freqs": 100,
    "time_stride": 1,
    "h": 1,
    "draws": 1000,
    "samples": 500,
    "seed": 0,
    "ordering": None,
    "all_orderings": False,
    "threads": 1,
    "generator": "sim1-case1",
    "T": None,
    "rep": 0,
    "reps": 1,
    "burn_in": 200,
    "sigma_scale": None,
    "holdout": 0,
    "mode": "extend",
    "criteria": "",
    "parcor": False,
}


class ConfigError(TvLatticeError, ValueError):
    """Invalid command-line or config-file setting."""


class DataError(TvLatticeError, ValueError):
    """Input file missing or malformed."""

    def __init__(self, message, row=None, column=None, path=None):
        self.row, self.column, self.path = row, column, path
        super().__init__(message)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one command."""

    command: str
    input: str | None = None
    out: str | None = None
    model: str | None = None
    p_max: int = 5
    criterion: str = "bic"
    grid_min: float = 0.99
    grid_max: float = 1.0
    grid_step: float = 0.002
    delta_min: float | None = None
    delta_max: float | None = None
    delta_step: float | None = None
    freqs: int = 100
    time_stride: int = 1
    h: int = 1
    draws: int = 1000
    samples: int = 500
    seed: int = 0
    ordering: tuple | None = None
    all_orderings: bool = False
    threads: int = 1
    generator: str = "sim1-case1"
    T: int | None = None
    rep: int = 0
    reps: int = 1
    burn_in: int = 200
    sigma_scale: float | None = None
    holdout: int = 0
    mode: str = "extend"
    criteria: str = ""
    parcor: bool = False

    def validate(self):
        checks = [
            (self.p_max >= 1, "p_max must be >= 1"),
            (self.criterion in ("bic", "dic", "waic"), "criterion must be bic, dic or waic"),
            (0 < self.grid_min <= self.grid_max <= 1, "grid bounds must satisfy 0 < min <= max <= 1"),
            (self.grid_step > 0, "grid_step must be positive"),
            (self.freqs >= 1, "freqs must be >= 1"),
            (self.time_stride >= 1, "time_stride must be >= 1"),
            (self.h >= 1, "h must be >= 1"),
            (self.draws >= 1, "draws must be >= 1"),
            (self.samples >= 1, "samples must be >= 1"),
            (self.threads >= 1, "threads must be >= 1"),
            (self.reps >= 1, "reps must be >= 1"),
            (self.rep >= 0, "rep must be >= 0"),
            (self.holdout >= 0, "holdout must be >= 0"),
            (self.mode in ("extend", "refit"), "mode must be extend or refit"),
            (self.T is None or self.T >= 3, "T must be >= 3"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.delta_min is not None or self.delta_max is not None:
            lo = self.delta_min if self.delta_min is not None else self.grid_min
            hi = self.delta_max if self.delta_max is not None else self.grid_max
            if not 0 < lo <= hi <= 1:
                raise ConfigError("delta bounds must satisfy 0 < min <= max <= 1")
        for c in filter(None, self.criteria.split(",")):
            if c not in ("bic", "dic", "waic"):
                raise ConfigError(f"unknown criterion {c!r} in criteria")
        return self

    def grid(self) -> list[DiscountPair]:
        gammas = _grid_values(self.grid_min, self.grid_max, self.grid_step)
        if self.delta_min is None and self.delta_max is None and self.delta_step is None:
            deltas = gammas
        else:
            deltas = _grid_values(
                self.delta_min if self.delta_min is not None else self.grid_min,
                self.delta_max if self.delta_max is not None else self.grid_max,
                self.delta_step if self.delta_step is not None else self.grid_step,
            )
        return discount_grid(gammas, deltas)

    def fit_config(self):
        from .lattice import FitConfig

        return FitConfig(p_max=self.p_max, grid=tuple(self.grid()), criterion=self.criterion,
                         n_samples=self.samples, seed=self.seed, threads=self.threads)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        if d["ordering"] is not None:
            d["ordering"] = list(d["ordering"])
        return d


def _grid_values(lo: float, hi: float, step: float) -> list[float]:
    n = math.floor((hi - lo) / step + 1e-9)
    vals = [round(lo + i * step, 12) for i in range(n + 1)]
    if vals[-1] < hi - 1e-12:
        vals.append(hi)
    return vals


# ---------------------------------------------------------------- CSV I/O


def read_series(path) -> tuple[np.ndarray, list[str]]:
    """Read a ``T x K`` numeric CSV.

    Comma or semicolon delimited, optional header row.  A leading column
    headed ``t``, ``time`` or ``index`` is dropped.  Returns the data and
    channel names (``x1..xK`` without a header).

    Raises
    ------
    DataError
        With the 1-based ``row`` and ``column`` of the first bad cell.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}", path=str(path))
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError("input file is empty", path=str(path))
    first = lines[0]
    delim = ";" if first.count(";") > first.count(",") else ","
    rows = list(csv.reader(lines, delimiter=delim))
    header = None
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        header = [v.strip() for v in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError("input has a header but no data rows", path=str(path))
    skip = 1 if header and header[0].lower() in _INDEX_NAMES else 0
    K = len(header) if header else len(rows[0])
    x = np.empty((len(rows), K - skip))
    offset = 2 if header else 1
    for i, row in enumerate(rows):
        if len(row) != K:
            raise DataError(f"row {i + offset} has {len(row)} fields, expected {K}", row=i + offset, path=str(path))
        for j, v in enumerate(row[skip:], start=skip):
            try:
                x[i, j - skip] = float(v)
            except ValueError:
                raise DataError(f"row {i + offset}, column {j + 1}: cannot parse {v!r} as a number",
                                row=i + offset, column=j + 1, path=str(path)) from None
            if not math.isfinite(x[i, j - skip]):
                raise DataError(f"row {i + offset}, column {j + 1}: non-finite value {v!r}",
                                row=i + offset, column=j + 1, path=str(path))
    return x, header[skip:] if header else [f"x{j + 1}" for j in range(K)]


_INDEX_NAMES = ("t", "time", "index")


def _fmt(v) -> str:
    return "%.17g" % v


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_series(path, x, names):
    write_csv(path, ["t"] + list(names), ([t + 1] + [float(v) for v in x[t]] for t in range(x.shape[0])))


def write_model(outdir: Path, model: TvVarModel):
    """``phi.csv`` (wide, one row per t) and ``sigma.csv`` (lower triangle)."""
    T, P, K = model.T, model.P, model.K
    cols = [(p, i, j) for p in range(P) for i in range(K) for j in range(K)]
    write_csv(outdir / "phi.csv", ["t"] + [f"phi_{p + 1}_{i + 1}_{j + 1}" for p, i, j in cols],
              ([t + 1] + [float(model.phi[t, p, i, j]) for p, i, j in cols] for t in range(T)))
    tri = [(i, j) for i in range(K) for j in range(i + 1)]
    write_csv(outdir / "sigma.csv", ["t"] + [f"sigma_{i + 1}_{j + 1}" for i, j in tri],
              ([t + 1] + [float(model.sigma[t, i, j]) for i, j in tri] for t in range(T)))


def read_model(path) -> TvVarModel:
    """Inverse of :func:`write_model`."""
    path = Path(path)
    for name in ("phi.csv", "sigma.csv"):
        if not (path / name).is_file():
            raise DataError(f"model directory lacks {name}: {path}", path=str(path / name))
    phi_raw, phi_cols = read_series(path / "phi.csv")
    sig_raw, sig_cols = read_series(path / "sigma.csv")
    trip = [tuple(int(v) for v in c.split("_")[1:]) for c in phi_cols]
    P = max(t[0] for t in trip)
    K = max(t[1] for t in trip)
    T = phi_raw.shape[0]
    phi = np.zeros((T, P, K, K))
    for c, (p, i, j) in enumerate(trip):
        phi[:, p - 1, i - 1, j - 1] = phi_raw[:, c]
    sigma = np.zeros((T, K, K))
    for c, name in enumerate(sig_cols):
        i, j = (int(v) for v in name.split("_")[1:])
        sigma[:, i - 1, j - 1] = sig_raw[:, c]
        sigma[:, j - 1, i - 1] = sig_raw[:, c]
    return TvVarModel.from_phi_sigma(phi, sigma)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(outdir: Path, cfg: RunConfig, extra: dict | None = None):
    from .simlab import RNG_NAME

    man = {"tool": "tvlattice", "version": __version__, "rng": RNG_NAME, "config": cfg.to_dict()}
    if cfg.input:
        man["input_sha256"] = _sha256(cfg.input)
    if extra:
        man.update(extra)
    (outdir / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- commands


def _apply_ordering(x, names, ordering):
    if ordering is None:
        return x, names
    K = x.shape[1]
    if sorted(ordering) != list(range(1, K + 1)):
        raise ConfigError(f"ordering {list(ordering)} is not a permutation of 1..{K}")
    idx = [o - 1 for o in ordering]
    return x[:, idx], [names[i] for i in idx]


def cmd_simulate(cfg: RunConfig) -> dict:
    from .simlab import SimSpec, generate

    spec = SimSpec(cfg.generator, T=cfg.T, seed=cfg.seed, burn_in=cfg.burn_in, sigma_scale=cfg.sigma_scale)
    x, truth = generate(spec, cfg.rep)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_series(out / "series.csv", x, [f"x{k + 1}" for k in range(x.shape[1])])
    truth_dir = out / "truth"
    truth_dir.mkdir(exist_ok=True)
    write_model(truth_dir, truth)
    write_manifest(out, cfg, {"series_sha256": _sha256(out / "series.csv")})
    return {"series": str(out / "series.csv"), "T": int(x.shape[0]), "K": int(x.shape[1])}


def _fit_one(x, cfg: RunConfig):
    from .lattice import fit

    return fit(x, cfg.fit_config())


def _stage_rows(res):
    for (k, m), st in sorted(res.lattice.stages.items()):
        yield [k, m, float(st.disc.gamma), float(st.disc.delta), float(st.logpredlik),
               float(np.mean(st.var_f)), float(np.mean(st.var_b))]


def cmd_fit(cfg: RunConfig) -> dict:
    if not cfg.input:
        raise ConfigError("fit needs an input CSV")
    x, names = read_series(cfg.input)
    x, names = _apply_ordering(x, names, cfg.ordering)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    extra = {"channels": names}
    if cfg.all_orderings:
        extra["orderings"] = _all_orderings(x, names, cfg, out)
    res = _fit_one(x, cfg)
    write_model(out, res.model)
    write_csv(out / "stages.csv", ["k", "m", "gamma", "delta", "logpredlik", "mean_var_f", "mean_var_b"],
              _stage_rows(res))
    rep = res.report
    write_csv(out / "order_report.csv", ["P", "n_theta", "logl", "bic", "dic", "waic", "p_dic", "p_waic"],
              ([r["P"], r["n_theta"], r["logl"], r["bic"], r["dic"], r["waic"], r["p_dic"], r["p_waic"]]
               for r in rep.rows()))
    if cfg.parcor:
        M = res.lattice.n_stages(res.K, res.order)
        rows = []
        for (k, m), st in sorted(res.lattice.stages.items()):
            if m > res.lattice.n_stages(k, res.order):
                continue
            for t in range(res.T):
                rows.append([t + 1, k, m, float(st.alpha_f[t]), float(st.alpha_b[t]),
                             float(st.var_f[t]), float(st.var_b[t])])
        write_csv(out / "parcor.csv", ["t", "k", "m", "alpha_f", "alpha_b", "var_f", "var_b"], rows)
        extra["parcor_stages"] = M
    extra["order"] = res.order
    write_manifest(out, cfg, extra)
    return {"order": res.order, "T": res.T, "K": res.K, "out": str(out)}


def _all_orderings(x, names, cfg: RunConfig, out: Path):
    K = x.shape[1]
    if K > 5:
        raise ConfigError("--all-orderings is limited to K <= 5")
    rows, summary = [], []
    for perm in itertools.permutations(range(K)):
        res = _fit_one(x[:, list(perm)], cfg)
        P = res.order
        lpl = sum(st.logpredlik for (k, m), st in res.lattice.stages.items()
                  if m <= res.lattice.n_stages(k, P))
        label = " ".join(names[i] for i in perm)
        i = P - 1
        rows.append([label, P, float(res.report.logl[i]), float(res.report.bic[i]), float(lpl)])
        summary.append({"ordering": label, "order": P, "logpredlik": float(lpl)})
    write_csv(out / "orderings.csv", ["ordering", "P", "logl", "bic", "logpredlik"], rows)
    return summary


def _spectrum_rows(field):
    K = field.K
    coh = field.coherence
    for ti, t in enumerate(field.times):
        for li, w in enumerate(field.freqs):
            for i in range(K):
                yield [int(t) + 1, float(w), f"g_{i + 1}_{i + 1}", float(field.g[ti, li, i, i].real)]
            for i in range(K):
                for j in range(i + 1, K):
                    yield [int(t) + 1, float(w), f"rho2_{i + 1}_{j + 1}", float(coh[ti, li, i, j])]


def check_spectral_field(field) -> None:
    """Auto-spectra finite and positive, coherence in [0, 1], g Hermitian."""
    g = field.g
    d = np.diagonal(g, axis1=-2, axis2=-1).real
    if not np.all(np.isfinite(g)):
        raise SingularityError(-1, float("nan"))
    if np.any(d <= 0):
        raise DomainError("non-positive auto-spectrum")
    coh = field.coherence
    if np.any(coh < -1e-12) or np.any(coh > 1 + 1e-9):
        raise DomainError("squared coherence outside [0, 1]")
    if not np.allclose(g, np.conj(np.swapaxes(g, -1, -2))):
        raise DomainError("spectral matrix is not Hermitian")


def cmd_spectrum(cfg: RunConfig) -> dict:
    from .simlab import SimSpec, _truth
    from .spectral import spectral_field

    if cfg.model:
        model = read_model(cfg.model)
    else:
        model = _truth(SimSpec(cfg.generator, T=cfg.T, sigma_scale=cfg.sigma_scale))
    times = np.arange(0, model.T, cfg.time_stride)
    field = spectral_field(model, cfg.freqs, times=times)
    check_spectral_field(field)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "spectrum.csv", ["t", "omega", "entry", "value"], _spectrum_rows(field))
    write_manifest(out, cfg)
    return {"times": int(times.size), "freqs": int(cfg.freqs), "K": model.K}


def cmd_forecast(cfg: RunConfig) -> dict:
    from .forecast import forecast, rolling_mspe

    if not cfg.input:
        raise ConfigError("forecast needs an input CSV")
    x, names = read_series(cfg.input)
    x, names = _apply_ordering(x, names, cfg.ordering)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    res = _fit_one(x, cfg)
    fc = forecast(res, cfg.h, cfg.draws, cfg.seed)
    se = fc.std_error()
    rows = [[res.T + i + 1] + [float(v) for v in fc.mean[i]] + [float(v) for v in se[i]] for i in range(cfg.h)]
    write_csv(out / "forecast.csv", ["t"] + list(names) + [f"se_{n}" for n in names], rows)
    extra = {"order": res.order, "n_outside": fc.n_outside, "n_parcor_draws": fc.n_draws_parcor, "channels": names}
    if cfg.holdout:
        roll = rolling_mspe(x, cfg.holdout, cfg.fit_config(), cfg.mode, cfg.draws, cfg.seed)
        T = x.shape[0]
        write_csv(out / "rolling.csv", ["t"] + [f"pred_{n}" for n in names] + [f"obs_{n}" for n in names],
                  ([T - cfg.holdout + i + 1] + [float(v) for v in roll["pred"][i]] + [float(v) for v in roll["truth"][i]]
                   for i in range(cfg.holdout)))
        extra["mspe"] = roll["mspe"]
    write_manifest(out, cfg, extra)
    return {"order": res.order, "mspe": extra.get("mspe")}


def cmd_experiment(cfg: RunConfig) -> dict:
    from .simlab import SimSpec, run_experiment

    spec = SimSpec(cfg.generator, T=cfg.T, seed=cfg.seed, reps=cfg.reps, burn_in=cfg.burn_in,
                   sigma_scale=cfg.sigma_scale)
    criteria = tuple(filter(None, cfg.criteria.split(",")))
    summ = run_experiment(spec, cfg.fit_config(), n_freq=cfg.freqs, holdout=cfg.holdout,
                          forecast_draws=cfg.draws, criteria=criteria)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    d = summ.to_dict()
    d.pop("wall_time")
    d["spec"] = {"generator": spec.generator, "T": spec.length, "reps": spec.reps, "seed": spec.seed}
    for r in d["per_rep"]:
        r.pop("wall_time", None)
    (out / "summary.json").write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    # table-shaped summaries: order frequencies, ASE, MSPE, timing
    write_csv(out / "order_freq.csv", ["criterion"] + [f"P{p}" for p in range(1, cfg.p_max + 1)],
              ([c] + [float(v) for v in f] for c, f in summ.order_freq.items()))
    write_csv(out / "ase.csv", ["quantity", "mean", "sd"],
              ([k, summ.ase[k], summ.ase_sd[k]] for k in summ.ase))
    if summ.mspe is not None:
        write_csv(out / "mspe.csv", ["generator", "mean", "sd"],
                  [[spec.generator, summ.mspe, summ.mspe_sd if summ.mspe_sd is not None else float("nan")]])
    times = summ.wall_time
    write_csv(out / "timing.csv", ["generator", "reps", "mean_seconds", "total_seconds"],
              [[spec.generator, len(times), float(np.mean(times)) if times else float("nan"), float(np.sum(times))]])
    write_manifest(out, cfg, {"failures": summ.failures})
    return {"reps": summ.reps, "failures": len(summ.failures), "order_freq": summ.order_freq}


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "spectrum": cmd_spectrum,
    "forecast": cmd_forecast,
    "experiment": cmd_experiment,
}


# ---------------------------------------------------------------- parsing


def _ordering(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ordering must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvlattice", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fitting=True):
        sp.add_argument("--config", help="JSON config or manifest file")
        sp.add_argument("--out", "-o", required=True, help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        if fitting:
            sp.add_argument("--p-max", dest="p_max", type=int)
            sp.add_argument("--criterion", choices=("bic", "dic", "waic"))
            sp.add_argument("--grid-min", dest="grid_min", type=float, help="smallest gamma (and delta)")
            sp.add_argument("--grid-max", dest="grid_max", type=float)
            sp.add_argument("--grid-step", dest="grid_step", type=float)
            sp.add_argument("--delta-min", dest="delta_min", type=float, help="separate delta grid")
            sp.add_argument("--delta-max", dest="delta_max", type=float)
            sp.add_argument("--delta-step", dest="delta_step", type=float)
            sp.add_argument("--samples", type=int, help="posterior draws for DIC/WAIC")

    def generator(sp):
        sp.add_argument("--generator", "-g")
        sp.add_argument("--T", type=int)
        sp.add_argument("--burn-in", dest="burn_in", type=int)
        sp.add_argument("--sigma-scale", dest="sigma_scale", type=float)

    sp = sub.add_parser("simulate", help="draw a series from a simulation design")
    common(sp, fitting=False)
    generator(sp)
    sp.add_argument("--rep", type=int, help="replicate index")

    sp = sub.add_parser("fit", help="fit a TV-VAR and select its order")
    sp.add_argument("input", nargs="?")
    common(sp)
    sp.add_argument("--ordering", type=_ordering, help="channel permutation, e.g. 2,1,3")
    sp.add_argument("--all-orderings", dest="all_orderings", action="store_true", default=None)
    sp.add_argument("--parcor", action="store_true", default=None, help="also write PARCOR trajectories")

    sp = sub.add_parser("spectrum", help="time-varying spectra and coherence on a grid")
    common(sp, fitting=False)
    sp.add_argument("--model", help="directory with phi.csv and sigma.csv")
    generator(sp)
    sp.add_argument("--freqs", type=int, help="number of frequencies L")
    sp.add_argument("--time-stride", dest="time_stride", type=int)

    sp = sub.add_parser("forecast", help="h-step forecasts and optional rolling MSPE")
    sp.add_argument("input", nargs="?")
    common(sp)
    sp.add_argument("--ordering", type=_ordering)
    sp.add_argument("--h", type=int)
    sp.add_argument("--draws", type=int, help="PARCOR draws J")
    sp.add_argument("--holdout", type=int)
    sp.add_argument("--mode", choices=("extend", "refit"))

    sp = sub.add_parser("experiment", help="replicate study over a simulation design")
    common(sp)
    generator(sp)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--freqs", type=int)
    sp.add_argument("--holdout", type=int)
    sp.add_argument("--draws", type=int)
    sp.add_argument("--criteria", help="extra criteria to tabulate, e.g. dic,waic")
    return p


def _load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data.get("config", data)


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        file_vals = _load_config_file(args.config)
        unknown = set(file_vals) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        file_vals.pop("command", None)
        values.update({k: v for k, v in file_vals.items() if k not in ("out",)})
    if environ.get(SEED_ENV):
        try:
            values["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    for key, val in vars(args).items():
        if key in RunConfig.__dataclass_fields__ and val is not None:
            values[key] = val
    values["command"] = args.command
    values = {k: v for k, v in values.items() if k in RunConfig.__dataclass_fields__}
    if values.get("ordering") is not None:
        values["ordering"] = tuple(int(v) for v in values["ordering"])
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def _classify(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, InsufficientDataError, DimensionError, FileNotFoundError)):
        return EXIT_DATA
    if isinstance(exc, (FilterDivergenceError, GridSearchError, SingularityError, NotPositiveDefiniteError,
                        ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    if isinstance(exc, DomainError):
        # configuration values rejected by a module
        return EXIT_CONFIG
    return EXIT_NUMERIC


def _error_record(exc: BaseException, code: int, command: str | None) -> str:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code, "command": command,
           "module": type(exc).__module__}
    for attr in ("row", "column", "path", "t", "omega", "quantity"):
        v = getattr(exc, attr, None)
        if v is not None:
            rec[attr] = v
    return json.dumps(rec, sort_keys=True, default=str)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        t0 = time.perf_counter()
        info = COMMANDS[cfg.command](cfg)
        log.info("%s finished in %.2f s", cfg.command, time.perf_counter() - t0)
    except Exception as exc:  # mapped to an exit code and a JSON record
        code = _classify(exc)
        print(_error_record(exc, code, args.command), file=sys.stderr)
        return code
    print(json.dumps(info, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
