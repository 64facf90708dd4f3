"""Time-varying spectral matrices, squared coherence and ASE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, SingularityError
from .periodic import TvVarModel

_COND_MAX = 1e12

__all__ = ["AseResult", "SpectralField", "ase", "default_freqs", "spectral_field", "transfer_matrix"]


def default_freqs(L: int = 100) -> np.ndarray:
    """``omega_l = l / (2L)`` for ``l = 1..L``, in cycles per sample."""
    if L < 1:
        raise DomainError("L must be >= 1")
    return np.arange(1, L + 1) / (2.0 * L)


@dataclass(frozen=True)
class SpectralField:
    """Spectral matrices ``g[t, l]`` (``(T, L, K, K)`` complex) on ``freqs``.

    ``times`` holds the 0-based model times the rows refer to.
    """

    g: np.ndarray
    freqs: np.ndarray
    times: np.ndarray

    @property
    def K(self) -> int:
        return self.g.shape[-1]

    def spectrum(self, i: int) -> np.ndarray:
        """Auto-spectrum of 0-based channel ``i`` as a real ``(T, L)`` array."""
        return self.g[..., i, i].real

    @property
    def coherence(self) -> np.ndarray:
        """Squared coherence ``|g_ij|^2 / (g_ii g_jj)``, shape ``(T, L, K, K)``."""
        d = np.diagonal(self.g, axis1=-2, axis2=-1).real
        return np.abs(self.g) ** 2 / (d[..., :, None] * d[..., None, :])


def transfer_matrix(phi: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """``I - sum_p phi_p exp(-2 pi i p omega)`` for every (t, omega)."""
    _, P, K, _ = phi.shape
    p = np.arange(1, P + 1)
    e = np.exp(-2j * np.pi * np.outer(freqs, p))  # (L, P)
    return np.eye(K) - np.einsum("lp,tpij->tlij", e, phi)


def spectral_field(model: TvVarModel, L: int = 100, freqs=None, times=None, chunk: int = 256) -> SpectralField:
    """Evaluate ``g(t, w) = Psi^{-1} Sigma_t Psi^{-*}`` on a time-frequency grid.

    Parameters
    ----------
    model : TvVarModel
    L : int
        Number of frequencies when ``freqs`` is not given.
    times : array_like of int, optional
        Subset of 0-based times; all times by default.
    chunk : int
        Times processed per block, bounding peak memory.

    Raises
    ------
    SingularityError
        If ``Psi(t, w)`` is singular.
    """
    freqs = default_freqs(L) if freqs is None else np.asarray(freqs, dtype=float)
    times = np.arange(model.T) if times is None else np.asarray(times, dtype=int)
    K = model.K
    out = np.empty((times.size, freqs.size, K, K), dtype=complex)
    eye = np.eye(K)
    for start in range(0, times.size, chunk):
        sel = times[start : start + chunk]
        psi = transfer_matrix(model.phi[sel], freqs)
        try:
            h = np.linalg.solve(psi, eye)
        except np.linalg.LinAlgError:
            h = np.full_like(psi, np.nan)
        # rounding can leave an exactly singular transfer matrix with a finite
        # but meaningless inverse; measure it against the size of the summands
        scale = 1.0 + np.abs(model.phi[sel]).sum(axis=(1, 2)).max(axis=-1)
        cond = scale[:, None] * np.abs(h).sum(axis=-2).max(axis=-1)
        bad = ~(cond < _COND_MAX)
        if bad.any():
            ti, li = np.argwhere(bad)[0]
            raise SingularityError(sel[ti], freqs[li])
        g = h @ model.sigma[sel][:, None] @ np.conj(np.swapaxes(h, -1, -2))
        out[start : start + sel.size] = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
    return SpectralField(g=out, freqs=freqs, times=times)


@dataclass(frozen=True)
class AseResult:
    """ASE of each log auto-spectrum and of each squared coherence (``i < j``)."""

    spectra: np.ndarray
    coherence: np.ndarray

    def as_dict(self) -> dict:
        K = self.spectra.size
        sep = "" if K < 10 else "_"
        out = {f"g{i + 1}{sep}{i + 1}": float(self.spectra[i]) for i in range(K)}
        for i in range(K):
            for j in range(i + 1, K):
                out[f"rho2_{i + 1}{sep}{j + 1}"] = float(self.coherence[i, j])
        return out


def ase(est: SpectralField, truth: SpectralField) -> AseResult:
    """Average squared error over the grid.

    Log scale for auto-spectra, raw scale for squared coherence.
    """
    if est.g.shape != truth.g.shape:
        raise DimensionError(f"grids differ: {est.g.shape} vs {truth.g.shape}")
    d_est = np.diagonal(est.g, axis1=-2, axis2=-1).real
    d_tru = np.diagonal(truth.g, axis1=-2, axis2=-1).real
    if np.any(d_est <= 0) or np.any(d_tru <= 0):
        raise DomainError("auto-spectra must be strictly positive")
    spectra = np.mean((np.log(d_est) - np.log(d_tru)) ** 2, axis=(0, 1))
    coh = np.mean((est.coherence - truth.coherence) ** 2, axis=(0, 1))
    return AseResult(spectra=spectra, coherence=coh)
