"""Interlaced periodic representation of a TV-VAR and the LDL transforms.

A ``K``-channel series ``x`` of length ``T`` is stored as a ``(T, K)`` array.
Interlacing stacks it one channel at a time, ``y[k + t*K] = x[t, k]`` (0-based),
which for a C-ordered array is simply ``x.ravel()``.

In the periodic AR form, position ``n`` of channel ``k`` regresses on the
previous ``M_k = K*P + k - 1`` interlaced values (1-based ``k``).  Lags
``1..k-1`` are contemporaneous channels, lag ``p*K + k - j`` is channel ``j``
at ``t - p``.  Coefficients are kept channel-major: ``a[k]`` has shape
``(T, M_k)`` and column ``m - 1`` holds lag ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, NotPositiveDefiniteError

__all__ = [
    "PeriodicCoefficients",
    "TvVarModel",
    "as_series",
    "assemble_tvvar",
    "channel_order",
    "decompose_tvvar",
    "deinterlace",
    "interlace",
    "ldl_decompose",
]


def as_series(x) -> np.ndarray:
    """Validate a ``(T, K)`` series and return it as a float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a (T, K) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("series contains non-finite values")
    return arr


def channel_order(K: int, P: int, k: int) -> int:
    """Periodic AR order ``K*P + k - 1`` of 1-based channel ``k``."""
    return K * P + k - 1


def interlace(x) -> np.ndarray:
    """Interlace a ``(T, K)`` series into a length ``K*T`` vector."""
    return as_series(x).reshape(-1).copy()


def deinterlace(y, K: int) -> np.ndarray:
    """Inverse of :func:`interlace`."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or K < 1 or y.size % K != 0 or y.size == 0:
        raise DimensionError(f"length {y.size} is not a positive multiple of K={K}")
    return y.reshape(-1, K).copy()


def ldl_decompose(sigma):
    """Modified Cholesky factorisation ``sigma = L @ diag(w) @ L.T``.

    Works on a single ``(K, K)`` matrix or a stack ``(..., K, K)``.

    Returns
    -------
    L : ndarray
        Unit lower-triangular factor(s).
    w : ndarray
        Positive diagonal(s), shape ``(..., K)``.
    """
    s = np.asarray(sigma, dtype=float)
    if s.ndim < 2 or s.shape[-1] != s.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {s.shape}")
    K = s.shape[-1]
    L = np.zeros_like(s)
    w = np.zeros(s.shape[:-1])
    for j in range(K):
        dj = s[..., j, j] - np.einsum("...i,...i,...i->...", L[..., j, :j], L[..., j, :j], w[..., :j])
        if np.any(~(dj > 0)):
            raise NotPositiveDefiniteError(f"non-positive pivot in column {j}")
        w[..., j] = dj
        L[..., j, j] = 1.0
        if j + 1 < K:
            off = s[..., j + 1 :, j] - np.einsum(
                "...ri,...i,...i->...r", L[..., j + 1 :, :j], L[..., j, :j], w[..., :j]
            )
            L[..., j + 1 :, j] = off / dj[..., None]
    return L, w


@dataclass(frozen=True)
class PeriodicCoefficients:
    """Periodic TV-AR coefficients and innovation variances.

    ``a[k]`` is ``(T, M_k)`` for 0-based channel ``k``; ``w`` is ``(T, K)``.
    Leading batch dimensions before ``T`` are allowed on both.
    """

    a: tuple
    w: np.ndarray

    @property
    def K(self) -> int:
        return len(self.a)

    @property
    def T(self) -> int:
        return self.w.shape[-2]

    def order(self) -> int:
        """Largest VAR order the stored lags support."""
        return (self.a[0].shape[-1]) // self.K


@dataclass(frozen=True)
class TvVarModel:
    """Time-varying VAR(P) parameters.

    Attributes
    ----------
    phi : ndarray, shape (T, P, K, K)
        ``phi[t, p-1]`` is the lag-``p`` coefficient matrix at time ``t``.
    sigma : ndarray, shape (T, K, K)
    L : ndarray, shape (T, K, K)
        Unit lower-triangular LDL factor of ``sigma``.
    w : ndarray, shape (T, K)
        Diagonal of the LDL factor.
    """

    phi: np.ndarray
    sigma: np.ndarray
    L: np.ndarray
    w: np.ndarray

    @property
    def T(self) -> int:
        return self.phi.shape[0]

    @property
    def P(self) -> int:
        return self.phi.shape[1]

    @property
    def K(self) -> int:
        return self.phi.shape[-1]

    @property
    def W(self) -> np.ndarray:
        """Diagonal LDL factor as full matrices ``(T, K, K)``."""
        return self.w[..., :, None] * np.eye(self.K)

    @classmethod
    def from_phi_sigma(cls, phi, sigma) -> TvVarModel:
        phi = np.asarray(phi, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        if phi.ndim != 4 or phi.shape[-1] != phi.shape[-2]:
            raise DimensionError(f"phi must be (T, P, K, K), got {phi.shape}")
        if sigma.shape != (phi.shape[0], phi.shape[2], phi.shape[3]):
            raise DimensionError(f"sigma shape {sigma.shape} does not match phi {phi.shape}")
        L, w = ldl_decompose(sigma)
        return cls(phi=phi, sigma=sigma, L=L, w=w)

    def companion_radius(self) -> np.ndarray:
        """Spectral radius of the companion matrix at each time."""
        T, P, K = self.T, self.P, self.K
        comp = np.zeros((T, K * P, K * P))
        comp[:, :K, :] = self.phi.transpose(0, 2, 1, 3).reshape(T, K, K * P)
        if P > 1:
            comp[:, K:, :-K] = np.eye(K * (P - 1))
        return np.max(np.abs(np.linalg.eigvals(comp)), axis=-1)


def _unit_lower_inverse(linv: np.ndarray) -> np.ndarray:
    # forward substitution on stacked unit lower-triangular matrices
    K = linv.shape[-1]
    out = np.zeros_like(linv)
    for j in range(K):
        out[..., j, j] = 1.0
        for i in range(j + 1, K):
            out[..., i, j] = -np.einsum("...r,...r->...", linv[..., i, j:i], out[..., j:i, j])
    return out


def _assemble_arrays(a, w, P: int):
    """Vectorised core of :func:`assemble_tvvar` (batch dims allowed)."""
    K = len(a)
    lead = a[0].shape[:-1]
    linv = np.zeros(lead + (K, K))
    A = np.zeros(lead + (P, K, K))
    for k in range(K):
        need = K * P + k
        if a[k].shape[-1] < need:
            raise DimensionError(f"channel {k + 1} stores {a[k].shape[-1]} lags, order {P} needs {need}")
        linv[..., k, k] = 1.0
        for j in range(k):
            linv[..., k, j] = -a[k][..., k - j - 1]
        for p in range(1, P + 1):
            for j in range(K):
                A[..., p - 1, k, j] = a[k][..., p * K + k - j - 1]
    L = _unit_lower_inverse(linv)
    phi = np.einsum("...ij,...pjk->...pik", L, A)
    sigma = np.einsum("...ij,...j,...kj->...ik", L, w, L)
    sigma = 0.5 * (sigma + np.swapaxes(sigma, -1, -2))
    return phi, sigma, L


def assemble_tvvar(coeffs: PeriodicCoefficients, P: int) -> TvVarModel:
    """Map periodic coefficients to TV-VAR(P) parameters.

    ``L_t^{-1}[k, j] = -a_{k-j}`` below the diagonal, ``A_p[k, j] = a_{pK+k-j}``,
    ``phi_p = L A_p`` and ``sigma = L W L'``.
    """
    w = np.asarray(coeffs.w, dtype=float)
    if np.any(~(w > 0)):
        raise DomainError("innovation variances must be strictly positive")
    phi, sigma, L = _assemble_arrays(coeffs.a, w, P)
    return TvVarModel(phi=phi, sigma=sigma, L=L, w=w.copy())


def decompose_tvvar(model: TvVarModel) -> PeriodicCoefficients:
    """Inverse of :func:`assemble_tvvar`: recover periodic coefficients."""
    T, P, K = model.T, model.P, model.K
    linv = _unit_lower_inverse(model.L)
    A = np.einsum("tij,tpjk->tpik", linv, model.phi)
    a = []
    for k in range(K):
        ak = np.zeros((T, K * P + k))
        for j in range(k):
            ak[:, k - j - 1] = -linv[:, k, j]
        for p in range(1, P + 1):
            for j in range(K):
                ak[:, p * K + k - j - 1] = A[:, p - 1, k, j]
        a.append(ak)
    return PeriodicCoefficients(a=tuple(a), w=model.w.copy())
