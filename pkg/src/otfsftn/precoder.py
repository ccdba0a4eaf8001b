"""Whitening, subchannel decomposition, water-filling and the precoder pair.

The chain: eigendecompose the DD-domain noise shape G_eq = V diag(lam) V^H,
whiten the channel into B = diag(lam)^{-1/2} V^H H_eq, eigendecompose
B^H B = U diag(xi) U^H, read the per-direction energy weights phi from
U^H G_eq U, water-fill the powers gamma under sum(gamma*phi) = MN, and
assemble the precoder P = U diag(gamma)^{1/2} together with the receive
weights D = U^H B^H diag(lam)^{-1/2} V^H.  D H_eq P is then diagonal and
D whitens the correlated noise, so the link becomes a bank of parallel
scalar Gaussian subchannels with gains xi and powers gamma.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .pulse import EIG_FLOOR_REL
from .transforms import GridShape

log = logging.getLogger(__name__)

# subchannels whose whitened gain falls below this fraction of the largest
# are excluded from allocation (guards 1/(xi*snr) against blowup)
XI_ACTIVE_REL = 1e-12


@dataclass(eq=False)
class PrecoderSolution:
    """State of the diagonalizing transceiver chain for one (channel, SNR)."""

    V: np.ndarray | None = None
    lam: np.ndarray | None = None
    B: np.ndarray | None = None
    U: np.ndarray | None = None
    xi: np.ndarray | None = None
    phi: np.ndarray | None = None
    gamma: np.ndarray | None = None
    water_level: float | None = None
    P_mat: np.ndarray | None = None
    D: np.ndarray | None = None
    floored: int = 0
    floor_applied: bool = True


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def hermitian_evd_desc(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    The basis is made reproducible: each eigenvector is phase-rotated so its
    first non-negligible component is real positive, and columns inside a
    degenerate eigenvalue group are ordered by a lexicographic key.
    Returns (eigvecs, eigvals) with a = eigvecs @ diag(eigvals) @ eigvecs^H.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    herm_err = float(np.abs(a - a.conj().T).max())
    if herm_err > 1e-10 * scale:
        raise ValueError(f"matrix is not Hermitian: max asymmetry {herm_err:.3e}")
    w, v = np.linalg.eigh(_symmetrize(a))
    w = w[::-1].copy()
    v = v[:, ::-1].copy()

    # phase-normalize: first component with |.| > 1e-8 made real positive
    lead = np.argmax(np.abs(v) > 1e-8, axis=0)
    pivots = v[lead, np.arange(v.shape[1])]
    v *= (np.conj(pivots) / np.abs(pivots))[None, :]

    # deterministic ordering inside degenerate groups: leading-component
    # index first (keeps standard bases in natural order), full vector next
    n = w.size
    tie = 1e-12 * max(1.0, float(np.abs(w).max()))
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(w[j + 1] - w[i]) <= tie:
            j += 1
        if j > i:
            keys = [
                (
                    int(lead[c]),
                    np.round(np.concatenate([v[:, c].real, v[:, c].imag]), 9).tobytes(),
                )
                for c in range(i, j + 1)
            ]
            order = sorted(range(j + 1 - i), key=keys.__getitem__)
            v[:, i : j + 1] = v[:, [i + o for o in order]]
        i = j + 1
    return v, w


def derive_subchannels(
    h_eq: np.ndarray,
    g_eq: np.ndarray,
    shape: GridShape,
    eig_floor_rel: float = EIG_FLOOR_REL,
) -> PrecoderSolution:
    """Whiten the DD-domain channel and decompose it into scalar subchannels.

    Fills V, lam (floored), B, U, xi and phi of the solution.  A positive
    eig_floor_rel clamps near-zero eigenvalues of G_eq at that fraction of
    the largest one before inversion; floored counts how many were clamped.
    """
    mn = shape.MN
    h_eq = np.asarray(h_eq)
    g_eq = np.asarray(g_eq)
    if h_eq.shape != (mn, mn) or g_eq.shape != (mn, mn):
        raise ValueError(
            f"expected {mn}x{mn} matrices, got H_eq {h_eq.shape} and G_eq {g_eq.shape}"
        )
    v, lam_raw = hermitian_evd_desc(g_eq)
    if lam_raw[0] <= 0.0:
        raise ValueError("noise-shape matrix has no positive eigenvalue")
    floored = 0
    lam = lam_raw
    if eig_floor_rel > 0.0:
        floor = eig_floor_rel * lam_raw[0]
        floored = int(np.count_nonzero(lam_raw < floor))
        lam = np.maximum(lam_raw, floor)
        if floored:
            log.warning("floored %d eigenvalue(s) of the noise shape at %.3e", floored, floor)
    elif lam_raw[-1] <= 0.0:
        raise ValueError("noise shape is singular and flooring is disabled")

    b = (v.conj().T @ h_eq) / np.sqrt(lam)[:, None]
    u, xi = hermitian_evd_desc(_symmetrize(b.conj().T @ b))
    xi = np.maximum(xi, 0.0)

    t = g_eq @ u
    phi_c = np.einsum("in,in->n", u.conj(), t)
    imag_max = float(np.abs(phi_c.imag).max())
    if imag_max > 1e-10 * max(1.0, float(np.abs(phi_c.real).max())):
        raise AssertionError(f"energy weights are not real: max imag {imag_max:.3e}")
    return PrecoderSolution(
        V=v, lam=lam, B=b, U=u, xi=xi, phi=phi_c.real.copy(),
        floored=floored, floor_applied=eig_floor_rel > 0.0,
    )


def waterfill(
    xi: np.ndarray,
    phi: np.ndarray,
    snr: float,
    budget: float,
) -> tuple[np.ndarray, float]:
    """Water-filling powers gamma under the weighted constraint sum(gamma*phi) = budget.

    gamma[n] = max(mu/phi[n] - 1/(xi[n]*snr), 0) with the water level mu
    found by monotone bisection and sharpened by an exact solve on the
    resulting active set.  Subchannels with xi below 1e-12 of the largest
    are forced inactive.
    """
    xi = np.asarray(xi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if xi.shape != phi.shape:
        raise ValueError(f"xi and phi must match, got {xi.shape} vs {phi.shape}")
    if np.any(xi < 0.0):
        raise ValueError("subchannel gains must be nonnegative")
    if np.any(phi <= 0.0):
        raise ValueError("energy weights must be positive")
    if snr <= 0.0 or budget <= 0.0:
        raise ValueError("snr and budget must be positive")

    usable = xi > XI_ACTIVE_REL * xi.max() if xi.max() > 0.0 else np.zeros_like(xi, bool)
    if not usable.any():
        raise ValueError("no usable subchannels: all gains are numerically zero")
    thresh = np.full_like(phi, np.inf)
    thresh[usable] = phi[usable] / (xi[usable] * snr)  # mu at which subchannel n activates

    def filled(mu: float) -> float:
        return float(np.sum(np.maximum(mu - thresh[usable], 0.0)))

    lo = 0.0
    hi = (budget + float(np.sum(thresh[usable]))) / float(phi.min())
    while filled(hi) < budget:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if filled(mid) < budget:
            lo = mid
        else:
            hi = mid

    # exact water level on the active set selected by the bisection
    active = usable & (thresh < hi)
    while True:
        mu = (budget + float(np.sum(thresh[active]))) / int(np.count_nonzero(active))
        gamma = np.zeros_like(phi)
        gamma[active] = mu / phi[active] - 1.0 / (xi[active] * snr)
        if gamma.min() >= 0.0:
            return gamma, float(mu)
        # bisection interval straddled an activation point; drop and re-solve
        active &= gamma > 0.0


def uniform_gamma(phi: np.ndarray, budget: float) -> np.ndarray:
    """Equal powers rescaled to meet sum(gamma*phi) = budget; the no-PA case."""
    phi = np.asarray(phi, dtype=float)
    return np.full_like(phi, budget / float(phi.sum()))


def finalize(sol: PrecoderSolution) -> PrecoderSolution:
    """Fill the precoder P = U diag(gamma)^{1/2} and receive weights D."""
    for name in ("V", "lam", "B", "U", "xi", "gamma"):
        if getattr(sol, name) is None:
            raise ValueError(f"solution field '{name}' must be filled before finalize")
    sol.P_mat = sol.U * np.sqrt(sol.gamma)[None, :]
    sol.D = sol.U.conj().T @ ((sol.B.conj().T / np.sqrt(sol.lam)[None, :]) @ sol.V.conj().T)
    return sol


def solve_precoder(
    h_eq: np.ndarray,
    g_eq: np.ndarray,
    shape: GridShape,
    snr: float,
    power_alloc: str = "waterfill",
) -> PrecoderSolution:
    """Full chain from (H_eq, G_eq) to a finalized solution."""
    sol = derive_subchannels(h_eq, g_eq, shape)
    if power_alloc == "waterfill":
        sol.gamma, sol.water_level = waterfill(sol.xi, sol.phi, snr, float(shape.MN))
    elif power_alloc == "uniform":
        sol.gamma = uniform_gamma(sol.phi, float(shape.MN))
        sol.water_level = None
    else:
        raise ValueError(f"unknown power_alloc '{power_alloc}'")
    return finalize(sol)
