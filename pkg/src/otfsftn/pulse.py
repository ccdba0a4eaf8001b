"""Root-raised-cosine pulse shaping and the symbol-rate correlation matrix.

With transmit and receive filters equal to the same unit-energy RRC pulse,
the matched-filter cascade is the raised cosine g(t).  Sampling g at the
compressed interval T_f = alpha*T0 yields a symmetric Toeplitz matrix G that
is simultaneously the intersymbol-interference operator and the shape of the
matched-filter noise covariance.  Its delay-Doppler image G_eq shares the
same spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transforms import GridShape, conjugate_by_dd

# Relative floor applied to near-zero eigenvalues of G / G_eq before any
# inversion downstream; the matrix is near-singular at alpha = 1/(1+beta).
EIG_FLOOR_REL = 1e-10

# Half-width around a removable singularity (in units of T0) that switches
# evaluation to the analytic limit.
_SING_TOL = 1e-8


@dataclass(frozen=True)
class PulseSpec:
    """Roll-off, Nyquist interval and oracle-only truncation span of the pulse."""

    beta: float
    T0: float = 1.0
    span: float = 32.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"roll-off must lie in [0, 1], got {self.beta}")
        if self.span < 1.0:
            raise ValueError(f"span must be >= 1 symbol interval, got {self.span}")
        if self.T0 <= 0.0:
            raise ValueError(f"T0 must be positive, got {self.T0}")

    def admissible_alpha(self) -> float:
        """Smallest packing ratio with a well-conditioned correlation matrix."""
        return 1.0 / (1.0 + self.beta)


@dataclass(eq=False)
class GramSet:
    """Symbol correlation matrix G, its first row, and its DD-domain image."""

    first_row: np.ndarray
    G: np.ndarray
    G_eq: np.ndarray | None = None
    # cached colored-noise factor V*sqrt(lambda), filled lazily by link.colored_noise
    _noise_factor: np.ndarray | None = field(default=None, repr=False)


def rc_autocorr(t: float | np.ndarray, spec: PulseSpec) -> float | np.ndarray:
    """Raised-cosine matched-filter response g(t) of the unit-energy RRC pulse.

    Evaluated in closed form; the removable singularity at |t| = T0/(2*beta)
    uses its analytic limit.  g(0) = 1 and g vanishes at nonzero integer
    multiples of T0.
    """
    x = np.asarray(t, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x) / spec.T0
    if spec.beta == 0.0:
        out = np.sinc(x)
    else:
        out = np.empty_like(x)
        sing = np.abs(np.abs(x) - 1.0 / (2.0 * spec.beta)) < _SING_TOL
        out[sing] = np.sinc(1.0 / (2.0 * spec.beta)) * np.pi / 4.0
        xr = x[~sing]
        out[~sing] = (
            np.sinc(xr) * np.cos(np.pi * spec.beta * xr) / (1.0 - (2.0 * spec.beta * xr) ** 2)
        )
    return out.item() if scalar else out


def rrc_impulse(t: float | np.ndarray, spec: PulseSpec) -> float | np.ndarray:
    """Unit-energy root-raised-cosine impulse response in closed form.

    The singular points t = 0 and |t| = T0/(4*beta) are evaluated by their
    analytic limits.  Used by the waveform-level oracle and the colored-noise
    validation, not by the matrix model.
    """
    x = np.asarray(t, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x) / spec.T0
    root_t0 = np.sqrt(spec.T0)
    if spec.beta == 0.0:
        out = np.sinc(x) / root_t0
        return out.item() if scalar else out
    out = np.empty_like(x)
    b = spec.beta
    zero = np.abs(x) < _SING_TOL
    sing = np.abs(np.abs(x) - 1.0 / (4.0 * b)) < _SING_TOL
    rest = ~(zero | sing)
    out[zero] = (1.0 - b + 4.0 * b / np.pi) / root_t0
    out[sing] = (b / (np.sqrt(2.0) * root_t0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * b))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * b))
    )
    xr = x[rest]
    num = np.sin(np.pi * xr * (1.0 - b)) + 4.0 * b * xr * np.cos(np.pi * xr * (1.0 + b))
    den = np.pi * xr * (1.0 - (4.0 * b * xr) ** 2)
    out[rest] = num / den / root_t0
    return out.item() if scalar else out


def check_alpha(alpha: float, spec: PulseSpec) -> None:
    """Reject packing ratios outside [1/(1+beta), 1]."""
    lo = spec.admissible_alpha()
    if not lo <= alpha <= 1.0:
        raise ValueError(
            f"packing ratio {alpha} outside admissible range "
            f"[1/(1+beta) = {lo:.6g}, 1]"
        )


def gram_matrix(shape: GridShape, alpha: float, spec: PulseSpec) -> GramSet:
    """Build the MN x MN symbol correlation matrix G(k, m) = g((k-m)*T_f).

    T_f = alpha*T0.  At alpha = 1 the analytic zero crossings make G the
    identity exactly.
    """
    check_alpha(alpha, spec)
    lags = np.arange(shape.MN) * alpha * spec.T0
    first_row = np.asarray(rc_autocorr(lags, spec))
    if alpha == 1.0:
        # zero crossings are exact in the closed form; pin them bit-exactly
        first_row = np.zeros(shape.MN)
        first_row[0] = 1.0
    idx = np.arange(shape.MN)
    g = first_row[np.abs(np.subtract.outer(idx, idx))]
    return GramSet(first_row=first_row, G=g)


def gram_dd(gram: GramSet, shape: GridShape) -> GramSet:
    """Fill the delay-Doppler image G_eq of G; result symmetrized Hermitian."""
    g_eq = conjugate_by_dd(gram.G.astype(complex), shape)
    g_eq = 0.5 * (g_eq + g_eq.conj().T)
    return GramSet(first_row=gram.first_row, G=gram.G, G_eq=g_eq)
