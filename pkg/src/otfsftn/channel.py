"""Sparse delay-Doppler channels and their dense matrix images.

Channels are lists of paths, each a (complex gain, integer delay tap,
integer + fractional Doppler tap) tuple.  The EVA profile maps the 3GPP
excess-delay table onto the grid's tap resolution with Jakes-model Doppler
per tap; the synthetic profile draws distinct (delay, Doppler) pairs with
unit average total power.  From a path list the dense effective matrix H
combines channel dispersion with the pulse's matched-filter response, and
H_eq is its delay-Doppler image.

A brute-force continuous-time simulator (oversampled pulse train, per-path
delay-and-Doppler, discrete matched filtering) serves as the independent
oracle for the matrix model.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .config import EVA_DELAYS_NS, EVA_POWERS_DB, SystemConfig
from .pulse import PulseSpec, check_alpha, rc_autocorr, rrc_impulse
from .transforms import GridShape, conjugate_by_dd, dd_to_time


@dataclass(frozen=True)
class DdPath:
    """One propagation path in delay-Doppler tap coordinates."""

    gain: complex
    delay_tap: int
    doppler_int: int
    doppler_frac: float

    def __post_init__(self) -> None:
        if not -0.5 < self.doppler_frac <= 0.5:
            raise ValueError(f"fractional Doppler must lie in (-1/2, 1/2], got {self.doppler_frac}")
        if self.delay_tap < 0:
            raise ValueError(f"delay tap must be >= 0, got {self.delay_tap}")

    @property
    def doppler_tap(self) -> float:
        return self.doppler_int + self.doppler_frac


@dataclass(frozen=True)
class DdChannel:
    """A sparse delay-Doppler channel realization."""

    paths: tuple[DdPath, ...]
    nu_max_hz: float | None = None
    tau_max_s: float | None = None
    k_max: int | None = None
    jakes_angles: tuple[float, ...] | None = None

    @property
    def num_paths(self) -> int:
        return len(self.paths)

    def max_delay_tap(self) -> int:
        return max(p.delay_tap for p in self.paths)


@dataclass(frozen=True)
class EffectiveChannel:
    """Dense time-domain matrix H and its delay-Doppler image H_eq."""

    H: np.ndarray
    H_eq: np.ndarray
    cp_mode: str


def identity_channel() -> DdChannel:
    """Single unit-gain path at the origin; the AWGN-equivalent channel."""
    return DdChannel(paths=(DdPath(1.0 + 0.0j, 0, 0, 0.0),), nu_max_hz=0.0, tau_max_s=0.0, k_max=0)


def eva_profile() -> tuple[np.ndarray, np.ndarray]:
    """EVA delays (seconds) and mean path powers normalized to sum to 1."""
    delays = np.asarray(EVA_DELAYS_NS) * 1e-9
    powers = 10.0 ** (np.asarray(EVA_POWERS_DB) / 10.0)
    return delays, powers / powers.sum()


def _split_doppler(tap: float) -> tuple[int, float]:
    """Split a real Doppler tap into integer part and fraction in (-1/2, 1/2]."""
    k = int(np.ceil(tap - 0.5))
    return k, tap - k


def eva_channel(nu_max_hz: float, cfg: SystemConfig, rng: np.random.Generator) -> DdChannel:
    """Draw one EVA realization on the grid implied by cfg.

    Delays quantize to the tap resolution 1/(M*delta_f); per-tap gains are
    circularly-symmetric Gaussian with the profile's mean powers; per-tap
    Doppler is nu_max*cos(theta) with theta uniform on [-pi, pi].
    """
    if nu_max_hz > cfg.delta_f_hz / 2.0:
        raise ValueError(
            f"nu_max {nu_max_hz} Hz exceeds delta_f/2 = {cfg.delta_f_hz / 2.0:.6g} Hz"
        )
    delays, powers = eva_profile()
    taps = np.rint(delays * cfg.M * cfg.delta_f_hz).astype(int)
    cp = cfg.effective_cp_len()
    if taps.max() >= cp:
        raise ValueError(f"EVA delay tap {taps.max()} exceeds CP length {cp} - 1")

    gains = rng.standard_normal(len(taps)) + 1j * rng.standard_normal(len(taps))
    gains *= np.sqrt(powers / 2.0)
    frame_s = cfg.N / cfg.delta_f_hz  # N*T, the Doppler tap resolution is its inverse

    # redraw angles on the (measure-zero) event of coinciding (delay, Doppler)
    # pairs; at nu_max = 0 every Doppler collapses to zero and taps sharing a
    # delay are genuinely indistinguishable, so no distinctness to enforce
    for _ in range(100):
        angles = rng.uniform(-np.pi, np.pi, size=len(taps))
        doppler_taps = nu_max_hz * np.cos(angles) * frame_s
        keys = {(int(l), float(d)) for l, d in zip(taps, doppler_taps)}
        if nu_max_hz == 0.0 or len(keys) == len(taps):
            break
    else:
        raise RuntimeError("could not draw distinct (delay, Doppler) pairs")

    paths = []
    for g, l, d in zip(gains, taps, doppler_taps):
        k, kappa = _split_doppler(float(d))
        paths.append(DdPath(complex(g), int(l), k, kappa))
    return DdChannel(
        paths=tuple(paths),
        nu_max_hz=nu_max_hz,
        tau_max_s=float(delays.max()),
        k_max=int(max(abs(p.doppler_int) for p in paths)),
        jakes_angles=tuple(float(a) for a in angles),
    )


def synthetic_channel(
    num_paths: int,
    l_max: int,
    k_max: int,
    frac_doppler: bool,
    rng: np.random.Generator,
) -> DdChannel:
    """Draw num_paths paths with distinct (delay, Doppler) tap pairs.

    Delay taps are uniform on {0..l_max}, integer Doppler taps uniform on
    {-k_max..k_max}, gains i.i.d. complex Gaussian with variance 1/num_paths.
    """
    if num_paths < 1:
        raise ValueError(f"num_paths must be >= 1, got {num_paths}")
    pairs = (l_max + 1) * (2 * k_max + 1)
    if num_paths > pairs:
        raise ValueError(
            f"cannot place {num_paths} paths on {pairs} distinct (delay, Doppler) pairs"
        )
    flat = rng.choice(pairs, size=num_paths, replace=False)
    delay = flat // (2 * k_max + 1)
    dopp = flat % (2 * k_max + 1) - k_max
    gains = (rng.standard_normal(num_paths) + 1j * rng.standard_normal(num_paths)) * np.sqrt(
        1.0 / (2.0 * num_paths)
    )
    if frac_doppler:
        # uniform on (-1/2, 1/2]
        kappa = 0.5 - rng.uniform(0.0, 1.0, size=num_paths)
    else:
        kappa = np.zeros(num_paths)
    paths = tuple(
        DdPath(complex(g), int(l), int(k), float(f))
        for g, l, k, f in zip(gains, delay, dopp, kappa)
    )
    return DdChannel(paths=paths, k_max=k_max)


def channel_for_config(cfg: SystemConfig, rng: np.random.Generator) -> DdChannel:
    """Draw one realization of the configured channel profile."""
    ch = cfg.channel
    if ch.profile == "identity":
        return identity_channel()
    if ch.profile == "eva":
        return eva_channel(ch.nu_max_hz, cfg, rng)
    return synthetic_channel(ch.num_paths, ch.l_max, ch.k_max, ch.frac_doppler, rng)


def effective_channel(
    chan: DdChannel,
    pulse: PulseSpec,
    cfg: SystemConfig,
    cp_mode: str | None = None,
) -> EffectiveChannel:
    """Dense MN x MN effective channel for the configured packing ratio.

    Entry (k, m) sums h_p * exp(2j*pi*(k_p+kappa_p)*(k-l_p)/MN) * g((k-m-l_p)*T_f)
    over paths.  In circular mode each of the last cp_len symbols additionally
    contributes its cyclic-prefix image at position m - MN, which is how the
    transmitted prefix makes the dispersive response wrap around the frame.
    In literal mode the formula applies verbatim with no wraparound.
    """
    mode = cfg.cp_mode if cp_mode is None else cp_mode
    if mode not in ("literal", "circular"):
        raise ValueError(f"cp_mode must be 'literal' or 'circular', got '{mode}'")
    alpha = cfg.alpha
    check_alpha(alpha, pulse)
    shape = GridShape(cfg.M, cfg.N)
    mn = shape.MN
    cp = cfg.effective_cp_len()
    if chan.max_delay_tap() >= cp:
        raise ValueError(f"channel delay tap {chan.max_delay_tap()} exceeds CP length {cp} - 1")

    k = np.arange(mn)
    diff = k[:, None] - k[None, :]  # k - m
    l_top = max(p.delay_tap for p in chan.paths)
    # lookup table over every integer lag the sum can touch
    d_min = -(mn - 1) - l_top
    d_max = (mn - 1) + mn
    lag_table = np.asarray(rc_autocorr(np.arange(d_min, d_max + 1) * alpha * pulse.T0, pulse))

    h = np.zeros((mn, mn), dtype=complex)
    cp_cols = k[None, :] >= mn - cp
    for p in chan.paths:
        phase = np.exp(2j * np.pi * p.doppler_tap * (k - p.delay_tap) / mn)
        gv = lag_table[diff - p.delay_tap - d_min]
        if mode == "circular":
            gv = gv + np.where(cp_cols, lag_table[diff - p.delay_tap + mn - d_min], 0.0)
        h += (p.gain * phase)[:, None] * gv
    h_eq = conjugate_by_dd(h, shape)
    return EffectiveChannel(H=h, H_eq=h_eq, cp_mode=mode)


def waveform_oracle(
    x_p: np.ndarray,
    chan: DdChannel,
    cfg: SystemConfig,
    pulse: PulseSpec,
    oversample: int,
) -> np.ndarray:
    """Noiseless continuous-time reference for the matrix model.

    Builds the oversampled pulse train with an explicit cyclic prefix,
    applies each path as a delay plus Doppler rotation, matched-filters by
    discrete convolution with the time-reversed pulse, removes the prefix
    and samples at the compressed symbol instants.
    """
    if oversample < 8:
        raise ValueError(f"oversample must be >= 8, got {oversample}")
    if pulse.span < 16.0:
        raise ValueError(f"oracle requires pulse span >= 16*T0, got {pulse.span}")
    alpha = cfg.alpha
    check_alpha(alpha, pulse)
    shape = GridShape(cfg.M, cfg.N)
    mn = shape.MN
    cp = cfg.effective_cp_len()

    # all times live on the grid t = i*dt with dt = T_f/oversample; integer
    # delay taps land exactly on it
    dt = alpha * pulse.T0 / oversample
    hw = int(np.ceil(pulse.span * pulse.T0 / dt))
    h_taps = np.asarray(rrc_impulse(np.arange(-hw, hw + 1) * dt, pulse))

    s = dd_to_time(np.asarray(x_p, dtype=complex), shape)
    positions = np.arange(-cp, mn)  # symbol slots, prefix = tail copy
    amps = s[positions % mn]

    i_min = -cp * oversample - hw
    i_max = (mn - 1) * oversample + hw
    tx = np.zeros(i_max - i_min + 1, dtype=complex)
    for n, a in zip(positions, amps):
        c = n * oversample - i_min
        tx[c - hw : c + hw + 1] += a * h_taps

    l_top = chan.max_delay_tap()
    r_min, r_max = i_min, i_max + l_top * oversample
    rx = np.zeros(r_max - r_min + 1, dtype=complex)
    grid = np.arange(r_min, r_max + 1)
    for p in chan.paths:
        shift = p.delay_tap * oversample
        # Doppler exponent 2*pi*nu*(t - tau) with nu = doppler_tap/(MN*T_f)
        rot = np.exp(2j * np.pi * p.doppler_tap * (grid - shift) / (mn * oversample))
        lo = i_min + shift - r_min
        rx[lo : lo + tx.size] += p.gain * rot[lo : lo + tx.size] * tx

    mf = np.convolve(rx, np.conj(h_taps[::-1])) * dt
    # output index c sits at absolute grid index r_min - hw + c
    sample_idx = np.arange(mn) * oversample - (r_min - hw)
    return mf[sample_idx]


def dump_paths(chan: DdChannel) -> str:
    """Serialize a channel realization to the structured text dump format."""
    buf = io.StringIO()
    buf.write("# dd-channel-dump v1\n")
    buf.write(f"# paths {chan.num_paths}\n")
    buf.write("# columns gain_re gain_im delay_tap doppler_int doppler_frac\n")
    for p in chan.paths:
        buf.write(
            f"{p.gain.real:+.17e} {p.gain.imag:+.17e} {p.delay_tap:d} "
            f"{p.doppler_int:d} {p.doppler_frac:+.17e}\n"
        )
    return buf.getvalue()


def load_paths(text: str) -> DdChannel:
    """Inverse of :func:`dump_paths` (exact round trip)."""
    paths = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        re_, im, l, k, kappa = line.split()
        paths.append(DdPath(complex(float(re_), float(im)), int(l), int(k), float(kappa)))
    if not paths:
        raise ValueError("dump contains no paths")
    return DdChannel(paths=tuple(paths))
