"""Behavioral models of the analog blocks in the mixing-module signal chain.

The IQ mixer is parameterized by its direct/image transfer pair ``(mu, nu)``
plus an LO feedthrough term, so the per-sample action on a complex envelope
``s`` is the conjugate-linear map ``mu*s + nu*conj(s) + leak``.  Gain/phase
channel imbalance (the datasheet-facing view) converts to and from this form.

Amplifiers are memoryless odd-order compressors (AM-AM only), attenuators are
exact scalers with optional thermal re-emission, and the IF low-pass is a
linear-phase windowed-sinc FIR.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import signal as sp_signal

from .signals import (
    THERMAL_FLOOR_DBM_HZ,
    Envelope,
    add_awgn,
    dbm_to_vpeak,
    vpeak_to_dbm,
)


@dataclass(frozen=True)
class MixerParams:
    """IQ mixer transfer: direct ``mu``, image ``nu``, LO feedthrough ``leak``.

    ``mu`` and ``nu`` are dimensionless voltage transfers; conversion loss is
    folded into ``|mu|``.  ``leak`` is the intrinsic LO feedthrough at the
    mixer output in volts.  A functioning mixer passes more signal than image,
    so ``|nu| < |mu|`` is enforced.
    """

    mu: complex = 1.0
    nu: complex = 0.0
    leak: complex = 0.0

    def __post_init__(self) -> None:
        for name in ("mu", "nu", "leak"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if not abs(self.nu) < abs(self.mu):
            raise ValueError(
                f"|nu| must be < |mu| (got |nu|={abs(self.nu)}, |mu|={abs(self.mu)})"
            )

    @classmethod
    def from_imbalance(
        cls,
        gain_ratio: float = 1.0,
        phase_rad: float = 0.0,
        conv_loss_db: float = 0.0,
        leak: complex = 0.0,
    ) -> "MixerParams":
        """Build from channel imbalance: ``G_I = 1``, ``G_Q = g * exp(i*phi)``.

        ``mu = (G_I + G_Q)/2`` and ``nu = (G_I - G_Q)/2``, then both are scaled
        so that ``|mu| = 10**(-conv_loss_db/20)`` exactly.
        """
        if not (math.isfinite(gain_ratio) and gain_ratio > 0):
            raise ValueError(f"gain_ratio must be positive, got {gain_ratio}")
        if not (math.isfinite(conv_loss_db) and conv_loss_db >= 0):
            raise ValueError(f"conv_loss_db must be >= 0, got {conv_loss_db}")
        g_q = gain_ratio * cmath.exp(1j * phase_rad)
        mu0 = (1.0 + g_q) / 2.0
        nu0 = (1.0 - g_q) / 2.0
        if abs(mu0) == 0:
            raise ValueError("degenerate imbalance: G_I + G_Q = 0")
        scale = 10.0 ** (-conv_loss_db / 20.0) / abs(mu0)
        return cls(mu0 * scale, nu0 * scale, leak)

    def imbalance(self) -> tuple[float, float]:
        """Datasheet view ``(gain_ratio, phase_rad)`` of the Q/I channel transfer."""
        ratio = (self.mu - self.nu) / (self.mu + self.nu)
        return abs(ratio), cmath.phase(ratio)

    @property
    def irr_dbc(self) -> float:
        """Image rejection ratio ``20*log10(|mu|/|nu|)``; ``inf`` for a clean mixer."""
        if self.nu == 0:
            return math.inf
        return 20.0 * math.log10(abs(self.mu) / abs(self.nu))

    @property
    def conv_loss_db(self) -> float:
        return -20.0 * math.log10(abs(self.mu))

    def lo_to_rf_isolation_db(self, lo_drive_dbm: float) -> float:
        """Isolation view of the feedthrough: LO drive minus leak power at RF."""
        if self.leak == 0:
            return math.inf
        return lo_drive_dbm - vpeak_to_dbm(abs(self.leak))


@dataclass(frozen=True)
class AmpParams:
    """Amplifier: gain, noise figure, input-referred P1dB and IIP3 (dBm).

    ``iip3_dbm`` may be ``inf`` for an ideal linear stage (then ``p1db_in_dbm``
    must be ``inf`` too).  The physical ordering ``iip3 > p1db`` (typically
    ~9.6 dB apart) is enforced.
    """

    gain_db: float
    nf_db: float = 0.0
    p1db_in_dbm: float = math.inf
    iip3_dbm: float = math.inf

    def __post_init__(self) -> None:
        if not math.isfinite(self.gain_db):
            raise ValueError(f"gain_db must be finite, got {self.gain_db}")
        if not (self.nf_db >= 0 and math.isfinite(self.nf_db)):
            raise ValueError(f"nf_db must be finite and >= 0, got {self.nf_db}")
        both_ideal = math.isinf(self.iip3_dbm) and math.isinf(self.p1db_in_dbm)
        if not both_ideal and not self.iip3_dbm > self.p1db_in_dbm:
            raise ValueError(
                f"iip3_dbm ({self.iip3_dbm}) must exceed p1db_in_dbm ({self.p1db_in_dbm})"
            )

    @classmethod
    def ideal(cls, gain_db: float) -> "AmpParams":
        return cls(gain_db=gain_db, nf_db=0.0)


@dataclass(frozen=True)
class AttenParams:
    attenuation_db: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.attenuation_db) and self.attenuation_db >= 0):
            raise ValueError(f"attenuation_db must be >= 0, got {self.attenuation_db}")


@dataclass(frozen=True)
class FilterParams:
    """Low-pass FIR: cutoff in Hz and an odd tap count.

    The cutoff upper bound (``< sample_rate/2``) is checked when the filter is
    applied, since the params object carries no sample rate.
    """

    cutoff: float
    taps: int = 129

    def __post_init__(self) -> None:
        if not (math.isfinite(self.cutoff) and self.cutoff > 0):
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        if not (isinstance(self.taps, int) and self.taps >= 3 and self.taps % 2 == 1):
            raise ValueError(f"taps must be an odd integer >= 3, got {self.taps}")


@dataclass(frozen=True)
class BiasSetting:
    """DC offsets on the mixer I and Q ports, bounded by the bias supply range."""

    b_i: float = 0.0
    b_q: float = 0.0
    limit_v: float = 1.8

    def __post_init__(self) -> None:
        if not (math.isfinite(self.b_i) and math.isfinite(self.b_q)):
            raise ValueError("bias voltages must be finite")
        if abs(self.b_i) > self.limit_v or abs(self.b_q) > self.limit_v:
            raise ValueError(
                f"bias ({self.b_i}, {self.b_q}) V exceeds the +/-{self.limit_v} V supply range"
            )

    @classmethod
    def zero(cls) -> "BiasSetting":
        return cls(0.0, 0.0)

    @property
    def as_complex(self) -> complex:
        return complex(self.b_i, self.b_q)


@dataclass(frozen=True)
class Predistorter:
    """IQ pre-correction ``s -> a*s + b*conj(s)`` applied before the up-mixer.

    Equivalent to a real 2x2 matrix on (I, Q); both views are offered.  Must be
    invertible (``|a| != |b|``).
    """

    a: complex = 1.0
    b: complex = 0.0

    def __post_init__(self) -> None:
        for name in ("a", "b"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if abs(abs(self.a) - abs(self.b)) < 1e-300:
            raise ValueError("predistorter is singular: |a| == |b|")

    @classmethod
    def identity(cls) -> "Predistorter":
        return cls(1.0, 0.0)

    @classmethod
    def from_matrix(cls, t: Sequence[Sequence[float]]) -> "Predistorter":
        m = np.asarray(t, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        a = complex(m[0, 0] + m[1, 1], m[1, 0] - m[0, 1]) / 2.0
        b = complex(m[0, 0] - m[1, 1], m[1, 0] + m[0, 1]) / 2.0
        return cls(a, b)

    @property
    def matrix(self) -> np.ndarray:
        a, b = self.a, self.b
        return np.array(
            [
                [(a + b).real, -(a - b).imag],
                [(a + b).imag, (a - b).real],
            ]
        )

    def apply(self, env: Envelope) -> Envelope:
        return env.with_samples(self.a * env.samples + self.b * np.conj(env.samples))


def mixer_up(
    s: Envelope,
    m: MixerParams,
    bias: BiasSetting | None = None,
    lo_freq: float = 0.0,
) -> Envelope:
    """Up-convert an IF envelope to the RF envelope relative to the LO.

    With ``s' = s + (b_i + i*b_q)`` the output is ``mu*s' + nu*conj(s') + leak``
    per sample; the result is tagged with ``lo_freq`` as its carrier.
    """
    if s.center_freq != 0.0:
        raise ValueError(f"up-mixer input must be IF-referenced (center_freq=0), got {s.center_freq}")
    b = bias.as_complex if bias is not None else 0.0
    sp = s.samples + b
    z = m.mu * sp + m.nu * np.conj(sp) + m.leak
    return Envelope(s.sample_rate, lo_freq, z)


def mixer_down(w: Envelope, m: MixerParams) -> Envelope:
    """Down-convert an RF envelope back to IF.

    The envelope's declared carrier is taken to be the shared LO; the output
    is ``mu*w + nu*conj(w) + leak`` referenced to 0 Hz, so LO feedthrough shows
    up as a DC offset in the I/Q output.
    """
    z = m.mu * w.samples + m.nu * np.conj(w.samples) + m.leak
    return Envelope(w.sample_rate, 0.0, z)


class AmplifyResult(NamedTuple):
    envelope: Envelope
    overdrive_count: int


def amplify(env: Envelope, a: AmpParams, seed=None) -> AmplifyResult:
    """Amplify with thermal noise and odd-order AM-AM compression.

    Input-referred excess noise of density ``-174 + 10*log10(F - 1)`` dBm/Hz
    (290 K convention) is added before the nonlinearity when a seed is given;
    ``seed=None`` runs noiseless.

    The compression model is the standard odd cubic ``a1*x + a3*x**3`` with
    ``a3 = -(4/3) * a1 / A3**2`` pinned by the intercept amplitude
    ``A3 = dbm_to_vpeak(iip3_dbm)``.  In complex-envelope form the fundamental
    picks up 3/4 of the cubic term, so per sample
    ``y = g * (x - x*|x|^2 / A3^2)``, which reproduces the two-tone intercept
    at exactly ``iip3_dbm`` and 1 dB compression near ``iip3_dbm - 9.6`` dB.
    Samples beyond the monotonic range (``|x| > A3/2``) are counted as
    overdrive in the returned diagnostic.
    """
    g = 10.0 ** (a.gain_db / 20.0)
    x = env.samples
    if seed is not None and a.nf_db > 0:
        f_lin = 10.0 ** (a.nf_db / 10.0)
        density = THERMAL_FLOOR_DBM_HZ + 10.0 * math.log10(f_lin - 1.0)
        x = add_awgn(env, density, seed).samples

    if math.isinf(a.iip3_dbm):
        return AmplifyResult(env.with_samples(g * x), 0)

    a3 = dbm_to_vpeak(a.iip3_dbm)
    mag2 = np.abs(x) ** 2
    y = g * (x - x * mag2 / a3**2)
    overdrive = int(np.count_nonzero(np.abs(x) > a3 / 2.0))
    return AmplifyResult(env.with_samples(y), overdrive)


def attenuate(env: Envelope, at: AttenParams, seed=None) -> Envelope:
    """Scale the envelope by ``10**(-attenuation_db/20)``.

    Seedless operation is a pure deterministic scaler.  With a seed, the pad
    re-emits the 290 K thermal floor it absorbs (added power density
    ``kT * (1 - 1/L)``), so a matched source's noise floor stays at kT and the
    cascade matches the Friis convention NF = attenuation.
    """
    g = 10.0 ** (-at.attenuation_db / 20.0)
    out = env.with_samples(g * env.samples)
    if seed is not None and at.attenuation_db > 0:
        makeup = THERMAL_FLOOR_DBM_HZ + 10.0 * math.log10(1.0 - g**2)
        out = add_awgn(out, makeup, seed)
    return out


def design_lowpass_taps(f: FilterParams, sample_rate: float) -> np.ndarray:
    """Windowed-sinc (Kaiser) taps for the IF low-pass.

    The -6 dB point is placed above the nominal cutoff so that tones below
    ``0.8 * cutoff`` stay within 0.1 dB while ``> 1.5 * cutoff`` falls in the
    stopband (>= 60 dB for cutoffs with enough Nyquist headroom).
    """
    if not f.cutoff < sample_rate / 2:
        raise ValueError(
            f"cutoff {f.cutoff} Hz out of range for sample rate {sample_rate} (needs < fs/2)"
        )
    edge = min(1.15 * f.cutoff, 0.5 * (f.cutoff + sample_rate / 2.0))
    return sp_signal.firwin(f.taps, edge, window=("kaiser", 8.6), fs=sample_rate)


def lowpass(env: Envelope, f: FilterParams) -> Envelope:
    """Apply the linear-phase FIR to the complex samples (causal; group delay
    ``(taps-1)/2`` samples)."""
    taps = design_lowpass_taps(f, env.sample_rate)
    y = sp_signal.lfilter(taps, 1.0, env.samples)
    return env.with_samples(y)


def filter_response(f: FilterParams, sample_rate: float, freq: float) -> complex:
    """Exact steady-state complex response of the FIR at one frequency."""
    taps = design_lowpass_taps(f, sample_rate)
    k = np.arange(taps.size)
    return complex(np.sum(taps * np.exp(-2j * np.pi * freq / sample_rate * k)))


Block = AmpParams | AttenParams | FilterParams


def apply_block(env: Envelope, block: Block, seed=None) -> tuple[Envelope, int]:
    """Run one non-mixer block; returns the output and an overdrive count."""
    if isinstance(block, AmpParams):
        out, overdrive = amplify(env, block, seed=seed)
        return out, overdrive
    if isinstance(block, AttenParams):
        return attenuate(env, block, seed=seed), 0
    if isinstance(block, FilterParams):
        return lowpass(env, block), 0
    raise TypeError(f"cannot apply block of type {type(block).__name__} here")


def spawn_seeds(seed, n: int) -> list:
    """n independent child seeds (all ``None`` when seed is ``None``)."""
    if seed is None or n == 0:
        return [None] * n
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n)


def run_blocks(
    env: Envelope,
    blocks: Sequence[Block],
    base_seed=None,
) -> tuple[Envelope, int]:
    """Fold an envelope through an ordered block list.

    ``base_seed=None`` runs every stage noiseless; otherwise each stage draws
    from an independent child of the seed so results are reproducible and
    insensitive to how many samples earlier stages consumed.
    """
    seeds = spawn_seeds(base_seed, len(blocks))
    overdrive = 0
    for block, seed in zip(blocks, seeds):
        env, ov = apply_block(env, block, seed=seed)
        overdrive += ov
    return env, overdrive
