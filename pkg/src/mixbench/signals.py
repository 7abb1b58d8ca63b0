"""Sampled complex-baseband signal primitives.

Every waveform in the bench is an :class:`Envelope`: a uniformly sampled
complex voltage envelope declared against a reference carrier.  Narrowband
tones make the complex-envelope equivalent model exact, so sample rates stay
at the DAC/ADC scale (1 GSPS) instead of twice the RF carrier.

Power convention: a tone of peak amplitude ``A`` volts carries
``A**2 / (2 * z0)`` watts into the reference impedance, which is fixed at
50 ohms throughout the bench.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

Z0_OHMS = 50.0

# kT at the 290 K noise reference, rounded to the conventional floor.
THERMAL_FLOOR_DBM_HZ = -174.0

# Flag density for add_awgn: no noise at all.
NO_NOISE = -math.inf


def dbm_to_vpeak(p_dbm: float, z0: float = Z0_OHMS) -> float:
    """Peak voltage of a tone with the given power into ``z0``.

    ``-inf`` dBm maps to 0 V (the no-signal flag); NaN and ``+inf`` are
    rejected.
    """
    if not z0 > 0:
        raise ValueError(f"z0 must be positive, got {z0}")
    if math.isnan(p_dbm) or p_dbm == math.inf:
        raise ValueError(f"power must be finite or -inf, got {p_dbm}")
    if p_dbm == -math.inf:
        return 0.0
    watts = 10.0 ** ((p_dbm - 30.0) / 10.0)
    return math.sqrt(2.0 * z0 * watts)


def vpeak_to_dbm(v_peak: float, z0: float = Z0_OHMS) -> float:
    """Inverse of :func:`dbm_to_vpeak`; 0 V maps to ``-inf`` dBm."""
    if not z0 > 0:
        raise ValueError(f"z0 must be positive, got {z0}")
    if not math.isfinite(v_peak) or v_peak < 0:
        raise ValueError(f"peak voltage must be finite and >= 0, got {v_peak}")
    if v_peak == 0.0:
        return -math.inf
    return 10.0 * math.log10(v_peak**2 / (2.0 * z0)) + 30.0


def watts_to_dbm(p_watts: float) -> float:
    if p_watts <= 0:
        return -math.inf
    return 10.0 * math.log10(p_watts) + 30.0


def dbm_to_watts(p_dbm: float) -> float:
    if p_dbm == -math.inf:
        return 0.0
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Envelope:
    """Uniformly sampled complex-baseband waveform.

    ``center_freq`` is the carrier the envelope is referenced to: 0 Hz for a
    pure baseband/IF signal, the LO frequency after up-conversion.  All
    operations treat envelopes as immutable values.
    """

    sample_rate: float
    center_freq: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError(f"sample_rate must be positive and finite, got {self.sample_rate}")
        if not math.isfinite(self.center_freq):
            raise ValueError(f"center_freq must be finite, got {self.center_freq}")
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples.real)) or not np.all(np.isfinite(samples.imag)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    def with_samples(self, samples: np.ndarray, center_freq: float | None = None) -> "Envelope":
        """New envelope sharing this one's sampling grid."""
        cf = self.center_freq if center_freq is None else center_freq
        return Envelope(self.sample_rate, cf, samples)

    def mean_power_dbm(self, z0: float = Z0_OHMS) -> float:
        """Mean envelope power in dBm into ``z0`` (tone of amplitude A -> A^2/2z0)."""
        p_watts = float(np.mean(np.abs(self.samples) ** 2)) / (2.0 * z0)
        return watts_to_dbm(p_watts)


@dataclass(frozen=True)
class ToneSpec:
    """Single complex tone: frequency offset from the envelope carrier, peak
    amplitude in volts, phase in radians."""

    freq: float
    amplitude: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.freq):
            raise ValueError(f"freq must be finite, got {self.freq}")
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError(f"amplitude must be finite and >= 0, got {self.amplitude}")
        if not math.isfinite(self.phase):
            raise ValueError(f"phase must be finite, got {self.phase}")


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform mid-tread quantizer: ``bits`` wide, symmetric full scale in volts.

    Codes span the two's-complement range ``[-2**(bits-1), 2**(bits-1) - 1]``
    with step ``full_scale / 2**(bits-1)``, so 0 V is an exact level and values
    beyond full scale clip to the extreme codes.
    """

    bits: int = 16
    full_scale: float = 1.0

    def __post_init__(self) -> None:
        if not (isinstance(self.bits, int) and 2 <= self.bits <= 24):
            raise ValueError(f"bits must be an integer in [2, 24], got {self.bits}")
        if not (math.isfinite(self.full_scale) and self.full_scale > 0):
            raise ValueError(f"full_scale must be positive, got {self.full_scale}")

    @property
    def step(self) -> float:
        return self.full_scale / 2 ** (self.bits - 1)


class QuantizeResult(NamedTuple):
    envelope: Envelope
    clip_count: int


def synth_tone(tone: ToneSpec, sample_rate: float, n: int) -> Envelope:
    """Synthesize ``samples[k] = amplitude * exp(i*(2*pi*freq*k/fs + phase))``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not abs(tone.freq) < sample_rate / 2:
        raise ValueError(
            f"tone at {tone.freq} Hz is not resolvable at {sample_rate} S/s (|freq| < fs/2 required)"
        )
    k = np.arange(n)
    phase = 2.0 * np.pi * tone.freq / sample_rate * k + tone.phase
    return Envelope(sample_rate, 0.0, tone.amplitude * np.exp(1j * phase))


def quantize(env: Envelope, q: QuantizerSpec) -> QuantizeResult:
    """Quantize real and imaginary parts independently.

    Mid-tread rounding to the nearest level; out-of-range values clip to the
    extreme codes.  ``clip_count`` is the number of complex samples with at
    least one clipped component (clipping is defined behavior, never silent).
    For ``|x| <= full_scale - step/2`` the per-component error is at most half
    a step.
    """
    step = q.step
    lo = -(2 ** (q.bits - 1))
    hi = 2 ** (q.bits - 1) - 1

    re_codes = np.rint(env.samples.real / step)
    im_codes = np.rint(env.samples.imag / step)
    clipped = (re_codes < lo) | (re_codes > hi) | (im_codes < lo) | (im_codes > hi)
    re_codes = np.clip(re_codes, lo, hi)
    im_codes = np.clip(im_codes, lo, hi)

    out = env.with_samples(re_codes * step + 1j * im_codes * step)
    return QuantizeResult(out, int(np.count_nonzero(clipped)))


def add_awgn(
    env: Envelope,
    noise_density_dbm_hz: float,
    seed,
    z0: float = Z0_OHMS,
) -> Envelope:
    """Add complex white Gaussian noise of the given one-sided density.

    Total noise power is ``density + 10*log10(sample_rate)`` dBm (a complex
    envelope at rate fs spans fs of bandwidth), split equally between the real
    and imaginary parts.  Deterministic for a fixed seed; ``-inf`` density is
    the no-noise flag and returns the input unchanged.
    """
    if noise_density_dbm_hz == NO_NOISE:
        return env
    if not math.isfinite(noise_density_dbm_hz):
        raise ValueError(f"noise density must be finite or -inf, got {noise_density_dbm_hz}")
    total_dbm = noise_density_dbm_hz + 10.0 * math.log10(env.sample_rate)
    total_watts = dbm_to_watts(total_dbm)
    # E|n|^2 = 2*z0*P; each quadrature carries half of it.
    sigma = math.sqrt(z0 * total_watts)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, env.samples.size) + 1j * rng.normal(0.0, sigma, env.samples.size)
    return env.with_samples(env.samples + noise)


def single_bin_dft(env: Envelope, freq: float) -> complex:
    """Complex peak amplitude of the envelope at one frequency.

    Computes ``(1/N) * sum(samples[k] * exp(-i*2*pi*freq*k/fs))`` (the plain
    mean for ``freq = 0``), which recovers a pure tone's complex amplitude
    exactly.  The observation must hold an integer number of periods of
    ``freq``; anything else is rejected rather than letting spectral leakage
    corrupt dBc measurements.
    """
    n = len(env)
    if freq == 0.0:
        return complex(np.mean(env.samples))
    if not abs(freq) < env.sample_rate / 2:
        raise ValueError(f"probe at {freq} Hz exceeds Nyquist for fs={env.sample_rate}")
    cycles = freq * n / env.sample_rate
    if abs(cycles - round(cycles)) > 1e-6 or round(cycles) == 0:
        raise ValueError(
            f"non-integer period count: {n} samples at fs={env.sample_rate} "
            f"hold {cycles} cycles of {freq} Hz"
        )
    k = np.arange(n)
    kernel = np.exp(-2j * np.pi * freq / env.sample_rate * k)
    return complex(np.sum(env.samples * kernel) / n)
