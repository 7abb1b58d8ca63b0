"""Figures of merit: scan linearity, imbalance estimation, sideband rejection,
and LO leakage.

Scan metrics consume any :class:`~mixbench.loopback.ScanResult`, whether it
came from the simulator or from an externally measured CSV with the same
column contract.  Spectral probes drive a converter model with a pure tone
over an integer-period window and compare single-bin amplitudes, so the dBc
numbers carry no leakage bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocks import BiasSetting
from .loopback import ScanResult, UpConverter
from .signals import Envelope, ToneSpec, single_bin_dft, synth_tone

# Below this relative level a bin is reported as the infinite-rejection
# sentinel instead of a meaningless number.
RELATIVE_FLOOR = 1e-15


@dataclass(frozen=True)
class LinearityReport:
    """Amplitude (Vpp/Vmean) and detrended-phase (pk-pk rad) scan linearity."""

    amp_linearity: float
    phase_linearity: float
    freq: float
    n_points: int

    def __post_init__(self) -> None:
        if self.amp_linearity < 0 or self.phase_linearity < 0:
            raise ValueError("linearity metrics are non-negative")


@dataclass(frozen=True)
class IqImbalanceEstimate:
    """Harmonic decomposition of a scan locus into direct, image, and offset
    terms, with the implied image rejection ratio."""

    mu_hat: complex
    nu_hat: complex
    c_hat: complex
    irr_dbc: float


def amp_linearity(scan: ScanResult) -> float:
    """Peak-to-peak over mean of the accumulated magnitude across the scan."""
    if len(scan) < 2:
        raise ValueError("amp_linearity needs at least 2 scan points")
    mags = np.abs(scan.accumulated)
    mean = float(np.mean(mags))
    if mean == 0.0:
        raise ValueError("degenerate scan: mean accumulated magnitude is zero")
    return float((np.max(mags) - np.min(mags)) / mean)


def phase_linearity(scan: ScanResult) -> float:
    """Peak-to-peak of the detrended accumulated phase.

    The unwrapped phase is fit to ``a*theta + b`` by least squares (removing
    the ideal unit-slope response) and the max-min of the residual is
    returned.  Scans whose per-step phase jumps reach pi are rejected: the
    unwrap would be ambiguous.
    """
    if len(scan) < 3:
        raise ValueError("phase_linearity needs at least 3 scan points")
    raw = np.angle(scan.accumulated)
    wrapped = (np.diff(raw) + np.pi) % (2.0 * np.pi) - np.pi
    if np.any(np.abs(wrapped) > np.pi * (1.0 - 1e-9)):
        raise ValueError("scan too coarse: per-step phase jump reaches pi, unwrap is ambiguous")
    unwrapped = np.unwrap(raw)
    slope, intercept = np.polyfit(scan.drive_phases, unwrapped, 1)
    residual = unwrapped - (slope * scan.drive_phases + intercept)
    return float(np.max(residual) - np.min(residual))


def estimate_imbalance(scan: ScanResult) -> IqImbalanceEstimate:
    """Recover (mu', nu', c') from a uniform phase scan by orthogonality.

    ``c = mean(acc)``, ``mu = mean(acc * e^{-i theta})``,
    ``nu = mean(acc * e^{+i theta})`` -- exact on any noiseless locus of the
    form ``mu e^{i theta} + nu e^{-i theta} + c`` sampled uniformly with
    n >= 3 points.
    """
    n = len(scan)
    if n < 3:
        raise ValueError("imbalance estimation needs at least 3 scan points")
    theta = scan.drive_phases
    expected = theta[0] + 2.0 * np.pi * np.arange(n) / n
    if np.max(np.abs(theta - expected)) > 1e-9:
        raise ValueError("imbalance estimation requires a uniform phase grid over 2*pi")
    acc = scan.accumulated
    c_hat = complex(np.mean(acc))
    mu_hat = complex(np.mean(acc * np.exp(-1j * theta)))
    nu_hat = complex(np.mean(acc * np.exp(1j * theta)))
    if abs(nu_hat) < RELATIVE_FLOOR * abs(mu_hat):
        irr = math.inf
    else:
        irr = 20.0 * math.log10(abs(mu_hat) / abs(nu_hat))
    return IqImbalanceEstimate(mu_hat, nu_hat, c_hat, irr)


def linearity_report(scan: ScanResult) -> LinearityReport:
    freq = scan.config.if_freq if scan.config is not None else math.nan
    return LinearityReport(
        amp_linearity=amp_linearity(scan),
        phase_linearity=phase_linearity(scan),
        freq=freq,
        n_points=len(scan),
    )


@dataclass(frozen=True)
class ProbeConfig:
    """Spectral probe window: must hold an integer number of tone periods."""

    sample_rate: float = 1.0e9
    n_samples: int = 1000

    def __post_init__(self) -> None:
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")


def _probe_output(up: UpConverter, tone: ToneSpec, probe: ProbeConfig,
                  bias: BiasSetting | None = None) -> Envelope:
    env = synth_tone(tone, probe.sample_rate, probe.n_samples)
    out, _ = up.apply(env, bias_override=bias)
    return out


def measure_sideband_rejection(up: UpConverter, tone: ToneSpec, probe: ProbeConfig) -> float:
    """Desired-to-image sideband ratio of the up-converted envelope, in dBc.

    Probes the +f and -f bins of the output; an image below the numeric floor
    reports the ``inf`` sentinel.
    """
    if tone.freq == 0 or tone.amplitude == 0:
        raise ValueError("sideband probe needs a nonzero off-carrier tone")
    out = _probe_output(up, tone, probe)
    wanted = single_bin_dft(out, tone.freq)
    image = single_bin_dft(out, -tone.freq)
    if abs(wanted) == 0.0:
        raise ValueError("no signal in the wanted sideband; probe is misconfigured")
    if abs(image) < RELATIVE_FLOOR * abs(wanted):
        return math.inf
    return 20.0 * math.log10(abs(wanted) / abs(image))


def measure_lo_leakage(
    up: UpConverter,
    bias: BiasSetting | None,
    probe: ProbeConfig,
    tone: ToneSpec,
) -> float:
    """Carrier leakage relative to the signal tone on the RF envelope, in dBc.

    ``20*log10(|bin(0)| / |bin(+f)|)``; a fully nulled carrier reports the
    ``-inf`` sentinel.  ``bias`` overrides the converter's stored setting,
    which is how nulling loops drive this measurement.
    """
    if tone.freq == 0 or tone.amplitude == 0:
        raise ValueError("leakage probe needs a nonzero off-carrier reference tone")
    out = _probe_output(up, tone, probe, bias=bias)
    carrier = single_bin_dft(out, 0.0)
    wanted = single_bin_dft(out, tone.freq)
    if abs(wanted) == 0.0:
        raise ValueError("no signal in the wanted sideband; probe is misconfigured")
    if abs(carrier) < RELATIVE_FLOOR * abs(wanted):
        return -math.inf
    return 20.0 * math.log10(abs(carrier) / abs(wanted))
