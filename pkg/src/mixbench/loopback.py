"""End-to-end virtual loopback bench.

Pipeline per point: synthesize the IF drive tone at a given phase, DAC
quantize, run the up-converter (IF pads, optional predistortion, biased
mixer, RF amps/pads), pass the RF path attenuator, run the down-converter
(RF blocks, mixer, IF amps and low-pass), ADC quantize, digitally mix and
accumulate over an integer number of IF periods.  A 2*pi drive-phase scan of
the accumulated complex value is the raw material for every linearity metric.

Two accumulator readouts are offered:

``"single"``
    Conventional boxcar DDC: multiply by the conjugate digital LO at the IF
    frequency and sum.  Over an exact integer-period window this projects out
    the signal bin alone -- image and carrier leakage integrate to zero -- so
    scan ripple measures noise and quantization, the way a hardware
    accumulator behaves.

``"folded"``
    Characterization readout: the signal, image, and carrier bins are summed
    coherently (equivalently, the stream is weighted by ``1 + 2*cos`` of the
    digital LO phase).  The scan locus then equals
    ``mu'*exp(i*theta) + nu'*exp(-i*theta) + c'`` where ``(mu', nu', c')`` is
    the analytic composition of the two converters' transfer pairs -- the form
    scan-based imbalance estimation and calibration consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .blocks import (
    AmpParams,
    AttenParams,
    BiasSetting,
    Block,
    FilterParams,
    MixerParams,
    Predistorter,
    attenuate,
    filter_response,
    mixer_down,
    mixer_up,
    run_blocks,
    spawn_seeds,
)
from .budget import ChainSpec
from .signals import (
    THERMAL_FLOOR_DBM_HZ,
    Envelope,
    QuantizerSpec,
    ToneSpec,
    add_awgn,
    quantize,
    synth_tone,
)

READOUTS = ("folded", "single")


def _split_at_mixer(chain: ChainSpec) -> tuple[tuple[Block, ...], MixerParams, tuple[Block, ...]]:
    pre: list[Block] = []
    post: list[Block] = []
    mixer: MixerParams | None = None
    for _, block in chain.blocks:
        if isinstance(block, MixerParams):
            if mixer is not None:
                raise ValueError("chain has more than one mixer; cannot build a converter")
            mixer = block
        elif mixer is None:
            pre.append(block)
        else:
            post.append(block)
    assert mixer is not None  # ChainSpec guarantees one mixer
    return tuple(pre), mixer, tuple(post)


@dataclass(frozen=True)
class UpConverter:
    """Transmit-side converter: IF blocks, optional predistorter, biased mixer,
    then RF-side blocks."""

    mixer: MixerParams
    pre_blocks: tuple[Block, ...] = ()
    post_blocks: tuple[Block, ...] = ()
    bias: BiasSetting = field(default_factory=BiasSetting.zero)
    predistorter: Predistorter | None = None

    @classmethod
    def from_chain(
        cls,
        chain: ChainSpec,
        bias: BiasSetting | None = None,
        predistorter: Predistorter | None = None,
    ) -> "UpConverter":
        pre, mixer, post = _split_at_mixer(chain)
        return cls(
            mixer=mixer,
            pre_blocks=pre,
            post_blocks=post,
            bias=bias if bias is not None else BiasSetting.zero(),
            predistorter=predistorter,
        )

    def apply(
        self,
        env: Envelope,
        lo_freq: float = 0.0,
        seed=None,
        bias_override: BiasSetting | None = None,
    ) -> tuple[Envelope, int]:
        """IF envelope in, RF envelope (relative to the LO) out, plus an
        amplifier overdrive count."""
        seeds = spawn_seeds(seed, 2)
        env, overdrive = run_blocks(env, self.pre_blocks, base_seed=seeds[0])
        if self.predistorter is not None:
            env = self.predistorter.apply(env)
        bias = bias_override if bias_override is not None else self.bias
        env = mixer_up(env, self.mixer, bias=bias, lo_freq=lo_freq)
        env, ov = run_blocks(env, self.post_blocks, base_seed=seeds[1])
        return env, overdrive + ov


@dataclass(frozen=True)
class DownConverter:
    """Receive-side converter: RF blocks, mixer, then IF blocks (amps, pads,
    and the IF low-pass, in chain order)."""

    mixer: MixerParams
    pre_blocks: tuple[Block, ...] = ()
    post_blocks: tuple[Block, ...] = ()

    @classmethod
    def from_chain(cls, chain: ChainSpec) -> "DownConverter":
        pre, mixer, post = _split_at_mixer(chain)
        return cls(mixer=mixer, pre_blocks=pre, post_blocks=post)

    def apply(self, env: Envelope, seed=None) -> tuple[Envelope, int]:
        seeds = spawn_seeds(seed, 2)
        env, overdrive = run_blocks(env, self.pre_blocks, base_seed=seeds[0])
        env = mixer_down(env, self.mixer)
        env, ov = run_blocks(env, self.post_blocks, base_seed=seeds[1])
        return env, overdrive + ov

    @property
    def group_delay_samples(self) -> int:
        """Total FIR warm-up length of the converter's filters."""
        return sum(b.taps - 1 for b in self.pre_blocks + self.post_blocks if isinstance(b, FilterParams))


@dataclass(frozen=True)
class LoopbackConfig:
    """Virtual bench settings.

    ``accum_len * if_freq / sample_rate`` must be an integer so the
    accumulation window is leakage-free; configs violating it are rejected
    rather than silently windowed.  Bench drives like 6.5635 GHz are not
    integer-period at 1 GSPS with round accumulation lengths, so the defaults
    use the nearest valid choice (63.5 MHz IF on a 6.5 GHz LO, 2000 samples).
    """

    if_freq: float = 63.5e6
    lo_freq: float = 6.5e9
    sample_rate: float = 1.0e9
    dac: QuantizerSpec | None = field(default_factory=QuantizerSpec)
    adc: QuantizerSpec | None = field(default_factory=QuantizerSpec)
    accum_len: int = 2000
    rf_path_atten_db: float = 0.0
    n_phase_points: int = 64
    drive_amplitude_v: float = 0.5
    noise_on: bool = False
    seed: int = 0
    readout: str = "folded"

    def __post_init__(self) -> None:
        if not 2.5e9 <= self.lo_freq <= 8.5e9:
            raise ValueError(f"lo_freq {self.lo_freq} Hz outside the 2.5-8.5 GHz operating range")
        if not 0 <= self.if_freq <= 500e6:
            raise ValueError(f"if_freq {self.if_freq} Hz outside the DC-500 MHz IF range")
        if not self.if_freq < self.sample_rate / 2:
            raise ValueError("if_freq must be below Nyquist")
        if not (isinstance(self.accum_len, int) and self.accum_len >= 1):
            raise ValueError(f"accum_len must be a positive integer, got {self.accum_len}")
        cycles = self.accum_len * self.if_freq / self.sample_rate
        if abs(cycles - round(cycles)) > 1e-6:
            raise ValueError(
                f"accum_len*if_freq/sample_rate = {cycles} is not an integer; "
                "the accumulator requires whole IF periods"
            )
        if self.n_phase_points < 1:
            raise ValueError("n_phase_points must be >= 1")
        if not self.drive_amplitude_v > 0:
            raise ValueError("drive_amplitude_v must be positive")
        if self.rf_path_atten_db < 0:
            raise ValueError("rf_path_atten_db must be >= 0")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}, got {self.readout!r}")


class LoopbackPoint(NamedTuple):
    value: complex
    dac_clips: int
    adc_clips: int
    overdrive: int


def run_loopback(
    up: UpConverter,
    dn: DownConverter,
    cfg: LoopbackConfig,
    drive_phase: float,
    point_index: int = 0,
) -> LoopbackPoint:
    """One accumulator reading at a given transmit drive phase.

    Deterministic for a fixed ``(cfg.seed, point_index)`` pair; the index keys
    the per-point noise stream so a scan can evaluate points in any order and
    still assemble the identical result.
    """
    warmup = dn.group_delay_samples + sum(
        b.taps - 1 for b in up.pre_blocks + up.post_blocks if isinstance(b, FilterParams)
    )
    n = cfg.accum_len + warmup
    tone = ToneSpec(cfg.if_freq, cfg.drive_amplitude_v, drive_phase)
    env = synth_tone(tone, cfg.sample_rate, n)

    noisy = cfg.noise_on
    seeds = spawn_seeds([cfg.seed, point_index] if noisy else None, 4)

    dac_clips = 0
    if cfg.dac is not None:
        env, dac_clips = quantize(env, cfg.dac)
    if noisy:
        env = add_awgn(env, THERMAL_FLOOR_DBM_HZ, seeds[0])

    env, overdrive = up.apply(env, lo_freq=cfg.lo_freq, seed=seeds[1])
    env = attenuate(env, AttenParams(cfg.rf_path_atten_db), seed=seeds[2])
    env, ov = dn.apply(env, seed=seeds[3])
    overdrive += ov

    adc_clips = 0
    if cfg.adc is not None:
        env, adc_clips = quantize(env, cfg.adc)

    window = env.samples[warmup : warmup + cfg.accum_len]
    k = np.arange(warmup, warmup + cfg.accum_len)
    omega = 2.0 * np.pi * cfg.if_freq / cfg.sample_rate
    if cfg.if_freq == 0.0:
        acc = np.sum(window)
    elif cfg.readout == "single":
        acc = np.sum(window * np.exp(-1j * omega * k))
    else:
        acc = np.sum(window * (1.0 + 2.0 * np.cos(omega * k)))
    return LoopbackPoint(complex(acc), dac_clips, adc_clips, overdrive)


@dataclass(frozen=True)
class ScanResult:
    """Accumulated complex value versus transmit drive phase.

    ``config`` echoes the bench settings when the scan came from the
    simulator and is ``None`` for scans ingested from CSV.
    """

    drive_phases: np.ndarray
    accumulated: np.ndarray
    config: LoopbackConfig | None = None
    dac_clips: int = 0
    adc_clips: int = 0
    overdrive: int = 0

    def __post_init__(self) -> None:
        phases = np.asarray(self.drive_phases, dtype=float)
        acc = np.asarray(self.accumulated, dtype=np.complex128)
        if phases.ndim != 1 or acc.shape != phases.shape:
            raise ValueError("drive_phases and accumulated must be 1-D and equal length")
        if phases.size == 0:
            raise ValueError("scan must contain at least one point")
        if phases.size > 1 and not np.all(np.diff(phases) > 0):
            raise ValueError("drive_phases must be strictly increasing")
        object.__setattr__(self, "drive_phases", phases)
        object.__setattr__(self, "accumulated", acc)

    def __len__(self) -> int:
        return self.drive_phases.size


def phase_scan(up: UpConverter, dn: DownConverter, cfg: LoopbackConfig) -> ScanResult:
    """Run the loopback at ``n_phase_points`` uniform drive phases over 2*pi."""
    if cfg.n_phase_points < 8:
        raise ValueError(f"a phase scan needs >= 8 points, got {cfg.n_phase_points}")
    phases = 2.0 * np.pi * np.arange(cfg.n_phase_points) / cfg.n_phase_points
    values = np.empty(cfg.n_phase_points, dtype=np.complex128)
    dac_clips = adc_clips = overdrive = 0
    for k, theta in enumerate(phases):
        point = run_loopback(up, dn, cfg, float(theta), point_index=k)
        values[k] = point.value
        dac_clips += point.dac_clips
        adc_clips += point.adc_clips
        overdrive += point.overdrive
    return ScanResult(phases, values, cfg, dac_clips, adc_clips, overdrive)


def _conj_map(u: complex, v: complex, w: complex, m: complex, n: complex, c: complex):
    """Push the coefficient triple through ``x -> m*x + n*conj(x) + c``.

    The triple (u, v, w) tracks the chain transfer of a drive tone
    ``A*exp(i*(omega*t + theta))``: coefficient of ``exp(+i(...))``,
    of ``exp(-i(...))``, and the additive carrier-frequency constant.
    """
    return (
        m * u + n * np.conj(v),
        m * v + n * np.conj(u),
        m * w + n * np.conj(w) + c,
    )


def composite_transfer(
    up: UpConverter,
    dn: DownConverter,
    cfg: LoopbackConfig,
) -> tuple[complex, complex, complex]:
    """Analytic (mu', nu', c') of the whole loopback for the folded readout.

    The noiseless, unquantized scan satisfies
    ``accumulated(theta) = accum_len * (mu'*e^{i theta} + nu'*e^{-i theta} + c')``.
    Amplifiers are composed as their linear gains, so the law is exact only in
    the linear regime (use ideal amps or small drive when testing against it).
    """
    u: complex = complex(cfg.drive_amplitude_v)
    v: complex = 0.0
    w: complex = 0.0

    def fold_block(block: Block, u, v, w):
        if isinstance(block, AmpParams):
            g = 10.0 ** (block.gain_db / 20.0)
            return g * u, g * v, g * w
        if isinstance(block, AttenParams):
            g = 10.0 ** (-block.attenuation_db / 20.0)
            return g * u, g * v, g * w
        if isinstance(block, FilterParams):
            h_pos = filter_response(block, cfg.sample_rate, cfg.if_freq)
            h_neg = filter_response(block, cfg.sample_rate, -cfg.if_freq)
            h_dc = filter_response(block, cfg.sample_rate, 0.0)
            return h_pos * u, h_neg * v, h_dc * w
        raise TypeError(f"cannot compose block {type(block).__name__}")

    for block in up.pre_blocks:
        u, v, w = fold_block(block, u, v, w)
    if up.predistorter is not None:
        u, v, w = _conj_map(u, v, w, up.predistorter.a, up.predistorter.b, 0.0)
    b = up.bias.as_complex
    leak_eff = up.mixer.mu * b + up.mixer.nu * np.conj(b) + up.mixer.leak
    u, v, w = _conj_map(u, v, w, up.mixer.mu, up.mixer.nu, leak_eff)
    for block in up.post_blocks:
        u, v, w = fold_block(block, u, v, w)

    g_rf = 10.0 ** (-cfg.rf_path_atten_db / 20.0)
    u, v, w = g_rf * u, g_rf * v, g_rf * w

    for block in dn.pre_blocks:
        u, v, w = fold_block(block, u, v, w)
    u, v, w = _conj_map(u, v, w, dn.mixer.mu, dn.mixer.nu, dn.mixer.leak)
    for block in dn.post_blocks:
        u, v, w = fold_block(block, u, v, w)

    return complex(u), complex(v), complex(w)


def if_drive_transfer(up: UpConverter, cfg: LoopbackConfig) -> complex:
    """Complex IF drive amplitude reaching the up-mixer input: the drive tone
    amplitude folded through the converter's pre-mixer blocks at +if_freq."""
    t: complex = complex(cfg.drive_amplitude_v)
    for block in up.pre_blocks:
        if isinstance(block, AmpParams):
            t *= 10.0 ** (block.gain_db / 20.0)
        elif isinstance(block, AttenParams):
            t *= 10.0 ** (-block.attenuation_db / 20.0)
        elif isinstance(block, FilterParams):
            t *= filter_response(block, cfg.sample_rate, cfg.if_freq)
        else:
            raise TypeError(f"cannot compose block {type(block).__name__}")
    return t


SCAN_CSV_HEADER = "drive_phase_rad,acc_re,acc_im"


def write_scan_csv(scan: ScanResult, path) -> None:
    """Write the documented scan contract: one row per point, full double
    precision, columns ``drive_phase_rad, acc_re, acc_im``."""
    lines = [SCAN_CSV_HEADER]
    for theta, z in zip(scan.drive_phases, scan.accumulated):
        lines.append(f"{theta:.17g},{z.real:.17g},{z.imag:.17g}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scan_csv(path) -> ScanResult:
    """Ingest a scan CSV (simulator output or externally measured data)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != SCAN_CSV_HEADER:
        raise ValueError(f"{path}: expected header '{SCAN_CSV_HEADER}'")
    phases: list[float] = []
    values: list[complex] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
        try:
            theta, re, im = (float(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        phases.append(theta)
        values.append(complex(re, im))
    return ScanResult(np.asarray(phases), np.asarray(values), config=None)
