"""Shipped example chains and bench settings.

The composite targets (conversion gain 31 / 7 / -13 dB for DN / UPH / UPL,
UPH input IIP3 21 dBm, DN input IIP3 -3.5 dBm) are met by reconstruction:
the per-part numbers below combine published gain/NF figures with assumed
intercept points and pad values chosen so the cascade reproduces the
composite specs.  Where a part datasheet is silent the value is an
engineering assumption, not a measured fact -- see the inline notes.
"""

from __future__ import annotations

import math

from .blocks import AmpParams, AttenParams, FilterParams, MixerParams
from .budget import ChainSpec
from .loopback import LoopbackConfig
from .signals import QuantizerSpec, dbm_to_vpeak

# Typical image rejection of the mixer: 27 dBc corresponds to a pure phase
# imbalance of ~5.12 degrees (|nu/mu| = tan(phi/2) = 0.0447).
MIXER_IMAGE_RATIO = 0.0447
MIXER_PHASE_IMBALANCE_RAD = 2.0 * math.atan(MIXER_IMAGE_RATIO)

# Conversion loss is not published at this granularity; 9 dB is a typical
# passive-IQ-mixer assumption that also makes the DN cascade close at 31 dB.
MIXER_CONV_LOSS_DB = 9.0

# LO feedthrough sized from the 51.5 dB LO-to-RF isolation at 0 dBm drive.
MIXER_LEAK_VPK = dbm_to_vpeak(0.0 - 51.5)
MIXER_LEAK_PHASE_RAD = 0.6


def rf_mixer(
    image_ratio: float = MIXER_IMAGE_RATIO,
    conv_loss_db: float = MIXER_CONV_LOSS_DB,
    leak_vpk: float = MIXER_LEAK_VPK,
) -> MixerParams:
    """Mixer model at its typical corner: 27 dBc image, 9 dB loss, -51.5 dBc leak."""
    return MixerParams.from_imbalance(
        gain_ratio=1.0,
        phase_rad=2.0 * math.atan(image_ratio),
        conv_loss_db=conv_loss_db,
        leak=leak_vpk * complex(math.cos(MIXER_LEAK_PHASE_RAD), math.sin(MIXER_LEAK_PHASE_RAD)),
    )


def ideal_mixer(conv_loss_db: float = 0.0) -> MixerParams:
    return MixerParams.from_imbalance(conv_loss_db=conv_loss_db)


def if_amp() -> AmpParams:
    """IF amplifier: 22 dB gain, 1.1 dB NF (published); P1dB/IIP3 assumed so the
    DN cascade lands at -13.5 dBm input P1dB and -3.5 dBm input IIP3."""
    return AmpParams(gain_db=22.0, nf_db=1.1, p1db_in_dbm=-2.5, iip3_dbm=7.5)


def rf_amp() -> AmpParams:
    """RF/LO amplifier: 20 dB gain, 1.8 dB NF, 16 dBm output P1dB (published,
    so about -3 dBm input-referred); IIP3 assumed so the UPH cascade lands at
    21 dBm input IIP3."""
    return AmpParams(gain_db=20.0, nf_db=1.8, p1db_in_dbm=-3.0, iip3_dbm=8.0)


def pad(db: float) -> AttenParams:
    return AttenParams(attenuation_db=db)


def if_lowpass() -> FilterParams:
    """IF low-pass.  The hardware cuts off at 500 MHz; a discrete-time proxy at
    1 GSPS needs Nyquist headroom, so the shipped filter sits at 400 MHz."""
    return FilterParams(cutoff=400e6, taps=101)


def dn_chain() -> ChainSpec:
    """Down converter: mixer, two IF gain stages with interstage pads, low-pass.

    Cascade: -9 + 22 - 2 + 22 - 2 = 31 dB conversion gain.
    """
    return ChainSpec(
        role="DN",
        blocks=(
            ("mixer", rf_mixer()),
            ("if_amp1", if_amp()),
            ("pad1", pad(2.0)),
            ("if_amp2", if_amp()),
            ("pad2", pad(2.0)),
            ("if_lpf", if_lowpass()),
        ),
        lo_drive_dbm=0.0,
    )


def uph_chain() -> ChainSpec:
    """High-power up converter: IF pad, mixer, RF amplifier.

    Cascade: -4 - 9 + 20 = 7 dB conversion gain; input IIP3 = 8 + 13 = 21 dBm.
    """
    return ChainSpec(
        role="UPH",
        blocks=(
            ("if_pad", pad(4.0)),
            ("mixer", rf_mixer()),
            ("rf_amp", rf_amp()),
        ),
        lo_drive_dbm=0.0,
    )


def upl_chain() -> ChainSpec:
    """Low-power up converter: the UPH without the RF amplifier.

    Cascade: -4 - 9 = -13 dB conversion gain.
    """
    return ChainSpec(
        role="UPL",
        blocks=(
            ("if_pad", pad(4.0)),
            ("mixer", rf_mixer()),
        ),
        lo_drive_dbm=0.0,
    )


def bench_loopback_config() -> LoopbackConfig:
    """Noise-bench settings: boxcar readout, 16-bit converters, thermal noise.

    The RF path attenuation stands in for the cabling/level plan: 43 dB puts
    the DN input at -32 dBm (inside its < -27 dBm drive limit), keeps the ADC
    clear of clipping, and lands the scan ripple at the measured short-term
    linearity scale (a few 1e-4).
    """
    return LoopbackConfig(
        if_freq=63.5e6,
        lo_freq=6.5e9,
        sample_rate=1.0e9,
        dac=QuantizerSpec(16, 1.0),
        adc=QuantizerSpec(16, 1.0),
        accum_len=2000,
        rf_path_atten_db=43.0,
        n_phase_points=64,
        drive_amplitude_v=0.5,
        noise_on=True,
        seed=20260808,
        readout="single",
    )


def example_bench_dict() -> dict:
    """JSON-ready bench configuration mirroring the shipped chain builders."""
    mixer = {
        "type": "mixer",
        "conv_loss_db": MIXER_CONV_LOSS_DB,
        "gain_imbalance": 1.0,
        "phase_imbalance_deg": math.degrees(MIXER_PHASE_IMBALANCE_RAD),
        "leak_vpk": MIXER_LEAK_VPK,
        "leak_phase_rad": MIXER_LEAK_PHASE_RAD,
    }
    if_amp_d = {
        "type": "amp",
        "gain_db": 22.0,
        "nf_db": 1.1,
        "p1db_in_dbm": -2.5,
        "iip3_dbm": 7.5,
    }
    rf_amp_d = {
        "type": "amp",
        "gain_db": 20.0,
        "nf_db": 1.8,
        "p1db_in_dbm": -3.0,
        "iip3_dbm": 8.0,
    }
    return {
        "chains": {
            "dn": {
                "role": "DN",
                "lo_drive_dbm": 0.0,
                "blocks": [
                    dict(mixer, label="mixer"),
                    dict(if_amp_d, label="if_amp1"),
                    {"type": "atten", "label": "pad1", "attenuation_db": 2.0},
                    dict(if_amp_d, label="if_amp2"),
                    {"type": "atten", "label": "pad2", "attenuation_db": 2.0},
                    {"type": "filter", "label": "if_lpf", "cutoff_hz": 400e6, "taps": 101},
                ],
            },
            "uph": {
                "role": "UPH",
                "lo_drive_dbm": 0.0,
                "blocks": [
                    {"type": "atten", "label": "if_pad", "attenuation_db": 4.0},
                    dict(mixer, label="mixer"),
                    dict(rf_amp_d, label="rf_amp"),
                ],
            },
            "upl": {
                "role": "UPL",
                "lo_drive_dbm": 0.0,
                "blocks": [
                    {"type": "atten", "label": "if_pad", "attenuation_db": 4.0},
                    dict(mixer, label="mixer"),
                ],
            },
        },
        "loopback": {
            "up_chain": "uph",
            "dn_chain": "dn",
            "if_freq_hz": 63.5e6,
            "lo_freq_hz": 6.5e9,
            "sample_rate_hz": 1.0e9,
            "dac_bits": 16,
            "adc_bits": 16,
            "full_scale_v": 1.0,
            "accum_len": 2000,
            "rf_path_atten_db": 43.0,
            "n_phase_points": 64,
            "drive_amplitude_v": 0.5,
            "noise_on": True,
            "seed": 20260808,
            "readout": "single",
        },
        "probe": {
            "sample_rate_hz": 1.0e9,
            "n_samples": 1000,
            "tone_freq_hz": 50e6,
            "tone_amplitude_v": 0.5,
        },
        "optimizer": {
            "max_evals": 400,
            "init_step_v": 0.05,
            "tol_dbc": -80.0,
            "seed": 0,
        },
        "budget": {"input_dbm": {"dn": -60.0, "uph": -20.0, "upl": -20.0}},
    }
