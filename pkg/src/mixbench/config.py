"""Bench configuration loading and validation.

The config file is JSON (documented in the README): named converter chains,
a loopback section referencing two of them, a spectral probe, and optimizer
settings.  Syntax errors carry the line/column from the JSON parser; semantic
errors name the exact config path (``chains.dn.blocks[2].gain_db``) so a hand
edit is easy to locate.  Every module-level invariant is validated at load,
before any computation starts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .blocks import (
    AmpParams,
    AttenParams,
    BiasSetting,
    FilterParams,
    MixerParams,
    Predistorter,
)
from .budget import ChainSpec
from .calibrate import OptimizerConfig
from .loopback import DownConverter, LoopbackConfig, UpConverter
from .metrics import ProbeConfig
from .signals import QuantizerSpec, ToneSpec


class ConfigError(ValueError):
    """Invalid configuration file; message names the offending path."""


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return obj[key]


def _number(obj: dict, key: str, path: str, default=None) -> float:
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return default
    v = obj[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ConfigError(f"{path}.{key}: expected a finite number, got {v!r}")
    return float(v)


def _integer(obj: dict, key: str, path: str, default=None) -> int:
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    return v


def _parse_block(entry: dict, path: str):
    if not isinstance(entry, dict):
        raise ConfigError(f"{path}: expected an object, got {type(entry).__name__}")
    kind = _need(entry, "type", path)
    label = entry.get("label", kind)
    try:
        if kind == "amp":
            block = AmpParams(
                gain_db=_number(entry, "gain_db", path),
                nf_db=_number(entry, "nf_db", path, 0.0),
                p1db_in_dbm=_number(entry, "p1db_in_dbm", path, math.inf),
                iip3_dbm=_number(entry, "iip3_dbm", path, math.inf),
            )
        elif kind == "atten":
            block = AttenParams(attenuation_db=_number(entry, "attenuation_db", path))
        elif kind == "filter":
            block = FilterParams(
                cutoff=_number(entry, "cutoff_hz", path),
                taps=_integer(entry, "taps", path, 129),
            )
        elif kind == "mixer":
            if "mu_re" in entry:
                block = MixerParams(
                    mu=complex(_number(entry, "mu_re", path), _number(entry, "mu_im", path, 0.0)),
                    nu=complex(_number(entry, "nu_re", path, 0.0), _number(entry, "nu_im", path, 0.0)),
                    leak=complex(
                        _number(entry, "leak_re", path, 0.0), _number(entry, "leak_im", path, 0.0)
                    ),
                )
            else:
                leak_vpk = _number(entry, "leak_vpk", path, 0.0)
                leak_phase = _number(entry, "leak_phase_rad", path, 0.0)
                block = MixerParams.from_imbalance(
                    gain_ratio=_number(entry, "gain_imbalance", path, 1.0),
                    phase_rad=math.radians(_number(entry, "phase_imbalance_deg", path, 0.0)),
                    conv_loss_db=_number(entry, "conv_loss_db", path, 0.0),
                    leak=leak_vpk * complex(math.cos(leak_phase), math.sin(leak_phase)),
                )
        else:
            raise ConfigError(f"{path}.type: unknown block type {kind!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return str(label), block


def _parse_chain(name: str, entry: dict, path: str) -> ChainSpec:
    if not isinstance(entry, dict):
        raise ConfigError(f"{path}: expected an object")
    role = _need(entry, "role", path)
    blocks_raw = _need(entry, "blocks", path)
    if not isinstance(blocks_raw, list) or not blocks_raw:
        raise ConfigError(f"{path}.blocks: expected a non-empty list")
    blocks = tuple(
        _parse_block(b, f"{path}.blocks[{i}]") for i, b in enumerate(blocks_raw)
    )
    try:
        return ChainSpec(
            role=role, blocks=blocks, lo_drive_dbm=_number(entry, "lo_drive_dbm", path, 0.0)
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_bias(entry: dict, path: str) -> BiasSetting:
    try:
        return BiasSetting(
            b_i=_number(entry, "b_i_v", path),
            b_q=_number(entry, "b_q_v", path),
            limit_v=_number(entry, "limit_v", path, 1.8),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_predistorter(entry: dict, path: str) -> Predistorter:
    t = _need(entry, "t", path)
    try:
        return Predistorter.from_matrix(t)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class LoopbackBench:
    """Loopback section resolved against the chain table."""

    config: LoopbackConfig
    up: UpConverter
    dn: DownConverter
    up_chain_name: str
    dn_chain_name: str


@dataclass(frozen=True)
class BenchConfig:
    chains: dict[str, ChainSpec]
    loopback: LoopbackBench | None
    probe: ProbeConfig
    probe_tone: ToneSpec
    optimizer: OptimizerConfig
    budget_input_dbm: dict[str, float]


def parse_bench_config(raw: dict) -> BenchConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")

    chains_raw = _need(raw, "chains", "top level")
    if not isinstance(chains_raw, dict) or not chains_raw:
        raise ConfigError("chains: expected a non-empty object")
    chains = {
        name: _parse_chain(name, entry, f"chains.{name}")
        for name, entry in chains_raw.items()
    }

    loopback = None
    if "loopback" in raw:
        lb = raw["loopback"]
        path = "loopback"
        up_name = _need(lb, "up_chain", path)
        dn_name = _need(lb, "dn_chain", path)
        for ref in (up_name, dn_name):
            if ref not in chains:
                raise ConfigError(f"{path}: references unknown chain {ref!r}")
        bits_dac = _integer(lb, "dac_bits", path, 16)
        bits_adc = _integer(lb, "adc_bits", path, 16)
        fs_v = _number(lb, "full_scale_v", path, 1.0)
        try:
            cfg = LoopbackConfig(
                if_freq=_number(lb, "if_freq_hz", path),
                lo_freq=_number(lb, "lo_freq_hz", path),
                sample_rate=_number(lb, "sample_rate_hz", path, 1.0e9),
                dac=QuantizerSpec(bits_dac, fs_v) if bits_dac > 0 else None,
                adc=QuantizerSpec(bits_adc, fs_v) if bits_adc > 0 else None,
                accum_len=_integer(lb, "accum_len", path, 2000),
                rf_path_atten_db=_number(lb, "rf_path_atten_db", path, 0.0),
                n_phase_points=_integer(lb, "n_phase_points", path, 64),
                drive_amplitude_v=_number(lb, "drive_amplitude_v", path, 0.5),
                noise_on=bool(lb.get("noise_on", False)),
                seed=_integer(lb, "seed", path, 0),
                readout=str(lb.get("readout", "folded")),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        bias = _parse_bias(lb["bias"], f"{path}.bias") if "bias" in lb else None
        pre = (
            _parse_predistorter(lb["predistorter"], f"{path}.predistorter")
            if "predistorter" in lb
            else None
        )
        try:
            up = UpConverter.from_chain(chains[up_name], bias=bias, predistorter=pre)
            dn = DownConverter.from_chain(chains[dn_name])
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        loopback = LoopbackBench(cfg, up, dn, up_name, dn_name)

    probe_raw = raw.get("probe", {})
    try:
        probe = ProbeConfig(
            sample_rate=_number(probe_raw, "sample_rate_hz", "probe", 1.0e9),
            n_samples=_integer(probe_raw, "n_samples", "probe", 1000),
        )
        probe_tone = ToneSpec(
            freq=_number(probe_raw, "tone_freq_hz", "probe", 50e6),
            amplitude=_number(probe_raw, "tone_amplitude_v", "probe", 0.5),
        )
    except ValueError as exc:
        raise ConfigError(f"probe: {exc}") from None

    opt_raw = raw.get("optimizer", {})
    try:
        optimizer = OptimizerConfig(
            max_evals=_integer(opt_raw, "max_evals", "optimizer", 400),
            init_step=_number(opt_raw, "init_step_v", "optimizer", 0.05),
            tol=_number(opt_raw, "tol_dbc", "optimizer", -80.0),
            seed=_integer(opt_raw, "seed", "optimizer", 0),
        )
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}") from None

    budget_raw = raw.get("budget", {})
    input_map_raw = budget_raw.get("input_dbm", {})
    if not isinstance(input_map_raw, dict):
        raise ConfigError("budget.input_dbm: expected an object of chain -> dBm")
    budget_input = {}
    for name, level in input_map_raw.items():
        if name not in chains:
            raise ConfigError(f"budget.input_dbm: references unknown chain {name!r}")
        if not isinstance(level, (int, float)) or isinstance(level, bool):
            raise ConfigError(f"budget.input_dbm.{name}: expected a number")
        budget_input[name] = float(level)

    return BenchConfig(
        chains=chains,
        loopback=loopback,
        probe=probe,
        probe_tone=probe_tone,
        optimizer=optimizer,
        budget_input_dbm=budget_input,
    )


def load_bench_config(path) -> BenchConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_bench_config(raw)
