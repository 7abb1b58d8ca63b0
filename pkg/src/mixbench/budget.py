"""Static cascade analysis: total gain, Friis noise figure, cascaded IIP3,
and per-stage signal levels for a converter chain.

Conventions: an attenuator's noise figure equals its attenuation, an ideal
filter contributes 0 dB NF in its passband, and a passive mixer's NF equals
its conversion loss.  Stages without a defined IIP3 are treated as ideal.
The IIP3 cascade uses the power-addition rule
``1/P_total = sum_k(G_before_k / P_k)`` in linear units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .blocks import AmpParams, AttenParams, FilterParams, MixerParams

ChainBlock = AmpParams | AttenParams | FilterParams | MixerParams

ROLES = ("UPH", "UPL", "DN")

# Conventional engineering margin: warn when a stage input gets within 3 dB
# of its compression point.
COMPRESSION_WARN_MARGIN_DB = 3.0


@dataclass(frozen=True)
class ChainSpec:
    """Ordered block list for one converter module plus its LO drive level."""

    role: str
    blocks: tuple[tuple[str, ChainBlock], ...]
    lo_drive_dbm: float = 0.0

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        blocks = tuple((str(label), block) for label, block in self.blocks)
        if not any(isinstance(b, MixerParams) for _, b in blocks):
            raise ValueError(f"chain {self.role} must contain at least one mixer")
        object.__setattr__(self, "blocks", blocks)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.blocks)


def _stage_view(block: ChainBlock) -> tuple[float, float, float, float]:
    """(gain_db, nf_db, iip3_dbm, p1db_in_dbm) of one block for cascade math."""
    if isinstance(block, AmpParams):
        return block.gain_db, block.nf_db, block.iip3_dbm, block.p1db_in_dbm
    if isinstance(block, AttenParams):
        return -block.attenuation_db, block.attenuation_db, math.inf, math.inf
    if isinstance(block, MixerParams):
        loss = block.conv_loss_db
        return -loss, loss, math.inf, math.inf
    if isinstance(block, FilterParams):
        return 0.0, 0.0, math.inf, math.inf
    raise TypeError(f"unknown chain block {type(block).__name__}")


def cascade_gain(chain: ChainSpec) -> float:
    """Total chain gain in dB (attenuation and conversion loss negative)."""
    return sum(_stage_view(b)[0] for _, b in chain.blocks)


def cascade_nf(chain: ChainSpec) -> float:
    """Friis noise figure of the chain in dB."""
    f_total = 1.0
    g_product = 1.0
    for _, block in chain.blocks:
        gain_db, nf_db, _, _ = _stage_view(block)
        f_stage = 10.0 ** (nf_db / 10.0)
        f_total += (f_stage - 1.0) / g_product
        g_product *= 10.0 ** (gain_db / 10.0)
    return 10.0 * math.log10(f_total)


def cascade_iip3(chain: ChainSpec) -> float:
    """Cascaded input-referred IIP3 in dBm (power-addition rule).

    Note the rule adds distortion contributions as powers; coherent in-phase
    addition of same-sign cubic stages can land up to 3 dB below it.
    """
    inv_total = 0.0
    g_product = 1.0
    for _, block in chain.blocks:
        gain_db, _, iip3_dbm, _ = _stage_view(block)
        if math.isfinite(iip3_dbm):
            inv_total += g_product / 10.0 ** (iip3_dbm / 10.0)
        g_product *= 10.0 ** (gain_db / 10.0)
    if inv_total == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / inv_total)


@dataclass(frozen=True)
class StageRow:
    label: str
    gain_db: float
    input_dbm: float
    output_dbm: float
    cum_gain_db: float
    cum_nf_db: float
    cum_iip3_dbm: float
    compression_warning: bool


@dataclass(frozen=True)
class BudgetReport:
    """Per-stage running levels and cumulative cascade figures for one chain."""

    role: str
    input_dbm: float
    rows: tuple[StageRow, ...]
    total_gain_db: float
    total_nf_db: float
    total_iip3_dbm: float
    output_dbm: float
    warnings: tuple[str, ...]

    def format_text(self) -> str:
        lines = [
            f"chain {self.role}  (input {self.input_dbm:+.2f} dBm)",
            f"{'stage':<14}{'gain dB':>9}{'in dBm':>10}{'out dBm':>10}"
            f"{'cum G dB':>10}{'cum NF dB':>11}{'cum IIP3':>10}  flag",
        ]
        for r in self.rows:
            iip3 = f"{r.cum_iip3_dbm:9.2f}" if math.isfinite(r.cum_iip3_dbm) else "      inf"
            flag = "COMPRESSION" if r.compression_warning else ""
            lines.append(
                f"{r.label:<14}{r.gain_db:9.2f}{r.input_dbm:10.2f}{r.output_dbm:10.2f}"
                f"{r.cum_gain_db:10.2f}{r.cum_nf_db:11.3f} {iip3}  {flag}"
            )
        iip3 = (
            f"{self.total_iip3_dbm:.2f} dBm" if math.isfinite(self.total_iip3_dbm) else "inf"
        )
        lines.append(
            f"totals: gain {self.total_gain_db:.2f} dB, NF {self.total_nf_db:.3f} dB, "
            f"IIP3 {iip3}, output {self.output_dbm:+.2f} dBm"
        )
        if self.warnings:
            lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def budget_report(
    chain: ChainSpec,
    input_dbm: float,
    warn_margin_db: float = COMPRESSION_WARN_MARGIN_DB,
) -> BudgetReport:
    """Walk the chain computing running levels and cumulative cascade figures.

    Any stage whose input exceeds its ``p1db_in_dbm - warn_margin_db`` is
    flagged as a compression risk.
    """
    rows: list[StageRow] = []
    warnings: list[str] = []
    level = input_dbm
    cum_gain = 0.0
    f_total = 1.0
    g_product = 1.0
    inv_iip3 = 0.0
    for label, block in chain.blocks:
        gain_db, nf_db, iip3_dbm, p1db_dbm = _stage_view(block)
        warn = math.isfinite(p1db_dbm) and level > p1db_dbm - warn_margin_db
        if warn:
            warnings.append(
                f"{label}: input {level:.2f} dBm within {warn_margin_db:.1f} dB "
                f"of P1dB ({p1db_dbm:.2f} dBm)"
            )
        f_total += (10.0 ** (nf_db / 10.0) - 1.0) / g_product
        if math.isfinite(iip3_dbm):
            inv_iip3 += g_product / 10.0 ** (iip3_dbm / 10.0)
        g_product *= 10.0 ** (gain_db / 10.0)
        out_level = level + gain_db
        cum_gain += gain_db
        rows.append(
            StageRow(
                label=label,
                gain_db=gain_db,
                input_dbm=level,
                output_dbm=out_level,
                cum_gain_db=cum_gain,
                cum_nf_db=10.0 * math.log10(f_total),
                cum_iip3_dbm=(
                    10.0 * math.log10(1.0 / inv_iip3) if inv_iip3 > 0 else math.inf
                ),
                compression_warning=warn,
            )
        )
        level = out_level
    last = rows[-1]
    return BudgetReport(
        role=chain.role,
        input_dbm=input_dbm,
        rows=tuple(rows),
        total_gain_db=last.cum_gain_db,
        total_nf_db=last.cum_nf_db,
        total_iip3_dbm=last.cum_iip3_dbm,
        output_dbm=last.output_dbm,
        warnings=tuple(warnings),
    )
