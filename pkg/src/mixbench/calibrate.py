"""Calibration procedures: LO-leakage nulling via I/Q DC bias and sideband
suppression via IQ predistortion.

Each correction comes in two flavors: a closed-form solution from known mixer
parameters, and a black-box route that only touches what a bench can touch --
a leakage measurement for the bias nulling (mirroring the physical
potentiometer workflow), or a harmonic estimate from a loopback phase scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .blocks import BiasSetting, MixerParams, Predistorter
from .loopback import ScanResult, UpConverter
from .metrics import ProbeConfig, estimate_imbalance, measure_lo_leakage
from .signals import ToneSpec

# Sentinel used when a measurement reports -inf dBc (exact null).
_DBC_FLOOR = -300.0


class ConvergenceError(RuntimeError):
    """A calibration loop failed to reach its target within its budget."""


class InfeasibleBiasError(ValueError):
    """The exact nulling bias lies outside the bias supply range."""

    def __init__(self, b_i: float, b_q: float, limit_v: float):
        self.b_i = b_i
        self.b_q = b_q
        self.limit_v = limit_v
        super().__init__(
            f"nulling bias ({b_i:.6g}, {b_q:.6g}) V exceeds the +/-{limit_v} V supply"
        )


@dataclass(frozen=True)
class OptimizerConfig:
    """Budget and target for the derivative-free nulling loop."""

    max_evals: int = 400
    init_step: float = 0.05
    tol: float = -80.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_evals < 10:
            raise ValueError(f"max_evals must be >= 10, got {self.max_evals}")
        if not self.tol < -40.0:
            raise ValueError(f"tol must be below -40 dBc, got {self.tol}")
        if not (math.isfinite(self.init_step) and self.init_step > 0):
            raise ValueError(f"init_step must be positive, got {self.init_step}")


def solve_null_closed_form(m: MixerParams, limit_v: float = 1.8) -> BiasSetting:
    """Exact bias solving ``mu*b + nu*conj(b) + leak = 0``.

    The 2x2 real system has the closed form
    ``b = (nu*conj(leak) - conj(mu)*leak) / (|mu|^2 - |nu|^2)``; it is singular
    when ``|mu| = |nu|`` (excluded by the mixer invariant).  Solutions outside
    the bias supply range raise :class:`InfeasibleBiasError`.
    """
    d = abs(m.mu) ** 2 - abs(m.nu) ** 2
    if d <= 0:
        raise ValueError("singular nulling system: |mu| must exceed |nu|")
    b = (m.nu * m.leak.conjugate() - m.mu.conjugate() * m.leak) / d
    if abs(b.real) > limit_v or abs(b.imag) > limit_v:
        raise InfeasibleBiasError(b.real, b.imag, limit_v)
    return BiasSetting(b.real, b.imag, limit_v=limit_v)


class TracePoint(NamedTuple):
    b_i: float
    b_q: float
    leakage_dbc: float


@dataclass(frozen=True)
class NullResult:
    """Outcome of a black-box nulling run.

    ``bias`` is the best-evaluated setting (never worse than any traced
    point), ``converged`` says whether the tolerance was met, and
    ``evals_to_tol`` is the 1-based evaluation count at which it first was.
    """

    bias: BiasSetting
    trace: tuple[TracePoint, ...]
    converged: bool
    evaluations: int
    evals_to_tol: int | None
    best_dbc: float


def null_lo_blackbox(
    up: UpConverter,
    probe: ProbeConfig,
    opt: OptimizerConfig,
    tone: ToneSpec,
    limit_v: float = 1.8,
) -> NullResult:
    """Minimize measured LO leakage over (b_i, b_q) with a Nelder-Mead simplex.

    Derivative-free on purpose: it mirrors the two-potentiometer workflow and
    needs nothing but the leakage readout.  One restart at half the initial
    step is taken if the first descent stalls above tolerance.  Non-convergence
    is reported in the result, never silently.
    """
    trace: list[TracePoint] = []

    def objective(x: np.ndarray) -> float:
        b_i, b_q = float(x[0]), float(x[1])
        if abs(b_i) > limit_v or abs(b_q) > limit_v:
            return 1e3
        dbc = measure_lo_leakage(up, BiasSetting(b_i, b_q, limit_v=limit_v), probe, tone)
        if dbc == -math.inf:
            dbc = _DBC_FLOOR
        trace.append(TracePoint(b_i, b_q, dbc))
        return dbc

    def run_simplex(x0: np.ndarray, step: float, budget: int) -> None:
        simplex = np.array([x0, x0 + [step, 0.0], x0 + [0.0, step]])
        optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "maxfev": budget,
                "xatol": 1e-9,
                "fatol": 1e-12,
            },
        )

    x0 = np.array([up.bias.b_i, up.bias.b_q])
    run_simplex(x0, opt.init_step, opt.max_evals)
    best = min(trace, key=lambda t: t.leakage_dbc)
    if best.leakage_dbc > opt.tol and len(trace) < opt.max_evals:
        run_simplex(
            np.array([best.b_i, best.b_q]),
            opt.init_step / 2.0,
            opt.max_evals - len(trace),
        )
        best = min(trace, key=lambda t: t.leakage_dbc)

    evals_to_tol = next(
        (k for k, t in enumerate(trace, start=1) if t.leakage_dbc <= opt.tol), None
    )
    return NullResult(
        bias=BiasSetting(best.b_i, best.b_q, limit_v=limit_v),
        trace=tuple(trace),
        converged=best.leakage_dbc <= opt.tol,
        evaluations=len(trace),
        evals_to_tol=evals_to_tol,
        best_dbc=best.leakage_dbc,
    )


class PredistortDesign(NamedTuple):
    predistorter: Predistorter
    mu_eff: complex


def design_predistorter(m: MixerParams) -> PredistortDesign:
    """Invert the (mu, nu) model: with ``a = 1`` and ``b = -nu/mu`` the
    composite conjugate transfer ``mu*b + nu*conj(a)`` is exactly zero.

    Returns the predistorter and the composite direct transfer
    ``mu_eff = mu*a + nu*conj(b)`` for gain bookkeeping.
    """
    d = abs(m.mu) ** 2 - abs(m.nu) ** 2
    if d <= 0:
        raise ValueError("singular predistortion design: |mu| must exceed |nu|")
    a = 1.0 + 0.0j
    b = -m.nu * a.conjugate() / m.mu
    mu_eff = m.mu * a + m.nu * b.conjugate()
    return PredistortDesign(Predistorter(a, b), complex(mu_eff))


@dataclass(frozen=True)
class ScanCalibration:
    """Corrections derived from a loopback phase scan.

    A composite scan conflates up- and down-converter imperfections; the whole
    estimate is attributed to the transmit side (``attribution = "up"``),
    mirroring bench practice when only loopback data exists.  Valid nulling
    therefore needs the receive side ideal or independently calibrated.
    ``mu_eff`` is the predistorter+mixer direct transfer relative to the
    mixer's own ``mu``.
    """

    bias: BiasSetting
    predistorter: Predistorter
    mu_eff: complex
    estimate_mu: complex
    estimate_nu: complex
    estimate_c: complex
    attribution: str = "up"


def calibrate_from_scan(
    scan: ScanResult,
    mixer_drive: complex | None = None,
    limit_v: float = 1.8,
) -> ScanCalibration:
    """Estimate (mu', nu', c') from the scan and return the closed-form bias
    and predistorter for the estimated model.

    The predistorter depends only on the image-to-direct ratio, so the
    accumulator's arbitrary units drop out of it.  The bias is a voltage at
    the mixer IF port: the scan-referred offset must be rescaled by
    ``mixer_drive``, the complex IF drive amplitude reaching the mixer input
    (drive tone amplitude times any pre-mixer block transfer).  When omitted
    it is taken from the scan's config echo, assuming no pre-mixer blocks.

    Requires a scan taken with the characterization ("folded") readout: a
    boxcar scan carries no image or carrier information.
    """
    est = estimate_imbalance(scan)
    if mixer_drive is None:
        if scan.config is None:
            raise ValueError(
                "mixer_drive is required for scans without a config echo"
            )
        mixer_drive = scan.config.drive_amplitude_v
    if abs(est.nu_hat) >= abs(est.mu_hat):
        raise ValueError(
            "estimated image is not below the direct transfer; scan cannot be calibrated"
        )
    ratio = est.nu_hat / est.mu_hat
    # Leak referred to the mixer: c_hat and mu_hat share the post-mixer chain,
    # but only mu_hat carries the drive amplitude.
    leak_over_mu = est.c_hat / est.mu_hat * mixer_drive
    b = (ratio * leak_over_mu.conjugate() - leak_over_mu) / (1.0 - abs(ratio) ** 2)
    if abs(b.real) > limit_v or abs(b.imag) > limit_v:
        raise InfeasibleBiasError(b.real, b.imag, limit_v)
    design = design_predistorter(MixerParams(mu=1.0, nu=ratio))
    return ScanCalibration(
        bias=BiasSetting(b.real, b.imag, limit_v=limit_v),
        predistorter=design.predistorter,
        mu_eff=design.mu_eff,
        estimate_mu=est.mu_hat,
        estimate_nu=est.nu_hat,
        estimate_c=est.c_hat,
    )
