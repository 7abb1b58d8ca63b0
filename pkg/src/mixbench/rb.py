"""Randomized-benchmarking decay analysis.

Survival probability versus sequence length is fit to ``A * p**m`` by
weighted nonlinear least squares, initialized from a log-linear regression.
The decay parameter converts to a process infidelity through the standard
streamlined-RB convention ``e = (d**2 - 1) * (1 - p) / d**2``; the inverse is
exposed so a different convention can be substituted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

DIMENSIONS = (2, 4)

# Weighting floor: survival points near 0/1 would otherwise get near-zero
# binomial variance and dominate the fit.
SIGMA_FLOOR = 1e-3


def process_infidelity(p: float, d: int) -> float:
    """Process infidelity of a random gate from the RB decay parameter."""
    if not 0 < p <= 1:
        raise ValueError(f"p must be in (0, 1], got {p}")
    if d not in DIMENSIONS:
        raise ValueError(f"dimension must be one of {DIMENSIONS}, got {d}")
    return (d**2 - 1) * (1.0 - p) / d**2


def infidelity_to_p(e: float, d: int) -> float:
    """Inverse of :func:`process_infidelity`."""
    if d not in DIMENSIONS:
        raise ValueError(f"dimension must be one of {DIMENSIONS}, got {d}")
    p = 1.0 - e * d**2 / (d**2 - 1)
    if not 0 < p <= 1:
        raise ValueError(f"infidelity {e} maps outside p in (0, 1]")
    return p


@dataclass(frozen=True)
class RbDataset:
    """(sequence length, survival probability, shots) points for one system.

    ``shots = 0`` marks analytic (noiseless) survival values; such points get
    the uniform weighting floor in fits.
    """

    lengths: np.ndarray
    survival: np.ndarray
    shots: np.ndarray
    dimension: int = 2

    def __post_init__(self) -> None:
        lengths = np.asarray(self.lengths, dtype=int)
        survival = np.asarray(self.survival, dtype=float)
        shots = np.asarray(self.shots, dtype=int)
        if lengths.ndim != 1 or lengths.size == 0:
            raise ValueError("dataset must contain at least one point")
        if survival.shape != lengths.shape or shots.shape != lengths.shape:
            raise ValueError("lengths, survival, and shots must have equal shapes")
        if np.any(lengths < 1):
            raise ValueError("sequence lengths must be >= 1")
        if np.any((survival < 0) | (survival > 1)):
            raise ValueError("survival probabilities must lie in [0, 1]")
        if np.any(shots < 0):
            raise ValueError("shots must be >= 0 (0 flags analytic values)")
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"dimension must be one of {DIMENSIONS}, got {self.dimension}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "survival", survival)
        object.__setattr__(self, "shots", shots)

    def __len__(self) -> int:
        return self.lengths.size


@dataclass(frozen=True)
class RbFit:
    """Fitted decay ``A * p**m`` with standard errors and the derived process
    infidelity.  ``status`` is "ok" unless the decay estimate hit a bound."""

    a: float
    p: float
    a_stderr: float
    p_stderr: float
    dimension: int
    infidelity: float
    infidelity_stderr: float
    status: str = "ok"


def decay_model(m, a, p):
    return a * np.power(p, m)


def gen_synthetic_rb(
    a: float,
    p: float,
    lengths: Sequence[int],
    shots: int | None,
    seed,
    dimension: int = 2,
) -> RbDataset:
    """Synthetic dataset with survival drawn as ``Binomial(shots, A*p^m)/shots``.

    ``shots=None`` is the infinite-shot flag: survival equals ``A*p**m``
    exactly and the shots column records 0.  Deterministic per seed.
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must be in (0, 1], got {p}")
    if not 0 < a <= 1:
        raise ValueError(f"a must be in (0, 1], got {a}")
    m = np.asarray(lengths, dtype=int)
    truth = a * np.power(p, m)
    if np.any((truth < 0) | (truth > 1)):
        raise ValueError("A*p^m must stay inside [0, 1]")
    if shots is None:
        return RbDataset(m, truth, np.zeros_like(m), dimension)
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(seed)
    survived = rng.binomial(shots, truth)
    return RbDataset(m, survived / shots, np.full_like(m, shots), dimension)


def _initial_guess(m: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    """Log-linear regression of survival on length, ignoring non-positive points."""
    mask = s > 0
    if np.count_nonzero(mask) >= 2:
        slope, intercept = np.polyfit(m[mask], np.log(s[mask]), 1)
        p0 = float(np.clip(np.exp(slope), 1e-6, 1.0))
        a0 = float(np.clip(np.exp(intercept), 1e-6, 1.0))
    else:
        p0, a0 = 0.99, float(np.clip(np.max(s), 1e-6, 1.0))
    return a0, p0


def fit_decay(data: RbDataset, maxfev: int = 10000) -> RbFit:
    """Weighted nonlinear least squares of ``A * p**m``.

    Per-point binomial sigma with a floor; parameter standard errors come from
    the residual covariance.  A decay estimate pinned at a bound is clamped
    and flagged in ``status`` rather than silently returned.
    """
    if np.unique(data.lengths).size < 3:
        raise ValueError("fitting needs at least 3 distinct sequence lengths")
    m = data.lengths.astype(float)
    s = data.survival
    sigma = np.ones_like(s)
    counted = data.shots > 0
    sigma[counted] = np.sqrt(
        np.maximum(s[counted] * (1.0 - s[counted]), 0.0) / data.shots[counted]
    )
    sigma = np.maximum(sigma, SIGMA_FLOOR)

    a0, p0 = _initial_guess(m, s)
    lower = [1e-9, 1e-9]
    upper = [1.5, 1.0]
    params, cov = curve_fit(
        decay_model,
        m,
        s,
        p0=[a0, p0],
        sigma=sigma,
        bounds=(lower, upper),
        method="trf",
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
        maxfev=maxfev,
    )
    a_hat, p_hat = float(params[0]), float(params[1])
    errs = np.sqrt(np.abs(np.diag(cov)))
    a_err, p_err = float(errs[0]), float(errs[1])

    status = "ok"
    if p_hat <= lower[1] * (1 + 1e-9):
        status = "clamped"
        p_hat = lower[1]
    elif p_hat >= upper[1] and s[np.argsort(m)][-1] > s[np.argsort(m)][0]:
        # survival rising with length: p pinned at 1 is a clamp, not a fit
        status = "clamped"

    factor = (data.dimension**2 - 1) / data.dimension**2
    return RbFit(
        a=a_hat,
        p=p_hat,
        a_stderr=a_err,
        p_stderr=p_err,
        dimension=data.dimension,
        infidelity=factor * (1.0 - p_hat),
        infidelity_stderr=factor * p_err,
        status=status,
    )


RB_CSV_HEADER = "m,survival,shots"


def write_rb_csv(data: RbDataset, path) -> None:
    lines = [RB_CSV_HEADER]
    for m, s, n in zip(data.lengths, data.survival, data.shots):
        lines.append(f"{m},{s:.17g},{n}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_rb_csv(path, dimension: int = 2) -> RbDataset:
    """Read ``m,survival,shots`` rows; malformed rows are reported with their
    line numbers."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != RB_CSV_HEADER:
        raise ValueError(f"{path}: expected header '{RB_CSV_HEADER}'")
    rows: list[tuple[int, float, int]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
        try:
            m = int(parts[0])
            s = float(parts[1])
            n = int(parts[2])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
        rows.append((m, s, n))
    m, s, n = (np.asarray(col) for col in zip(*rows))
    return RbDataset(m, s.astype(float), n, dimension)


def fit_report_dict(data: RbDataset, fit: RbFit) -> dict:
    """JSON-ready fit report including the fitted curve at the input lengths."""
    return {
        "dimension": fit.dimension,
        "a": fit.a,
        "p": fit.p,
        "a_stderr": fit.a_stderr,
        "p_stderr": fit.p_stderr,
        "process_infidelity": fit.infidelity,
        "process_infidelity_stderr": fit.infidelity_stderr,
        "status": fit.status,
        "curve": [
            {"m": int(m), "survival_fit": float(decay_model(float(m), fit.a, fit.p))}
            for m in np.unique(data.lengths)
        ],
    }
