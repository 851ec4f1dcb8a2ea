"""Fiber-and-detector model of the forward error, the message QBER and the
per-trial key rate as a function of distance.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

from .attack import AttackParams
from .bounds import KeyRateReport, key_rate
from .errors import DegenerateChannelError, InvalidParameterError

CSV_COLUMNS = ("distance_km", "eta", "p01_prime", "qber", "rate_raw", "rate", "lg_rate")
BISECTION_TOL_KM = 0.01


@dataclass(frozen=True)
class ChannelParams:
    distance_km: float = 0.0
    attenuation_db_per_km: float = 0.20
    detector_efficiency: float = 0.10
    dark_count_prob: float = 1e-5
    misalignment: float = 0.01

    def __post_init__(self):
        for name in ("distance_km", "attenuation_db_per_km"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0.0:
                raise InvalidParameterError(f"{name}={value!r} must be a non-negative number")
            object.__setattr__(self, name, value)
        for name in ("detector_efficiency", "dark_count_prob", "misalignment"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise InvalidParameterError(f"{name}={value!r} is not a probability in [0, 1]")
            object.__setattr__(self, name, value)

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelParams":
        known = {f for f in cls.__dataclass_fields__}
        extra = sorted(set(data) - known)
        if extra:
            raise InvalidParameterError(f"unknown channel keys {extra}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def at(self, distance_km: float) -> "ChannelParams":
        return replace(self, distance_km=distance_km)

    @property
    def eta(self) -> float:
        return fiber_efficiency(self.distance_km, self.attenuation_db_per_km)


def fiber_efficiency(distance_km: float, attenuation_db_per_km: float = 0.20) -> float:
    """Power transmission ``10^(-alpha L / 10)`` of a fiber span."""
    if distance_km < 0:
        raise InvalidParameterError(f"distance_km={distance_km!r} must be non-negative")
    return 10.0 ** (-attenuation_db_per_km * distance_km / 10.0)


def forward_error(params: ChannelParams) -> float:
    """Conditional flip probability of a non-vacuum forward arrival.

    Misaligned genuine clicks plus dark counts, which land in either
    detector with equal chance.
    """
    x = params.eta * params.detector_efficiency
    pd = params.dark_count_prob
    den = x + 2.0 * (1.0 - x) * pd
    if den == 0.0:
        raise DegenerateChannelError("detector never clicks (zero efficiency and zero dark counts)")
    return (x * params.misalignment + (1.0 - x) * pd) / den


def message_qber(params: ChannelParams) -> float:
    """Error rate of the decoded key bits, caused only by dark counts."""
    eta2 = params.eta ** 2
    ed, pd = params.detector_efficiency, params.dark_count_prob
    num = (1.0 - eta2) * eta2 * ed * pd
    den = eta2 * eta2 * ed * ed + 2.0 * (1.0 - eta2) * eta2 * ed * pd
    if den == 0.0:
        raise DegenerateChannelError("no detection is possible on the round trip")
    return num / den


def overall_rate(params: ChannelParams) -> KeyRateReport:
    """Per-trial key rate ``eta^4 * (1 - h(p')/eta - h(e))``.

    Forward and backward efficiencies are both the fiber transmission and
    the two conditional flip probabilities are equal.
    """
    eta = params.eta
    flip = forward_error(params)
    qber = message_qber(params)
    return key_rate(flip, flip, eta, qber, prefactor=eta ** 4)


def lg_rate(report: KeyRateReport) -> Optional[float]:
    """``log10(rate)`` or ``None`` when the rate is not positive."""
    if report.rate_raw is None or report.rate_raw <= 0.0:
        return None
    return math.log10(report.rate_raw)


@dataclass(frozen=True)
class SweepPoint:
    distance_km: float
    eta: float
    report: KeyRateReport

    def row(self) -> dict:
        r = self.report
        return {
            "distance_km": self.distance_km,
            "eta": self.eta,
            "p01_prime": r.p01_prime,
            "qber": r.qber,
            "rate_raw": r.rate_raw,
            "rate": r.rate,
            "lg_rate": lg_rate(r),
        }


@dataclass(frozen=True)
class SweepResult:
    params: ChannelParams
    points: tuple[SweepPoint, ...]
    cutoff_km: Optional[float] = None
    cutoff_bracket: Optional[tuple[float, float]] = field(default=None)

    def to_dict(self) -> dict:
        return {
            "channel": self.params.to_dict(),
            "cutoff_km": self.cutoff_km,
            "points": [dict(p.row(), report=p.report.to_dict()) for p in self.points],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for p in self.points:
            row = p.row()
            writer.writerow(["" if row[c] is None else repr(float(row[c])) for c in CSV_COLUMNS])
        return buf.getvalue()


def _raw(params: ChannelParams, distance: float) -> float:
    return overall_rate(params.at(distance)).rate_raw


def find_cutoff(params: ChannelParams, lo: float, hi: float, tol: float = BISECTION_TOL_KM) -> float:
    """Bisect the sign change of ``rate_raw`` between ``lo`` and ``hi`` km."""
    f_lo, f_hi = _raw(params, lo), _raw(params, hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise InvalidParameterError(f"rate_raw does not change sign on [{lo}, {hi}] km")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = _raw(params, mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sweep(params_template: ChannelParams, distances: Sequence[float]) -> SweepResult:
    """Evaluate :func:`overall_rate` on a grid and locate the zero crossing.

    The crossing is searched between the first pair of consecutive grid
    points where ``rate_raw`` changes sign; ``cutoff_km`` is ``None`` when
    the grid has no sign change.
    """
    distances = [float(d) for d in distances]
    if not distances:
        raise InvalidParameterError("distances must be non-empty")
    if any(d < 0 or not math.isfinite(d) for d in distances):
        raise InvalidParameterError("distances must be finite and non-negative")
    points = []
    for d in distances:
        p = params_template.at(d)
        points.append(SweepPoint(d, p.eta, overall_rate(p)))
    cutoff = bracket = None
    for a, b in zip(points, points[1:]):
        ra, rb = a.report.rate_raw, b.report.rate_raw
        if ra == 0.0:
            cutoff, bracket = a.distance_km, (a.distance_km, a.distance_km)
            break
        if (ra > 0) != (rb > 0):
            lo, hi = sorted((a.distance_km, b.distance_km))
            cutoff, bracket = find_cutoff(params_template, lo, hi), (lo, hi)
            break
    return SweepResult(params_template, tuple(points), cutoff, bracket)


def distance_grid(from_km: float, to_km: float, step_km: float) -> list[float]:
    """Inclusive evenly spaced grid; rounding keeps endpoints exact."""
    if from_km < 0 or to_km < from_km:
        raise InvalidParameterError(f"invalid range [{from_km}, {to_km}] km")
    if from_km == to_km:
        return [float(from_km)]
    if step_km <= 0:
        raise InvalidParameterError(f"step_km={step_km!r} must be positive")
    n = int(math.floor((to_km - from_km) / step_km + 1e-9))
    return [round(from_km + i * step_km, 9) for i in range(n + 1)]


def session_channels(params: ChannelParams):
    """Loss-and-flip channels for the Monte Carlo session.

    Forward: lost with ``1 - eta``, flipped with the analytic forward error.
    Backward: loss only; dark-count errors of the detection stage are not
    part of the Monte Carlo model.
    """
    from .protocol import BackwardChannelParams

    eta = params.eta
    flip = forward_error(params)
    return AttackParams.loss_and_flip(eta, flip), BackwardChannelParams.loss_and_flip(eta, 0.0)
