"""Analytic key-rate bound for the modified Ping-Pong protocol.

The chain is: per-branch forward entropy deficit ``h(p')``, averaged over the
two travel branches, divided by the backward efficiency to get Eve's
conditional entropy on received rounds, minus the error-correction cost
``h(e)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateChannelError, InvalidParameterError
from .qmath import basis, binary_entropy, projector, tensor, von_neumann_entropy

REPORT_FIELDS = (
    "p01_prime", "p10_prime", "eta_bwd", "qber", "h_fwd", "eve_bound",
    "h_e", "rate_raw", "rate", "prefactor", "degenerate", "diagnostic",
)


def _prob(name: str, value) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0.0 or value > 1.0:
        raise InvalidParameterError(f"{name}={value!r} is not a probability in [0, 1]")
    return value


@dataclass(frozen=True)
class KeyRateReport:
    """Key rate with every intermediate term.

    ``rate_raw = prefactor * (eve_bound - h_e)`` and may be negative;
    ``rate`` is its positive part. ``prefactor`` is 1 for rates per detected
    pair. Degenerate reports carry ``rate == 0`` and ``None`` for the terms
    that could not be evaluated.
    """

    p01_prime: Optional[float]
    p10_prime: Optional[float]
    eta_bwd: Optional[float]
    qber: Optional[float]
    h_fwd: Optional[float]
    eve_bound: Optional[float]
    h_e: Optional[float]
    rate_raw: Optional[float]
    rate: float
    prefactor: float = 1.0
    degenerate: bool = False
    diagnostic: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "KeyRateReport":
        return cls(**{k: data[k] for k in REPORT_FIELDS if k in data})

    @classmethod
    def degenerate_report(cls, diagnostic: str, prefactor: float = 1.0, **known) -> "KeyRateReport":
        fields = {k: None for k in REPORT_FIELDS[:8]}
        fields.update(known)
        return cls(**fields, rate=0.0, prefactor=prefactor, degenerate=True, diagnostic=diagnostic)


def forward_entropy_bound(p01_prime: float, p10_prime: float) -> float:
    """Average forward entropy deficit ``(h(p'01) + h(p'10)) / 2``."""
    return 0.5 * (binary_entropy(_prob("p01_prime", p01_prime)) + binary_entropy(_prob("p10_prime", p10_prime)))


def received_entropy_bound(h_fwd_avg: float, eta_bwd: float) -> float:
    """Lower bound on ``S(A'|AE)`` over rounds Bob actually receives.

    Unreceived rounds are assigned a full bit of entropy, which pushes the
    whole deficit onto the received fraction. The result can be negative.
    """
    h_fwd_avg = float(h_fwd_avg)
    if not np.isfinite(h_fwd_avg) or h_fwd_avg < 0.0:
        raise InvalidParameterError(f"h_fwd_avg={h_fwd_avg!r} must be non-negative")
    eta_bwd = _prob("eta_bwd", eta_bwd)
    if eta_bwd == 0.0:
        raise DegenerateChannelError("backward efficiency is zero; no round is ever received")
    return 1.0 - h_fwd_avg / eta_bwd


def key_rate(
    p01_prime: float,
    p10_prime: float,
    eta_bwd: float,
    qber: float,
    prefactor: float = 1.0,
) -> KeyRateReport:
    """Asymptotic secret-key rate ``1 - (h(p'01)+h(p'10))/(2 eta_bwd) - h(e)``.

    ``prefactor`` scales ``rate_raw`` (e.g. a per-trial detection
    probability). A zero backward efficiency gives a degenerate report with
    rate 0 instead of raising.
    """
    p01_prime = _prob("p01_prime", p01_prime)
    p10_prime = _prob("p10_prime", p10_prime)
    eta_bwd = _prob("eta_bwd", eta_bwd)
    qber = _prob("qber", qber)
    prefactor = _prob("prefactor", prefactor)
    h_fwd = forward_entropy_bound(p01_prime, p10_prime)
    h_e = binary_entropy(qber)
    if eta_bwd == 0.0:
        return KeyRateReport.degenerate_report(
            "backward efficiency is zero; no round is ever received",
            prefactor=prefactor,
            p01_prime=p01_prime, p10_prime=p10_prime, eta_bwd=eta_bwd,
            qber=qber, h_fwd=h_fwd, h_e=h_e,
        )
    eve = received_entropy_bound(h_fwd, eta_bwd)
    raw = prefactor * (eve - h_e)
    return KeyRateReport(
        p01_prime=p01_prime,
        p10_prime=p10_prime,
        eta_bwd=eta_bwd,
        qber=qber,
        h_fwd=h_fwd,
        eve_bound=eve,
        h_e=h_e,
        rate_raw=raw,
        rate=max(0.0, raw),
        prefactor=prefactor,
    )


def conditional_entropy(rho0: np.ndarray, rho1: np.ndarray) -> float:
    """``S(A'|X)`` for ``rho^{A'X} = 1/2 |0><0| ⊗ rho0 + 1/2 |1><1| ⊗ rho1``."""
    joint = 0.5 * tensor(projector(basis(2, 0)), rho0) + 0.5 * tensor(projector(basis(2, 1)), rho1)
    return von_neumann_entropy(joint) - von_neumann_entropy(0.5 * (rho0 + rho1))


def flagged_conditional_entropy(received: tuple, unreceived: tuple, eta_bwd: float) -> float:
    """``S(A'|F AE)`` with an explicit orthogonal received/unreceived flag.

    ``received`` and ``unreceived`` are ``(rho_bit0, rho_bit1)`` pairs on the
    same Alice-Eve space. The flag register ``F`` holds ``|r>`` with weight
    ``eta_bwd`` and ``|u>`` otherwise; entropies are taken of the full
    block-diagonal matrices, so nothing is assumed about how they split.
    """
    eta_bwd = _prob("eta_bwd", eta_bwd)
    fr, fu = projector(basis(2, 0)), projector(basis(2, 1))
    blocks = []
    for bit in (0, 1):
        blocks.append(eta_bwd * tensor(fr, received[bit]) + (1 - eta_bwd) * tensor(fu, unreceived[bit]))
    a0, a1 = projector(basis(2, 0)), projector(basis(2, 1))
    joint = 0.5 * tensor(a0, blocks[0]) + 0.5 * tensor(a1, blocks[1])
    marginal = 0.5 * (blocks[0] + blocks[1])
    return von_neumann_entropy(joint) - von_neumann_entropy(marginal)
