"""Eve's collective attack on the forward (Bob to Alice) channel.

The travel system lives in the ordered qutrit basis ``(|v>, |0>, |1>)`` where
``|v>`` is the vacuum. Eve's attack maps travel qubit ``|i>`` to
``sqrt(p_iv)|v>|E_iv> + sqrt(p_i0)|0>|E_i0> + sqrt(p_i1)|1>|E_i1>``.

Two ancilla geometries are supported:

``"orthonormal"``
    The six ancilla states are an orthonormal basis of a 6-dim space. This
    is the geometry used for every entropy computation; it makes each branch
    fully distinguishable to Eve.
``"coherent"``
    ``E_00 = E_11`` and ``E_01 = E_10`` share a vector while ``E_0v`` and
    ``E_1v`` stay orthogonal. This is the honest loss-and-flip channel: the
    identity attack becomes the identity map and entanglement survives, which
    is what the Monte Carlo session needs.

Both satisfy the unitarity constraint exactly. Per-branch conditional
entropies do not depend on the choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateChannelError, InvalidParameterError
from .qmath import (
    PROB_TOL,
    DensityOperator,
    StateVector,
    basis,
    dag,
    partial_trace,
    projector,
    tensor,
    von_neumann_entropy,
)

VAC, ZERO, ONE = 0, 1, 2
QUTRIT = 3
ANCILLA_DIM = 6
# ancilla index for each (input bit, output symbol) branch
ANCILLA_INDEX = {
    (0, VAC): 0, (0, ZERO): 1, (0, ONE): 2,
    (1, VAC): 3, (1, ZERO): 4, (1, ONE): 5,
}
ROW_SUM_TOL = 1e-10
ANCILLA_GEOMETRIES = ("orthonormal", "coherent")

PARAM_KEYS = ("p0v", "p00", "p01", "p1v", "p10", "p11")


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value < -PROB_TOL or value > 1.0 + PROB_TOL:
        raise InvalidParameterError(f"{name}={value!r} is not a probability in [0, 1]")
    return min(max(value, 0.0), 1.0)


def _check_rows(prefix: str, rows: dict[str, tuple[float, float, float]]) -> None:
    for label, vals in rows.items():
        total = sum(vals)
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise InvalidParameterError(
                f"{prefix} row {label} sums to {total!r}, expected 1"
            )


@dataclass(frozen=True)
class AttackParams:
    """Transition probabilities of the forward-channel attack.

    ``p{i}{j}`` is the probability that travel qubit ``|i>`` reaches Alice as
    ``|j>`` (``j = v`` for vacuum). Each row ``i`` must sum to one.
    """

    p0v: float
    p00: float
    p01: float
    p1v: float
    p10: float
    p11: float

    def __post_init__(self):
        for key in PARAM_KEYS:
            object.__setattr__(self, key, _check_probability(key, getattr(self, key)))
        _check_rows(
            "attack",
            {
                "0 (p0v+p00+p01)": (self.p0v, self.p00, self.p01),
                "1 (p1v+p10+p11)": (self.p1v, self.p10, self.p11),
            },
        )

    @classmethod
    def identity(cls) -> "AttackParams":
        return cls(0.0, 1.0, 0.0, 0.0, 0.0, 1.0)

    @classmethod
    def pure_loss(cls) -> "AttackParams":
        return cls(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    @classmethod
    def loss_and_flip(cls, eta: float, flip: float) -> "AttackParams":
        """Symmetric channel: lost with ``1 - eta``, flipped with ``eta * flip``."""
        eta = _check_probability("eta", eta)
        flip = _check_probability("flip", flip)
        keep, err = eta * (1.0 - flip), eta * flip
        return cls(1.0 - eta, keep, err, 1.0 - eta, err, keep)

    @classmethod
    def from_dict(cls, data: dict) -> "AttackParams":
        missing = [k for k in PARAM_KEYS if k not in data]
        if missing:
            raise InvalidParameterError(f"attack parameters missing keys {missing}")
        return cls(**{k: data[k] for k in PARAM_KEYS})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_KEYS}

    def row(self, branch: int) -> tuple[float, float, float]:
        """``(p_iv, p_i0, p_i1)`` for travel branch ``i``."""
        if branch == 0:
            return self.p0v, self.p00, self.p01
        if branch == 1:
            return self.p1v, self.p10, self.p11
        raise InvalidParameterError(f"travel branch must be 0 or 1, got {branch!r}")

    def efficiency(self, branch: int) -> float:
        """Non-vacuum arrival probability of a branch."""
        _, a, b = self.row(branch)
        return a + b


@dataclass(frozen=True)
class EffectiveForwardStats:
    """Forward efficiencies and vacuum-excluded conditional probabilities.

    Primes of a branch with zero efficiency are ``None``.
    """

    eta_fwd: float
    p00_prime: Optional[float]
    p01_prime: Optional[float]
    eta_fwd_1: float
    p10_prime: Optional[float]
    p11_prime: Optional[float]

    @classmethod
    def from_params(cls, params: AttackParams) -> "EffectiveForwardStats":
        eta0 = params.p00 + params.p01
        eta1 = params.p10 + params.p11
        p00 = p01 = p10 = p11 = None
        if eta0 > 0:
            p00, p01 = params.p00 / eta0, params.p01 / eta0
        if eta1 > 0:
            p10, p11 = params.p10 / eta1, params.p11 / eta1
        return cls(eta0, p00, p01, eta1, p10, p11)

    def flip_prime(self, branch: int) -> float:
        """Conditional flip probability (p'01 or p'10) of a branch."""
        value = self.p01_prime if branch == 0 else self.p10_prime
        if value is None:
            raise DegenerateChannelError(
                f"forward branch {branch} never delivers a non-vacuum state"
            )
        return value


@dataclass(frozen=True)
class EncodingOp:
    label: str
    matrix: np.ndarray
    key_bit: int


def _encoding(label: str, diag: tuple[int, int, int], bit: int) -> EncodingOp:
    m = np.diag(np.array(diag, dtype=complex))
    m.setflags(write=False)
    return EncodingOp(label, m, bit)


ENCODINGS: dict[str, EncodingOp] = {
    "I0": _encoding("I0", (1, 1, 1), 0),
    "I1": _encoding("I1", (1, -1, -1), 0),
    "Y0": _encoding("Y0", (1, 1, -1), 1),
    "Y1": _encoding("Y1", (1, -1, 1), 1),
}
ENCODING_LABELS = tuple(ENCODINGS)
OPS_FOR_BIT = {0: ("I0", "I1"), 1: ("Y0", "Y1")}


def _check_geometry(ancilla: str) -> None:
    if ancilla not in ANCILLA_GEOMETRIES:
        raise InvalidParameterError(
            f"ancilla geometry must be one of {ANCILLA_GEOMETRIES}, got {ancilla!r}"
        )


def forward_kraus(params: AttackParams, ancilla: str = "orthonormal") -> list[np.ndarray]:
    """Kraus operators (3x2) of the forward channel seen by Alice.

    With the orthonormal geometry there is one rank-1 operator per branch, in
    the order ``p0v, p00, p01, p1v, p10, p11``. With the coherent geometry the
    four operators are the two vacuum jumps, the no-flip map
    ``sqrt(p00)|0><0| + sqrt(p11)|1><1|`` and the flip map
    ``sqrt(p01)|1><0| + sqrt(p10)|0><1|``.
    """
    _check_geometry(ancilla)
    out = lambda i: basis(QUTRIT, i)
    inp = lambda i: basis(2, i)
    if ancilla == "orthonormal":
        ops = []
        for bit in (0, 1):
            for sym, p in zip((VAC, ZERO, ONE), params.row(bit)):
                ops.append(np.sqrt(p) * np.outer(out(sym), inp(bit)))
        return ops
    return [
        np.sqrt(params.p0v) * np.outer(out(VAC), inp(0)),
        np.sqrt(params.p1v) * np.outer(out(VAC), inp(1)),
        np.sqrt(params.p00) * np.outer(out(ZERO), inp(0))
        + np.sqrt(params.p11) * np.outer(out(ONE), inp(1)),
        np.sqrt(params.p01) * np.outer(out(ONE), inp(0))
        + np.sqrt(params.p10) * np.outer(out(ZERO), inp(1)),
    ]


def kraus_completeness_error(ops: list[np.ndarray]) -> float:
    """Max entrywise deviation of ``sum K^dag K`` from the identity."""
    total = sum(dag(k) @ k for k in ops)
    return float(np.max(np.abs(total - np.eye(total.shape[0]))))


def branch_vector(params: AttackParams, branch: int) -> StateVector:
    """``U_AE |branch>|E>`` on travel qutrit ⊗ 6-dim ancilla."""
    vec = np.zeros(QUTRIT * ANCILLA_DIM, dtype=complex)
    for sym, p in zip((VAC, ZERO, ONE), params.row(branch)):
        vec += np.sqrt(p) * np.kron(basis(QUTRIT, sym), basis(ANCILLA_DIM, ANCILLA_INDEX[branch, sym]))
    return StateVector(vec)


def joint_state_after_forward(params: AttackParams) -> DensityOperator:
    """Travel ⊗ ancilla state after the attack, home qubit traced out."""
    rho = 0.5 * branch_vector(params, 0).projector() + 0.5 * branch_vector(params, 1).projector()
    return DensityOperator(rho, (QUTRIT, ANCILLA_DIM))


def apply_encoding(rho: np.ndarray, label: str, factor_dims=(QUTRIT, ANCILLA_DIM), travel_factor: int = 0) -> np.ndarray:
    """Conjugate ``rho`` by an encoding acting on one qutrit factor."""
    mats = [np.eye(d, dtype=complex) for d in factor_dims]
    mats[travel_factor] = ENCODINGS[label].matrix
    u = mats[0]
    for m in mats[1:]:
        u = tensor(u, m)
    return u @ rho @ dag(u)


def encoded_states(params: AttackParams, travel_branch: int) -> tuple[DensityOperator, DensityOperator]:
    """Alice-Eve states after encoding bit 0 and bit 1 on one travel branch.

    Each bit is an equal mixture of its two encodings, which removes every
    coherence between the vacuum and the qubit subspace.
    """
    psi = branch_vector(params, travel_branch).projector()
    out = []
    for bit in (0, 1):
        a, b = OPS_FOR_BIT[bit]
        rho = 0.5 * apply_encoding(psi, a) + 0.5 * apply_encoding(psi, b)
        out.append(DensityOperator(rho, (QUTRIT, ANCILLA_DIM)))
    return out[0], out[1]


def effective_matrices(params: AttackParams, travel_branch: int):
    """Vacuum-excluded 2x2 encoding matrices of one branch.

    Returns ``(stats, rho_bit0, rho_bit1, rho_avg)`` in the basis
    ``{|0>|E_b0>, |1>|E_b1>}`` for branch ``b``.
    """
    stats = EffectiveForwardStats.from_params(params)
    if params.efficiency(travel_branch) <= 0.0:
        raise DegenerateChannelError(
            f"forward branch {travel_branch} never delivers a non-vacuum state"
        )
    if travel_branch == 0:
        a, b = stats.p00_prime, stats.p01_prime
    else:
        a, b = stats.p10_prime, stats.p11_prime
    off = np.sqrt(a * b)
    rho0 = np.array([[a, off], [off, b]], dtype=complex)
    rho1 = np.array([[a, -off], [-off, b]], dtype=complex)
    rho = 0.5 * rho0 + 0.5 * rho1
    return stats, rho0, rho1, rho


def vacuum_excluded(rho: DensityOperator) -> np.ndarray:
    """Non-vacuum block of a travel ⊗ ancilla state, renormalized."""
    p = tensor(np.diag([0.0, 1.0, 1.0]), np.eye(ANCILLA_DIM))
    block = p @ rho.matrix @ p
    weight = np.trace(block).real
    if weight <= 0.0:
        raise DegenerateChannelError("state has no non-vacuum component")
    return block / weight


def eve_entropy_oracle(params: AttackParams, travel_branch: int) -> float:
    """``S(A'|AE)`` of one branch from explicit density matrices.

    Works in the full 18-dim travel ⊗ ancilla space: the encoded states are
    built by conjugation, the vacuum block is cut out and renormalized, and
    the key-bit register is attached before taking entropies.
    """
    if params.efficiency(travel_branch) <= 0.0:
        raise DegenerateChannelError(
            f"forward branch {travel_branch} never delivers a non-vacuum state"
        )
    rho0, rho1 = (vacuum_excluded(r) for r in encoded_states(params, travel_branch))
    joint = 0.5 * tensor(projector(basis(2, 0)), rho0) + 0.5 * tensor(projector(basis(2, 1)), rho1)
    avg = 0.5 * rho0 + 0.5 * rho1
    return von_neumann_entropy(joint) - von_neumann_entropy(avg)


def travel_marginal(params: AttackParams) -> DensityOperator:
    return partial_trace(joint_state_after_forward(params), keep=[0])
