"""Monte Carlo simulation of a modified Ping-Pong session.

Each trial prepares ``|Phi+>`` on home ⊗ travel, sends the travel qubit
through the forward channel, lets Alice either encode (message mode) or
measure ``{|v>, |0>, |1>}`` (control mode), returns the travel system
through the backward channel and lets Bob either run a Bell measurement
(message mode) or measure his home qubit in Z (control mode).

The state of a trial only depends on a handful of discrete choices, so the
Born distributions of every path are computed once by exact density-matrix
evolution and trials then sample from them. Trial ``i`` consumes uniforms
``4i .. 4i+3`` of the PCG64 stream seeded by ``rng_seed``, in the order
(Alice mode, Alice choice, Bob mode, Bob outcome).
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .attack import (
    ENCODING_LABELS,
    ENCODINGS,
    ONE,
    QUTRIT,
    VAC,
    ZERO,
    AttackParams,
    _check_probability,
    _check_rows,
    forward_kraus,
)
from .bounds import KeyRateReport, key_rate
from .errors import InvalidParameterError
from .qmath import DensityOperator, basis, dag, projector, tensor

MESSAGE, CONTROL = "message", "control"
PSI_POLICIES = ("count_as_error", "discard")
BOB_RESULTS = ("no_detection", "phi_plus", "phi_minus", "psi_plus", "psi_minus", "z0", "z1")
BELL_RESULTS = BOB_RESULTS[:5]
CTRL_RESULTS = ("v", "0", "1")
DRAWS_PER_TRIAL = 4
HOME = 2
# Alice paths: 0..3 encodings in ENCODING_LABELS order, 4..6 control results v, 0, 1
N_ALICE_PATHS = 7
TRANSCRIPT_COLUMNS = ("trial", "mode_a", "mode_b", "op", "bob_result", "alice_ctrl")

_BELL_KETS = {
    "phi_plus": (1, 0, 0, 1),
    "phi_minus": (1, 0, 0, -1),
    "psi_plus": (0, 1, 1, 0),
    "psi_minus": (0, 1, -1, 0),
}
DECODED_BIT = {"phi_plus": 0, "phi_minus": 1}


@dataclass(frozen=True)
class SessionConfig:
    n_trials: int
    message_mode_prob: float = 0.5
    rng_seed: int = 0
    psi_outcome_policy: str = "count_as_error"
    ancilla: str = "coherent"

    def __post_init__(self):
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise InvalidParameterError(f"n_trials={self.n_trials!r} must be a positive integer")
        object.__setattr__(self, "n_trials", int(self.n_trials))
        c = float(self.message_mode_prob)
        if not 0.0 < c <= 1.0:
            raise InvalidParameterError(f"message_mode_prob={c!r} must lie in (0, 1]")
        object.__setattr__(self, "message_mode_prob", c)
        if int(self.rng_seed) != self.rng_seed or not 0 <= self.rng_seed < 2**64:
            raise InvalidParameterError(f"rng_seed={self.rng_seed!r} must be a 64-bit unsigned integer")
        object.__setattr__(self, "rng_seed", int(self.rng_seed))
        if self.psi_outcome_policy not in PSI_POLICIES:
            raise InvalidParameterError(
                f"psi_outcome_policy must be one of {PSI_POLICIES}, got {self.psi_outcome_policy!r}"
            )
        if self.ancilla not in ("coherent", "orthonormal"):
            raise InvalidParameterError(f"ancilla must be 'coherent' or 'orthonormal', got {self.ancilla!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(data) - known)
        if extra:
            raise InvalidParameterError(f"unknown session keys {extra}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


BACKWARD_KEYS = ("q_v0", "q_00", "q_01", "q_v1", "q_10", "q_11")


@dataclass(frozen=True)
class BackwardChannelParams:
    """Transition probabilities of the Alice-to-Bob channel.

    Same row convention as :class:`AttackParams`; vacuum always stays vacuum.
    """

    q_v0: float
    q_00: float
    q_01: float
    q_v1: float
    q_10: float
    q_11: float

    def __post_init__(self):
        for key in BACKWARD_KEYS:
            object.__setattr__(self, key, _check_probability(key, getattr(self, key)))
        _check_rows(
            "backward",
            {
                "0 (q_v0+q_00+q_01)": (self.q_v0, self.q_00, self.q_01),
                "1 (q_v1+q_10+q_11)": (self.q_v1, self.q_10, self.q_11),
            },
        )

    @classmethod
    def identity(cls) -> "BackwardChannelParams":
        return cls(0.0, 1.0, 0.0, 0.0, 0.0, 1.0)

    @classmethod
    def loss_and_flip(cls, eta: float, flip: float) -> "BackwardChannelParams":
        a = AttackParams.loss_and_flip(eta, flip)
        return cls(a.p0v, a.p00, a.p01, a.p1v, a.p10, a.p11)

    @classmethod
    def from_dict(cls, data: dict) -> "BackwardChannelParams":
        missing = [k for k in BACKWARD_KEYS if k not in data]
        if missing:
            raise InvalidParameterError(f"backward parameters missing keys {missing}")
        return cls(**{k: data[k] for k in BACKWARD_KEYS})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in BACKWARD_KEYS}

    @property
    def efficiency(self) -> float:
        """Mean non-vacuum transmission of the two qubit inputs."""
        return 0.5 * (self.q_00 + self.q_01 + self.q_10 + self.q_11)


def backward_kraus(params: BackwardChannelParams) -> list[np.ndarray]:
    """Vacuum-preserving 3x3 Kraus operators of the backward channel."""
    fwd = forward_kraus(
        AttackParams(params.q_v0, params.q_00, params.q_01, params.q_v1, params.q_10, params.q_11),
        ancilla="coherent",
    )
    # lift 3x2 qubit-input operators to act on (v, 0, 1), leaving v untouched
    lifted = [np.hstack([np.zeros((QUTRIT, 1), dtype=complex), k]) for k in fwd]
    return [projector(basis(QUTRIT, VAC))] + lifted


@dataclass(frozen=True)
class TrialOutcome:
    mode_alice: str
    mode_bob: str
    alice_bit: Optional[int]
    alice_op: Optional[str]
    bob_result: str
    alice_control_result: Optional[str]

    def __post_init__(self):
        if (self.alice_bit is not None) != (self.mode_alice == MESSAGE):
            raise InvalidParameterError("alice_bit is set exactly when Alice is in message mode")


# --- state evolution ---------------------------------------------------------

def initial_state() -> DensityOperator:
    """``|Phi+>`` on home qubit ⊗ travel qubit."""
    return DensityOperator.from_ket(np.array([1, 0, 0, 1]) / np.sqrt(2), (HOME, 2))


def apply_channel(rho: np.ndarray, ops: Sequence[np.ndarray]) -> np.ndarray:
    """Apply Kraus operators to the travel factor of home ⊗ travel."""
    eye = np.eye(HOME)
    out = 0
    for k in ops:
        full = tensor(eye, k)
        out = out + full @ rho @ dag(full)
    return out


def after_forward(fwd: AttackParams, ancilla: str = "coherent") -> DensityOperator:
    rho = apply_channel(initial_state().matrix, forward_kraus(fwd, ancilla))
    return DensityOperator(rho, (HOME, QUTRIT))


def _embedded_bell(name: str) -> np.ndarray:
    a, b, c, d = _BELL_KETS[name]
    vec = np.zeros(HOME * QUTRIT, dtype=complex)
    vec[0 * QUTRIT + ZERO] = a
    vec[0 * QUTRIT + ONE] = b
    vec[1 * QUTRIT + ZERO] = c
    vec[1 * QUTRIT + ONE] = d
    return vec / np.sqrt(2)


_BELL_PROJECTORS = {name: projector(_embedded_bell(name)) for name in _BELL_KETS}
_VACUUM_PROJECTOR = tensor(np.eye(HOME), projector(basis(QUTRIT, VAC)))


def bell_probabilities(rho: DensityOperator) -> np.ndarray:
    """Born probabilities in order (no_detection, Phi+, Phi-, Psi+, Psi-)."""
    m = rho.matrix
    probs = [np.trace(_VACUUM_PROJECTOR @ m).real]
    probs += [np.trace(_BELL_PROJECTORS[n] @ m).real for n in BELL_RESULTS[1:]]
    return np.clip(np.array(probs), 0.0, None)


def home_z_probabilities(rho: DensityOperator) -> np.ndarray:
    m = rho.matrix
    return np.array(
        [np.trace(tensor(projector(basis(HOME, i)), np.eye(QUTRIT)) @ m).real for i in (0, 1)]
    ).clip(0.0, None)


def _sample_index(cumulative: np.ndarray, u):
    """First index whose cumulative probability exceeds ``u``."""
    idx = (np.asarray(u)[..., None] >= cumulative).sum(axis=-1)
    return np.minimum(idx, cumulative.shape[-1] - 1)


def bell_measure(rho: DensityOperator, rng_draw: float) -> str:
    """Sample Bob's Bell-measurement result with one uniform draw."""
    cum = np.cumsum(bell_probabilities(rho))
    return BELL_RESULTS[int(_sample_index(cum, rng_draw))]


@dataclass(frozen=True)
class PathTables:
    """Exact outcome distributions for every discrete path of a trial."""

    alice_ctrl: np.ndarray  # (3,) P(v), P(0), P(1)
    bell: np.ndarray  # (7, 5) Bob message outcomes per Alice path
    home_z: np.ndarray  # (7, 2) Bob control outcomes per Alice path
    states: tuple = field(repr=False, default=())


def path_tables(fwd: AttackParams, bwd: BackwardChannelParams, ancilla: str = "coherent") -> PathTables:
    rho_f = after_forward(fwd, ancilla)
    bops = backward_kraus(bwd)
    eye = np.eye(HOME)
    ctrl_probs = np.array(
        [np.trace(tensor(eye, projector(basis(QUTRIT, s))) @ rho_f.matrix).real for s in (VAC, ZERO, ONE)]
    ).clip(0.0, None)
    states = []
    for label in ENCODING_LABELS:
        u = tensor(eye, ENCODINGS[label].matrix)
        states.append(u @ rho_f.matrix @ dag(u))
    for s, p in zip((VAC, ZERO, ONE), ctrl_probs):
        proj = tensor(eye, projector(basis(QUTRIT, s)))
        if p > 0:
            states.append(proj @ rho_f.matrix @ proj / p)
        else:
            # unreachable path; any valid state keeps the tables well formed
            states.append(projector(basis(HOME * QUTRIT, s)))
    evolved = tuple(DensityOperator(apply_channel(s, bops), (HOME, QUTRIT)) for s in states)
    bell = np.array([bell_probabilities(r) for r in evolved])
    home_z = np.array([home_z_probabilities(r) for r in evolved])
    return PathTables(ctrl_probs, bell, home_z, evolved)


# --- session records and statistics -------------------------------------------

@dataclass
class SessionRecord:
    """Per-trial outcomes as integer code arrays.

    ``alice_path`` indexes encodings (0..3) then control results (4..6);
    ``bob_code`` indexes :data:`BOB_RESULTS`.
    """

    alice_message: np.ndarray
    bob_message: np.ndarray
    alice_path: np.ndarray
    bob_code: np.ndarray

    def __len__(self) -> int:
        return int(self.alice_message.shape[0])

    def outcomes(self) -> list[TrialOutcome]:
        out = []
        for am, bm, ap, bc in zip(self.alice_message, self.bob_message, self.alice_path, self.bob_code):
            out.append(_outcome_from_codes(bool(am), bool(bm), int(ap), int(bc)))
        return out

    def transcript_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRANSCRIPT_COLUMNS)
        for i, o in enumerate(self.outcomes()):
            writer.writerow([
                i, o.mode_alice, o.mode_bob, o.alice_op or "", o.bob_result,
                o.alice_control_result or "",
            ])
        return buf.getvalue()

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[TrialOutcome]) -> "SessionRecord":
        am, bm, ap, bc = [], [], [], []
        for o in outcomes:
            am.append(o.mode_alice == MESSAGE)
            bm.append(o.mode_bob == MESSAGE)
            if o.mode_alice == MESSAGE:
                ap.append(ENCODING_LABELS.index(o.alice_op))
            else:
                ap.append(4 + CTRL_RESULTS.index(o.alice_control_result))
            bc.append(BOB_RESULTS.index(o.bob_result))
        return cls(np.array(am, bool), np.array(bm, bool), np.array(ap, np.int64), np.array(bc, np.int64))


def _outcome_from_codes(am: bool, bm: bool, ap: int, bc: int) -> TrialOutcome:
    if am:
        op = ENCODING_LABELS[ap]
        return TrialOutcome(MESSAGE, MESSAGE if bm else CONTROL, ENCODINGS[op].key_bit, op, BOB_RESULTS[bc], None)
    return TrialOutcome(CONTROL, MESSAGE if bm else CONTROL, None, None, BOB_RESULTS[bc], CTRL_RESULTS[ap - 4])


def trial_draws(config: SessionConfig) -> np.ndarray:
    """Uniform draws, one row of four per trial."""
    rng = np.random.Generator(np.random.PCG64(config.rng_seed))
    return rng.random((config.n_trials, DRAWS_PER_TRIAL))


def simulate(config: SessionConfig, fwd: AttackParams, bwd: BackwardChannelParams) -> SessionRecord:
    tables = path_tables(fwd, bwd, config.ancilla)
    u = trial_draws(config)
    c = config.message_mode_prob
    alice_msg = u[:, 0] < c
    bob_msg = u[:, 2] < c
    op_idx = np.minimum((u[:, 1] * 4).astype(np.int64), 3)
    ctrl_idx = _sample_index(np.cumsum(tables.alice_ctrl), u[:, 1])
    alice_path = np.where(alice_msg, op_idx, 4 + ctrl_idx)
    bell_code = _sample_index(np.cumsum(tables.bell, axis=1)[alice_path], u[:, 3])
    z_code = _sample_index(np.cumsum(tables.home_z, axis=1)[alice_path], u[:, 3])
    bob_code = np.where(bob_msg, bell_code, 5 + z_code)
    return SessionRecord(alice_msg, bob_msg, alice_path, bob_code)


@dataclass(frozen=True)
class ObservedStatistics:
    """Shared statistics after the public announcement.

    ``counts[i][x]`` counts both-control rounds where Bob's home qubit read
    ``i`` and Alice's control measurement read ``x``. ``p_hat`` entries of an
    unestimated row are ``None``.
    """

    counts: dict
    p_hat: dict
    eta_fwd_hat: Optional[float]
    eta_bwd_hat: Optional[float]
    qber_hat: Optional[float]
    qber_errors: int
    qber_total: int
    n_message: int
    n_control: int
    n_detected: int
    n_trials: int
    unestimated_rows: tuple = ()
    diagnostics: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["unestimated_rows"] = list(self.unestimated_rows)
        d["diagnostics"] = list(self.diagnostics)
        return d

    def flip_prime(self, branch: int) -> Optional[float]:
        a, b = (self.p_hat["p00"], self.p_hat["p01"]) if branch == 0 else (self.p_hat["p11"], self.p_hat["p10"])
        if a is None or a + b == 0:
            return None
        return b / (a + b)


def _tally(record: SessionRecord, psi_policy: str) -> ObservedStatistics:
    am, bm, ap, bc = record.alice_message, record.bob_message, record.alice_path, record.bob_code
    both_ctrl = ~am & ~bm
    both_msg = am & bm
    n_control = int(both_ctrl.sum())
    n_message = int(both_msg.sum())

    counts = {str(i): {x: 0 for x in CTRL_RESULTS} for i in (0, 1)}
    for i in (0, 1):
        row = both_ctrl & (bc == 5 + i)
        for j, x in enumerate(CTRL_RESULTS):
            counts[str(i)][x] = int((row & (ap == 4 + j)).sum())
    return _finish(counts, _message_counts(both_msg, ap, bc), n_message, n_control, len(record), psi_policy)


def _message_counts(both_msg, ap, bc) -> dict:
    """``{(alice_bit, bob_result): count}`` over both-message rounds."""
    bits = np.array([ENCODINGS[l].key_bit for l in ENCODING_LABELS])
    out = {}
    for bit in (0, 1):
        sel = both_msg & (ap < 4)
        sel = sel & (bits[np.minimum(ap, 3)] == bit)
        for k, name in enumerate(BELL_RESULTS):
            out[bit, name] = int((sel & (bc == k)).sum())
    return out


def _finish(counts, msg_counts, n_message, n_control, n_trials, psi_policy) -> ObservedStatistics:
    diagnostics = []
    p_hat = {}
    unestimated = []
    non_vac = 0
    for i in ("0", "1"):
        row = counts[i]
        total = sum(row.values())
        non_vac += row["0"] + row["1"]
        keys = {"v": f"p{i}v", "0": f"p{i}0", "1": f"p{i}1"}
        if total == 0:
            unestimated.append(int(i))
            diagnostics.append(f"no both-control rounds for travel branch {i}")
            p_hat.update({keys[x]: None for x in CTRL_RESULTS})
        else:
            p_hat.update({keys[x]: row[x] / total for x in CTRL_RESULTS})

    eta_fwd = non_vac / n_control if n_control else None
    n_detected = sum(v for (bit, name), v in msg_counts.items() if name != "no_detection")
    if eta_fwd:
        eta_bwd = (n_detected / n_message) / eta_fwd if n_message else None
    else:
        eta_bwd = None

    errors = msg_counts[0, "phi_minus"] + msg_counts[1, "phi_plus"]
    total = errors + msg_counts[0, "phi_plus"] + msg_counts[1, "phi_minus"]
    if psi_policy == "count_as_error":
        psi = sum(msg_counts[b, n] for b in (0, 1) for n in ("psi_plus", "psi_minus"))
        errors += psi
        total += psi
    qber = errors / total if total else None
    if qber is None:
        diagnostics.append("no detected message rounds; error rate undefined")
    return ObservedStatistics(
        counts=counts,
        p_hat=p_hat,
        eta_fwd_hat=eta_fwd,
        eta_bwd_hat=eta_bwd,
        qber_hat=qber,
        qber_errors=errors,
        qber_total=total,
        n_message=n_message,
        n_control=n_control,
        n_detected=n_detected,
        n_trials=n_trials,
        unestimated_rows=tuple(unestimated),
        diagnostics=tuple(diagnostics),
    )


def estimate_statistics(outcomes: Sequence[TrialOutcome], psi_outcome_policy: str = "count_as_error") -> ObservedStatistics:
    """Aggregate trial outcomes into the statistics Alice and Bob share.

    Only both-control rounds feed ``p_hat``; Bob's home result labels the
    travel branch. Only both-message rounds feed the detection fraction and
    the error rate. Mixed-mode rounds are ignored.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise InvalidParameterError("cannot estimate statistics from zero trials")
    if psi_outcome_policy not in PSI_POLICIES:
        raise InvalidParameterError(f"psi_outcome_policy must be one of {PSI_POLICIES}")
    return _tally(SessionRecord.from_outcomes(outcomes), psi_outcome_policy)


def report_from_statistics(stats: ObservedStatistics) -> KeyRateReport:
    """Evaluate the key-rate bound on estimated quantities.

    The backward-efficiency estimate is a ratio of two sample fractions and
    can exceed one by noise; it is capped at one before use.
    """
    if stats.unestimated_rows:
        return KeyRateReport.degenerate_report("; ".join(stats.diagnostics))
    p01, p10 = stats.flip_prime(0), stats.flip_prime(1)
    if p01 is None or p10 is None:
        return KeyRateReport.degenerate_report(
            "a forward branch had no non-vacuum arrivals in control mode",
            p01_prime=p01, p10_prime=p10,
        )
    if stats.qber_hat is None:
        return KeyRateReport.degenerate_report(
            "; ".join(stats.diagnostics), p01_prime=p01, p10_prime=p10,
            eta_bwd=None if stats.eta_bwd_hat is None else min(1.0, stats.eta_bwd_hat),
        )
    return key_rate(p01, p10, min(1.0, stats.eta_bwd_hat), stats.qber_hat)


def run_session(
    config: SessionConfig,
    fwd: AttackParams,
    bwd: BackwardChannelParams,
    return_record: bool = False,
):
    """Simulate a session and evaluate the key rate on its estimates.

    Returns ``(statistics, report)``, plus the :class:`SessionRecord` when
    ``return_record`` is true.
    """
    record = simulate(config, fwd, bwd)
    stats = _tally(record, config.psi_outcome_policy)
    report = report_from_statistics(stats)
    if return_record:
        return stats, report, record
    return stats, report

