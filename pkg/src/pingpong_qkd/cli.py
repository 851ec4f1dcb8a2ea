"""Command-line front end.

Exit statuses: 0 success, 2 invalid input, 3 degenerate channel, 4 I/O
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional

from . import __version__
from .attack import AttackParams, EffectiveForwardStats, eve_entropy_oracle
from .bounds import forward_entropy_bound, key_rate, received_entropy_bound
from .channel import (
    ChannelParams,
    distance_grid,
    forward_error,
    message_qber,
    session_channels,
    sweep,
)
from .config import load_config, validate
from .errors import DegenerateChannelError, InvalidParameterError
from .protocol import BackwardChannelParams, SessionConfig, run_session
from .qmath import binary_entropy

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4

DEFAULT_SWEEP = {"from_km": 0.0, "to_km": 60.0, "step_km": 1.0}
DEFAULT_TRIALS = 10_000


class UsageError(InvalidParameterError):
    pass


def dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def write_atomic(path: Path, text: str) -> str:
    """Write ``text`` via a temp file and rename; return its SHA-256."""
    data = text.encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def write_outputs(out_dir: Path, command: str, config: dict, seed, files: dict[str, str]) -> None:
    """Write every artifact plus a manifest carrying their checksums."""
    digests = {name: write_atomic(out_dir / name, text) for name, text in files.items()}
    manifest = {
        "manifest_version": 1,
        "command": command,
        "config": config,
        "rng_seed": seed,
        "tool_version": __version__,
        "outputs": digests,
    }
    validate(manifest, "manifest")
    write_atomic(out_dir / "manifest.json", dumps(manifest))


def _override(section: dict, args, mapping: dict) -> dict:
    out = dict(section)
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    return out


# --- commands -----------------------------------------------------------------

KEYRATE_FLAGS = {"p01_prime": "--p01-prime", "p10_prime": "--p10-prime", "eta_bwd": "--eta-bwd", "qber": "--qber"}


def cmd_keyrate(args) -> int:
    cfg = load_config(args.config)
    values = {}
    if "channel" in cfg:
        ch = ChannelParams.from_dict(cfg["channel"])
        flip = forward_error(ch)
        values = {"p01_prime": flip, "p10_prime": flip, "eta_bwd": ch.eta, "qber": message_qber(ch)}
    for key in KEYRATE_FLAGS:
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    missing = [flag for key, flag in KEYRATE_FLAGS.items() if key not in values]
    if missing:
        raise UsageError(f"missing required value for {', '.join(missing)} (flag or config 'channel' section)")
    for key, flag in KEYRATE_FLAGS.items():
        if not 0.0 <= values[key] <= 1.0:
            raise UsageError(f"{flag}={values[key]!r} is not a probability in [0, 1]")
    report = key_rate(**values)
    text = dumps(report.to_dict())
    sys.stdout.write(text)
    if args.out:
        write_outputs(Path(args.out), "keyrate", {"keyrate": values} | cfg, None, {"report.json": text})
    return EXIT_DEGENERATE if report.degenerate else EXIT_OK


CHANNEL_FLAGS = {
    "attenuation": "attenuation_db_per_km",
    "detector_efficiency": "detector_efficiency",
    "dark_count_prob": "dark_count_prob",
    "misalignment": "misalignment",
}


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    channel = ChannelParams.from_dict(_override(cfg.get("channel", {}), args, CHANNEL_FLAGS))
    rng = dict(DEFAULT_SWEEP) | cfg.get("sweep", {})
    rng = _override(rng, args, {"from_km": "from_km", "to_km": "to_km", "step_km": "step_km"})
    grid = distance_grid(rng["from_km"], rng["to_km"], rng["step_km"])
    result = sweep(channel, grid)
    doc = result.to_dict()
    validate(doc, "sweep")
    resolved = {"channel": channel.to_dict(), "sweep": rng}
    write_outputs(Path(args.out), "sweep", resolved, None, {
        "sweep.csv": result.to_csv(),
        "sweep.json": dumps(doc),
    })
    cutoff = "none" if result.cutoff_km is None else f"{result.cutoff_km:.2f}"
    print(f"points: {len(result.points)}")
    print(f"cutoff_km: {cutoff}")
    return EXIT_OK


SESSION_FLAGS = {
    "trials": "n_trials",
    "seed": "rng_seed",
    "message_prob": "message_mode_prob",
    "psi_policy": "psi_outcome_policy",
    "ancilla": "ancilla",
}


def resolve_channels(cfg: dict) -> tuple[AttackParams, BackwardChannelParams]:
    """Explicit attack/backward sections win; otherwise map the fiber model."""
    if "channel" in cfg and not ("attack" in cfg or "backward" in cfg):
        return session_channels(ChannelParams.from_dict(cfg["channel"]))
    fwd = AttackParams.from_dict(cfg["attack"]) if "attack" in cfg else AttackParams.identity()
    bwd = BackwardChannelParams.from_dict(cfg["backward"]) if "backward" in cfg else BackwardChannelParams.identity()
    return fwd, bwd


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    fwd, bwd = resolve_channels(cfg)
    session = {"n_trials": DEFAULT_TRIALS} | cfg.get("session", {})
    session = SessionConfig.from_dict(_override(session, args, SESSION_FLAGS))
    stats, report, record = run_session(session, fwd, bwd, return_record=True)
    stats_doc, report_doc = stats.to_dict(), report.to_dict()
    validate(stats_doc, "statistics")
    validate(report_doc, "keyrate_report")
    files = {"statistics.json": dumps(stats_doc), "report.json": dumps(report_doc)}
    if args.transcript:
        files["transcript.csv"] = record.transcript_csv()
    resolved = {"attack": fwd.to_dict(), "backward": bwd.to_dict(), "session": session.to_dict()}
    write_outputs(Path(args.out), "simulate", resolved, session.rng_seed, files)
    qber = "undefined" if stats.qber_hat is None else f"{stats.qber_hat:.6g}"
    print(f"trials: {stats.n_trials}")
    print(f"message rounds: {stats.n_message}  detections: {stats.n_detected}")
    print(f"qber_hat: {qber}")
    print(f"rate: {report.rate:.6g}")
    return EXIT_DEGENERATE if report.degenerate else EXIT_OK


ATTACK_KEYS = ("p0v", "p00", "p01", "p1v", "p10", "p11")


def analyze_attack(params: AttackParams, eta_bwd: float) -> dict:
    """Oracle and closed-form branch entropies side by side."""
    stats = EffectiveForwardStats.from_params(params)
    branches = []
    for b in (0, 1):
        if params.efficiency(b) > 0:
            oracle = eve_entropy_oracle(params, b)
            analytic = 1.0 - binary_entropy(stats.flip_prime(b))
            branches.append({"branch": b, "entropy_oracle": oracle, "entropy_analytic": analytic,
                             "difference": oracle - analytic})
        else:
            branches.append({"branch": b, "entropy_oracle": None, "entropy_analytic": None, "difference": None})
    degenerate = all(br["entropy_oracle"] is None for br in branches)
    diagnostic = None
    bound = None
    if degenerate:
        diagnostic = "both forward branches deliver only vacuum"
    elif any(br["entropy_oracle"] is None for br in branches):
        diagnostic = "one forward branch delivers only vacuum; combined bound not defined"
    elif eta_bwd == 0:
        diagnostic = "backward efficiency is zero"
        degenerate = True
    else:
        bound = received_entropy_bound(forward_entropy_bound(stats.p01_prime, stats.p10_prime), eta_bwd)
    return {
        "attack": params.to_dict(),
        "eta_fwd": stats.eta_fwd,
        "eta_fwd_1": stats.eta_fwd_1,
        "p00_prime": stats.p00_prime,
        "p01_prime": stats.p01_prime,
        "p10_prime": stats.p10_prime,
        "p11_prime": stats.p11_prime,
        "branches": branches,
        "eta_bwd": eta_bwd,
        "received_bound": bound,
        "degenerate": degenerate,
        "diagnostic": diagnostic,
    }


def cmd_attack(args) -> int:
    cfg = load_config(args.config)
    section = _override(cfg.get("attack", {}), args, {k: k for k in ATTACK_KEYS})
    missing = [f"--{k}" for k in ATTACK_KEYS if k not in section]
    if missing:
        raise UsageError(f"attack parameters missing: {', '.join(missing)} (flag or config 'attack' section)")
    params = AttackParams.from_dict(section)
    if args.eta_bwd is not None:
        eta_bwd = args.eta_bwd
    elif "backward" in cfg:
        eta_bwd = BackwardChannelParams.from_dict(cfg["backward"]).efficiency
    else:
        eta_bwd = 1.0
    if not 0.0 <= eta_bwd <= 1.0:
        raise UsageError(f"--eta-bwd={eta_bwd!r} is not a probability in [0, 1]")
    doc = analyze_attack(params, eta_bwd)
    validate(doc, "attack_analysis")
    text = dumps(doc)
    sys.stdout.write(text)
    if args.out:
        write_outputs(Path(args.out), "attack", {"attack": params.to_dict()}, None, {"attack.json": text})
    return EXIT_DEGENERATE if doc["degenerate"] else EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pingpong-qkd",
        description="Key-rate analysis and Monte Carlo simulation of the modified Ping-Pong QKD protocol.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (default: $PINGPONG_QKD_CONFIG)")

    p = sub.add_parser("keyrate", help="evaluate the key-rate bound at one point")
    common(p)
    p.add_argument("--p01-prime", dest="p01_prime", type=float)
    p.add_argument("--p10-prime", dest="p10_prime", type=float)
    p.add_argument("--eta-bwd", dest="eta_bwd", type=float)
    p.add_argument("--qber", type=float)
    p.add_argument("--out", help="also write report.json and manifest.json here")
    p.set_defaults(func=cmd_keyrate)

    p = sub.add_parser("sweep", help="per-trial key rate versus fiber length")
    common(p)
    p.add_argument("--from-km", dest="from_km", type=float)
    p.add_argument("--to-km", dest="to_km", type=float)
    p.add_argument("--step-km", dest="step_km", type=float)
    p.add_argument("--attenuation", type=float, help="dB/km")
    p.add_argument("--detector-efficiency", dest="detector_efficiency", type=float)
    p.add_argument("--dark-count-prob", dest="dark_count_prob", type=float)
    p.add_argument("--misalignment", type=float)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo protocol session")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--message-prob", dest="message_prob", type=float)
    p.add_argument("--psi-policy", dest="psi_policy", choices=["count_as_error", "discard"])
    p.add_argument("--ancilla", choices=["coherent", "orthonormal"])
    p.add_argument("--transcript", action="store_true", help="also write transcript.csv")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="entropy analysis of a forward attack")
    common(p)
    for key in ATTACK_KEYS:
        p.add_argument(f"--{key}", type=float)
    p.add_argument("--eta-bwd", dest="eta_bwd", type=float)
    p.add_argument("--out", help="also write attack.json and manifest.json here")
    p.set_defaults(func=cmd_attack)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateChannelError as exc:
        print(f"error: degenerate channel: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"error: I/O failure{f' on {name}' if name else ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
