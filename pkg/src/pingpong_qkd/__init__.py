"""Modified Ping-Pong two-way QKD: attack model, key-rate bound, fiber model
and Monte Carlo session simulation."""

__version__ = "0.1.0"

from .attack import AttackParams, EffectiveForwardStats, eve_entropy_oracle, forward_kraus
from .bounds import KeyRateReport, key_rate
from .channel import ChannelParams, overall_rate, sweep
from .errors import DegenerateChannelError, InvalidParameterError
from .protocol import BackwardChannelParams, ObservedStatistics, SessionConfig, run_session

__all__ = [
    "AttackParams",
    "BackwardChannelParams",
    "ChannelParams",
    "DegenerateChannelError",
    "EffectiveForwardStats",
    "InvalidParameterError",
    "KeyRateReport",
    "ObservedStatistics",
    "SessionConfig",
    "eve_entropy_oracle",
    "forward_kraus",
    "key_rate",
    "overall_rate",
    "run_session",
    "sweep",
]
