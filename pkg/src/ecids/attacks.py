"""Attack injection for the community simulator.

Attacks are modeled as a time-windowed gain applied to a control or demand
signal before the plant reacts: the battery command can be amplified (PA),
reversed (PI) or forced to zero (DoS), and the household demands can be
scaled up (LI) or down (LR).  Outside the attack window every gain is 1.0.
The plant still enforces physical limits (state-of-charge bounds), so an
attacked run stays physically consistent while its measurements drift away
from normal patterns.

Ten named presets cover the scenario grid; all target a four-hour window
starting 06:00 while the battery controller is active, except DoS, which
suppresses the battery for the full day (a zeroed command only violates
expected behavior if it persists across periods where the battery would
normally act).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .simulator import SECONDS_PER_DAY, GainHook, SimulationConfig, TimeSeries, simulate

BATTERY_COMMAND = "battery_command"
LOAD1 = "load1"
LOAD2 = "load2"
_VALID_TARGETS = {BATTERY_COMMAND, LOAD1, LOAD2}

_DEFAULT_START_S = 6 * 3600.0
_DEFAULT_DURATION_S = 4 * 3600.0

ATTACK_KINDS = ("PA", "PI", "DoS", "LR", "LI")


@dataclass(frozen=True)
class AttackSpec:
    """One attack scenario: a gain applied to target signals in a window."""

    kind: str
    gain: float
    start_s: float = _DEFAULT_START_S
    duration_s: float = _DEFAULT_DURATION_S
    targets: frozenset[str] = field(default_factory=lambda: frozenset({BATTERY_COMMAND}))

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(self.targets))
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; expected one of {ATTACK_KINDS}")
        if self.duration_s <= 0:
            raise ValueError(f"duration_s must be > 0, got {self.duration_s}")
        if not self.targets <= _VALID_TARGETS:
            raise ValueError(f"invalid targets {sorted(self.targets - _VALID_TARGETS)}")
        if self.kind == "PA":
            # gain == 1 is allowed as an explicit no-op (useful for harness checks).
            if self.gain < 1 or BATTERY_COMMAND not in self.targets:
                raise ValueError("PA requires gain >= 1 on the battery command")
        elif self.kind == "PI":
            if self.gain >= 0 or BATTERY_COMMAND not in self.targets:
                raise ValueError("PI requires gain < 0 on the battery command")
        elif self.kind == "DoS":
            if self.gain != 0 or BATTERY_COMMAND not in self.targets:
                raise ValueError("DoS requires gain == 0 on the battery command")
        elif self.kind == "LR":
            if not 0 <= self.gain < 1 or not {LOAD1, LOAD2} <= self.targets:
                raise ValueError("LR requires 0 <= gain < 1 on both loads")
        elif self.kind == "LI":
            if self.gain < 1 or not {LOAD1, LOAD2} <= self.targets:
                raise ValueError("LI requires gain >= 1 on both loads")

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s

    def in_window(self, t_s: float) -> bool:
        return self.start_s <= t_s < self.end_s

    def with_window(self, start_s: float, duration_s: float) -> "AttackSpec":
        return replace(self, start_s=start_s, duration_s=duration_s)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "gain": self.gain,
            "start_s": self.start_s,
            "duration_s": self.duration_s,
            "targets": sorted(self.targets),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AttackSpec":
        return cls(
            kind=raw["kind"],
            gain=raw["gain"],
            start_s=raw.get("start_s", _DEFAULT_START_S),
            duration_s=raw.get("duration_s", _DEFAULT_DURATION_S),
            targets=frozenset(raw.get("targets", [BATTERY_COMMAND])),
        )


_BOTH_LOADS = frozenset({LOAD1, LOAD2})
_FULL_DAY = dict(start_s=0.0, duration_s=float(SECONDS_PER_DAY))

# The ten scenario presets, keyed by their report/CLI names.
SCENARIO_PRESETS: dict[str, AttackSpec] = {
    "PAx2": AttackSpec("PA", 2.0),
    "PAx5": AttackSpec("PA", 5.0),
    "DoS": AttackSpec("DoS", 0.0, **_FULL_DAY),
    "PI-1": AttackSpec("PI", -1.0),
    "PI-2": AttackSpec("PI", -2.0),
    "PI-5": AttackSpec("PI", -5.0),
    "LRx0": AttackSpec("LR", 0.0, targets=_BOTH_LOADS),
    "LRx0.5": AttackSpec("LR", 0.5, targets=_BOTH_LOADS),
    "LIx2": AttackSpec("LI", 2.0, targets=_BOTH_LOADS),
    "LIx5": AttackSpec("LI", 5.0, targets=_BOTH_LOADS),
}


def preset(name: str) -> AttackSpec:
    try:
        return SCENARIO_PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; valid presets: {', '.join(SCENARIO_PRESETS)}"
        ) from None


def gain_hook(spec: AttackSpec, signal_id: str) -> GainHook:
    """Gain as a function of time for one signal.

    Returns ``spec.gain`` inside the attack window for targeted signals and
    1.0 everywhere else; untargeted signals get the identity.
    """
    if signal_id not in _VALID_TARGETS:
        raise ValueError(f"unknown signal {signal_id!r}")
    if signal_id not in spec.targets:
        return lambda t: 1.0
    start, end, gain = spec.start_s, spec.end_s, spec.gain

    def hook(t: float) -> float:
        return gain if start <= t < end else 1.0

    return hook


def inject(config: SimulationConfig, spec: AttackSpec) -> TimeSeries:
    """Simulate a day under attack; frames inside the window are labeled 1.

    The same seed without the attack reproduces the series bit-exactly up
    to the window start (and, for battery-state reasons, measurements that
    integrate the attack can stay displaced after the window ends).
    """
    horizon = config.duration_h * 3600.0
    if spec.start_s < 0 or spec.end_s > horizon:
        raise ValueError(
            f"attack window [{spec.start_s}, {spec.end_s}) outside simulated horizon [0, {horizon})"
        )
    return simulate(
        config,
        controller_gain_hook=gain_hook(spec, BATTERY_COMMAND),
        load_gain_hooks=(gain_hook(spec, LOAD1), gain_hook(spec, LOAD2)),
        label_window=(spec.start_s, spec.end_s),
    )
