"""Quasi-static simulation of a small energy community.

The community is a single-phase feeder behind a 6.6 kV / 200 V transformer
with three local assets:

* a rooftop PV system (5 kW peak, no output 20:00-04:00, reduced output
  during a cloudy hour 11:00-12:00),
* a battery behind a DC bus, managed by a power-balance controller,
* two households with flexible loads (max 2.5 kW each; community peaks of
  about 4 kW at 09:00 and about 5 kW at 19:00 and 22:00).

The battery controller is active from 00:00 to 12:00 and from 18:00 to
24:00.  While active it commands the battery to cover exactly the local
imbalance (load minus PV), so the transformer carries approximately zero
active power.  Between 12:00 and 18:00 the controller is off, the battery
holds its state of charge, and the grid absorbs the imbalance.

Each step solves an algebraic power balance and applies a small linear
voltage droop (1% per 10 kW) instead of simulating AC waveforms; the
downstream detector consumes only magnitude measurements.  Every run is
deterministic given its seed.

Sign conventions: battery power is positive when discharging, grid power
is positive when importing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

SECONDS_PER_DAY = 86_400

# Fixed measurement vector: four voltages, five currents, three powers,
# battery state of charge and remaining amp-hours.
FEATURE_COLUMNS = (
    "V_sec",
    "V_PV",
    "V_L1",
    "V_L2",
    "I_sec",
    "I_PV",
    "I_L1",
    "I_L2",
    "I_battery",
    "P_PV",
    "P_L1",
    "P_L2",
    "battery_soc",
    "battery_ah",
)
N_FEATURES = len(FEATURE_COLUMNS)

CSV_HEADER = ("timestamp_s",) + FEATURE_COLUMNS + ("label",)

# Solar envelope anchors (seconds of day).
_SOLAR_RISE = 4 * 3600
_SOLAR_PEAK_START = 14 * 3600
_SOLAR_PEAK_END = 15 * 3600
_SOLAR_SET = 20 * 3600
_CLOUD_START = 11 * 3600
_CLOUD_END = 12 * 3600
_SOLAR_PEAK_KW = 5.0

# Controller-inactive window.
_CONTROLLER_OFF_START = 12 * 3600
_CONTROLLER_OFF_END = 18 * 3600

# Household load shape: a standby floor plus raised-cosine bumps
# (center_s, amplitude_kw, half_width_s).  Household 1 carries the 09:00
# community peak; the 19:00 and 22:00 peaks are shared equally.  Amplitudes
# put the community total at 4.0 kW (09:00) and 5.0 kW (19:00, 22:00) and
# cap each household at 2.5 kW.
_LOAD_FLOOR_KW = 0.22
_LOAD_BUMPS = {
    1: (
        (9 * 3600, 2.28, 5400),
        (19 * 3600, 2.28, 1440),
        (22 * 3600, 2.28, 1440),
    ),
    2: (
        (9 * 3600, 1.28, 5400),
        (19 * 3600, 2.28, 1440),
        (22 * 3600, 2.28, 1440),
    ),
}

# Voltage droop: 1% deviation per P_BASE_KW of local power.
_DROOP_FRACTION = 0.01
_P_BASE_KW = 10.0

GainHook = Callable[[float], float]


class SimulationError(RuntimeError):
    """Numerical failure inside the stepper (NaN/Inf at a known step)."""

    def __init__(self, message: str, step_index: int):
        super().__init__(f"{message} (step {step_index})")
        self.step_index = step_index


@dataclass(frozen=True)
class SimulationConfig:
    """Physical and numerical parameters of one simulated day."""

    time_step_s: float = 10.0
    duration_h: float = 24.0
    seed: int = 0
    battery_capacity_Ah: float = 50.0
    battery_initial_soc_pct: float = 50.0
    nominal_voltage_V: float = 200.0
    grid_voltage_V: float = 6600.0
    dc_bus_voltage_V: float = 300.0
    noise_sigma: float = 0.02
    cloud_factor: float = 0.4

    def __post_init__(self):
        if self.time_step_s <= 0:
            raise ValueError(f"time_step_s must be > 0, got {self.time_step_s}")
        if self.duration_h <= 0:
            raise ValueError(f"duration_h must be > 0, got {self.duration_h}")
        if not 0 <= self.battery_initial_soc_pct <= 100:
            raise ValueError(
                f"battery_initial_soc_pct must be in [0, 100], got {self.battery_initial_soc_pct}"
            )
        if self.battery_capacity_Ah <= 0:
            raise ValueError(f"battery_capacity_Ah must be > 0, got {self.battery_capacity_Ah}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= self.cloud_factor <= 1:
            raise ValueError(f"cloud_factor must be in [0, 1], got {self.cloud_factor}")
        if min(self.nominal_voltage_V, self.grid_voltage_V, self.dc_bus_voltage_V) <= 0:
            raise ValueError("voltages must be > 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_h * 3600 / self.time_step_s))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, raw: dict) -> "SimulationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def with_seed(self, seed: int) -> "SimulationConfig":
        return replace(self, seed=seed)


@dataclass
class CommunityState:
    """Mutable integration state carried between steps."""

    t: float
    soc_pct: float
    rng: np.random.Generator

    def battery_ah(self, config: SimulationConfig) -> float:
        return config.battery_capacity_Ah * self.soc_pct / 100.0


class MeasurementFrame(NamedTuple):
    """One timestep of the 14 community measurements (V, A, W, %, Ah)."""

    V_sec: float
    V_PV: float
    V_L1: float
    V_L2: float
    I_sec: float
    I_PV: float
    I_L1: float
    I_L2: float
    I_battery: float
    P_PV: float
    P_L1: float
    P_L2: float
    battery_soc: float
    battery_ah: float


@dataclass
class TimeSeries:
    """A measurement series with per-frame anomaly labels.

    ``values`` is an (N, 14) float64 array in FEATURE_COLUMNS order;
    ``timestamps_s`` holds seconds since 00:00 of the simulated day.
    """

    timestamps_s: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    step_s: float

    def __post_init__(self):
        self.timestamps_s = np.asarray(self.timestamps_s, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.values.ndim != 2 or self.values.shape[1] != N_FEATURES:
            raise ValueError(f"values must be (N, {N_FEATURES}), got {self.values.shape}")
        if len(self.values) == 0:
            raise ValueError("series must contain at least one frame")
        if not (len(self.timestamps_s) == len(self.values) == len(self.labels)):
            raise ValueError("timestamps, values and labels must have equal length")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def start_time_s(self) -> float:
        return float(self.timestamps_s[0])

    def frame(self, i: int) -> MeasurementFrame:
        return MeasurementFrame(*self.values[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.step_s == other.step_s
            and np.array_equal(self.timestamps_s, other.timestamps_s)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )


# ── Profiles and controller ──────────────────────────────────────────────


def _check_time_of_day(t_s: float) -> float:
    if not 0 <= t_s < SECONDS_PER_DAY:
        raise ValueError(f"time of day must be in [0, {SECONDS_PER_DAY}), got {t_s}")
    return float(t_s)


def solar_profile(t_s: float, config: SimulationConfig) -> float:
    """Clear-sky PV output in kW at second-of-day ``t_s``.

    Raised-cosine ramp from 04:00 to the 5 kW plateau at 14:00-15:00,
    raised-cosine descent to 20:00, zero overnight.  The cloudy hour
    11:00-12:00 scales the envelope by ``config.cloud_factor``.
    """
    t = _check_time_of_day(t_s)
    if t < _SOLAR_RISE or t >= _SOLAR_SET:
        return 0.0
    if t < _SOLAR_PEAK_START:
        frac = (t - _SOLAR_RISE) / (_SOLAR_PEAK_START - _SOLAR_RISE)
        envelope = _SOLAR_PEAK_KW * 0.5 * (1.0 - math.cos(math.pi * frac))
    elif t < _SOLAR_PEAK_END:
        envelope = _SOLAR_PEAK_KW
    else:
        frac = (t - _SOLAR_PEAK_END) / (_SOLAR_SET - _SOLAR_PEAK_END)
        envelope = _SOLAR_PEAK_KW * 0.5 * (1.0 + math.cos(math.pi * frac))
    if _CLOUD_START <= t < _CLOUD_END:
        envelope *= config.cloud_factor
    return envelope


def load_profile(household: int, t_s: float, config: SimulationConfig) -> float:
    """Deterministic base demand in kW for household 1 or 2."""
    t = _check_time_of_day(t_s)
    if household not in _LOAD_BUMPS:
        raise ValueError(f"household must be 1 or 2, got {household}")
    load = _LOAD_FLOOR_KW
    for center, amplitude, half_width in _LOAD_BUMPS[household]:
        dt = abs(t - center)
        if dt < half_width:
            load += amplitude * 0.5 * (1.0 + math.cos(math.pi * dt / half_width))
    return min(load, 2.5)


def battery_controller(t_s: float, p_solar_kw: float, p_load_total_kw: float) -> float:
    """Battery power command in kW (positive = discharge).

    While active the command covers the local imbalance exactly, driving
    transformer power to zero; during the off window it is 0.
    """
    t = _check_time_of_day(t_s)
    if not (math.isfinite(p_solar_kw) and math.isfinite(p_load_total_kw)):
        raise ValueError("controller inputs must be finite")
    if _CONTROLLER_OFF_START <= t < _CONTROLLER_OFF_END:
        return 0.0
    return p_load_total_kw - p_solar_kw


# ── Stepper ──────────────────────────────────────────────────────────────


def _identity_gain(_t: float) -> float:
    return 1.0


def step(
    state: CommunityState,
    config: SimulationConfig,
    controller_gain_hook: GainHook | None = None,
    load_gain_hooks: Sequence[GainHook] | None = None,
    noise: Sequence[float] | None = None,
    step_index: int = 0,
) -> tuple[CommunityState, MeasurementFrame]:
    """Advance one timestep and return the new state and the measurements.

    ``noise`` supplies the three standard-normal draws for (solar, load1,
    load2); when omitted they are taken from ``state.rng``.  Gain hooks
    scale the battery command and the household demands as a function of
    time; physical state-of-charge limits are enforced after the hooks.
    """
    battery_hook = controller_gain_hook or _identity_gain
    hooks = tuple(load_gain_hooks) if load_gain_hooks else (_identity_gain, _identity_gain)
    if len(hooks) != 2:
        raise ValueError("expected one load hook per household")

    t = state.t
    tod = t % SECONDS_PER_DAY
    if noise is None:
        noise = state.rng.standard_normal(3)
    sigma = config.noise_sigma

    p_solar = solar_profile(tod, config) * (1.0 + sigma * noise[0])
    p_solar = max(p_solar, 0.0)
    p_l1 = max(load_profile(1, tod, config) * (1.0 + sigma * noise[1]), 0.0) * hooks[0](t)
    p_l2 = max(load_profile(2, tod, config) * (1.0 + sigma * noise[2]), 0.0) * hooks[1](t)
    p_load_total = p_l1 + p_l2

    command = battery_controller(tod, p_solar, p_load_total) * battery_hook(t)

    # Coulomb counting at a fixed DC bus voltage; clamp the power so the
    # state of charge stays within [0, 100].
    dt_h = config.time_step_s / 3600.0
    cap = config.battery_capacity_Ah
    v_dc = config.dc_bus_voltage_V
    # kW that would move SOC from soc_pct to a bound within this step.
    max_discharge = (state.soc_pct / 100.0) * cap * v_dc / dt_h / 1000.0
    max_charge = ((state.soc_pct - 100.0) / 100.0) * cap * v_dc / dt_h / 1000.0
    p_batt = min(max(command, max_charge), max_discharge)

    p_grid = p_load_total - p_solar - p_batt

    soc = state.soc_pct - (p_batt * 1000.0 / v_dc) * dt_h / cap * 100.0
    soc = min(max(soc, 0.0), 100.0)

    nominal = config.nominal_voltage_V
    v_sec = nominal * (1.0 - _DROOP_FRACTION * p_grid / _P_BASE_KW)
    v_pv = nominal * (1.0 + _DROOP_FRACTION * p_solar / _P_BASE_KW)
    v_l1 = nominal * (1.0 - _DROOP_FRACTION * p_l1 / _P_BASE_KW)
    v_l2 = nominal * (1.0 - _DROOP_FRACTION * p_l2 / _P_BASE_KW)

    frame = MeasurementFrame(
        V_sec=v_sec,
        V_PV=v_pv,
        V_L1=v_l1,
        V_L2=v_l2,
        I_sec=p_grid * 1000.0 / v_sec,
        I_PV=p_solar * 1000.0 / v_pv,
        I_L1=p_l1 * 1000.0 / v_l1,
        I_L2=p_l2 * 1000.0 / v_l2,
        I_battery=p_batt * 1000.0 / v_dc,
        P_PV=p_solar * 1000.0,
        P_L1=p_l1 * 1000.0,
        P_L2=p_l2 * 1000.0,
        battery_soc=soc,
        battery_ah=cap * soc / 100.0,
    )
    if not all(math.isfinite(v) for v in frame):
        raise SimulationError("non-finite measurement", step_index)

    new_state = CommunityState(t=t + config.time_step_s, soc_pct=soc, rng=state.rng)
    return new_state, frame


def simulate(
    config: SimulationConfig,
    attack=None,
    *,
    controller_gain_hook: GainHook | None = None,
    load_gain_hooks: Sequence[GainHook] | None = None,
    label_window: tuple[float, float] | None = None,
) -> TimeSeries:
    """Run a full simulation and return the labeled series.

    ``attack`` is an AttackSpec; passing one is equivalent to calling
    :func:`ecids.attacks.inject`.  The hook/label keywords are the lower
    level interface the attack layer itself uses.  Output is deterministic
    for a given (config, attack) pair.
    """
    if attack is not None:
        from .attacks import inject

        return inject(config, attack)

    n = config.n_steps
    rng = np.random.default_rng(config.seed)
    all_noise = rng.standard_normal((n, 3))
    state = CommunityState(t=0.0, soc_pct=config.battery_initial_soc_pct, rng=rng)

    timestamps = np.empty(n, dtype=np.float64)
    values = np.empty((n, N_FEATURES), dtype=np.float64)
    labels = np.zeros(n, dtype=np.int8)
    for i in range(n):
        timestamps[i] = state.t
        if label_window is not None and label_window[0] <= state.t < label_window[1]:
            labels[i] = 1
        state, frame = step(
            state,
            config,
            controller_gain_hook=controller_gain_hook,
            load_gain_hooks=load_gain_hooks,
            noise=all_noise[i],
            step_index=i,
        )
        values[i] = frame

    return TimeSeries(timestamps_s=timestamps, values=values, labels=labels, step_s=config.time_step_s)


# ── CSV round trip ───────────────────────────────────────────────────────


class CsvFormatError(ValueError):
    """Malformed dataset file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


def write_csv(series: TimeSeries, path) -> None:
    """Write a series using the fixed dataset schema.

    Floats are written with ``repr`` so a read round-trips bit-exactly.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for ts, row, label in zip(series.timestamps_s, series.values, series.labels):
            writer.writerow([repr(float(ts))] + [repr(float(v)) for v in row] + [int(label)])


def read_csv(path) -> TimeSeries:
    """Parse a dataset file, validating the schema strictly."""
    with open(path, newline="") as fh:
        return _read_csv_stream(fh)


def _read_csv_stream(fh: io.TextIOBase) -> TimeSeries:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError("empty file", 1) from None
    if tuple(header) != CSV_HEADER:
        missing = set(CSV_HEADER) - set(header)
        extra = set(header) - set(CSV_HEADER)
        detail = []
        if missing:
            detail.append(f"missing columns {sorted(missing)}")
        if extra:
            detail.append(f"unexpected columns {sorted(extra)}")
        if not detail:
            detail.append("columns out of order")
        raise CsvFormatError("bad header: " + ", ".join(detail), 1)

    timestamps, rows, labels = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise CsvFormatError(
                f"expected {len(CSV_HEADER)} fields, found {len(row)}", lineno
            )
        try:
            timestamps.append(float(row[0]))
            rows.append([float(v) for v in row[1 : 1 + N_FEATURES]])
            label = int(row[-1])
        except ValueError as exc:
            raise CsvFormatError(f"unparseable value: {exc}", lineno) from None
        if label not in (0, 1):
            raise CsvFormatError(f"label must be 0 or 1, got {label}", lineno)
        labels.append(label)

    if not rows:
        raise CsvFormatError("no data rows", 2)
    step_s = timestamps[1] - timestamps[0] if len(timestamps) > 1 else 1.0
    return TimeSeries(
        timestamps_s=np.array(timestamps),
        values=np.array(rows),
        labels=np.array(labels),
        step_s=step_s,
    )
