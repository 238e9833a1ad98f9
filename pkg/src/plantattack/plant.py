"""Surrogate chemical plant: closed-loop simulation, shutdown logic, operating cost.

The plant is a seven-state nonlinear ODE (reactor pressure/level/temperature,
separator level, stripper level, recycle flow, compressor work) advanced by
fixed-step RK4 at the sampling rate, regulated by five PI loops. It exposes
16 sensor channels (xmeas_1..16) and 9 actuator channels (xmv_1..9); an
attack layer may rewrite sensor values before the controller sees them and
actuator commands before the plant receives them.

The reactor temperature mode is open-loop unstable (exothermic reaction);
only the active temperature loop keeps it at the setpoint. Breaking a loop
by pinning its sensor or actuator lets the plant drift into a shutdown
constraint, which halts the run immediately.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numba import njit

from .errors import PlantInputError, ScheduleError

N_SENSORS = 16
N_ACTUATORS = 9
N_SIGNALS = N_SENSORS + N_ACTUATORS

# --- equilibrium design point -------------------------------------------------
# State order: [pressure kPa, reactor level %, reactor temp C, separator level %,
#               stripper level %, recycle flow kmol/h, compressor work kW]
P_EQ = 2800.0
LR_EQ = 65.0
TR_EQ = 122.9
LS_EQ = 50.0
LST_EQ = 50.0
FREC_EQ = 30.8
WC_EQ = 340.0

STATE_EQ = np.array([P_EQ, LR_EQ, TR_EQ, LS_EQ, LST_EQ, FREC_EQ, WC_EQ])

# Actuator base commands (valve %). Loops drive indices 3, 5, 6, 7, 8; the
# rest are held at base by the controller but remain attackable.
U_BASE_T = (63.0, 53.0, 26.0, 61.0, 22.0, 40.0, 37.0, 46.0, 41.0)
U_BASE = np.array(U_BASE_T)

# Flow/energy coefficients. Derived constants are written as expressions of the
# primary ones so the design point is a fixed point of the dynamics.
K_FD, K_FE, K_FA, K_FAC = 3.6, 4.5, 0.44, 7.5    # feed valve gains
K_REC = 1.4                                       # recycle valve gain
K_PURGE = 1.6                                     # purge valve gain at P_EQ
K_RXN = 820.0                                     # reaction rate at design point
K_RXN_T = 0.02                                    # reaction sensitivity per deg C
FEED_EQ = K_FD * U_BASE_T[0] + K_FE * U_BASE_T[1] + K_FA * U_BASE_T[2] + K_FAC * U_BASE_T[3]
K_SEPGAS = FEED_EQ + FREC_EQ - K_RXN - K_PURGE * U_BASE_T[5]   # gas to separator, eq
K_LIQ = 0.28                                      # liquid fraction of reaction output
FROUT_EQ = K_LIQ * K_RXN                          # reactor liquid outflow at eq
K_SU = 1.35                                       # separator underflow valve gain
K_SPLIT = (K_SU * U_BASE_T[6]) / FROUT_EQ         # liquid split reactor -> separator
K_PROD = (K_SU * U_BASE_T[6]) / U_BASE_T[7]       # product valve gain
T_COOL = 35.0                                     # cooling water temperature, C
T_AMB = 25.0
H_COOL = 0.01
H_AMB = 0.02
H_RXN = (H_COOL * U_BASE_T[8] * (TR_EQ - T_COOL) + H_AMB * (TR_EQ - T_AMB)) / K_RXN
C_PRESS = 3.0                                     # kPa per kmol gas imbalance
C_LR = 0.05
C_LS = 0.35
C_LST = 0.35
TAU_REC = 0.1                                     # h
TAU_COMP = 0.05                                   # h
K_COMP = WC_EQ / FREC_EQ
K_STEAM = 0.23                                    # steam rate per unit underflow

# PI loops: sensor -> actuator, with sign +1 when a high reading opens the
# valve. Order: pressure->purge, reactor level->feed, temperature->cooling,
# separator level->underflow, stripper level->product.
LOOP_SENSOR = np.array([6, 7, 8, 11, 13], dtype=np.int64)
LOOP_ACT = np.array([5, 3, 8, 6, 7], dtype=np.int64)
LOOP_SIGN = np.array([1.0, -1.0, 1.0, 1.0, 1.0])
LOOP_KP = np.array([0.35, 1.0, 9.0, 4.0, 4.0])
LOOP_KI = np.array([1.0, 2.0, 22.0, 8.0, 8.0])
I_CLAMP = 400.0                 # bound on the integral contribution Ki * I

# Proportional feedforward trims on the otherwise fixed valves, so their
# commands carry live signal: actuator index, sensor index, gain.
TRIM_ACT = np.array([0, 1, 2, 4], dtype=np.int64)
TRIM_SENSOR = np.array([6, 7, 6, 11], dtype=np.int64)
TRIM_GAIN = np.array([-0.020, -0.150, -0.004, 0.080])
TRIM_SP = np.array([P_EQ, LR_EQ, P_EQ, LS_EQ])

SETPOINTS = (P_EQ, LR_EQ, TR_EQ, LS_EQ, LST_EQ)

# Per-channel sensor noise scale (1 sigma at noise_scale = 1).
NOISE_SIGMA = np.array([
    0.5, 0.5, 0.05, 1.0,        # feed flows
    0.15, 1.2,                  # recycle, total feed
    1.8, 0.30, 0.035,           # pressure, reactor level, reactor temp
    0.12, 0.08,                 # purge rate, separator temp
    0.35, 0.25,                 # separator level, underflow
    0.35, 0.22,                 # stripper level, product rate
    1.4,                        # compressor work
])
PROC_SIGMA_P = 1.2              # process noise on pressure, kPa per sqrt(h)
PROC_SIGMA_T = 0.02             # process noise on temperature, C per sqrt(h)

CONSTRAINT_VARS = ("reactor-pressure", "reactor-level", "reactor-temperature",
                   "separator-level", "stripper-level")

DEFAULT_SHUTDOWN_LIMITS = ((2300.0, 3000.0), (30.0, 90.0), (100.0, 150.0),
                           (10.0, 90.0), (10.0, 90.0))
DEFAULT_COST_COEFFS = (0.9, 0.55, 0.04, 1.1)   # purge, product, compressor, steam

KIND_NONE, KIND_DOS, KIND_IMIN, KIND_IMAX, KIND_REPLAY = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class PlantConfig:
    """Immutable simulation configuration.

    shutdown_limits pairs are (low, high) with low < high, ordered as
    CONSTRAINT_VARS. cost_coefficients price the four cost streams
    (purge, product, compressor work, steam).
    """

    horizon_hours: float = 72.0
    samples_per_hour: int = 500
    noise_scale: float = 1.0
    seed: int = 0
    setpoints: tuple = SETPOINTS
    shutdown_limits: tuple = DEFAULT_SHUTDOWN_LIMITS
    cost_coefficients: tuple = DEFAULT_COST_COEFFS

    def __post_init__(self):
        if self.horizon_hours <= 0:
            raise PlantInputError("horizon_hours must be positive")
        if self.samples_per_hour <= 0:
            raise PlantInputError("samples_per_hour must be positive")
        if self.noise_scale < 0:
            raise PlantInputError("noise_scale must be >= 0")
        if len(self.shutdown_limits) != 5:
            raise PlantInputError("expected 5 shutdown limit pairs")
        for low, high in self.shutdown_limits:
            if not low < high:
                raise PlantInputError(f"shutdown limit pair ({low}, {high}) needs low < high")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_hours * self.samples_per_hour))

    @property
    def dt(self) -> float:
        return 1.0 / self.samples_per_hour

    def with_seed(self, seed: int) -> "PlantConfig":
        return replace(self, seed=int(seed))


@dataclass
class PlantState:
    """Plant state at a point in time; levels are held in [0, 100]."""

    pressure: float = P_EQ
    reactor_level: float = LR_EQ
    temperature: float = TR_EQ
    separator_level: float = LS_EQ
    stripper_level: float = LST_EQ
    recycle_flow: float = FREC_EQ
    compressor_work: float = WC_EQ
    clock: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.pressure, self.reactor_level, self.temperature,
                         self.separator_level, self.stripper_level,
                         self.recycle_flow, self.compressor_work])

    @classmethod
    def from_array(cls, x: np.ndarray, clock: float = 0.0) -> "PlantState":
        return cls(*(float(v) for v in x), clock=clock)


@dataclass(frozen=True)
class SignalFrame:
    """One sample of all transmitted signals: 16 sensors then 9 actuators."""

    sensors: np.ndarray
    actuators: np.ndarray
    t: float

    def __post_init__(self):
        if len(self.sensors) != N_SENSORS or len(self.actuators) != N_ACTUATORS:
            raise PlantInputError("frame needs 16 sensors and 9 actuators")

    def features(self) -> np.ndarray:
        """25-wide feature vector used by the detectors."""
        return np.concatenate([self.sensors, self.actuators])


@dataclass(frozen=True)
class ShutdownStatus:
    tripped: bool
    cause: str | None = None


@dataclass
class SimulationTrace:
    """Complete record of one closed-loop run.

    sensors/actuators hold the transmitted (possibly attacked) values, i.e.
    what a network-level observer sees. cost_series is cumulative, so any
    prefix of the run has a well-defined operating cost.
    """

    t: np.ndarray
    sensors: np.ndarray
    actuators: np.ndarray
    cost_series: np.ndarray
    shutdown_time: float | None
    shutdown_cause: str | None
    seed: int
    config: PlantConfig

    @property
    def n_frames(self) -> int:
        return len(self.t)

    @property
    def operating_cost(self) -> float:
        return float(self.cost_series[-1]) if len(self.cost_series) else 0.0

    def frame(self, i: int) -> SignalFrame:
        return SignalFrame(self.sensors[i], self.actuators[i], float(self.t[i]))

    def features(self) -> np.ndarray:
        """(n_frames, 25) matrix of transmitted signal values."""
        return np.hstack([self.sensors, self.actuators])

    def to_csv(self, path) -> None:
        header = (["t"] + [f"xmeas_{i + 1}" for i in range(N_SENSORS)]
                  + [f"xmv_{i + 1}" for i in range(N_ACTUATORS)])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n_frames):
                writer.writerow([repr(float(self.t[i]))]
                                + [repr(float(v)) for v in self.sensors[i]]
                                + [repr(float(v)) for v in self.actuators[i]])

    def summary(self) -> dict:
        return {
            "seed": int(self.seed),
            "shutdown_time": self.shutdown_time,
            "shutdown_cause": self.shutdown_cause,
            "operating_cost": self.operating_cost,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


@njit(cache=True, inline="always")
def _derivatives_into(x, u, dx):
    """Right-hand side of the surrogate ODE. x: (7,), u: (9,) valve %."""
    r = max(x[0], 1.0) / P_EQ
    f_feed = K_FD * u[0] + K_FE * u[1] + K_FA * u[2] + K_FAC * u[3]
    rxn = K_RXN * math.sqrt(r) * math.exp(K_RXN_T * (x[2] - TR_EQ))
    f_purge = K_PURGE * u[5] * r
    f_sepgas = K_SEPGAS * r * r
    f_rout = FROUT_EQ * (x[1] / LR_EQ)
    f_su = K_SU * u[6]
    dx[0] = C_PRESS * (f_feed + x[5] - rxn - f_purge - f_sepgas)
    dx[1] = C_LR * (K_LIQ * rxn - f_rout)
    dx[2] = (H_RXN * rxn - H_COOL * u[8] * (x[2] - T_COOL)
             - H_AMB * (x[2] - T_AMB))
    dx[3] = C_LS * (K_SPLIT * f_rout - f_su)
    dx[4] = C_LST * (f_su - K_PROD * u[7])
    dx[5] = (K_REC * u[4] * r - x[5]) / TAU_REC
    dx[6] = (K_COMP * x[5] * r - x[6]) / TAU_COMP


@njit(cache=True, inline="always")
def _rk4_into(x, u, dt, k1, k2, k3, k4, xtmp, xout):
    """One RK4 step written into xout; no allocation."""
    _derivatives_into(x, u, k1)
    for i in range(7):
        xtmp[i] = x[i] + 0.5 * dt * k1[i]
    _derivatives_into(xtmp, u, k2)
    for i in range(7):
        xtmp[i] = x[i] + 0.5 * dt * k2[i]
    _derivatives_into(xtmp, u, k3)
    for i in range(7):
        xtmp[i] = x[i] + dt * k3[i]
    _derivatives_into(xtmp, u, k4)
    for i in range(7):
        xout[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def _derivatives(x, u):
    """Allocating wrapper used by tests and the public single-step path."""
    dx = np.zeros(7)
    _derivatives_into(np.asarray(x, dtype=float), np.asarray(u, dtype=float), dx)
    return dx


def _rk4_step(x, u, dt):
    buf = np.zeros((5, 7))
    out = np.zeros(7)
    _rk4_into(np.asarray(x, dtype=float), np.asarray(u, dtype=float), dt,
              buf[0], buf[1], buf[2], buf[3], buf[4], out)
    return out


@njit(cache=True, inline="always")
def _measure_into(x, u, y):
    """Noise-free sensor vector for state x under actuator positions u."""
    y[0] = K_FD * u[0]
    y[1] = K_FE * u[1]
    y[2] = K_FA * u[2]
    y[3] = K_FAC * u[3]
    y[4] = x[5]
    y[5] = y[0] + y[1] + y[2] + y[3]
    y[6] = x[0]
    y[7] = x[1]
    y[8] = x[2]
    y[9] = K_PURGE * u[5] * (max(x[0], 1.0) / P_EQ)
    y[10] = 0.62 * x[2] + 15.802
    y[11] = x[3]
    y[12] = K_SU * u[6]
    y[13] = x[4]
    y[14] = K_PROD * u[7]
    y[15] = x[6]


def _measure(x, u):
    y = np.zeros(16)
    _measure_into(np.asarray(x, dtype=float), np.asarray(u, dtype=float), y)
    return y


@njit(cache=True, inline="always")
def _cost_rate(x, u, coeffs):
    r = max(x[0], 1.0) / P_EQ
    purge = K_PURGE * u[5] * r
    product = K_PROD * u[7]
    steam = K_STEAM * K_SU * u[6]
    return (coeffs[0] * purge + coeffs[1] * product
            + coeffs[2] * x[6] + coeffs[3] * steam)


@njit(cache=True, inline="always")
def _check_limits(x, limits):
    """0 when inside all shutdown pairs, else 1 + 2*var (+1 for the high side).

    Limits are exclusive: a value exactly at a bound does not trip.
    """
    for i in range(5):
        v = x[i]
        if v < limits[i, 0]:
            return 1 + 2 * i
        if v > limits[i, 1]:
            return 2 + 2 * i
    return 0


@njit(cache=True)
def _simulate_kernel(x_init, n_steps, dt, noise, setpoints, u_base, limits,
                     coeffs, kind, start, end, rsrc, rlen, value,
                     loop_sensor, loop_act, loop_sign, loop_kp, loop_ki,
                     y_seen, u_eff, y_true, u_cmd, cost, x_out):
    x = x_init.copy()
    xn = np.zeros(7)
    k1 = np.zeros(7)
    k2 = np.zeros(7)
    k3 = np.zeros(7)
    k4 = np.zeros(7)
    xtmp = np.zeros(7)
    y = np.zeros(16)
    u = np.zeros(9)
    u_prev = u_base.copy()
    y_init = np.zeros(16)
    _measure_into(x, u_base, y_init)
    integ = np.zeros(5)
    total = 0.0
    trip = 0
    n_done = 0
    for k in range(n_steps):
        _measure_into(x, u_prev, y)
        for j in range(16):
            y_true[k, j] = y[j] + noise[k, j]
        # Attack layer: sensor -> controller. Branches mirror _attacked();
        # inlined by hand because the call dominates the hot loop otherwise.
        for j in range(16):
            if kind[j] == 0 or k < start[j] or k >= end[j]:
                y_seen[k, j] = y_true[k, j]
            elif kind[j] == 1:
                y_seen[k, j] = y_true[start[j] - 1, j] if start[j] > 0 else y_init[j]
            elif kind[j] == 2 or kind[j] == 3:
                y_seen[k, j] = value[j]
            else:
                y_seen[k, j] = y_true[rsrc[j] + (k - start[j]) % rlen[j], j]
        # PI loops and feedforward trims act on the transmitted sensor values.
        for j in range(9):
            u_cmd[k, j] = u_base[j]
        for ti in range(4):
            trim = TRIM_GAIN[ti] * (y_seen[k, TRIM_SENSOR[ti]] - TRIM_SP[ti])
            ucand = u_base[TRIM_ACT[ti]] + trim
            u_cmd[k, TRIM_ACT[ti]] = min(max(ucand, 0.0), 100.0)
        for li in range(5):
            err = y_seen[k, loop_sensor[li]] - setpoints[li]
            integ[li] += err * dt
            contrib = loop_ki[li] * integ[li]
            if contrib > I_CLAMP:
                integ[li] = I_CLAMP / loop_ki[li]
                contrib = I_CLAMP
            elif contrib < -I_CLAMP:
                integ[li] = -I_CLAMP / loop_ki[li]
                contrib = -I_CLAMP
            ai = loop_act[li]
            ucand = u_base[ai] + loop_sign[li] * (loop_kp[li] * err + contrib)
            u_cmd[k, ai] = min(max(ucand, 0.0), 100.0)
        # Attack layer: controller -> actuators (channels 16..24).
        for j in range(9):
            c = 16 + j
            if kind[c] == 0 or k < start[c] or k >= end[c]:
                u_eff[k, j] = u_cmd[k, j]
            elif kind[c] == 1:
                u_eff[k, j] = u_cmd[start[c] - 1, j] if start[c] > 0 else u_base[j]
            elif kind[c] == 2 or kind[c] == 3:
                u_eff[k, j] = value[c]
            else:
                u_eff[k, j] = u_cmd[rsrc[c] + (k - start[c]) % rlen[c], j]
            u[j] = u_eff[k, j]
        total += _cost_rate(x, u, coeffs) * dt
        cost[k] = total
        _rk4_into(x, u, dt, k1, k2, k3, k4, xtmp, xn)
        for i in range(7):
            x[i] = xn[i]
        x[0] += noise[k, 16]
        x[2] += noise[k, 17]
        if x[1] < 0.0:
            x[1] = 0.0
        elif x[1] > 100.0:
            x[1] = 100.0
        if x[3] < 0.0:
            x[3] = 0.0
        elif x[3] > 100.0:
            x[3] = 100.0
        if x[4] < 0.0:
            x[4] = 0.0
        elif x[4] > 100.0:
            x[4] = 100.0
        for j in range(9):
            u_prev[j] = u[j]
        n_done = k + 1
        trip = _check_limits(x, limits)
        if trip != 0:
            break
    for i in range(7):
        x_out[i] = x[i]
    return n_done, trip


@lru_cache(maxsize=8)
def _noise_matrix_cached(seed: int, n_steps: int, noise_scale: float,
                         samples_per_hour: int) -> np.ndarray:
    if noise_scale == 0:
        noise = np.zeros((n_steps, 18))
    else:
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        noise = rng.standard_normal((n_steps, 18))
        sdt = math.sqrt(1.0 / samples_per_hour)
        noise[:, :16] *= NOISE_SIGMA * noise_scale
        noise[:, 16] *= PROC_SIGMA_P * sdt * noise_scale
        noise[:, 17] *= PROC_SIGMA_T * sdt * noise_scale
    noise.flags.writeable = False
    return noise


def _noise_matrix(config: PlantConfig, n_steps: int) -> np.ndarray:
    """Seeded per-step noise: 16 sensor columns + 2 process columns.

    Philox is counter-based, so the matrix for a seed is independent of any
    other RNG activity and step k's noise never depends on evaluation order.
    Cached because every evaluation in one evolution run shares a plant seed.
    """
    return _noise_matrix_cached(config.seed, n_steps, config.noise_scale,
                                config.samples_per_hour)


def step(state: PlantState, effective_actuators: np.ndarray,
         config: PlantConfig) -> PlantState:
    """Advance the plant by one sample interval under the given actuation.

    Deterministic given (state, inputs, seed, step index); the step index is
    recovered from the state clock. Raises PlantInputError on non-finite
    actuator values or when the clock is already at the horizon.
    """
    u = np.asarray(effective_actuators, dtype=float)
    if u.shape != (N_ACTUATORS,):
        raise PlantInputError(f"expected {N_ACTUATORS} actuator values")
    if not np.all(np.isfinite(u)):
        raise PlantInputError("actuator values must be finite")
    if state.clock >= config.horizon_hours:
        raise PlantInputError("state clock is at or past the horizon")
    dt = config.dt
    k = int(round(state.clock * config.samples_per_hour))
    x = _rk4_step(state.as_array(), u, dt)
    if config.noise_scale > 0:
        row = _noise_matrix(config, k + 1)[k]
        x[0] += row[16]
        x[2] += row[17]
    x[1] = min(max(x[1], 0.0), 100.0)
    x[3] = min(max(x[3], 0.0), 100.0)
    x[4] = min(max(x[4], 0.0), 100.0)
    return PlantState.from_array(x, clock=(k + 1) * dt)


def check_constraints(state: PlantState, config: PlantConfig) -> ShutdownStatus:
    """Shutdown check; limits are exclusive (a value at the bound is ok)."""
    limits = np.asarray(config.shutdown_limits, dtype=float)
    code = _check_limits(state.as_array(), limits)
    if code == 0:
        return ShutdownStatus(False, None)
    var = CONSTRAINT_VARS[(code - 1) // 2]
    side = "low" if code % 2 == 1 else "high"
    return ShutdownStatus(True, f"{var}-{side}")


def _compile_schedule(schedule, config: PlantConfig):
    """Turn an AttackSchedule into flat per-channel arrays for the kernel."""
    kind = np.zeros(N_SIGNALS, dtype=np.int64)
    start = np.zeros(N_SIGNALS, dtype=np.int64)
    end = np.zeros(N_SIGNALS, dtype=np.int64)
    rsrc = np.zeros(N_SIGNALS, dtype=np.int64)
    rlen = np.ones(N_SIGNALS, dtype=np.int64)
    value = np.zeros(N_SIGNALS)
    if schedule is None:
        return kind, start, end, rsrc, rlen, value
    sph = config.samples_per_hour
    n_steps = config.n_steps
    for d in schedule.directives:
        if d.kind.value == KIND_NONE:
            continue
        c = d.target
        if not 0 <= c < N_SIGNALS:
            raise ScheduleError(f"target {c} out of range")
        t0, t1 = d.window
        if not (math.isfinite(t0) and math.isfinite(t1)):
            raise ScheduleError("non-finite attack window")
        if not (0.0 <= t0 < t1 <= config.horizon_hours):
            raise ScheduleError(f"window ({t0}, {t1}) outside [0, horizon]")
        kind[c] = d.kind.value
        start[c] = int(round(t0 * sph))
        end[c] = min(int(round(t1 * sph)), n_steps)
        if d.kind.value in (KIND_IMIN, KIND_IMAX):
            if schedule.signal_ranges is None:
                raise ScheduleError("integrity attack needs recorded signal ranges")
            lo, hi = schedule.signal_ranges[c]
            value[c] = lo if d.kind.value == KIND_IMIN else hi
        if d.kind.value == KIND_REPLAY:
            if d.replay_src is None:
                raise ScheduleError("replay attack needs a replay source window")
            r0, r1 = d.replay_src
            if not (0.0 <= r0 < r1 <= t0):
                raise ScheduleError("replay source must precede the attack window")
            rsrc[c] = int(round(r0 * sph))
            rlen[c] = max(int(round(r1 * sph)) - rsrc[c], 1)
    return kind, start, end, rsrc, rlen, value


def simulate(schedule, config: PlantConfig) -> SimulationTrace:
    """Run one closed-loop simulation under an attack schedule (or None).

    Pure function of (schedule, config): repeated calls are bit-identical.
    Halts at the first shutdown-constraint violation; the returned trace
    contains only frames sampled strictly before the shutdown time.
    """
    kind, start, end, rsrc, rlen, value = _compile_schedule(schedule, config)
    n_steps = config.n_steps
    noise = _noise_matrix(config, n_steps)
    y_seen = np.empty((n_steps, N_SENSORS))
    u_eff = np.empty((n_steps, N_ACTUATORS))
    y_true = np.empty((n_steps, N_SENSORS))
    u_cmd = np.empty((n_steps, N_ACTUATORS))
    cost = np.empty(n_steps)
    x_out = np.empty(7)
    limits = np.asarray(config.shutdown_limits, dtype=float)
    coeffs = np.asarray(config.cost_coefficients, dtype=float)
    n_done, trip = _simulate_kernel(
        STATE_EQ, n_steps, config.dt, noise,
        np.asarray(config.setpoints[:5], dtype=float),
        U_BASE, limits, coeffs, kind, start, end, rsrc, rlen, value,
        LOOP_SENSOR, LOOP_ACT, LOOP_SIGN, LOOP_KP, LOOP_KI,
        y_seen, u_eff, y_true, u_cmd, cost, x_out)
    t = np.arange(n_done) * config.dt
    shutdown_time = None
    shutdown_cause = None
    if trip != 0:
        shutdown_time = n_done * config.dt
        var = CONSTRAINT_VARS[(trip - 1) // 2]
        shutdown_cause = f"{var}-{'low' if trip % 2 == 1 else 'high'}"
    return SimulationTrace(
        t=t, sensors=y_seen[:n_done].copy(), actuators=u_eff[:n_done].copy(),
        cost_series=cost[:n_done].copy(), shutdown_time=shutdown_time,
        shutdown_cause=shutdown_cause, seed=config.seed, config=config)


def operating_cost(trace: SimulationTrace) -> float:
    """Accumulated operating cost of a (possibly in-progress) trace."""
    if trace.n_frames < 1:
        raise PlantInputError("trace has no frames")
    return trace.operating_cost


def record_signal_ranges(n_runs: int, config: PlantConfig) -> np.ndarray:
    """(25, 2) per-channel (min, max) across n_runs attack-free runs.

    Run i uses seed config.seed + i. These extrema parameterize the
    integrity attack transforms.
    """
    if n_runs < 1:
        raise PlantInputError("n_runs must be >= 1")
    lo = np.full(N_SIGNALS, np.inf)
    hi = np.full(N_SIGNALS, -np.inf)
    for i in range(n_runs):
        trace = simulate(None, config.with_seed(config.seed + i))
        feats = trace.features()
        lo = np.minimum(lo, feats.min(axis=0))
        hi = np.maximum(hi, feats.max(axis=0))
    return np.stack([lo, hi], axis=1)
