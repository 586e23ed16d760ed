"""Task-space trajectory generation from high-level actions.

Output vector (base-relative swing coordinates)::

    [torso pitch, base height above stance sole, swing x - base x,
     swing z - base z + H0, (swing foot pitch, flat feet only)]

so that on flat ground, with the base at ``H0 + h_d``, a grounded swing foot
reads ``-h_d`` in the fourth entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Z_OFFSET = 0.005
ACTION_LOW = np.array([-0.6, -0.5, -0.1])
ACTION_HIGH = np.array([0.6, 0.5, 0.1])
# slew limits on the commanded action (p_sw_T_x m/s, q_phi rad/s, h_d m/s)
SLEW_RATES = np.array([3.0, 2.0, 0.5])
# floor on the reach clip, keeping the landing x Lipschitz in h_d near full extension
MIN_STEP_X = 0.1


@dataclass(frozen=True)
class HLAction:
    p_sw_T_x: float = 0.0
    q_phi: float = 0.0
    h_d: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.p_sw_T_x, self.q_phi, self.h_d])

    @classmethod
    def from_array(cls, a) -> "HLAction":
        a = np.clip(np.asarray(a, dtype=float), ACTION_LOW, ACTION_HIGH)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @classmethod
    def from_normalized(cls, a) -> "HLAction":
        return cls.from_array(denormalize_action(a))

    def normalized(self) -> np.ndarray:
        return normalize_action(self.as_array())


def normalize_action(a) -> np.ndarray:
    return 2.0 * (np.asarray(a, dtype=float) - ACTION_LOW) / (ACTION_HIGH - ACTION_LOW) - 1.0


def denormalize_action(a) -> np.ndarray:
    a = np.clip(np.asarray(a, dtype=float), -1.0, 1.0)
    return ACTION_LOW + 0.5 * (a + 1.0) * (ACTION_HIGH - ACTION_LOW)


@dataclass
class SwingSpec:
    """Swing-foot trajectory parameters, in base-relative output coordinates."""

    p0: np.ndarray
    pT: np.ndarray
    z_clearance: float = 0.12
    T: float = 0.4

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float)
        self.pT = np.asarray(self.pT, dtype=float)
        if self.T <= 0 or self.z_clearance <= 0:
            raise ValueError("swing duration and clearance must be positive")


@dataclass
class TaskOutputs:
    y_a: np.ndarray
    y_d: np.ndarray
    yd_dot: np.ndarray
    yd_ddot: np.ndarray
    tau: float


def min_jerk(p0, pT, tau: float, T: float = 1.0):
    """Rest-to-rest quintic blend; derivatives are per unit time (step length T)."""
    tau = min(max(tau, 0.0), 1.0)
    t2 = tau * tau
    s = t2 * tau * (10.0 - 15.0 * tau + 6.0 * t2)
    ds = 30.0 * t2 * (1.0 - tau) ** 2
    dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau)
    d = np.asarray(pT, dtype=float) - np.asarray(p0, dtype=float)
    return p0 + s * d, ds * d / T, dds * d / (T * T)


_BINOM5 = (1.0, 5.0, 10.0, 10.0, 5.0, 1.0)


def bezier5(ctrl, tau: float, T: float = 1.0):
    """Fifth-order Bezier curve (Bernstein form) and its time derivatives."""
    b = [float(c) for c in ctrl]
    tau = min(max(tau, 0.0), 1.0)
    u = 1.0 - tau
    pos = sum(_BINOM5[k] * tau**k * u ** (5 - k) * b[k] for k in range(6))
    d1 = [5.0 * (b[k + 1] - b[k]) for k in range(5)]
    vel = sum((1.0, 4.0, 6.0, 4.0, 1.0)[k] * tau**k * u ** (4 - k) * d1[k] for k in range(5))
    d2 = [4.0 * (d1[k + 1] - d1[k]) for k in range(4)]
    acc = sum((1.0, 3.0, 3.0, 1.0)[k] * tau**k * u ** (3 - k) * d2[k] for k in range(4))
    return pos, vel / T, acc / (T * T)


def swing_z_control_points(z0: float, zT: float, apex: float) -> tuple[float, ...]:
    """Control points b0..b5 with repeated ends and a repeated middle pair.

    The middle pair is chosen so that the curve passes through ``apex`` at
    mid-swing: pos(0.5) = (6 z0 + 20 b_mid + 6 zT) / 32.
    """
    mid = (32.0 * apex - 6.0 * (z0 + zT)) / 20.0
    return (z0, z0, mid, mid, zT, zT)


def bezier5_z(spec: SwingSpec, tau: float):
    ctrl = swing_z_control_points(spec.p0[1], spec.pT[1], spec.z_clearance)
    return bezier5(ctrl, tau, spec.T)


def landing_height(h_d: float, p_sw_T_x: float, alpha: float, offset: float = Z_OFFSET) -> float:
    """Swing z target at touchdown: -h_d + p_x tan(alpha) - offset."""
    return -h_d + p_sw_T_x * math.tan(alpha) - offset


def reachable_step(h_d: float, p_x: float, alpha: float, H0: float, reach: float) -> float:
    """Clip a landing x so the swing sole stays within ``reach`` of the hip at touchdown.

    The bound never drops below ``MIN_STEP_X``.
    """
    dz = H0 + h_d + Z_OFFSET - p_x * math.tan(alpha)
    x_max = math.sqrt(max(reach * reach - dz * dz, MIN_STEP_X * MIN_STEP_X))
    return min(max(p_x, -x_max), x_max)


def desired_outputs(action: HLAction, spec: SwingSpec, t_step: float, H0: float,
                    alpha: float = 0.0, flat_foot: bool = False, descent_rate: float = 0.3,
                    reach: float | None = None):
    """Desired outputs and their first/second time derivatives at ``t_step``.

    ``spec.pT`` x is taken from the action (clipped to ``reach`` when given)
    and its z from ``landing_height``. Past the nominal step end the swing x
    holds and the swing z keeps descending at ``descent_rate`` until
    touchdown.
    """
    px = action.p_sw_T_x
    if reach is not None:
        px = reachable_step(action.h_d, px, alpha, H0, reach)
    pT = np.array([px, landing_height(action.h_d, px, alpha)])
    spec = SwingSpec(spec.p0, pT, spec.z_clearance, spec.T)
    tau = t_step / spec.T
    nout = 5 if flat_foot else 4
    y = np.zeros(nout)
    yd = np.zeros(nout)
    ydd = np.zeros(nout)
    y[0] = action.q_phi
    y[1] = H0 + action.h_d
    y[2], yd[2], ydd[2] = min_jerk(spec.p0[0], pT[0], tau, spec.T)
    y[3], yd[3], ydd[3] = bezier5_z(spec, tau)
    if tau > 1.0:
        y[3] -= descent_rate * (t_step - spec.T)
        yd[3] = -descent_rate
        ydd[3] = 0.0
    if flat_foot:
        y[4] = -alpha
    return y, yd, ydd, min(tau, 1.0)


@dataclass
class GaitGenerator:
    """Per-environment trajectory state: swing start point and slewed action.

    The commanded action moves toward the latest policy target at bounded
    rates, so desired outputs stay continuous across high-level ticks.
    """

    H0: float
    T: float = 0.4
    z_clearance: float = 0.12
    flat_foot: bool = False
    reach: float | None = None
    slew_rates: np.ndarray = field(default_factory=lambda: SLEW_RATES.copy())
    p0: np.ndarray = field(default_factory=lambda: np.zeros(2))
    command: np.ndarray = field(default_factory=lambda: np.zeros(3))
    target: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def reset(self, p0, action: HLAction | None = None):
        self.p0 = np.asarray(p0, dtype=float).copy()
        a = np.zeros(3) if action is None else action.as_array()
        self.command = a.copy()
        self.target = a.copy()

    def touchdown(self, p0):
        """New swing start point (base-relative output coordinates) after an impact."""
        self.p0 = np.asarray(p0, dtype=float).copy()

    def set_target(self, action: HLAction):
        self.target = action.as_array()

    def advance(self, dt: float):
        lim = self.slew_rates * dt
        self.command = self.command + np.clip(self.target - self.command, -lim, lim)

    @property
    def action(self) -> HLAction:
        return HLAction(*map(float, self.command))

    def desired(self, t_step: float, alpha: float = 0.0):
        spec = SwingSpec(self.p0, self.p0, self.z_clearance, self.T)
        return desired_outputs(self.action, spec, t_step, self.H0, alpha, self.flat_foot,
                               reach=self.reach)


def nominal_touchdown_time(T: float = 0.4, z_clearance: float = 0.12, h_d: float = 0.0,
                           offset: float = Z_OFFSET) -> float:
    """Time at which the nominal flat-ground swing first reaches the ground.

    The swing starts on the ground (z = -h_d) and targets ``offset`` below
    it, so contact happens slightly before ``T``.
    """
    ctrl = swing_z_control_points(-h_d, -h_d - offset, z_clearance)
    lo, hi = 0.5, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if bezier5(ctrl, mid)[0] > -h_d:
            lo = mid
        else:
            hi = mid
    return T * hi
