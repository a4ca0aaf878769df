"""The four teleoperation control methods behind one streaming step interface.

Method 1 (the hybrid) combines a three-class gesture classifier with a
regressor for the size/curl axes of the teleoperation subspace, driven by a
deterministic mode machine:

  Regressing  normal motion; the regressor sets sigma and epsilon (median
              smoothed), alpha holds.
  Spreading   the spread gesture freezes sigma/epsilon and ramps alpha at
              the signed rate delta, bouncing at the [0, 1] bounds.
  Closing     an isometric-contraction event freezes alpha/epsilon and ramps
              sigma at rate gamma until the fingers stall; a second
              contraction event hands control back to the regressor.

Closing has priority over spread frames: while Closing, any class only
advances sigma. Contraction events are rising edges of the Contract class,
debounced by a refractory period so one long contraction cannot toggle the
mode twice.

Methods 2-4 are baselines adapted to non-anthropomorphic hands: regression
through a PCA pose subspace, the empirical two-axis wrist projection, and
pose classification with MVC-calibrated force interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from emg_teleop.signal import StreamingMedian
from emg_teleop.subspace import (
    HandMap,
    PcaSubspace,
    SubspacePose,
    pca_reconstruct,
    project_from_joints,
    project_to_robot,
)

NORMAL = "Normal"
SPREAD = "Spread"
CONTRACT = "Contract"
GESTURE_CLASSES = (NORMAL, SPREAD, CONTRACT)

POWER = "Power"
PRECISION = "Precision"
PINCH = "Pinch"
POSE_CLASSES = (POWER, PRECISION, PINCH)

REGRESSING = "Regressing"
SPREADING = "Spreading"
CLOSING = "Closing"


@dataclass(frozen=True)
class Method1Config:
    """Rates and debounce settings for the hybrid controller."""

    delta_per_s: float = 0.25
    gamma_per_s: float = 0.40
    refractory_s: float = 0.3
    stall_window: int = 5
    median_window_samples: int = 40

    def __post_init__(self):
        if self.delta_per_s <= 0 or self.gamma_per_s <= 0:
            raise ValueError("rates must be positive")
        if self.stall_window < 1 or self.median_window_samples < 1:
            raise ValueError("stall_window and median_window_samples must be >= 1")


@dataclass
class ControllerState:
    """Mutable per-stream state of the Method-1 mode machine."""

    psi: np.ndarray
    delta_rate: float
    gamma_rate: float
    mode: str = REGRESSING
    contract_latch: bool = False
    refractory_steps_left: int = 0
    stall_counter: int = 0
    stalled: bool = False
    median_sigma: StreamingMedian | None = None
    median_epsilon: StreamingMedian | None = None

    @classmethod
    def initial(cls, config: Method1Config, alpha0: float = 0.0) -> "ControllerState":
        # the pose begins with alpha at its minimum value
        return cls(
            psi=np.array([alpha0, 0.0, 0.0]),
            delta_rate=config.delta_per_s,
            gamma_rate=config.gamma_per_s,
            median_sigma=StreamingMedian(config.median_window_samples),
            median_epsilon=StreamingMedian(config.median_window_samples),
        )

    def copy(self) -> "ControllerState":
        return replace(
            self,
            psi=self.psi.copy(),
            median_sigma=self.median_sigma.copy() if self.median_sigma else None,
            median_epsilon=self.median_epsilon.copy() if self.median_epsilon else None,
        )

    @property
    def pose(self) -> SubspacePose:
        return SubspacePose.from_array(self.psi)


def _predict(model, x):
    return model.predict(x) if hasattr(model, "predict") else model(x)


def _method1_core(
    state: ControllerState,
    label: str,
    reg_out,
    dt: float,
    hand_map: HandMap,
    config: Method1Config,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance the mode machine in place; returns (psi, q, clamp flags)."""
    if label not in GESTURE_CLASSES:
        raise ValueError(f"unknown gesture class {label!r}")
    if state.refractory_steps_left > 0:
        state.refractory_steps_left -= 1

    event = False
    if label == CONTRACT:
        if not state.contract_latch and state.refractory_steps_left == 0:
            event = True
            state.refractory_steps_left = int(round(config.refractory_s / dt))
        state.contract_latch = True
    else:
        state.contract_latch = False

    if event:
        if state.mode == CLOSING:
            state.mode = REGRESSING
        else:
            state.mode = CLOSING
            state.stall_counter = 0
            state.stalled = False

    alpha, sigma, epsilon = state.psi

    if state.mode == CLOSING:
        # alpha and epsilon frozen; sigma ramps until the fingers stall
        if not state.stalled:
            sigma = min(1.0, sigma + state.gamma_rate * dt)
    elif label == SPREAD:
        state.mode = SPREADING
        alpha = alpha + state.delta_rate * dt
        if alpha >= 1.0:
            alpha = 1.0
            state.delta_rate = -abs(state.delta_rate)
        elif alpha <= 0.0:
            alpha = 0.0
            state.delta_rate = abs(state.delta_rate)
    elif label == NORMAL:
        state.mode = REGRESSING
        out = np.asarray(reg_out, dtype=float)
        sigma = min(1.0, max(0.0, state.median_sigma.push(float(out[0]))))
        epsilon = min(1.0, max(0.0, state.median_epsilon.push(float(out[1]))))
    else:
        # Contract frames continuing a run while Regressing: hold the pose
        state.mode = REGRESSING

    state.psi = np.array([alpha, sigma, epsilon])
    q, clamped = project_to_robot(state.psi, hand_map)

    if state.mode == CLOSING:
        if bool(np.all(clamped)):
            state.stall_counter += 1
        else:
            state.stall_counter = 0
        if sigma >= 1.0 or state.stall_counter >= config.stall_window:
            state.stalled = True
    return state.psi, q, clamped


def method1_step(
    state: ControllerState,
    x_hat,
    dt: float,
    classifier,
    regressor,
    hand_map: HandMap,
    config: Method1Config = Method1Config(),
) -> tuple[ControllerState, np.ndarray, np.ndarray]:
    """One hybrid-controller step on a filtered EMG vector.

    The input state is left untouched; a stepped copy is returned along with
    the new subspace pose and the commanded joint vector.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    new_state = state.copy()
    label = _predict(classifier, x_hat)
    reg_out = _predict(regressor, x_hat)
    psi, q, _ = _method1_core(new_state, str(label), reg_out, dt, hand_map, config)
    return new_state, psi, q


class Method2Controller:
    """Regression into a PCA pose subspace, then subspace mapping to the robot."""

    def __init__(
        self,
        regressor,
        pca: PcaSubspace,
        human_map: HandMap,
        robot_map: HandMap,
        median_window_samples: int = 40,
    ):
        self.regressor = regressor
        self.pca = pca
        self.human_map = human_map
        self.robot_map = robot_map
        self._medians = [StreamingMedian(median_window_samples) for _ in range(pca.k)]

    def step(self, x_hat) -> tuple[np.ndarray, np.ndarray]:
        coeffs = np.asarray(_predict(self.regressor, x_hat), dtype=float)
        if coeffs.shape != (self.pca.k,):
            raise ValueError(
                f"regressor produced {coeffs.shape} coefficients, PCA subspace has k={self.pca.k}"
            )
        smoothed = np.array([m.push(float(c)) for m, c in zip(self._medians, coeffs)])
        q_human = pca_reconstruct(smoothed, self.pca)
        psi, _ = project_from_joints(q_human, self.human_map)
        q, _ = project_to_robot(psi, self.robot_map)
        return psi, q


# ---------------------------------------------------------------------------
# Method 3: empirical wrist-motion projection

WRIST_ROLES = ("flexor", "extensor", "abductor")
REST = "rest"
FLEX_EXTEND = "flex_extend"
ABDUCT_ADDUCT = "abduct_adduct"
WRIST_SEGMENTS = (REST, FLEX_EXTEND, ABDUCT_ADDUCT)


def method3_project(envelopes: dict, calib: dict) -> tuple[float, float]:
    """Project per-role EMG envelopes onto the wrist axes (C1, C2).

    C1 tracks flexion/extension, C2 abduction/adduction. Envelopes are
    normalized by their per-role MVC values; both outputs clamp to [-1, 1].
    """
    for role in WRIST_ROLES:
        if role not in envelopes:
            raise KeyError(f"missing envelope for role {role!r}")
        if role not in calib:
            raise KeyError(f"missing MVC calibration for role {role!r}")
        if calib[role] <= 0:
            raise ValueError(f"MVC for role {role!r} must be positive")
    f = envelopes["flexor"] / calib["flexor"]
    e = envelopes["extensor"] / calib["extensor"]
    a = envelopes["abductor"] / calib["abductor"]
    c1 = float(np.clip(f - e, -1.0, 1.0))
    c2 = float(np.clip(a - 0.5 * (f + e), -1.0, 1.0))
    return c1, c2


@dataclass
class WristAnalysis:
    """Per-segment variance of the wrist axes, plus response verdicts."""

    variances: dict  # axis -> {segment -> variance}
    ratios: dict  # axis -> gesture/rest variance ratio for its expected motion
    verdicts: dict  # axis -> bool ("axis responds to expected motion")
    threshold: float


def method3_variance_analysis(
    labels,
    envelopes: dict,
    calib: dict,
    threshold: float = 10.0,
    rest_floor: float = 1e-12,
) -> WristAnalysis:
    """Compare per-axis variance across labeled wrist-motion segments.

    Each axis is judged against the motion it is supposed to encode
    (C1: flexion/extension, C2: abduction/adduction): the verdict is
    positive when that segment's variance is at least threshold times the
    rest variance (floored at rest_floor).
    """
    labels = np.asarray(labels, dtype=object)
    env = {role: np.asarray(envelopes[role], dtype=float) for role in WRIST_ROLES}
    n = labels.shape[0]
    for role, arr in env.items():
        if arr.shape != (n,):
            raise ValueError(f"envelope for {role!r} has shape {arr.shape}, expected ({n},)")
    for role in WRIST_ROLES:
        if calib.get(role, 0) <= 0:
            raise ValueError(f"MVC for role {role!r} must be positive")
    f = env["flexor"] / calib["flexor"]
    e = env["extensor"] / calib["extensor"]
    a = env["abductor"] / calib["abductor"]
    c1 = np.clip(f - e, -1.0, 1.0)
    c2 = np.clip(a - 0.5 * (f + e), -1.0, 1.0)
    def _var(x):
        # a constant segment has zero variance by definition; np.var can
        # return one rounded ulp squared there because the mean rounds
        if x.min() == x.max():
            return 0.0
        return float(np.var(x))

    variances: dict = {"C1": {}, "C2": {}}
    for segment in WRIST_SEGMENTS:
        mask = labels == segment
        if not mask.any():
            raise ValueError(f"empty segment {segment!r}")
        variances["C1"][segment] = _var(c1[mask])
        variances["C2"][segment] = _var(c2[mask])
    expected = {"C1": FLEX_EXTEND, "C2": ABDUCT_ADDUCT}
    ratios, verdicts = {}, {}
    for axis, segment in expected.items():
        rest_var = max(variances[axis][REST], rest_floor)
        ratios[axis] = variances[axis][segment] / rest_var
        verdicts[axis] = ratios[axis] >= threshold
    return WristAnalysis(variances=variances, ratios=ratios, verdicts=verdicts, threshold=threshold)


# ---------------------------------------------------------------------------
# Method 4: pose classification + force regression


@dataclass(frozen=True)
class ForceCalibration:
    """Per-gesture minimum and maximum voluntary contraction levels."""

    f_min: dict
    f_max: dict

    def __post_init__(self):
        for g, fmax in self.f_max.items():
            fmin = self.f_min.get(g)
            if fmin is None:
                raise ValueError(f"missing f_min for gesture {g!r}")
            if fmin < 0 or fmax <= fmin:
                raise ValueError(f"need 0 <= f_min < f_max for gesture {g!r}")


@dataclass(frozen=True)
class PoseTemplates:
    """Open/closed subspace pose pair per pose class."""

    open_pose: dict  # class -> 3-vector
    closed_pose: dict

    def pair(self, pose_class: str) -> tuple[np.ndarray, np.ndarray]:
        if pose_class not in self.open_pose or pose_class not in self.closed_pose:
            raise KeyError(f"missing pose template for class {pose_class!r}")
        return (
            np.asarray(self.open_pose[pose_class], dtype=float),
            np.asarray(self.closed_pose[pose_class], dtype=float),
        )


def method4_step(
    x_hat,
    pose_classifier,
    calib: ForceCalibration,
    templates: PoseTemplates,
    hand_map: HandMap,
) -> tuple[str, np.ndarray, np.ndarray]:
    """Classify the pose, then interpolate open/closed templates by force.

    Force is the mean rectified envelope across channels, normalized per
    gesture by the MVC calibration. High contraction opens the hand, low
    force closes it.
    """
    g = str(_predict(pose_classifier, x_hat))
    if g not in calib.f_max:
        raise KeyError(f"missing force calibration for gesture {g!r}")
    open_t, closed_t = templates.pair(g)
    force = float(np.mean(np.abs(np.asarray(x_hat, dtype=float))))
    theta = (force - calib.f_min[g]) / (calib.f_max[g] - calib.f_min[g])
    u = min(1.0, max(0.0, theta))
    psi = (1.0 - u) * closed_t + u * open_t
    q, _ = project_to_robot(psi, hand_map)
    return g, psi, q


# ---------------------------------------------------------------------------
# Batch driver


@dataclass(frozen=True)
class TrajectoryPoint:
    """One sample of a controller run."""

    t: float
    label: str
    psi: np.ndarray
    q: np.ndarray
    mode: str
    clamped: bool
    stalled: bool


def run_method1(
    times,
    features,
    dt: float,
    classifier,
    regressor,
    hand_map: HandMap,
    config: Method1Config = Method1Config(),
    alpha0: float = 0.0,
) -> list[TrajectoryPoint]:
    """Fold the Method-1 step over a filtered feature matrix.

    Model predictions are batched up front (the models are pure), then the
    sequential mode machine consumes them; results are identical to calling
    method1_step per sample.
    """
    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    if n == 0:
        return []
    labels = [str(l) for l in _predict(classifier, features)]
    reg_outs = np.asarray(_predict(regressor, features), dtype=float)
    state = ControllerState.initial(config, alpha0=alpha0)

    # scalar re-statement of _method1_core for session-scale throughput;
    # joint projection is vectorized afterwards and only evaluated inline
    # while Closing (stall detection needs the clamp flags then).
    # tests pin equivalence with method1_step.
    A_T = hand_map.A.T
    delta_star = hand_map.delta_star
    o = hand_map.o
    lo = hand_map.joint_limits[:, 0]
    hi = hand_map.joint_limits[:, 1]
    alpha, sigma, epsilon = (float(v) for v in state.psi)
    delta = state.delta_rate
    gamma = state.gamma_rate
    mode = state.mode
    latch = False
    refractory = 0
    stall_counter = 0
    stalled = False
    refractory_steps = int(round(config.refractory_s / dt))
    push_sigma = state.median_sigma.push
    push_epsilon = state.median_epsilon.push
    psis = np.empty((n, 3))
    modes: list[str] = []
    stall_flags = np.zeros(n, dtype=bool)
    for i in range(n):
        label = labels[i]
        if label not in GESTURE_CLASSES:
            raise ValueError(f"unknown gesture class {label!r} at sample {i}")
        if refractory > 0:
            refractory -= 1
        event = False
        if label == CONTRACT:
            if not latch and refractory == 0:
                event = True
                refractory = refractory_steps
            latch = True
        else:
            latch = False
        if event:
            if mode == CLOSING:
                mode = REGRESSING
            else:
                mode = CLOSING
                stall_counter = 0
                stalled = False
        if mode == CLOSING:
            if not stalled:
                sigma = min(1.0, sigma + gamma * dt)
            q_raw = (np.array((alpha, sigma, epsilon)) * delta_star) @ A_T + o
            if np.all((q_raw < lo) | (q_raw > hi)):
                stall_counter += 1
            else:
                stall_counter = 0
            if sigma >= 1.0 or stall_counter >= config.stall_window:
                stalled = True
        elif label == SPREAD:
            mode = SPREADING
            alpha += delta * dt
            if alpha >= 1.0:
                alpha = 1.0
                delta = -abs(delta)
            elif alpha <= 0.0:
                alpha = 0.0
                delta = abs(delta)
        elif label == NORMAL:
            mode = REGRESSING
            sigma = min(1.0, max(0.0, push_sigma(float(reg_outs[i, 0]))))
            epsilon = min(1.0, max(0.0, push_epsilon(float(reg_outs[i, 1]))))
        else:
            mode = REGRESSING
        psis[i, 0] = alpha
        psis[i, 1] = sigma
        psis[i, 2] = epsilon
        modes.append(mode)
        stall_flags[i] = stalled

    Q_raw = (psis * delta_star) @ A_T + o
    Q = np.clip(Q_raw, lo, hi)
    clamped_any = np.any((Q_raw < lo) | (Q_raw > hi), axis=1)
    return [
        TrajectoryPoint(
            t=float(times[i]), label=labels[i], psi=psis[i], q=Q[i],
            mode=modes[i], clamped=bool(clamped_any[i]), stalled=bool(stall_flags[i]),
        )
        for i in range(n)
    ]


def run_method2(times, features, controller: Method2Controller) -> list[TrajectoryPoint]:
    out = []
    for t, x in zip(times, np.asarray(features, dtype=float)):
        psi, q = controller.step(x)
        out.append(TrajectoryPoint(t=float(t), label="", psi=psi, q=q,
                                   mode="", clamped=False, stalled=False))
    return out


def run_method4(
    times, features, pose_classifier, calib: ForceCalibration,
    templates: PoseTemplates, hand_map: HandMap,
) -> list[TrajectoryPoint]:
    features = np.asarray(features, dtype=float)
    if features.shape[0] == 0:
        return []
    labels = _predict(pose_classifier, features)
    out = []
    for i, t in enumerate(times):
        g, psi, q = method4_step(features[i], _Const(labels[i]), calib, templates, hand_map)
        out.append(TrajectoryPoint(t=float(t), label=g, psi=psi, q=q,
                                   mode="", clamped=False, stalled=False))
    return out


class _Const:
    """Stub model returning a fixed prediction (used to reuse batched labels)."""

    def __init__(self, value):
        self.value = value

    def predict(self, x):
        return self.value
