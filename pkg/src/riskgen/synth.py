"""Risk-controllable motion synthesis.

Candidate futures are built by perturbing agent trajectory control
points (piecewise-linear control polygon re-interpolated to the
horizon), scoring their induced risk with the risk field, and refining
with a cross-entropy-style sample/evaluate/refit loop. The ensemble of
returned modes targets the lower-bound match |R_min - r*| and the
upper-bound capability |R_max - tau r*|.

The FiLM conditioning kernel (gamma * F + beta) is kept as a standalone
tested primitive.
"""

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, SynthesisError
from .mining import ScalarMode
from .risk import risk_profile_arrays
from .scenario import Box3D, Trajectory, normalize_angle
from .tensor import Rng, as_tensor


@dataclass
class FilmParams:
    """Feature-wise affine modulation parameters, same shape as the feature."""

    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.gamma = as_tensor(self.gamma)
        self.beta = as_tensor(self.beta)
        if self.gamma.shape != self.beta.shape:
            raise DimensionError(
                f"gamma shape {self.gamma.shape} != beta shape {self.beta.shape}"
            )


def film_modulate(feature, params):
    """Elementwise gamma * F + beta; scalar gamma/beta broadcast."""
    f = as_tensor(feature)
    if params.gamma.size == 1:
        return float(params.gamma.reshape(-1)[0]) * f + float(
            params.beta.reshape(-1)[0]
        )
    if params.gamma.shape != f.shape:
        raise DimensionError(
            f"FiLM params shape {params.gamma.shape} != feature shape {f.shape}"
        )
    return params.gamma * f + params.beta


class TargetKind(enum.Enum):
    SCALAR = "scalar"
    PROFILE = "profile"


@dataclass
class RiskTarget:
    kind: TargetKind
    scalar: float = 0.0
    profile: np.ndarray = None
    tau: float = 2.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            self.kind = TargetKind(self.kind.lower())
        if self.tau <= 1.0:
            raise DomainError(f"tau must be > 1, got {self.tau}")
        if self.kind is TargetKind.SCALAR:
            if self.scalar < 0:
                raise DomainError(f"scalar risk target must be >= 0, got {self.scalar}")
        else:
            self.profile = np.asarray(self.profile, dtype=np.float64)
            if (self.profile < 0).any():
                raise DomainError("profile risk target must be >= 0 everywhere")

    @classmethod
    def scalar_target(cls, value, tau=2.0):
        return cls(kind=TargetKind.SCALAR, scalar=float(value), tau=tau)


@dataclass
class AgentMotion:
    """One agent's candidate future: trajectory plus per-frame boxes."""

    agent_id: str
    class_label: str
    size: tuple
    trajectory: Trajectory
    boxes: list


@dataclass
class MotionHypothesis:
    motions: list
    ego: Trajectory
    induced_risk: float
    induced_profile: np.ndarray
    feasible: bool
    violations: list = field(default_factory=list)


@dataclass
class SynthesisConfig:
    num_modes: int = 4
    control_points: int = 4
    pos_scale: float = 3.0       # knot offset std, meters
    vel_scale: float = 1.0       # extra std per second of elapsed time, m/s
    iterations: int = 60
    population: int = 32
    elite_frac: float = 0.25
    v_max: float = 25.0
    a_max: float = 6.0
    lambda_min: float = 1.0
    lambda_max: float = 1.0
    seed: int = 0
    perturb_agents: list = None  # None -> all non-ego agents
    perturb_ego: bool = False
    risk_scalar_mode: ScalarMode = ScalarMode.MAX_FRAME
    min_std: float = 1e-4

    def __post_init__(self):
        if self.num_modes < 2:
            raise DomainError("num_modes must be >= 2 (min and max modes)")
        if self.population < 2:
            raise DomainError("population must be >= 2")
        if self.control_points < 2:
            raise DomainError("control_points must be >= 2")
        if self.v_max <= 0 or self.a_max <= 0:
            raise DomainError("kinematic limits must be positive")
        if not 0 < self.elite_frac <= 1:
            raise DomainError("elite_frac must lie in (0, 1]")


def boxes_from_trajectory(traj, size):
    """Per-frame boxes: center (x, y, h/2), yaw = heading, constant size."""
    l, w, h = size
    return [
        Box3D(
            center=[traj.positions[t, 0], traj.positions[t, 1], h / 2.0],
            size=(l, w, h),
            yaw=traj.headings[t],
        )
        for t in range(len(traj))
    ]


def risk_match_loss(hypotheses, target, lambda_min, lambda_max):
    """Ensemble objective: lower-bound match plus upper-bound capability.

    Scalar targets: lambda_min*|R_min - r*| + lambda_max*|R_max - tau r*|.
    Profile targets substitute the per-frame mean absolute deviation of
    the extreme modes' profiles for the scalar terms.
    """
    if len(hypotheses) < 2:
        raise DomainError("risk_match_loss needs at least 2 hypotheses")
    risks = np.array([h.induced_risk for h in hypotheses])
    i_min, i_max = int(risks.argmin()), int(risks.argmax())
    r_min, r_max = float(risks[i_min]), float(risks[i_max])
    if target.kind is TargetKind.SCALAR:
        loss = lambda_min * abs(r_min - target.scalar) + lambda_max * abs(
            r_max - target.tau * target.scalar
        )
    else:
        p_min = hypotheses[i_min].induced_profile
        p_max = hypotheses[i_max].induced_profile
        loss = lambda_min * float(np.abs(p_min - target.profile).mean()) + (
            lambda_max * float(np.abs(p_max - target.tau * target.profile).mean())
        )
    return float(loss), r_min, r_max


def _derive_velocities(positions, dt):
    v = np.empty_like(positions)
    if len(positions) == 1:
        v[:] = 0.0
        return v
    v[0] = (positions[1] - positions[0]) / dt
    v[-1] = (positions[-1] - positions[-2]) / dt
    if len(positions) > 2:
        v[1:-1] = (positions[2:] - positions[:-2]) / (2.0 * dt)
    return v


def _headings_from_velocities(v, fallback):
    headings = np.empty(len(v))
    prev = float(fallback)
    for t in range(len(v)):
        speed = np.hypot(v[t, 0], v[t, 1])
        if speed >= 1e-9:
            prev = float(np.arctan2(v[t, 1], v[t, 0]))
        headings[t] = normalize_angle(prev)
    return headings


def _apply_offsets(base_traj, knot_frames, offsets):
    """Shift a trajectory by linearly interpolated knot offsets.

    offsets: (num_knots, 2) with the first knot pinned to zero by the
    caller; velocities are re-derived by central differences so the
    perturbed motion stays kinematically consistent.
    """
    t_idx = np.arange(len(base_traj), dtype=np.float64)
    dx = np.interp(t_idx, knot_frames, offsets[:, 0])
    dy = np.interp(t_idx, knot_frames, offsets[:, 1])
    positions = base_traj.positions + np.stack([dx, dy], axis=1)
    velocities = _derive_velocities(positions, base_traj.dt)
    headings = _headings_from_velocities(velocities, base_traj.headings[0])
    return Trajectory(
        dt=base_traj.dt, positions=positions, headings=headings, velocities=velocities
    )


def _kinematic_violations(traj, v_max, a_max):
    out = []
    speed = np.hypot(traj.velocities[:, 0], traj.velocities[:, 1])
    if (speed > v_max).any():
        out.append(f"speed {speed.max():.3f} > v_max {v_max}")
    if len(traj) > 1:
        acc = np.diff(traj.velocities, axis=0) / traj.dt
        mag = np.hypot(acc[:, 0], acc[:, 1])
        if (mag > a_max).any():
            out.append(f"accel {mag.max():.3f} > a_max {a_max}")
    return out


class _CandidateSpace:
    """Maps flat perturbation vectors to full motion hypotheses."""

    def __init__(self, scenario, params, config):
        self.scenario = scenario
        self.params = params
        self.config = config
        names = (
            config.perturb_agents
            if config.perturb_agents is not None
            else [a.agent_id for a in scenario.agents]
        )
        known = {a.agent_id for a in scenario.agents}
        missing = [n for n in names if n not in known]
        if missing:
            raise DomainError(f"perturb_agents: unknown agent ids {missing}")
        self.agent_names = list(names)
        self.knot_frames = np.linspace(0, scenario.horizon - 1, config.control_points)
        # first knot pinned at zero offset: the present is not perturbed
        self.free_knots = config.control_points - 1
        n_entities = len(self.agent_names) + (1 if config.perturb_ego else 0)
        self.dim = n_entities * self.free_knots * 2
        self.mu = [params.mu_for(a.class_label) for a in scenario.agents]
        # std grows with elapsed time at the knot (position + integrated velocity)
        knot_seconds = self.knot_frames[1:] * scenario.dt
        per_knot = config.pos_scale + config.vel_scale * knot_seconds
        self.sigma0 = np.tile(
            np.repeat(per_knot, 2), n_entities
        )

    def _split(self, vec):
        per = self.free_knots * 2
        chunks = [
            np.concatenate([[0.0, 0.0], vec[i * per : (i + 1) * per]]).reshape(-1, 2)
            for i in range(self.dim // per)
        ]
        return chunks

    def build(self, vec):
        """Candidate vector -> (ego trajectory, agent motions, violations)."""
        chunks = self._split(np.asarray(vec, dtype=np.float64))
        idx = 0
        ego = self.scenario.ego
        if self.config.perturb_ego:
            ego = _apply_offsets(ego, self.knot_frames, chunks[idx])
            idx += 1
        motions = []
        violations = []
        for a in self.scenario.agents:
            traj = a.trajectory
            if a.agent_id in self.agent_names:
                traj = _apply_offsets(traj, self.knot_frames, chunks[idx])
                idx += 1
            motions.append(
                AgentMotion(
                    agent_id=a.agent_id,
                    class_label=a.class_label,
                    size=a.size,
                    trajectory=traj,
                    boxes=boxes_from_trajectory(traj, a.size),
                )
            )
            for v in _kinematic_violations(traj, self.config.v_max, self.config.a_max):
                violations.append(f"{a.agent_id}: {v}")
        if self.config.perturb_ego:
            for v in _kinematic_violations(ego, self.config.v_max, self.config.a_max):
                violations.append(f"ego: {v}")
        return ego, motions, violations

    def induced(self, ego, motions):
        """Per-frame risk profile and its scalar collapse for a candidate."""
        agents_pos = np.stack([m.trajectory.positions for m in motions], axis=1)
        agents_vel = np.stack([m.trajectory.velocities for m in motions], axis=1)
        frame, _ = risk_profile_arrays(
            ego.positions, ego.velocities, agents_pos, agents_vel, self.mu, self.params
        )
        if self.config.risk_scalar_mode is ScalarMode.MEAN_FRAME:
            scalar = float(frame.mean())
        else:
            scalar = float(frame.max())
        return scalar, frame

    def hypothesis(self, vec):
        ego, motions, violations = self.build(vec)
        scalar, frame = self.induced(ego, motions)
        return MotionHypothesis(
            motions=motions,
            ego=ego,
            induced_risk=scalar,
            induced_profile=frame,
            feasible=not violations,
            violations=violations,
        )


@dataclass
class SynthesisResult:
    hypotheses: list          # sorted by induced risk, ascending
    loss: float
    r_min: float
    r_max: float
    loss_traces: list         # per mode, best-so-far objective per iteration
    target: RiskTarget

    def __iter__(self):
        return iter(self.hypotheses)

    def __len__(self):
        return len(self.hypotheses)


def _mode_objective(space, target, mode_frac):
    """Single-mode fitness: distance of the candidate's risk to its target."""
    if target.kind is TargetKind.SCALAR:
        goal = target.scalar * (1.0 + mode_frac * (target.tau - 1.0))

        def fn(scalar, frame):
            return abs(scalar - goal)

    else:
        goal_profile = target.profile * (1.0 + mode_frac * (target.tau - 1.0))

        def fn(scalar, frame):
            return float(np.abs(frame - goal_profile).mean())

    return fn

_INFEASIBLE_PENALTY = 1e6


def _cem_mode(space, objective, config, rng):
    """One cross-entropy search; returns (best vector, best-so-far trace)."""
    mean = np.zeros(space.dim)
    std = space.sigma0.copy()
    n_elite = max(1, int(round(config.population * config.elite_frac)))
    best_vec = np.zeros(space.dim)
    best_score = None
    trace = []
    for _ in range(config.iterations):
        samples = mean + std * rng.normal(size=(config.population, space.dim))
        # elitism: keep the best-so-far and the identity candidate in play
        samples[0] = best_vec
        samples[1] = 0.0
        scores = np.empty(config.population)
        for j in range(config.population):
            ego, motions, violations = space.build(samples[j])
            scalar, frame = space.induced(ego, motions)
            scores[j] = objective(scalar, frame)
            if violations:
                scores[j] += _INFEASIBLE_PENALTY
        order = np.argsort(scores, kind="stable")
        if best_score is None or scores[order[0]] < best_score:
            best_score = float(scores[order[0]])
            best_vec = samples[order[0]].copy()
        trace.append(best_score)
        elite = samples[order[:n_elite]]
        mean = elite.mean(axis=0)
        std = np.maximum(elite.std(axis=0), config.min_std)
    return best_vec, trace


def synthesize(scenario, target, params, config):
    """Produce num_modes motion hypotheses bracketing [r*, tau r*].

    Mode m searches for induced risk r* * (1 + m/(M-1) * (tau - 1)); the
    identity perturbation is always a candidate, so when the target
    equals the baseline risk the returned loss never exceeds the
    identity candidate's. Deterministic for a fixed config seed.
    """
    if not scenario.agents:
        raise SynthesisError("scenario has no agents to perturb")
    space = _CandidateSpace(scenario, params, config)
    if space.dim == 0:
        raise SynthesisError("no perturbable agents configured")
    root = Rng(config.seed)
    hypotheses = []
    traces = []
    m = config.num_modes
    for mode in range(m):
        objective = _mode_objective(space, target, mode / (m - 1))
        vec, trace = _cem_mode(space, objective, config, root.child(mode))
        hypotheses.append(space.hypothesis(vec))
        traces.append(trace)
    if not any(h.feasible for h in hypotheses):
        detail = "; ".join(hypotheses[0].violations[:3])
        raise SynthesisError(f"no feasible candidate found ({detail})")
    order = np.argsort([h.induced_risk for h in hypotheses], kind="stable")
    hypotheses = [hypotheses[i] for i in order]
    traces = [traces[i] for i in order]
    loss, r_min, r_max = risk_match_loss(
        hypotheses, target, config.lambda_min, config.lambda_max
    )
    return SynthesisResult(
        hypotheses=hypotheses,
        loss=loss,
        r_min=r_min,
        r_max=r_max,
        loss_traces=traces,
        target=target,
    )


def _traj_to_dict(traj):
    return {
        "states": [
            {
                "heading": float(traj.headings[t]),
                "vx": float(traj.velocities[t, 0]),
                "vy": float(traj.velocities[t, 1]),
                "x": float(traj.positions[t, 0]),
                "y": float(traj.positions[t, 1]),
            }
            for t in range(len(traj))
        ]
    }


def _traj_from_dict(doc, dt):
    states = doc["states"]
    return Trajectory(
        dt=dt,
        positions=[[s["x"], s["y"]] for s in states],
        headings=[s["heading"] for s in states],
        velocities=[[s["vx"], s["vy"]] for s in states],
    )


def hypothesis_to_dict(h):
    return {
        "agents": [
            {
                "boxes": [
                    {
                        "center": [float(v) for v in b.center],
                        "size": [float(v) for v in b.size],
                        "yaw": float(b.yaw),
                    }
                    for b in m.boxes
                ],
                "class": m.class_label,
                "id": m.agent_id,
                "size": [float(s) for s in m.size],
                "trajectory": _traj_to_dict(m.trajectory),
            }
            for m in h.motions
        ],
        "ego": _traj_to_dict(h.ego),
        "feasible": bool(h.feasible),
        "induced_profile": [float(v) for v in h.induced_profile],
        "induced_risk": float(h.induced_risk),
        "violations": list(h.violations),
    }


def result_to_dict(result):
    return {
        "hypotheses": [hypothesis_to_dict(h) for h in result.hypotheses],
        "loss": float(result.loss),
        "loss_traces": [[float(v) for v in tr] for tr in result.loss_traces],
        "r_max": float(result.r_max),
        "r_min": float(result.r_min),
        "target": {
            "kind": result.target.kind.value,
            "profile": None
            if result.target.profile is None
            else [float(v) for v in result.target.profile],
            "scalar": float(result.target.scalar),
            "tau": float(result.target.tau),
        },
    }


def write_motions_json(result, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result_to_dict(result), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_motions(path, dt):
    """Read a motions.json back into MotionHypothesis objects."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    hypotheses = []
    for hd in doc["hypotheses"]:
        motions = [
            AgentMotion(
                agent_id=ad["id"],
                class_label=ad["class"],
                size=tuple(ad["size"]),
                trajectory=_traj_from_dict(ad["trajectory"], dt),
                boxes=[
                    Box3D(center=bd["center"], size=tuple(bd["size"]), yaw=bd["yaw"])
                    for bd in ad["boxes"]
                ],
            )
            for ad in hd["agents"]
        ]
        hypotheses.append(
            MotionHypothesis(
                motions=motions,
                ego=_traj_from_dict(hd["ego"], dt),
                induced_risk=float(hd["induced_risk"]),
                induced_profile=np.asarray(hd["induced_profile"]),
                feasible=bool(hd["feasible"]),
                violations=list(hd["violations"]),
            )
        )
    return hypotheses
