"""Scenario data model: trajectories, 3-D boxes, cameras, JSON ingestion.

The JSON schema (documented in the README and mirrored by save_scenario)
is the file contract for every CLI subcommand. All loaded scenarios are
validated: shared dt and frame count across trajectories, unique agent
ids, orthonormal camera rotations.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

AGENT_CLASSES = ("car", "truck", "bus", "motorcycle", "bicycle", "pedestrian", "other")

_WORLD_UP = np.array([0.0, 0.0, 1.0])


def normalize_angle(a):
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class KinematicState:
    """Planar position (m) and velocity (m/s)."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=np.float64))


@dataclass
class Trajectory:
    """Time-sampled planar states: positions (T, 2), headings (T,), velocities (T, 2)."""

    dt: float
    positions: np.ndarray
    headings: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.velocities = np.asarray(self.velocities, dtype=np.float64).reshape(-1, 2)
        self.headings = np.asarray(
            [normalize_angle(h) for h in np.atleast_1d(np.asarray(self.headings, dtype=np.float64))]
        )
        if self.dt <= 0:
            raise SchemaError(f"trajectory dt must be > 0, got {self.dt}")
        n = len(self.positions)
        if n == 0:
            raise SchemaError("trajectory has no states")
        if len(self.headings) != n or len(self.velocities) != n:
            raise SchemaError(
                f"trajectory field lengths differ: positions {n}, "
                f"headings {len(self.headings)}, velocities {len(self.velocities)}"
            )

    def __len__(self):
        return len(self.positions)

    def state(self, t):
        return KinematicState(self.positions[t], self.velocities[t])


@dataclass
class Box3D:
    """Axis-aligned-in-yaw 3-D box: center (3,), size (l, w, h), yaw (rad)."""

    center: np.ndarray
    size: tuple
    yaw: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.size = tuple(float(s) for s in self.size)
        if len(self.size) != 3 or any(s <= 0 for s in self.size):
            raise SchemaError(f"box size components must be > 0, got {self.size}")
        self.yaw = float(self.yaw)

    def footprint_corners(self):
        """Ground-plane corners of the box footprint, (4, 2)."""
        l, w, _ = self.size
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        half = np.array(
            [[l / 2, w / 2], [l / 2, -w / 2], [-l / 2, -w / 2], [-l / 2, w / 2]]
        )
        rot = np.array([[c, -s], [s, c]])
        return self.center[:2] + half @ rot.T


@dataclass
class CameraModel:
    """Pinhole camera: intrinsics (3, 3), world-to-camera extrinsics (4, 4)."""

    name: str
    intrinsics: np.ndarray
    extrinsics: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.intrinsics = np.asarray(self.intrinsics, dtype=np.float64).reshape(3, 3)
        self.extrinsics = np.asarray(self.extrinsics, dtype=np.float64).reshape(4, 4)
        if self.intrinsics[0, 0] <= 0 or self.intrinsics[1, 1] <= 0:
            raise SchemaError(f"camera {self.name}: fx and fy must be > 0")
        if self.width <= 0 or self.height <= 0:
            raise SchemaError(f"camera {self.name}: width/height must be > 0")
        r = self.extrinsics[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise SchemaError(f"camera {self.name}: extrinsics rotation not orthonormal")


@dataclass
class AgentTrack:
    """One agent: id, class label, planar trajectory, constant box size."""

    agent_id: str
    class_label: str
    trajectory: Trajectory
    size: tuple

    def __post_init__(self):
        if self.class_label not in AGENT_CLASSES:
            raise SchemaError(
                f"agents[{self.agent_id}].class: unknown label {self.class_label!r}"
            )
        self.size = tuple(float(s) for s in self.size)
        if len(self.size) != 3 or any(s <= 0 for s in self.size):
            raise SchemaError(f"agents[{self.agent_id}].size must be 3 positive values")


@dataclass
class Scenario:
    """Ego + agent trajectories, camera rig, shared time base."""

    scenario_id: str
    dt: float
    horizon: int
    ego: Trajectory
    agents: list = field(default_factory=list)
    cameras: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.ego) != self.horizon:
            raise SchemaError(
                f"ego: trajectory length {len(self.ego)} != num_frames {self.horizon}"
            )
        seen = set()
        for a in self.agents:
            if a.agent_id in seen:
                raise SchemaError(f"agents[{a.agent_id}]: duplicate agent id")
            seen.add(a.agent_id)
            if len(a.trajectory) != self.horizon:
                raise SchemaError(
                    f"agents[{a.agent_id}]: trajectory length "
                    f"{len(a.trajectory)} != num_frames {self.horizon}"
                )
            if abs(a.trajectory.dt - self.dt) > 1e-12:
                raise SchemaError(f"agents[{a.agent_id}]: dt differs from scenario dt")
        if abs(self.ego.dt - self.dt) > 1e-12:
            raise SchemaError("ego: dt differs from scenario dt")


def _velocities_from_positions(positions, dt):
    """Central differences, one-sided at the ends."""
    p = np.asarray(positions, dtype=np.float64)
    v = np.empty_like(p)
    if len(p) == 1:
        v[0] = 0.0
        return v
    v[0] = (p[1] - p[0]) / dt
    v[-1] = (p[-1] - p[-2]) / dt
    if len(p) > 2:
        v[1:-1] = (p[2:] - p[:-2]) / (2.0 * dt)
    return v


def _parse_states(states, dt, where):
    if not isinstance(states, list) or not states:
        raise SchemaError(f"{where}.states: must be a non-empty list")
    pos, head, vel = [], [], []
    has_vel = None
    for i, st in enumerate(states):
        path = f"{where}.states[{i}]"
        for key in ("x", "y", "heading"):
            if key not in st:
                raise SchemaError(f"{path}.{key}: missing field")
        pos.append([float(st["x"]), float(st["y"])])
        head.append(float(st["heading"]))
        this_vel = "vx" in st and "vy" in st
        if has_vel is None:
            has_vel = this_vel
        elif has_vel != this_vel:
            raise SchemaError(f"{path}: velocity given for only some states")
        if this_vel:
            vel.append([float(st["vx"]), float(st["vy"])])
    pos = np.asarray(pos)
    vel = np.asarray(vel) if has_vel else _velocities_from_positions(pos, dt)
    return Trajectory(dt=dt, positions=pos, headings=np.asarray(head), velocities=vel)


def _require(doc, key, where):
    if key not in doc:
        raise SchemaError(f"{where}.{key}: missing field")
    return doc[key]


def scenario_from_dict(doc):
    meta = _require(doc, "meta", "$")
    sid = str(_require(meta, "id", "meta"))
    dt = float(_require(meta, "dt", "meta"))
    horizon = int(_require(meta, "num_frames", "meta"))
    if dt <= 0:
        raise SchemaError("meta.dt: must be > 0")
    if horizon < 1:
        raise SchemaError("meta.num_frames: must be >= 1")

    ego = _parse_states(_require(_require(doc, "ego", "$"), "states", "ego"), dt, "ego")

    agents = []
    for i, a in enumerate(doc.get("agents", [])):
        where = f"agents[{i}]"
        aid = str(_require(a, "id", where))
        cls = str(_require(a, "class", where))
        size = _require(a, "size", where)
        traj = _parse_states(_require(a, "states", where), dt, f"agents[{aid}]")
        agents.append(AgentTrack(agent_id=aid, class_label=cls, trajectory=traj, size=size))

    cameras = []
    for i, c in enumerate(doc.get("cameras", [])):
        where = f"cameras[{i}]"
        intr = _require(c, "intrinsics", where)
        extr = _require(c, "extrinsics", where)
        if len(intr) != 9:
            raise SchemaError(f"{where}.intrinsics: expected 9 row-major values")
        if len(extr) != 16:
            raise SchemaError(f"{where}.extrinsics: expected 16 row-major values")
        cameras.append(
            CameraModel(
                name=str(_require(c, "name", where)),
                intrinsics=np.asarray(intr, dtype=np.float64).reshape(3, 3),
                extrinsics=np.asarray(extr, dtype=np.float64).reshape(4, 4),
                width=int(_require(c, "width", where)),
                height=int(_require(c, "height", where)),
            )
        )

    return Scenario(
        scenario_id=sid, dt=dt, horizon=horizon, ego=ego, agents=agents, cameras=cameras
    )


def load_scenario(path):
    """Load and validate a scenario JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def _states_to_dicts(traj):
    return [
        {
            "heading": float(traj.headings[t]),
            "vx": float(traj.velocities[t, 0]),
            "vy": float(traj.velocities[t, 1]),
            "x": float(traj.positions[t, 0]),
            "y": float(traj.positions[t, 1]),
        }
        for t in range(len(traj))
    ]


def scenario_to_dict(sc):
    return {
        "agents": [
            {
                "class": a.class_label,
                "id": a.agent_id,
                "size": [float(s) for s in a.size],
                "states": _states_to_dicts(a.trajectory),
            }
            for a in sc.agents
        ],
        "cameras": [
            {
                "extrinsics": [float(v) for v in c.extrinsics.reshape(-1)],
                "height": int(c.height),
                "intrinsics": [float(v) for v in c.intrinsics.reshape(-1)],
                "name": c.name,
                "width": int(c.width),
            }
            for c in sc.cameras
        ],
        "ego": {"states": _states_to_dicts(sc.ego)},
        "meta": {"dt": float(sc.dt), "id": sc.scenario_id, "num_frames": int(sc.horizon)},
    }


def save_scenario(sc, path):
    """Write the canonical JSON form (sorted keys, repr float formatting)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(sc), fh, sort_keys=True, indent=1)
        fh.write("\n")


def propagate_constant_velocity(state, steps, dt):
    """Roll a state forward `steps` frames at constant velocity.

    Heading is atan2 of the velocity, or 0 when the speed is below 1e-9.
    """
    if steps < 1:
        raise SchemaError(f"steps must be >= 1, got {steps}")
    v = np.asarray(state.velocity, dtype=np.float64)
    p0 = np.asarray(state.position, dtype=np.float64)
    ks = np.arange(1, steps + 1)[:, None]
    positions = p0 + ks * dt * v
    speed = float(np.hypot(v[0], v[1]))
    heading = math.atan2(v[1], v[0]) if speed >= 1e-9 else 0.0
    return Trajectory(
        dt=dt,
        positions=positions,
        headings=np.full(steps, heading),
        velocities=np.tile(v, (steps, 1)),
    )


def project_point(camera, point):
    """Pinhole projection of a world point.

    Returns (pixel (2,), depth, visible); visible means depth > 0 and the
    pixel lies inside [0, width) x [0, height). Behind-camera points get
    a finite but meaningless pixel.
    """
    p = np.asarray(point, dtype=np.float64).reshape(3)
    cam = camera.extrinsics[:3, :3] @ p + camera.extrinsics[:3, 3]
    depth = float(cam[2])
    if abs(depth) < 1e-12:
        return np.array([0.0, 0.0]), depth, False
    uvw = camera.intrinsics @ (cam / depth)
    pixel = uvw[:2].copy()
    visible = (
        depth > 0.0
        and 0.0 <= pixel[0] < camera.width
        and 0.0 <= pixel[1] < camera.height
    )
    return pixel, depth, visible
