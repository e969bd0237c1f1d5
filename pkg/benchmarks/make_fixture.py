"""Regenerates the bundled 16-frame left-turn fixture scenario.

Ego performs an unprotected left turn at an unsignalized intersection
while an oncoming car proceeds straight and a pedestrian waits near the
corner; three forward cameras (front-left, front, front-right) are
mounted at the ego start pose.
"""

import math
import os

import numpy as np

from riskgen.scenario import (
    AgentTrack,
    CameraModel,
    Scenario,
    Trajectory,
    save_scenario,
)

DT = 0.5
T = 16


def _traj(positions, dt=DT):
    p = np.asarray(positions, dtype=np.float64)
    v = np.empty_like(p)
    v[0] = (p[1] - p[0]) / dt
    v[-1] = (p[-1] - p[-2]) / dt
    v[1:-1] = (p[2:] - p[:-2]) / (2 * dt)
    head = np.array([math.atan2(vv[1], vv[0]) if np.hypot(*vv) > 1e-9 else 0.0 for vv in v])
    return Trajectory(dt=dt, positions=p, headings=head, velocities=v)


def ego_positions():
    # eastbound approach, then a left (northward) turn through the intersection
    pts = []
    speed = 6.0
    for t in range(T):
        s = t * DT * speed
        if s < 18.0:
            pts.append([-24.0 + s, -1.75])
        else:
            u = (s - 18.0) / 12.0  # quarter-circle of radius ~7.6 m
            ang = min(u, 1.0) * math.pi / 2
            cx, cy = -6.0, 5.85
            r = 7.6
            if u <= 1.0:
                pts.append([cx + r * math.sin(ang), cy - r * math.cos(ang)])
            else:
                pts.append([cx + r, cy + (s - 30.0)])  # northbound exit leg
    return pts


def oncoming_positions():
    # westbound car in the opposite lane, constant 8 m/s
    return [[34.0 - 8.0 * t * DT, 1.75] for t in range(T)]


def pedestrian_positions():
    # crossing slowly near the northeast corner
    return [[4.0 - 0.3 * t * DT, 9.0 - 0.5 * t * DT] for t in range(T)]


def camera(name, yaw_deg, pos):
    yaw = math.radians(yaw_deg)
    f = np.array([math.cos(yaw), math.sin(yaw), 0.0])   # camera z (forward)
    x = np.array([math.sin(yaw), -math.cos(yaw), 0.0])  # camera x (right)
    y = np.array([0.0, 0.0, -1.0])                      # camera y (down)
    rot = np.stack([x, y, f])
    ext = np.eye(4)
    ext[:3, :3] = rot
    ext[:3, 3] = -rot @ np.asarray(pos)
    intr = np.array([[200.0, 0.0, 200.0], [0.0, 200.0, 112.0], [0.0, 0.0, 1.0]])
    return CameraModel(name=name, intrinsics=intr, extrinsics=ext, width=400, height=224)


def build():
    rig = [-24.0, -1.75, 1.6]
    return Scenario(
        scenario_id="left_turn",
        dt=DT,
        horizon=T,
        ego=_traj(ego_positions()),
        agents=[
            AgentTrack("oncoming_car", "car", _traj(oncoming_positions()), (4.5, 1.9, 1.6)),
            AgentTrack("pedestrian", "pedestrian", _traj(pedestrian_positions()), (0.6, 0.6, 1.75)),
        ],
        cameras=[
            camera("front_left", 55.0, rig),
            camera("front", 0.0, rig),
            camera("front_right", -55.0, rig),
        ],
    )


if __name__ == "__main__":
    out = os.path.join(os.path.dirname(__file__), "..", "src", "riskgen", "data", "left_turn.json")
    save_scenario(build(), os.path.abspath(out))
    print("wrote", os.path.abspath(out))
