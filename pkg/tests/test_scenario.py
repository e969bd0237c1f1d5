import json
import math

import numpy as np
import pytest

from riskgen.errors import SchemaError
from riskgen.scenario import (
    CameraModel,
    KinematicState,
    load_scenario,
    project_point,
    propagate_constant_velocity,
    save_scenario,
)

MINIMAL = {
    "meta": {"id": "m", "dt": 0.1, "num_frames": 1},
    "ego": {"states": [{"x": 0.0, "y": 0.0, "heading": 0.0, "vx": 1.0, "vy": 0.0}]},
    "agents": [],
    "cameras": [],
}


def _write(tmp_path, doc, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


class TestLoadScenario:
    def test_minimal(self, tmp_path):
        sc = load_scenario(_write(tmp_path, MINIMAL))
        assert sc.horizon == 1 and not sc.agents and not sc.cameras

    def test_length_mismatch_names_agent(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["agents"] = [
            {
                "id": "a7",
                "class": "car",
                "size": [4.0, 2.0, 1.5],
                "states": [
                    {"x": 0, "y": 0, "heading": 0, "vx": 0, "vy": 0},
                    {"x": 1, "y": 0, "heading": 0, "vx": 0, "vy": 0},
                ],
            }
        ]
        with pytest.raises(SchemaError, match="a7"):
            load_scenario(_write(tmp_path, doc))

    def test_missing_field_path(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        del doc["meta"]["dt"]
        with pytest.raises(SchemaError, match="meta.dt"):
            load_scenario(_write(tmp_path, doc))

    def test_bad_rotation_rejected(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        ext = np.eye(4)
        ext[0, 0] = 2.0
        doc["cameras"] = [
            {
                "name": "c",
                "intrinsics": list(np.eye(3).reshape(-1)),
                "extrinsics": list(ext.reshape(-1)),
                "width": 10,
                "height": 10,
            }
        ]
        with pytest.raises(SchemaError, match="orthonormal"):
            load_scenario(_write(tmp_path, doc))

    def test_velocity_filled_by_central_differences(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["meta"]["num_frames"] = 3
        doc["ego"]["states"] = [
            {"x": 0.0, "y": 0.0, "heading": 0.0},
            {"x": 1.0, "y": 0.0, "heading": 0.0},
            {"x": 4.0, "y": 0.0, "heading": 0.0},
        ]
        sc = load_scenario(_write(tmp_path, doc))
        assert np.allclose(sc.ego.velocities[:, 0], [10.0, 20.0, 30.0])

    def test_fixture_loads(self, left_turn):
        assert left_turn.horizon == 16
        assert len(left_turn.agents) == 2
        assert len(left_turn.cameras) == 3

    def test_round_trip_byte_identical(self, fixture_path, tmp_path):
        sc = load_scenario(fixture_path)
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_scenario(sc, p1)
        save_scenario(load_scenario(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestPropagate:
    def test_fixed_point(self):
        traj = propagate_constant_velocity(
            KinematicState([2.0, 3.0], [0.0, 0.0]), steps=5, dt=0.1
        )
        assert np.allclose(traj.positions, [2.0, 3.0])

    def test_forced_arithmetic(self):
        traj = propagate_constant_velocity(
            KinematicState([0.0, 0.0], [1.0, 0.0]), steps=4, dt=0.5
        )
        assert np.allclose(traj.positions[:, 0], [0.5, 1.0, 1.5, 2.0])

    def test_loop_oracle(self):
        p = [1.3, -0.4]
        v = [0.7, 2.1]
        dt = 0.25
        traj = propagate_constant_velocity(KinematicState(p, v), steps=6, dt=dt)
        for k in range(6):
            assert traj.positions[k, 0] == p[0] + (k + 1) * dt * v[0]
            assert traj.positions[k, 1] == p[1] + (k + 1) * dt * v[1]
        assert np.allclose(traj.headings, math.atan2(v[1], v[0]))


def _simple_camera():
    intr = np.array([[100.0, 0, 50.0], [0, 100.0, 50.0], [0, 0, 1.0]])
    return CameraModel("c", intr, np.eye(4), width=100, height=100)


class TestProjectPoint:
    def test_principal_point(self):
        pix, depth, vis = project_point(_simple_camera(), [0.0, 0.0, 5.0])
        assert np.allclose(pix, [50.0, 50.0]) and depth == 5.0 and vis

    def test_behind_camera(self):
        _, depth, vis = project_point(_simple_camera(), [0.0, 0.0, -5.0])
        assert depth < 0 and not vis

    def test_hand_pinhole(self):
        pix, depth, vis = project_point(_simple_camera(), [1.0, 0.0, 10.0])
        assert np.allclose(pix, [60.0, 50.0]) and depth == 10.0 and vis

    def test_compose_then_project_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            # random rigid world-to-camera transform
            q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
            if np.linalg.det(q) < 0:
                q[:, 0] *= -1
            ext = np.eye(4)
            ext[:3, :3] = q
            ext[:3, 3] = rng.normal(size=3)
            intr = np.array([[120.0, 0, 30.0], [0, 110.0, 40.0], [0, 0, 1.0]])
            cam = CameraModel("c", intr, ext, width=64, height=64)
            cam_id = CameraModel("c", intr, np.eye(4), width=64, height=64)
            p = rng.normal(scale=5, size=3)
            pix_a, d_a, _ = project_point(cam, p)
            pix_b, d_b, _ = project_point(cam_id, ext[:3, :3] @ p + ext[:3, 3])
            assert abs(d_a - d_b) <= 1e-9
            if abs(d_a) > 1e-6:
                assert np.abs(pix_a - pix_b).max() <= 1e-9
