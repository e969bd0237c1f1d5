import math

import numpy as np
import pytest

from riskgen.errors import ConfigurationError, DomainError, SchemaError
from riskgen.risk import (
    Aggregation,
    AgentSnapshot,
    InteractionRegime,
    RiskParams,
    agent_risk,
    classify_interaction,
    frame_risk,
    risk_profile,
    risk_profile_arrays,
)
from riskgen.scenario import AgentTrack, KinematicState, Scenario, Trajectory
from riskgen.tensor import Rng

from conftest import scalar_agent_risk


def _state(p, v):
    return KinematicState(np.asarray(p, float), np.asarray(v, float))


def _car(p, v, aid="a"):
    return AgentSnapshot(aid, "car", _state(p, v))


class TestClassifyInteraction:
    def test_head_on_is_bi(self):
        assert (
            classify_interaction(_state([0, 0], [10, 0]), _state([20, 0], [-10, 0]))
            is InteractionRegime.BI
        )

    def test_both_static_is_away(self):
        assert (
            classify_interaction(_state([0, 0], [0, 0]), _state([10, 0], [0, 0]))
            is InteractionRegime.AWAY
        )

    def test_agent_approach(self):
        assert (
            classify_interaction(_state([0, 0], [0, 0]), _state([10, 0], [-5, 0]))
            is InteractionRegime.AGENT_APPROACH
        )

    def test_ego_approach(self):
        assert (
            classify_interaction(_state([0, 0], [5, 0]), _state([10, 0], [0, 0]))
            is InteractionRegime.EGO_APPROACH
        )

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            classify_interaction(_state([0, 0], [np.inf, 0]), _state([1, 0], [0, 0]))


class TestRiskParams:
    def test_ordering_enforced(self):
        with pytest.raises(ConfigurationError):
            RiskParams(omega_bi=0.5, omega_agent=0.7)

    def test_unknown_json_keys_rejected(self, tmp_path):
        p = tmp_path / "risk_params.json"
        p.write_text('{"omega_bi": 1.0, "bogus": 3}')
        with pytest.raises(SchemaError, match="bogus"):
            RiskParams.from_json(p)

    def test_json_round_trip(self, tmp_path):
        p = tmp_path / "risk_params.json"
        params = RiskParams(kappa=0.2, aggregation=Aggregation.MAX)
        params.to_json(p)
        back = RiskParams.from_json(p)
        assert back.kappa == 0.2 and back.aggregation is Aggregation.MAX

    def test_unknown_class_errors(self):
        params = RiskParams(type_coeff={"car": 1.0})
        with pytest.raises(ConfigurationError, match="pedestrian"):
            agent_risk(
                _state([0, 0], [0, 0]),
                AgentSnapshot("p", "pedestrian", _state([5, 0], [0, 0])),
                params,
            )


class TestAgentRisk:
    # frozen via the scalar oracle with the documented default parameters
    def test_head_on_fixture(self):
        b = agent_risk(_state([0, 0], [10, 0]), _car([20, 0], [-10, 0]), RiskParams())
        assert abs(b.closing_speed - 20.0) <= 1e-4
        assert abs(b.alpha - math.e**2) <= 1e-4
        assert abs(b.beta_lateral - 1.0) <= 1e-12
        assert abs(b.risk - 0.369452749528618) <= 1e-12

    def test_stationary_fixture(self):
        b = agent_risk(_state([0, 0], [0, 0]), _car([10, 0], [0, 0]), RiskParams())
        assert b.regime is InteractionRegime.AWAY
        assert b.alpha == 1.0 and b.beta_lateral == 1.0
        assert abs(b.risk - 0.0099999990000001) <= 1e-12

    def test_pure_lateral_fixture(self):
        b = agent_risk(_state([0, 0], [0, 0]), _car([10, 0], [0, 5]), RiskParams())
        assert b.regime is InteractionRegime.AWAY
        assert b.closing_speed == 0.0
        assert abs(b.beta_lateral - math.exp(-1.0)) <= 1e-6
        assert abs(b.risk - 0.00367879492674555) <= 1e-12

    def test_regime_ordering(self):
        params = RiskParams()
        geo = dict(mu=1.0)
        # same geometry/speed magnitudes, four regimes via velocity signs
        ego_p, ag_p = [0.0, 0.0], [10.0, 0.0]
        risks = {}
        risks["bi"] = agent_risk(_state(ego_p, [5, 0]), _car(ag_p, [-5, 0]), params).risk
        risks["agent"] = agent_risk(_state(ego_p, [0, 0]), _car(ag_p, [-5, 0]), params).risk
        risks["ego"] = agent_risk(_state(ego_p, [5, 0]), _car(ag_p, [0, 0]), params).risk
        risks["away"] = agent_risk(_state(ego_p, [-5, 0]), _car(ag_p, [5, 0]), params).risk
        assert risks["bi"] > risks["agent"] > risks["ego"] > risks["away"]

    def test_closing_speed_monotonicity(self):
        params = RiskParams()
        prev = None
        for speed in np.linspace(0.5, 20, 40):
            r = agent_risk(_state([0, 0], [speed, 0]), _car([10, 0], [0, 0]), params).risk
            if prev is not None:
                assert r > prev
            prev = r

    def test_batch_vs_scalar_oracle(self):
        params = RiskParams()
        rng = Rng(31)
        for _ in range(1000):
            ep = rng.normal(scale=30, size=2)
            ev = rng.normal(scale=8, size=2)
            ap = rng.normal(scale=30, size=2)
            av = rng.normal(scale=8, size=2)
            got = agent_risk(_state(ep, ev), _car(ap, av), params).risk
            want = scalar_agent_risk(ep, ev, ap, av, 1.0, params)
            assert abs(got - want) <= 1e-12


class TestFrameRisk:
    def test_empty(self):
        assert frame_risk(_state([0, 0], [0, 0]), [], RiskParams()) == (0.0, [])

    def test_singleton_both_modes(self):
        ego = _state([0, 0], [5, 0])
        ag = [_car([10, 0], [0, 0])]
        r_sum, _ = frame_risk(ego, ag, RiskParams())
        r_max, _ = frame_risk(ego, ag, RiskParams(aggregation=Aggregation.MAX))
        assert r_sum == r_max

    def test_sum_vs_max(self):
        ego = _state([0, 0], [5, 0])
        ags = [_car([10, 0], [0, 0], "a"), _car([0, 8], [0, -2], "b")]
        r_sum, bd = frame_risk(ego, ags, RiskParams())
        r_max, _ = frame_risk(ego, ags, RiskParams(aggregation=Aggregation.MAX))
        assert abs(r_sum - sum(b.risk for b in bd)) <= 1e-12
        assert r_max == max(b.risk for b in bd)


def _toy_scenario(agent_positions, agent_velocity):
    t = len(agent_positions)
    mk = lambda pos, vel: Trajectory(
        dt=0.5,
        positions=pos,
        headings=np.zeros(t),
        velocities=np.tile(vel, (t, 1)),
    )
    return Scenario(
        scenario_id="toy",
        dt=0.5,
        horizon=t,
        ego=mk(np.zeros((t, 2)), [0.0, 0.0]),
        agents=[AgentTrack("a", "car", mk(np.asarray(agent_positions, float), agent_velocity), (4, 2, 1.5))],
    )


class TestRiskProfile:
    def test_approaching_agent_monotone(self):
        pos = [[30.0 - 2.5 * k, 0.0] for k in range(5)]
        sc = _toy_scenario(pos, [-5.0, 0.0])
        prof = risk_profile(sc, RiskParams())
        assert (np.diff(prof.values) > 0).all()

    def test_matches_frame_loop_oracle(self, left_turn):
        params = RiskParams()
        prof = risk_profile(left_turn, params)
        assert len(prof.values) == left_turn.horizon
        for t in range(left_turn.horizon):
            agents = [
                AgentSnapshot(a.agent_id, a.class_label, a.trajectory.state(t))
                for a in left_turn.agents
            ]
            want, _ = frame_risk(
                KinematicState(left_turn.ego.positions[t], left_turn.ego.velocities[t]),
                agents,
                params,
            )
            assert abs(prof.values[t] - want) <= 1e-12

    def test_static_distant_agents_low_flat(self):
        pos = [[500.0, 500.0]] * 4
        sc = _toy_scenario(pos, [0.0, 0.0])
        prof = risk_profile(sc, RiskParams())
        assert prof.values.max() < 1e-3
        assert np.ptp(prof.values) <= 1e-12


class TestInvariances:
    def test_rigid_transform(self):
        params = RiskParams()
        rng = Rng(37)
        for _ in range(200):
            ep = rng.normal(scale=30, size=2)
            ev = rng.normal(scale=8, size=2)
            ap = rng.normal(scale=30, size=2)
            av = rng.normal(scale=8, size=2)
            base = agent_risk(_state(ep, ev), _car(ap, av), params).risk
            th = float(rng.uniform(-math.pi, math.pi))
            rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
            shift = rng.normal(scale=100, size=2)
            moved = agent_risk(
                _state(rot @ ep + shift, rot @ ev),
                _car(rot @ ap + shift, rot @ av),
                params,
            ).risk
            assert abs(base - moved) <= 1e-9 * max(1.0, base)

    def test_distance_monotonicity(self):
        params = RiskParams()
        rng = Rng(41)
        for _ in range(1000):
            ev = rng.normal(scale=8, size=2)
            ap = rng.normal(scale=30, size=2)
            av = rng.normal(scale=8, size=2)
            if np.hypot(*ap) < 1.0:
                continue
            base = agent_risk(_state([0, 0], ev), _car(ap, av), params).risk
            scale = 1.0 + float(rng.uniform(0.05, 3.0))
            far = agent_risk(_state([0, 0], ev), _car(scale * ap, av), params).risk
            assert far < base

    def test_beta_bounds_and_parallel_case(self):
        params = RiskParams()
        b = agent_risk(_state([0, 0], [7, 0]), _car([15, 0], [-2, 0]), params)
        assert abs(b.beta_lateral - 1.0) <= 1e-9  # parallel relative motion
        rng = Rng(43)
        for _ in range(200):
            b = agent_risk(
                _state(rng.normal(size=2, scale=20), rng.normal(size=2, scale=6)),
                _car(rng.normal(size=2, scale=20), rng.normal(size=2, scale=6)),
                params,
            )
            assert 0.0 < b.beta_lateral <= 1.0
