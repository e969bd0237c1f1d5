"""Per-agent and per-frame kinematic risk field.

Each agent contributes R = K*C * omega * mu * alpha * beta / (dist + eps)
where omega is a discrete interaction weight chosen from the signs of the
two approach dot products, mu a category severity coefficient, alpha an
exponential amplification of the closing speed along the line of sight,
and beta an exponential attenuation of lateral (non-colliding) relative
motion. Frame risk aggregates agent contributions by sum or max.

The batched production path lives in riskgen.kernels; the tests hold an
independent scalar oracle.
"""

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, DomainError, SchemaError
from .scenario import AGENT_CLASSES, KinematicState


class InteractionRegime(enum.Enum):
    BI = kernels.REGIME_BI
    AGENT_APPROACH = kernels.REGIME_AGENT
    EGO_APPROACH = kernels.REGIME_EGO
    AWAY = kernels.REGIME_AWAY


class Aggregation(enum.Enum):
    SUM = "sum"
    MAX = "max"


DEFAULT_TYPE_COEFF = {
    "car": 1.0,
    "truck": 2.5,
    "bus": 2.5,
    "motorcycle": 1.2,
    "bicycle": 1.2,
    "pedestrian": 1.5,
    "other": 1.0,
}


@dataclass(frozen=True)
class AgentSnapshot:
    agent_id: str
    class_label: str
    state: KinematicState

    def __post_init__(self):
        if self.class_label not in AGENT_CLASSES:
            raise ConfigurationError(f"unknown agent class {self.class_label!r}")


@dataclass
class RiskParams:
    """Calibration constants of the risk field.

    The interaction weights must satisfy omega_bi > omega_agent >
    omega_ego > omega_away >= 0: an approaching agent is riskier than an
    approached one, and mutual approach dominates.
    """

    omega_bi: float = 1.0
    omega_agent: float = 0.7
    omega_ego: float = 0.4
    omega_away: float = 0.1
    type_coeff: dict = field(default_factory=lambda: dict(DEFAULT_TYPE_COEFF))
    kappa: float = 0.1
    lambda_lat: float = 1.0
    k_const: float = 1.0
    c_const: float = 1.0
    epsilon: float = 1e-6
    aggregation: Aggregation = Aggregation.SUM

    def __post_init__(self):
        if isinstance(self.aggregation, str):
            self.aggregation = Aggregation(self.aggregation.lower())
        if not (self.omega_bi > self.omega_agent > self.omega_ego > self.omega_away >= 0):
            raise ConfigurationError(
                "interaction weights must satisfy "
                "omega_bi > omega_agent > omega_ego > omega_away >= 0, got "
                f"({self.omega_bi}, {self.omega_agent}, {self.omega_ego}, {self.omega_away})"
            )
        if self.kappa < 0 or self.lambda_lat < 0:
            raise ConfigurationError("kappa and lambda_lat must be >= 0")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be > 0")
        for cls, mu in self.type_coeff.items():
            if cls not in AGENT_CLASSES:
                raise ConfigurationError(f"type_coeff: unknown class {cls!r}")
            if mu < 0:
                raise ConfigurationError(f"type_coeff[{cls}] must be >= 0, got {mu}")

    @property
    def omega_table(self):
        """Weights indexed by regime code (bi, agent, ego, away)."""
        return np.array([self.omega_bi, self.omega_agent, self.omega_ego, self.omega_away])

    def mu_for(self, class_label):
        try:
            return float(self.type_coeff[class_label])
        except KeyError:
            raise ConfigurationError(
                f"no type_coeff entry for class {class_label!r}"
            ) from None

    _FIELDS = (
        "omega_bi", "omega_agent", "omega_ego", "omega_away", "type_coeff",
        "kappa", "lambda_lat", "k_const", "c_const", "epsilon", "aggregation",
    )

    @classmethod
    def from_json(cls, path):
        """Load risk_params.json; unknown keys are rejected."""
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        unknown = set(doc) - set(cls._FIELDS)
        if unknown:
            raise SchemaError(f"risk params: unknown keys {sorted(unknown)}")
        return cls(**doc)

    def to_json(self, path):
        doc = {
            k: (getattr(self, k).value if k == "aggregation" else getattr(self, k))
            for k in self._FIELDS
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")


@dataclass(frozen=True)
class AgentRiskBreakdown:
    agent_id: str
    distance: float
    interaction_weight: float
    regime: InteractionRegime
    closing_speed: float
    alpha: float
    beta_lateral: float
    risk: float


def _check_finite_state(state, who):
    if not (np.isfinite(state.position).all() and np.isfinite(state.velocity).all()):
        raise DomainError(f"{who}: non-finite kinematic state")


def classify_interaction(ego, agent):
    """Interaction regime from the signs of the two approach dot products.

    d = 0 counts as non-positive (the approach conditions are strict).
    """
    _check_finite_state(ego, "ego")
    _check_finite_state(agent, "agent")
    rel = agent.position - ego.position
    d_ei = float(ego.velocity @ rel)
    d_ie = float(agent.velocity @ (-rel))
    if d_ei > 0 and d_ie > 0:
        return InteractionRegime.BI
    if d_ei <= 0 and d_ie > 0:
        return InteractionRegime.AGENT_APPROACH
    if d_ei > 0 and d_ie <= 0:
        return InteractionRegime.EGO_APPROACH
    return InteractionRegime.AWAY


def _batch(ego_pos, ego_vel, agent_pos, agent_vel, mu, params):
    rel = np.asarray(agent_pos, dtype=np.float64) - np.asarray(ego_pos, dtype=np.float64)
    return kernels.agent_risk_batch(
        rel,
        np.asarray(ego_vel, dtype=np.float64),
        np.asarray(agent_vel, dtype=np.float64),
        np.asarray(mu, dtype=np.float64),
        params.omega_table,
        params.kappa,
        params.lambda_lat,
        params.k_const * params.c_const,
        params.epsilon,
    )


def agent_risk(ego, agent, params):
    """Risk contribution of a single agent, with the full factor breakdown."""
    _check_finite_state(ego, "ego")
    _check_finite_state(agent.state, f"agent {agent.agent_id}")
    mu = params.mu_for(agent.class_label)
    risk, regime, dist, s, alpha, beta = _batch(
        ego.position[None, :],
        ego.velocity[None, :],
        agent.state.position[None, :],
        agent.state.velocity[None, :],
        [mu],
        params,
    )
    code = int(regime[0])
    return AgentRiskBreakdown(
        agent_id=agent.agent_id,
        distance=float(dist[0]),
        interaction_weight=float(params.omega_table[code]),
        regime=InteractionRegime(code),
        closing_speed=float(s[0]),
        alpha=float(alpha[0]),
        beta_lateral=float(beta[0]),
        risk=float(risk[0]),
    )


def frame_risk(ego, agents, params):
    """Aggregate per-agent risks into a frame scalar; empty set gives 0."""
    breakdowns = [agent_risk(ego, a, params) for a in agents]
    if not breakdowns:
        return 0.0, []
    risks = np.array([b.risk for b in breakdowns])
    if params.aggregation is Aggregation.MAX:
        return float(risks.max()), breakdowns
    return float(risks.sum()), breakdowns


def risk_profile_arrays(ego_pos, ego_vel, agents_pos, agents_vel, mu, params):
    """Batched risk over a whole clip.

    ego_pos/ego_vel: (T, 2); agents_pos/agents_vel: (T, N, 2); mu: (N,).
    Returns (frame_risk (T,), per_agent_risk (T, N)).
    """
    ego_pos = np.asarray(ego_pos, dtype=np.float64)
    t, n = np.asarray(agents_pos).shape[:2]
    if n == 0:
        return np.zeros(t), np.zeros((t, 0))
    rep = lambda x: np.repeat(np.asarray(x, dtype=np.float64), n, axis=0)
    risk, _, _, _, _, _ = _batch(
        rep(ego_pos),
        rep(ego_vel),
        np.asarray(agents_pos, dtype=np.float64).reshape(t * n, 2),
        np.asarray(agents_vel, dtype=np.float64).reshape(t * n, 2),
        np.tile(np.asarray(mu, dtype=np.float64), t),
        params,
    )
    per_agent = risk.reshape(t, n)
    if params.aggregation is Aggregation.MAX:
        frame = per_agent.max(axis=1)
    else:
        frame = per_agent.sum(axis=1)
    return frame, per_agent


def risk_profile(sc, params):
    """Per-frame risk time series for a scenario.

    Returns a riskgen.mining.RiskProfile. Top-agent entries are
    ("", 0.0) on frames with no agents.
    """
    from .mining import RiskProfile

    if sc.horizon < 1:
        raise DomainError("empty scenario")
    if sc.agents:
        agents_pos = np.stack([a.trajectory.positions for a in sc.agents], axis=1)
        agents_vel = np.stack([a.trajectory.velocities for a in sc.agents], axis=1)
        mu = [params.mu_for(a.class_label) for a in sc.agents]
    else:
        agents_pos = np.zeros((sc.horizon, 0, 2))
        agents_vel = np.zeros((sc.horizon, 0, 2))
        mu = []
    frame, per_agent = risk_profile_arrays(
        sc.ego.positions, sc.ego.velocities, agents_pos, agents_vel, mu, params
    )
    top = []
    for t in range(sc.horizon):
        if per_agent.shape[1]:
            j = int(per_agent[t].argmax())
            top.append((sc.agents[j].agent_id, float(per_agent[t, j])))
        else:
            top.append(("", 0.0))
    return RiskProfile(
        scenario_id=sc.scenario_id, dt=sc.dt, values=frame, per_frame_top_agent=top
    )
