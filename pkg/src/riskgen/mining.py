"""Risk-profile analysis: event localization, pool quantiles, exports."""

import enum
import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


class EventKind(enum.Enum):
    PEAK = "peak"
    SUSTAINED_SEGMENT = "sustained_segment"


class ScalarMode(enum.Enum):
    MAX_FRAME = "max_frame"
    MEAN_FRAME = "mean_frame"


@dataclass
class RiskProfile:
    scenario_id: str
    dt: float
    values: np.ndarray
    per_frame_top_agent: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.size < 1:
            raise DomainError("risk profile must have at least one frame")
        if not np.isfinite(self.values).all() or (self.values < 0).any():
            raise DomainError("risk profile values must be finite and nonnegative")


@dataclass(frozen=True)
class RiskEvent:
    kind: EventKind
    start_frame: int
    end_frame: int
    peak_value: float
    dominant_agent: str


def detect_events(profile, threshold, min_duration):
    """Maximal runs of frames with risk >= threshold.

    Runs shorter than min_duration are Peaks, the rest SustainedSegments.
    The dominant agent is the per-frame top agent at the run's peak frame.
    """
    if threshold <= 0:
        raise DomainError(f"threshold must be > 0, got {threshold}")
    if min_duration < 1:
        raise DomainError(f"min_duration must be >= 1, got {min_duration}")
    above = profile.values >= threshold
    events = []
    start = None
    for t in range(len(above) + 1):
        on = t < len(above) and above[t]
        if on and start is None:
            start = t
        elif not on and start is not None:
            end = t - 1
            window = profile.values[start : end + 1]
            peak_frame = start + int(window.argmax())
            kind = (
                EventKind.SUSTAINED_SEGMENT
                if end - start + 1 >= min_duration
                else EventKind.PEAK
            )
            events.append(
                RiskEvent(
                    kind=kind,
                    start_frame=start,
                    end_frame=end,
                    peak_value=float(window.max()),
                    dominant_agent=profile.per_frame_top_agent[peak_frame][0],
                )
            )
            start = None
    return events


def risk_quantiles(pool, probs):
    """Linear-interpolation ("type 7") sample quantiles of a risk pool."""
    pool = np.asarray(pool, dtype=np.float64)
    if pool.size == 0:
        raise DomainError("empty risk pool")
    probs = np.asarray(probs, dtype=np.float64)
    if ((probs < 0) | (probs > 1)).any():
        raise DomainError("quantile probabilities must lie in [0, 1]")
    return np.quantile(pool, probs, method="linear")


def scenario_scalar_risk(profile, mode=ScalarMode.MAX_FRAME):
    """Collapse a profile to one number (pool membership for quantiles)."""
    if isinstance(mode, str):
        mode = ScalarMode(mode.lower())
    if mode is ScalarMode.MEAN_FRAME:
        return float(profile.values.mean())
    return float(profile.values.max())


def profile_csv_lines(profile):
    """CSV rows `frame,risk,top_agent_id,top_agent_risk`, 9 significant digits."""
    lines = ["frame,risk,top_agent_id,top_agent_risk"]
    for t, r in enumerate(profile.values):
        aid, ar = profile.per_frame_top_agent[t]
        lines.append(f"{t},{r:.9g},{aid},{ar:.9g}")
    return lines


def write_profile_csv(profile, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(profile_csv_lines(profile)) + "\n")


def event_to_dict(ev):
    return {
        "kind": ev.kind.value,
        "start_frame": ev.start_frame,
        "end_frame": ev.end_frame,
        "peak_value": ev.peak_value,
        "dominant_agent": ev.dominant_agent,
    }


def mine_report(profiles, threshold, min_duration, probs, mode=ScalarMode.MAX_FRAME):
    """Per-scenario events plus pool quantiles, as a JSON-ready dict."""
    scalars = [scenario_scalar_risk(p, mode) for p in profiles]
    return {
        "pool": {
            "mode": mode.value if isinstance(mode, ScalarMode) else str(mode),
            "scalars": {p.scenario_id: s for p, s in zip(profiles, scalars)},
            "quantiles": {
                f"{q:g}": float(v)
                for q, v in zip(probs, risk_quantiles(scalars, probs))
            },
        },
        "scenarios": {
            p.scenario_id: {
                "events": [
                    event_to_dict(e) for e in detect_events(p, threshold, min_duration)
                ]
            }
            for p in profiles
        },
    }


def write_mine_report(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
