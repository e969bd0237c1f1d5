"""riskgen: kinematic driving-risk fields, risk-targeted motion synthesis,
multi-view motion-aware masks, and region-aware preference-loss kernels."""

from importlib import resources

__version__ = "0.1.0"


def default_fixture_path():
    """Path of the bundled 16-frame left-turn scenario fixture."""
    return resources.files("riskgen.data") / "left_turn.json"
