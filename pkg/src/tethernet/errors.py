"""Exception types shared across the simulator and trainer."""


class TopologyError(ValueError):
    """Net topology is malformed (e.g. a link references a missing node)."""


class ConfigurationError(ValueError):
    """A configuration or input value is outside its permitted range."""


class SimulationBlowupError(RuntimeError):
    """Integration diverged (non-finite state)."""

    def __init__(self, message: str, step_index: int):
        super().__init__(f"{message} (substep {step_index})")
        self.step_index = step_index


class EpisodeCompleteError(RuntimeError):
    """step() was called on an environment whose episode already ended."""
