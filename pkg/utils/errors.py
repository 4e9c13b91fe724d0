class ControlError(Exception):
    """Base class for failures raised while predicting, solving or simulating."""


class SingularAttitudeError(ControlError, ValueError):
    """Pitch too close to ±π/2, where the Euler-rate map is singular."""


class InfeasibleScheduleError(ControlError):
    """A horizon step has no stance leg, so no force can be commanded."""


class DivergenceError(ControlError):
    """The plant state stopped being finite."""


class SolverError(ControlError):
    """A numerical subproblem gave up at its iteration limit."""


class ConfigError(ValueError):
    """Experiment config failed validation.

    Args:
        violations: one "section.field: message" string per failed check
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid config")
