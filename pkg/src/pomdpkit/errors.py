"""Exception types shared across the toolkit."""


class PomdpkitError(Exception):
    """Base class for all toolkit errors."""


class SerializationError(PomdpkitError):
    """A simulation spec contains a value the canonical form cannot encode."""


class ContractViolationError(PomdpkitError):
    """An environment or policy was driven outside its declared contract."""


class IncompatibilityError(PomdpkitError):
    """A policy was paired with an environment it does not support."""

    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


class ParticleDepletionError(PomdpkitError):
    """All particle weights collapsed to zero during a belief update."""


class BudgetExceededError(PomdpkitError):
    """A planner refused to run because its node budget would be exceeded."""


class ConfigError(PomdpkitError):
    """An experiment config failed validation; message carries field paths."""
