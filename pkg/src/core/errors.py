"""
Exception types raised by the simulator and the statistics pipeline.

Library code raises these; only the CLI and the realization runner catch them.
Errors with extra fields define __reduce__ so they survive the trip back
from worker processes.
"""


class SimulationError(Exception):
    """Base class for every error the package raises on purpose."""


class DomainError(SimulationError, ValueError):
    """Argument outside the mathematical domain of a model function."""


class IntegrationError(SimulationError):
    """Integrator produced a non-finite state."""

    def __init__(self, message, step_index):
        super().__init__(f"{message} (step {step_index})")
        self.message = message
        self.step_index = step_index

    def __reduce__(self):
        return type(self), (self.message, self.step_index)


class ConfigurationError(SimulationError):
    """Invalid parameters, composition or experiment configuration."""


class SeriesSizeError(SimulationError):
    """Series is too short for the requested operation."""

    def __init__(self, message, required, actual):
        super().__init__(f"{message}: need {required} samples, got {actual}")
        self.message = message
        self.required = required
        self.actual = actual

    def __reduce__(self):
        return type(self), (self.message, self.required, self.actual)


class DegenerateSeriesError(SimulationError):
    """Series has zero dispersion and cannot be thresholded."""


class FitError(SimulationError):
    """Not enough usable bins for a power-law fit."""

    def __init__(self, message, n_usable):
        super().__init__(f"{message} (usable bins: {n_usable})")
        self.message = message
        self.n_usable = n_usable

    def __reduce__(self):
        return type(self), (self.message, self.n_usable)


class PresetError(ConfigurationError):
    """Unknown experiment preset name."""

    def __init__(self, name, known):
        super().__init__(f"Unknown preset '{name}'. Known presets: {', '.join(known)}")
        self.name = name
        self.known = list(known)

    def __reduce__(self):
        return type(self), (self.name, self.known)


class OutputError(SimulationError):
    """Writing an output artifact failed."""

    def __init__(self, path, reason):
        super().__init__(f"Failed to write {path}: {reason}")
        self.path = path
        self.reason = str(reason)

    def __reduce__(self):
        return type(self), (self.path, self.reason)
