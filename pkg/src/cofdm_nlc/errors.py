"""Exception types raised by the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ZeroPowerError(SimulationError, ValueError):
    """Waveform carries no power, so a dBm value or rescaling is undefined."""


class NyquistError(SimulationError, ValueError):
    """A frequency or band falls outside the sampled spectrum."""


class ConfigMismatchError(SimulationError, ValueError):
    """Frames, waveforms or configs disagree on shape or plan."""


class UnobservableError(SimulationError, ValueError):
    """A channel or phase estimate has (near) zero magnitude."""


class NumericalBlowUpError(SimulationError, FloatingPointError):
    """Split-step propagation produced non-finite samples."""

    def __init__(self, step: int):
        super().__init__(f"numerical blow-up at step {step}")
        self.step = step


class QUndefinedError(SimulationError, ValueError):
    """Q-factor requested for a BER outside (0, 0.5)."""


class ReachError(SimulationError, ValueError):
    """The FEC threshold is not crossed inside the swept distances."""


class ConfigError(SimulationError, ValueError):
    """Invalid or unknown configuration key/value."""
