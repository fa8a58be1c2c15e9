EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class KanesimError(Exception):
    """Base class for every error raised by the simulator."""

    exit_code = EXIT_NUMERICAL


class ConfigError(KanesimError):
    exit_code = EXIT_CONFIG

    def __init__(self, message, key=None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class DomainError(KanesimError, ValueError):
    """Argument outside the domain of an operation (profile time, identical sites)."""

    exit_code = EXIT_CONFIG


class NumericalError(KanesimError):
    exit_code = EXIT_NUMERICAL


class SingularityError(NumericalError):
    pass


class HermiticityError(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class IdentificationError(NumericalError):
    pass


class DegeneracyError(NumericalError):
    pass


class ResonanceMismatchError(NumericalError):
    pass


class StiffnessError(NumericalError):
    def __init__(self, time, step, local_error):
        self.time = time
        self.step = step
        self.local_error = local_error
        super().__init__(
            f"step size underflow at t={time:.9g} us (h={step:.3g} us, "
            f"local error estimate {local_error:.3g})"
        )


def exit_code_for(exc):
    """Map an exception raised by a CLI command to its process exit code."""
    if isinstance(exc, KanesimError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_NUMERICAL
