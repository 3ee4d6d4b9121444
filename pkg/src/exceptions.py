from typing import Optional


class SdssError(Exception):
    exit_code: int = 3

    def __init__(self, detail: str, extra: Optional[str] = None):
        """
        The __init__ function stores the user-facing detail message, optionally followed
        by context about the value that triggered it.

        :param detail: str: Message constant from src.conf.messages
        :param extra: Optional[str]: Context appended to the message
        """
        self.detail = detail if extra is None else f'{detail}: {extra}'
        super().__init__(self.detail)


class ConfigError(SdssError):
    exit_code = 2


class RuntimeFailure(SdssError):
    exit_code = 3


class NumericsError(RuntimeFailure):
    pass


class NonConvergenceError(NumericsError):
    pass


class SingularLyapunovError(NumericsError):
    pass


class EquilibriumError(RuntimeFailure):
    pass


class PlantError(RuntimeFailure):
    pass


class EstimationError(RuntimeFailure):
    def __init__(self, detail: str, successes: int, trials: int):
        super().__init__(detail, f'{successes} safe out of {trials} completed trajectories')
        self.successes = successes
        self.trials = trials
