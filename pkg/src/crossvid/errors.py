"""Exception hierarchy. Every error carries a module-qualified code so the
CLI can emit one machine-parsable line and pick the right exit status."""


class CrossvidError(Exception):
    """Base class; `code` is a stable module-qualified identifier."""

    code = "crossvid.error"
    exit_code = 1

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ShapeError(CrossvidError):
    code = "numkernel.shape"


class ParameterError(CrossvidError):
    code = "numkernel.parameter"


class DegenerateInputError(CrossvidError):
    code = "numkernel.degenerate_input"


class BankLoadError(CrossvidError):
    code = "databank.load"
    exit_code = 2


class ConfigError(CrossvidError):
    code = "trainer.config"
    exit_code = 2


class CheckpointError(CrossvidError):
    code = "model.checkpoint"
    exit_code = 2


class TrainingAbort(CrossvidError):
    code = "trainer.abort"
