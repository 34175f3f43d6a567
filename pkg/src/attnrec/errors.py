"""Exception hierarchy. Every error carries a stable machine-readable category
so the CLI can map failures to exit codes."""


class AttnrecError(Exception):
    category = "error"


class ParseError(AttnrecError):
    category = "parse"

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class EmptyDatasetError(AttnrecError):
    category = "empty-dataset"


class DataError(AttnrecError):
    """Missing or unreadable input files/directories."""

    category = "data"


class ConfigError(AttnrecError):
    category = "config"

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


class SamplingError(AttnrecError):
    category = "sampling"


class ShapeError(AttnrecError):
    category = "shape"


class CheckpointError(AttnrecError):
    category = "checkpoint"


class NonFiniteError(AttnrecError):
    category = "non-finite"


class InvariantError(AttnrecError):
    """An internal contract that should be unreachable was violated."""

    category = "invariant"
