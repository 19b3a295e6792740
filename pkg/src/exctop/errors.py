"""Exception hierarchy shared across exctop modules."""


class ExctopError(Exception):
    pass


class WindowError(ExctopError, ValueError):
    """Invalid polyrectangle (empty rectangle, shared corner, ...)."""


class RegularityError(ExctopError):
    """Covariance is not twice differentiable enough for the requested quantity."""


class EmbeddingError(ExctopError):
    """Circulant spectrum has negative entries beyond tolerance; enlarge the padding."""


class FactorizationError(ExctopError):
    """Dense covariance matrix could not be factorized."""


class WindowOutOfRange(ExctopError, ValueError):
    pass


class DomainError(ExctopError, ValueError):
    pass


class NetpbmParseError(ExctopError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigError(ExctopError, ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in self.problems))
