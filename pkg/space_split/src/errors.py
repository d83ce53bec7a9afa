"""Exception hierarchy shared by the numerical core, the oracles and the shell."""


class S3Error(Exception):
    """Base class for every error raised by space_split."""


class RankDeficient(S3Error, ArithmeticError):
    """The frame matrix lost rank: the map no longer expands m directions here."""

    def __init__(self, min_diagonal, threshold):
        self.min_diagonal = float(min_diagonal)
        self.threshold = float(threshold)
        super().__init__(
            f"QR diagonal {self.min_diagonal:.3e} below rank threshold {self.threshold:.3e} "
            "(non-hyperbolic point or unstable_dim too large)"
        )


class Singular(S3Error, ArithmeticError):
    """An upper-triangular matrix has a (numerically) zero diagonal entry."""

    def __init__(self, min_diagonal):
        self.min_diagonal = float(min_diagonal)
        super().__init__(f"Triangular matrix is singular (min |diag| = {self.min_diagonal:.3e})")


class NonFinite(S3Error, ArithmeticError):
    """NaN or Inf showed up in a map evaluation or a recursion."""

    def __init__(self, where):
        self.where = where
        super().__init__(f"Non-finite value produced in {where}")


class ConfigError(S3Error, ValueError):
    """Experiment configuration failed to parse or validate."""

    def __init__(self, message, fields=()):
        self.fields = tuple(fields)
        super().__init__(message)


class RunFailed(S3Error):
    """A numerical failure interrupted a run; carries what was accumulated so far."""

    def __init__(self, step, cause, partial=None):
        self.step = step
        self.cause = cause
        self.partial = partial
        super().__init__(f"Run failed at step {step}: {cause}")
