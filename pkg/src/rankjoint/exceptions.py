"""Exception hierarchy shared by the library and the CLI."""

import numpy as np


class RankjointError(Exception):
    """Base class for all errors raised by rankjoint."""


class SchemaError(RankjointError, ValueError):
    """The attribute schema is malformed."""


class DataError(RankjointError, ValueError):
    """Input data is missing columns, malformed, or violates dataset invariants."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class RankDeficiencyError(RankjointError, np.linalg.LinAlgError):
    """The design matrix does not have full column rank."""

    def __init__(self, message, dependent_columns=()):
        super().__init__(message)
        self.dependent_columns = list(dependent_columns)
