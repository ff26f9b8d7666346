"""Exception types raised across the package."""

import numpy as np


class DimensionError(ValueError):
    """An array has the wrong length or shape for the requested operation."""


class ConfigurationError(ValueError):
    """A system configuration violates one of its invariants."""


class SingularityError(np.linalg.LinAlgError):
    """A normal matrix could not be inverted (e.g. rank deficient at zero noise)."""


class FactorizationError(SingularityError):
    """A pivot block of a block LDL^H factorization is not positive definite.

    Attributes
    ----------
    block_index : int
        Index of the offending pivot block.
    """

    def __init__(self, block_index, message=None):
        self.block_index = block_index
        super().__init__(
            message or f"pivot block {block_index} is not Hermitian positive definite"
        )
