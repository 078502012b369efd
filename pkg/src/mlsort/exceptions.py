"""Exception and warning types raised by mlsort."""


class NonFiniteKeyError(ValueError):
    """A key is NaN or infinite. ``index`` is the position of the first offender."""

    def __init__(self, index, value, what="key"):
        self.index = int(index)
        self.value = value
        super().__init__(f"non-finite {what} {value!r} at index {self.index}")


class TrainingError(RuntimeError):
    """The model cannot be trained on the given pairs (e.g. zero key range)."""


class VerificationError(RuntimeError):
    """Internal consistency check failed: output not sorted, window too small, ..."""


class DistributionDriftWarning(UserWarning):
    """Too many keys fell outside the range seen by the training sample."""
