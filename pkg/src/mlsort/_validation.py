import numpy as np

from .exceptions import NonFiniteKeyError


def check_keys(X, *, allow_empty=False, name="keys"):
    """Return ``X`` as a 1-D C-contiguous float64 array of finite keys.

    A column vector of shape (n, 1) is accepted and flattened, so the
    estimators compose with code that passes sklearn-style 2-D ``X``.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    elif arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D or a single column, got shape {arr.shape}")
    if arr.size == 0 and not allow_empty:
        raise ValueError(f"{name} must be non-empty")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise NonFiniteKeyError(bad[0], float(arr[bad[0]]))
    return np.ascontiguousarray(arr)


def check_order(order):
    order = str(order).lower()
    if order in ("asc", "ascending"):
        return "ascending"
    if order in ("desc", "descending"):
        return "descending"
    raise ValueError(f"order must be 'ascending' or 'descending', got {order!r}")


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
