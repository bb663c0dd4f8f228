"""Input checks shared by the public functions and estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_pvalues(p, name="p-values"):
    """Return a 1-D float array of probabilities in the open unit interval."""
    arr = check_array(np.atleast_1d(np.asarray(p, dtype=float)), ensure_2d=False, input_name=name)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    bad = ~((arr > 0) & (arr < 1))
    if np.any(bad):
        raise ValueError(f"{name} must lie in (0, 1); offending values {arr[bad].tolist()}")
    return arr


def check_vector(x, name="values", allow_nonfinite=False):
    arr = check_array(
        np.atleast_1d(np.asarray(x, dtype=float)),
        ensure_2d=False,
        ensure_all_finite=not allow_nonfinite,
        input_name=name,
    )
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def check_positive(x, name="values"):
    arr = check_vector(x, name)
    if np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return arr


def check_same_length(*arrays, names=None):
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        label = " and ".join(names) if names else "inputs"
        raise ValueError(f"dimension mismatch between {label}: lengths {[len(a) for a in arrays]}")
