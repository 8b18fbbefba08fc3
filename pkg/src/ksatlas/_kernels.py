"""Hot integer kernels for scanning deterministic assignments.

The enumeration of global valuations and the evaluation of an inequality
on each of them is the only genuinely hot inner loop of the package (the
exact-rational simplex and the LAPACK-bound numerics gain nothing from
jitting). The kernel carries a numba @njit implementation and a chunked
pure-numpy fallback; set ATLAS_NO_NUMBA=1 to force the fallback. Both
paths work on scaled integer coefficients, so results are exact as long
as the caller keeps them inside int64 (checked in polytope.py).
"""

from __future__ import annotations

import os
import warnings

import numpy as np

USE_NUMBA = os.environ.get("ATLAS_NO_NUMBA", "").strip() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit, set_num_threads
        threads = os.environ.get("ATLAS_THREADS", "").strip()
        if threads.isdigit() and int(threads) > 0:
            try:
                set_num_threads(int(threads))
            except ValueError:
                pass
    except ImportError:
        warnings.warn("numba unavailable, falling back to the numpy kernels")
        USE_NUMBA = False

__all__ = ["USE_NUMBA", "best_assignment", "best_assignment_numpy"]


def _term_arrays(terms, n_meas):
    """Flatten (measurement indices, outcome indices, int coef) terms."""
    ptr = [0]
    meas, outs = [], []
    coefs = []
    for members, out_idx, coef in terms:
        meas.extend(members)
        outs.extend(out_idx)
        ptr.append(len(meas))
        coefs.append(coef)
    return (
        np.asarray(ptr, dtype=np.int64),
        np.asarray(meas, dtype=np.int64),
        np.asarray(outs, dtype=np.int64),
        np.asarray(coefs, dtype=np.int64),
    )


def _eval_scan_py(radices, ptr, meas, outs, coefs):
    n_meas = radices.shape[0]
    n_terms = ptr.shape[0] - 1
    total = np.int64(1)
    for r in radices:
        total *= r
    digits = np.zeros(n_meas, dtype=np.int64)
    best = np.int64(-(2 ** 62))
    best_idx = np.int64(0)
    for idx in range(total):
        acc = np.int64(0)
        for t in range(n_terms):
            hit = True
            for k in range(ptr[t], ptr[t + 1]):
                if digits[meas[k]] != outs[k]:
                    hit = False
                    break
            if hit:
                acc += coefs[t]
        if acc > best:
            best = acc
            best_idx = idx
        # odometer increment (last measurement varies fastest)
        for m in range(n_meas - 1, -1, -1):
            digits[m] += 1
            if digits[m] < radices[m]:
                break
            digits[m] = 0
    return best, best_idx


if USE_NUMBA:
    _eval_scan = njit(cache=True)(_eval_scan_py)
else:
    _eval_scan = _eval_scan_py


def best_assignment_numpy(radices, terms, chunk=1 << 16):
    """Chunked vectorized scan; same contract as best_assignment."""
    radices = np.asarray(radices, dtype=np.int64)
    total = int(np.prod(radices, dtype=np.int64))
    strides = np.ones_like(radices)
    for m in range(len(radices) - 2, -1, -1):
        strides[m] = strides[m + 1] * radices[m + 1]
    best = -(2 ** 62)
    best_idx = 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        vals = np.zeros(idx.shape[0], dtype=np.int64)
        for members, out_idx, coef in terms:
            mask = np.ones(idx.shape[0], dtype=bool)
            for m, o in zip(members, out_idx):
                mask &= (idx // strides[m]) % radices[m] == o
            vals[mask] += coef
        k = int(np.argmax(vals))
        if int(vals[k]) > best:
            best = int(vals[k])
            best_idx = int(idx[k])
    return best, best_idx


def best_assignment(radices, terms):
    """Maximize sum of integer term coefficients over all assignments.

    radices: outcome count per measurement. terms: iterable of
    (measurement index tuple, outcome index tuple, int coefficient).
    Returns (best value, mixed-radix index of a maximizer); ties resolve
    to the lowest index on both paths.
    """
    radices = np.asarray(radices, dtype=np.int64)
    if USE_NUMBA:
        ptr, meas, outs, coefs = _term_arrays(terms, len(radices))
        best, idx = _eval_scan(radices, ptr, meas, outs, coefs)
        return int(best), int(idx)
    return best_assignment_numpy(radices, terms)


def decode_assignment(index, radices):
    """Mixed-radix digits of an assignment index (last digit fastest)."""
    digits = []
    for r in reversed(radices):
        digits.append(index % r)
        index //= r
    return list(reversed(digits))
