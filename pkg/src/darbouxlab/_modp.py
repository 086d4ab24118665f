"""Batched rank computations modulo a fixed prime, used only to prescreen.

Rank over Z/p never exceeds rank over Q, so "full column rank mod p" is a
sound proof of a trivial rational kernel.  Candidates that are rank-deficient
mod p are always confirmed (or discarded) by exact rational elimination, so a
chance rank drop mod p costs time but never correctness.  Everything here is
deterministic: no randomness, fixed prime, fixed pivot order.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

PRIME = 2**31 - 1  # products of two residues stay inside int64


class ModPUnavailableError(ArithmeticError):
    """A denominator is divisible by the prime; caller must use exact arithmetic."""


def fraction_to_modp(value: Fraction, p: int = PRIME) -> int:
    den = value.denominator % p
    if den == 0:
        raise ModPUnavailableError(f"denominator divisible by {p}")
    return (value.numerator % p) * pow(den, p - 2, p) % p


def fraction_rows_to_modp(rows: Sequence[Sequence[Fraction]], p: int = PRIME) -> np.ndarray:
    return np.array([[fraction_to_modp(x, p) for x in row] for row in rows],
                    dtype=np.int64)


def batched_rank(mats: np.ndarray, p: int = PRIME) -> np.ndarray:
    """Ranks of a stack of matrices (N, R, C) over Z/p, vectorized over N.

    Fraction-free row updates (row*pivot - factor*pivot_row) keep every value
    in [0, p); pivots are chosen as the first eligible nonzero row, so the
    result does not depend on batch order.
    """
    A = np.ascontiguousarray(np.asarray(mats, dtype=np.int64) % p)
    if A.ndim != 3:
        raise ValueError("expected a (N, R, C) stack")
    N, R, C = A.shape
    if N == 0 or R == 0 or C == 0:
        return np.zeros(N, dtype=np.int64)
    lead = np.zeros(N, dtype=np.int64)
    rows_idx = np.arange(R)
    mat_idx = np.arange(N)
    for col in range(C):
        if (lead >= R).all():
            break
        colv = A[:, :, col]
        eligible = (rows_idx[None, :] >= lead[:, None]) & (colv != 0)
        has = eligible.any(axis=1)
        if not has.any():
            continue
        piv = eligible.argmax(axis=1)
        sel = mat_idx[has]
        r0 = lead[sel]
        p0 = piv[sel]
        tmp = A[sel, r0, :].copy()
        A[sel, r0, :] = A[sel, p0, :]
        A[sel, p0, :] = tmp
        sub = A[sel]
        k = len(sel)
        krange = np.arange(k)
        pivrow = sub[krange, r0, :]
        pivval = pivrow[:, col]
        factors = sub[:, :, col].copy()
        factors[krange, r0] = 0
        updated = (sub * pivval[:, None, None] - factors[:, :, None] * pivrow[:, None, :]) % p
        keep = rows_idx[None, :] <= r0[:, None]
        A[sel] = np.where(keep[:, :, None], sub, updated)
        lead[sel] = r0 + 1
    return lead


def batched_combination(base: np.ndarray, directions: np.ndarray,
                        coefficients: np.ndarray, p: int = PRIME) -> np.ndarray:
    """Stack base - sum_k coefficients[:, k] * directions[k] over Z/p.

    base: (R, C); directions: (S, R, C); coefficients: (N, S) residues.
    Returns (N, R, C).
    """
    coefficients = np.asarray(coefficients, dtype=np.int64) % p
    if directions.shape[0] == 0:
        out = np.broadcast_to(base % p, (coefficients.shape[0],) + base.shape)
        return np.ascontiguousarray(out)
    acc = np.zeros((coefficients.shape[0],) + base.shape, dtype=np.int64)
    for k in range(directions.shape[0]):
        acc = (acc + coefficients[:, k, None, None] * (directions[k] % p)) % p
    return (base % p - acc) % p
