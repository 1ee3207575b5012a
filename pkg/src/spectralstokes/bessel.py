"""Bessel functions of the first kind for complex arguments, orders 0 to 3.

Power series for small |z| (kept short of the cancellation regime), downward
(Miller) recurrence with Jacobi-Anger normalization beyond.  Accuracy target
is 1e-10 relative over |z| <= 1e4.
"""

from __future__ import annotations

import math

import numpy as np

_SERIES_CUTOFF = 12.0
_MAX_ARG = 1.0e4
MAX_ORDER = 3


def bessel_j(order: int, z):
    """J_order(z) for complex (or real) scalar/array ``z``, order in 0..3."""
    if order not in range(MAX_ORDER + 1):
        raise ValueError(f"order must be in 0..{MAX_ORDER}, got {order}")
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    if np.any(np.abs(z_arr) > _MAX_ARG):
        raise ValueError(f"|z| exceeds {_MAX_ARG:g}; evaluation would overflow")

    out = np.empty_like(z_arr)
    small = np.abs(z_arr) <= _SERIES_CUTOFF
    if np.any(small):
        out[small] = _series(order, z_arr[small])
    for idx in np.nonzero(~small)[0]:
        out[idx] = _miller(order, complex(z_arr[idx]))
    if not np.all(np.isfinite(out)):
        raise OverflowError("Bessel evaluation overflowed for extreme argument")
    return complex(out[0]) if scalar else out


def _series(n: int, z: np.ndarray) -> np.ndarray:
    """Power series sum_k (-1)^k (z/2)^(n+2k) / (k! (n+k)!)."""
    half = 0.5 * z
    term = half**n / math.factorial(n)
    total = term.copy()
    zz = -(half * half)
    for k in range(1, 120):
        term = term * zz / (k * (n + k))
        total += term
        if np.all(np.abs(term) <= 1e-17 * (np.abs(total) + 1e-300)):
            break
    return total


def _miller(n: int, z: complex) -> complex:
    """Downward recurrence with Jacobi-Anger normalization.

    ``exp(-s*1j*z) = J0 + 2*sum_k (-s*1j)^k J_k`` with ``s = sign(Im z)``;
    this target is exponentially large whenever the J_k are, so the
    normalizing sum never cancels catastrophically.
    """
    m = int(abs(z) + 20.0 * abs(z) ** (1.0 / 3.0) + 32.0)
    if m % 2:
        m += 1
    u = -1j if z.imag >= 0.0 else 1j
    target = np.exp(u * z)  # e^{u z} = J0 + 2 sum_k u^k J_k, |target| = e^{|Im z|}
    jp = 0.0 + 0.0j   # J_{k+1}
    jc = 1e-300 + 0j  # J_k
    norm = 0.0 + 0.0j
    result = 0.0 + 0.0j
    weight = u**m
    for k in range(m, 0, -1):
        jm = (2.0 * k / z) * jc - jp
        jp = jc
        jc = jm
        if not (abs(jc.real) < 1e250 and abs(jc.imag) < 1e250):
            # Rescale to dodge overflow; relative quantities are unaffected.
            jc *= 1e-250
            jp *= 1e-250
            norm *= 1e-250
            result *= 1e-250
        if k - 1 == n:
            result = jc
        weight = weight / u  # u^(k-1)
        if k - 1 > 0:
            norm += 2.0 * weight * jc
    norm += jc  # J_0 term, weight u^0 = 1
    # result and norm share the internal scaling; divide first to avoid
    # spurious overflow before the (possibly huge) target factor.
    return (result / norm) * target
