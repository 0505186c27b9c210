"""Pure-numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` exactly and are used when the compiled
extension is not available.
"""

import math

import numpy as np


def _log_seed(two_j, two_m, two_mp, half_cos, half_sin):
    # d^j_{m,m'} at j = max(|m|, |m'|): a single term of Wigner's sum.
    j = two_j / 2.0
    m = two_m / 2.0
    if abs(two_mp) >= abs(two_m):
        if two_mp > 0 or (two_mp == 0 and two_m == 0):
            # m' = j
            sign = 1.0
            logc = 0.5 * (math.lgamma(2 * j + 1) - math.lgamma(j + m + 1) - math.lgamma(j - m + 1))
            pc, ps = j + m, j - m
        else:
            # m' = -j
            sign = -1.0 if (two_m + two_j) // 2 % 2 else 1.0
            logc = 0.5 * (math.lgamma(2 * j + 1) - math.lgamma(j + m + 1) - math.lgamma(j - m + 1))
            pc, ps = j - m, j + m
    else:
        # swap via d^j_{m,m'} = (-1)^{m-m'} d^j_{m',m}
        sign, logc, pc, ps = _log_seed(two_j, two_mp, two_m, half_cos, half_sin)
        if (two_m - two_mp) // 2 % 2:
            sign = -sign
        return sign, logc, pc, ps
    return sign, logc, pc, ps


def wigner_d_rows(two_m, two_mp, two_jmax, beta):
    """Rows ``d^j_{m,m'}(beta)`` for ``j = max(|m|,|m'|) .. jmax``.

    Half-integer labels are passed doubled. Returns an array of shape
    ``(n_j, len(beta))``; an empty array when ``jmax`` is below the seed.
    """
    if (two_m - two_mp) % 2:
        raise ValueError(f"labels 2m={two_m}, 2m'={two_mp} mix integer and half-integer spin")
    beta = np.asarray(beta, dtype=float)
    two_j0 = max(abs(two_m), abs(two_mp))
    n_j = (two_jmax - two_j0) // 2 + 1
    out = np.zeros((max(n_j, 0), beta.size))
    if n_j <= 0:
        return out
    half_cos = np.cos(0.5 * beta)
    half_sin = np.sin(0.5 * beta)
    sign, logc, pc, ps = _log_seed(two_j0, two_m, two_mp, half_cos, half_sin)
    with np.errstate(divide="ignore"):
        # a zero exponent contributes nothing, even where the base vanishes
        logv = np.full(beta.shape, logc, dtype=float)
        if pc:
            logv += pc * np.log(np.abs(half_cos))
        if ps:
            logv += ps * np.log(np.abs(half_sin))
    seed = np.where(logv > -700.0, np.exp(np.maximum(logv, -700.0)), 0.0)
    # odd powers of negative half-angle cosines never occur for beta in [0, pi]
    out[0] = sign * seed
    if n_j == 1:
        return out
    m = two_m / 2.0
    mp = two_mp / 2.0
    cb = np.cos(beta)
    prev = np.zeros_like(seed)
    cur = out[0].copy()
    j = two_j0 / 2.0
    for i in range(1, n_j):
        jp = j + 1.0
        denom = math.sqrt((jp * jp - m * m) * (jp * jp - mp * mp))
        a = jp * (2.0 * j + 1.0) / denom
        shift = m * mp / (j * jp) if j > 0 else 0.0
        if j > 0:
            b = jp * math.sqrt((j * j - m * m) * (j * j - mp * mp)) / (j * denom)
        else:
            b = 0.0
        nxt = a * (cb - shift) * cur - b * prev
        out[i] = nxt
        prev, cur = cur, nxt
        j = jp
    return out
