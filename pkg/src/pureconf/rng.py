"""Counter-based random streams and a vectorized Poisson sampler.

Every pixel owns an independent stream addressed by ``(seed, pixel, draw)``
through the Philox4x32-10 block cipher, so a measurement can be generated in
any order (or in parallel) and still be bit-identical for a given seed.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10) -> np.ndarray:
    """Philox4x32 block function.

    ``counter`` has shape ``(..., 4)`` and ``key`` shape ``(..., 2)`` (uint32
    values, broadcast against each other). Returns uint32 words of shape
    ``(..., 4)``.
    """
    ctr = np.asarray(counter, dtype=np.uint64) & _MASK32
    k = np.asarray(key, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = (ctr[..., i] for i in range(4))
    k0, k1 = k[..., 0], k[..., 1]
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack(np.broadcast_arrays(c0, c1, c2, c3), axis=-1).astype(np.uint32)


def _split_seed(seed: int) -> np.ndarray:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return np.array([seed & 0xFFFFFFFF, seed >> 32], dtype=np.uint64)


def uniform_pair(seed: int, index, draw) -> tuple[np.ndarray, np.ndarray]:
    """Two independent uniforms in the open interval (0, 1) per stream.

    ``index`` selects the stream (e.g. pixel number) and ``draw`` the
    position within it; both broadcast.
    """
    index = np.asarray(index, dtype=np.uint64)
    draw = np.asarray(draw, dtype=np.uint64)
    index, draw = np.broadcast_arrays(index, draw)
    ctr = np.stack(
        [index & _MASK32, index >> _SHIFT32, draw & _MASK32, np.zeros_like(index)],
        axis=-1,
    )
    words = philox4x32(ctr, _split_seed(seed)).astype(np.uint64)
    # 53-bit mantissas, offset by half a unit so 0 and 1 are never produced.
    a = (words[..., 0] >> np.uint64(5)) * np.uint64(1 << 26) + (words[..., 1] >> np.uint64(6))
    b = (words[..., 2] >> np.uint64(5)) * np.uint64(1 << 26) + (words[..., 3] >> np.uint64(6))
    scale = 1.0 / 2.0**53
    return (a.astype(float) + 0.5) * scale, (b.astype(float) + 0.5) * scale


INVERSION_LIMIT = 10.0


def _poisson_inversion(lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    k = np.zeros(lam.shape, dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    active = u > cdf
    # The pmf tail for rates below 10 is < 1e-16 well before 100 terms; the
    # cap only guards against cdf roundoff stalling just below u.
    for j in range(1, 200):
        if not active.any():
            break
        k[active] = j
        p = np.where(active, p * lam / j, p)
        cdf = np.where(active, cdf + p, cdf)
        active &= u > cdf
    return k


def _poisson_ptrs(lam: np.ndarray, seed: int, index: np.ndarray) -> np.ndarray:
    """Hormann's transformed rejection with squeeze, for rates >= 10."""
    slam = np.sqrt(lam)
    loglam = np.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2)

    out = np.zeros(lam.shape, dtype=np.int64)
    pending = np.arange(lam.size)
    draw = 1  # draw 0 is reserved for the inversion branch
    while pending.size:
        u1, v = uniform_pair(seed, index[pending], draw)
        lp, bp, ap = lam[pending], b[pending], a[pending]
        U = u1 - 0.5
        us = 0.5 - np.abs(U)
        k = np.floor((2 * ap / us + bp) * U + lp + 0.43)
        quick = (us >= 0.07) & (v <= vr[pending])
        reject = (k < 0) | ((us < 0.013) & (v > us))
        kk = np.maximum(k, 0)
        slow = ~quick & ~reject & (
            np.log(v) + np.log(invalpha[pending]) - np.log(ap / (us * us) + bp)
            <= -lp + kk * loglam[pending] - gammaln(kk + 1)
        )
        accept = quick | slow
        out[pending[accept]] = k[accept].astype(np.int64)
        pending = pending[~accept]
        draw += 1
    return out


def poisson(rates, seed: int) -> np.ndarray:
    """Independent Poisson draws, one stream per entry of ``rates``."""
    lam = np.asarray(rates, dtype=float)
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("Poisson rates must be finite and nonnegative")
    flat = lam.ravel()
    index = np.arange(flat.size, dtype=np.uint64)
    counts = np.zeros(flat.size, dtype=np.int64)
    small = flat < INVERSION_LIMIT
    if small.any():
        u, _ = uniform_pair(seed, index[small], 0)
        counts[small] = _poisson_inversion(flat[small], u)
    big = ~small
    if big.any():
        counts[big] = _poisson_ptrs(flat[big], seed, index[big])
    return counts.reshape(lam.shape)


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 64-bit child seed for ``(seed, *path)``."""
    ss = np.random.SeedSequence([int(seed), *(int(p) for p in path)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
