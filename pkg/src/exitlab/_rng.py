"""Per-path random streams for the compiled samplers.

Path ``i`` of a batch seeded with ``seed`` owns a xoshiro256** state whose
256 bits are produced by SplitMix64 from a key mixed out of (seed, i).  The
key derivation is a pure function of the counter ``i``, so any path can be
regenerated on its own and batches do not depend on how paths are
scheduled across threads.

Normals use the 128-layer Marsaglia-Tsang ziggurat on the top 32 bits of
one xoshiro output.
"""

import math

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xBF58476D1CE4E5B9)
_M3 = np.uint64(0x94D049BB133111EB)
_DOUBLE_UNIT = 1.0 / 9007199254740992.0


@nb.njit(inline="always", cache=True)
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M2
    z = (z ^ (z >> np.uint64(27))) * _M3
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always", cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(inline="always", cache=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(inline="always", cache=True)
def uniform(s):
    """Uniform double on [0, 1)."""
    return (next_u64(s) >> np.uint64(11)) * _DOUBLE_UNIT


@nb.njit(cache=True)
def seed_stream(s, seed, index):
    """Fill the 4-word state ``s`` for path ``index`` of a batch seeded with ``seed``."""
    x = _mix64(np.uint64(seed) + _GOLDEN) ^ _mix64(np.uint64(index) * _M3 + _M2)
    for k in range(4):
        x += _GOLDEN
        s[k] = _mix64(x)


def _ziggurat_tables():
    m1 = 2147483648.0
    dn = 3.442619855899
    tn = dn
    vn = 9.91256303526217e-3
    kn = np.zeros(128, np.int64)
    wn = np.zeros(128)
    fn = np.zeros(128)
    q = vn / math.exp(-0.5 * dn * dn)
    kn[0] = int((dn / q) * m1)
    kn[1] = 0
    wn[0] = q / m1
    wn[127] = dn / m1
    fn[0] = 1.0
    fn[127] = math.exp(-0.5 * dn * dn)
    for i in range(126, 0, -1):
        dn = math.sqrt(-2.0 * math.log(vn / dn + math.exp(-0.5 * dn * dn)))
        kn[i + 1] = int((dn / tn) * m1)
        tn = dn
        fn[i] = math.exp(-0.5 * dn * dn)
        wn[i] = dn / m1
    return kn, wn, fn


_KN, _WN, _FN = _ziggurat_tables()
_ZR = 3.442620


@nb.njit(inline="always", cache=True)
def _normal_slow(s, hz, iz):
    while True:
        x = hz * _WN[iz]
        if iz == 0:
            # tail beyond the base strip
            while True:
                x = -math.log(1.0 - uniform(s)) * (1.0 / _ZR)
                y = -math.log(1.0 - uniform(s))
                if y + y >= x * x:
                    break
            return _ZR + x if hz > 0 else -_ZR - x
        if _FN[iz] + uniform(s) * (_FN[iz - 1] - _FN[iz]) < math.exp(-0.5 * x * x):
            return x
        hz = nb.int64(next_u64(s)) >> 32
        iz = hz & 127
        ahz = hz if hz >= 0 else -hz
        if ahz < _KN[iz]:
            return hz * _WN[iz]


@nb.njit(inline="always", cache=True)
def normal(s):
    """Standard normal variate."""
    hz = nb.int64(next_u64(s)) >> 32
    iz = hz & 127
    ahz = hz if hz >= 0 else -hz
    if ahz < _KN[iz]:
        return hz * _WN[iz]
    return _normal_slow(s, hz, iz)


@nb.njit(cache=True)
def fill_normals(seed, index, out):
    """Debug/test helper: the first ``len(out)`` normals of stream (seed, index)."""
    s = np.empty(4, np.uint64)
    seed_stream(s, seed, index)
    for k in range(out.shape[0]):
        out[k] = normal(s)


@nb.njit(cache=True)
def fill_uniforms(seed, index, out):
    s = np.empty(4, np.uint64)
    seed_stream(s, seed, index)
    for k in range(out.shape[0]):
        out[k] = uniform(s)
