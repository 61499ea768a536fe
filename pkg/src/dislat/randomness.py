"""Keyed deterministic randomness for disorder realizations.

Every random quantity in a disorder realization is a pure function of a
64-bit key and an integer input, so a (model, key) pair pins the Hamiltonian
down bit for bit.  Two generators are provided:

* ``keyed-hash``: BLAKE2b in keyed mode, truncated to the requested output
  width.  A fixed, published keyed hash; no cryptographic claim is attached.
  The generator identifier is recorded in output metadata as ``HASH_NAME``.
* ``k-wise``: a degree-(t-1) polynomial over GF(2^64) with key-derived
  coefficients.  Restricted to any t distinct inputs, the outputs are exactly
  uniform over random keys (t-wise independence).  The single degree-64 field
  covers every input width used here, including slot-tagged pair indices.
"""

from __future__ import annotations

from functools import lru_cache
from hashlib import blake2b

HASH_NAME = "blake2b-keyed-64"

MASK64 = (1 << 64) - 1
# x^64 = x^4 + x^3 + x + 1, the usual low-weight degree-64 reduction.
_GF_LOW_BITS = 0x1B

MODES = ("keyed-hash", "k-wise")


def _blake_u64(key: int, data: bytes) -> int:
    digest = blake2b(data, digest_size=8, key=int(key).to_bytes(8, "little")).digest()
    return int.from_bytes(digest, "little")


def keyed_hash(key: int, x: int) -> int:
    """Full 64-bit keyed hash of a non-negative 64-bit integer input."""
    if not 0 <= x <= MASK64:
        raise ValueError(f"input {x} outside the 64-bit range")
    return _blake_u64(key, int(x).to_bytes(8, "little"))


def gf64_mul(a: int, b: int) -> int:
    """Product in GF(2^64): carry-less multiply with bitwise reduction."""
    result = 0
    a &= MASK64
    b &= MASK64
    for _ in range(64):
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> 64:
            a = (a & MASK64) ^ _GF_LOW_BITS
    return result


@lru_cache(maxsize=256)
def kwise_coefficients(key: int, t: int) -> tuple[int, ...]:
    """Key-derived polynomial coefficients c_0..c_{t-1}.

    Coefficient inputs are domain-separated from plain 8-byte hash inputs by
    their tag and length, so a key never reuses draws across roles.
    """
    if t < 1:
        raise ValueError("independence parameter t must be >= 1")
    return tuple(
        _blake_u64(key, b"kwise-coefficient:" + i.to_bytes(4, "little"))
        for i in range(t)
    )


def keyed_random(
    key: int,
    x: int,
    out_bits: int,
    mode: str = "keyed-hash",
    independence: int = 0,
) -> int:
    """Deterministic pseudo-uniform integer in [0, 2^out_bits).

    ``keyed-hash`` evaluates the pinned keyed hash; ``k-wise`` evaluates the
    degree-(independence - 1) key-derived polynomial over GF(2^64) at the
    input point.  Both truncate to the low ``out_bits`` bits.
    """
    if not 1 <= out_bits <= 64:
        raise ValueError("out_bits must lie in 1..64")
    if mode == "keyed-hash":
        value = keyed_hash(key, x)
    elif mode == "k-wise":
        coeffs = kwise_coefficients(key, independence)
        value = 0
        for c in reversed(coeffs):
            value = gf64_mul(value, x) ^ c
    else:
        raise ValueError(f"unknown randomness mode {mode!r}")
    return value & ((1 << out_bits) - 1)


def keyed_random_many(key, inputs, out_bits, mode="keyed-hash", independence=0):
    """keyed_random over an iterable of inputs, as a list (assembly helper)."""
    return [keyed_random(key, int(x), out_bits, mode, independence) for x in inputs]
