import numpy as np
import pytest
from scipy.stats import chisquare

from dislat.randomness import (
    gf64_mul,
    keyed_hash,
    keyed_random,
    kwise_coefficients,
)


def test_determinism():
    a = keyed_random(123, 456, 32)
    b = keyed_random(123, 456, 32)
    assert a == b
    assert keyed_random(124, 456, 32) != a


def test_output_width():
    for bits in (1, 8, 13, 64):
        vals = [keyed_random(1, x, bits) for x in range(50)]
        assert all(0 <= v < (1 << bits) for v in vals)
    with pytest.raises(ValueError):
        keyed_random(1, 2, 65)


def test_kwise_degree_zero_is_constant():
    # t = 1: a degree-0 polynomial, constant in the input.
    c0 = kwise_coefficients(99, 1)[0]
    vals = {keyed_random(99, x, 64, mode="k-wise", independence=1) for x in range(100)}
    assert vals == {c0}


def test_keyed_hash_chi_square_uniformity():
    counts = np.zeros(256, dtype=int)
    for x in range(1 << 12):
        counts[keyed_random(2024, x, 8)] += 1
    assert chisquare(counts).pvalue > 0.001


def test_gf64_field_identities():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b, c = (int(v) for v in rng.integers(1, 1 << 63, 3))
        assert gf64_mul(a, 1) == a
        assert gf64_mul(a, b) == gf64_mul(b, a)
        assert gf64_mul(a, gf64_mul(b, c)) == gf64_mul(gf64_mul(a, b), c)
        assert gf64_mul(a, b ^ c) == gf64_mul(a, b) ^ gf64_mul(a, c)


def test_kwise_cross_key_marginals():
    # Over random keys the low output bit at a fixed input is Bernoulli(1/2).
    n_keys = 400
    for x in (3, 77):
        ones = sum(
            keyed_random(k, x, 1, mode="k-wise", independence=3) for k in range(n_keys)
        )
        sigma = np.sqrt(n_keys * 0.25)
        assert abs(ones - n_keys / 2) < 5 * sigma


def test_kwise_pairwise_independence_statistics():
    # t = 2: outputs at two fixed inputs are uncorrelated over keys.
    n_keys = 2000
    a = np.array(
        [keyed_random(k, 5, 8, mode="k-wise", independence=2) for k in range(n_keys)],
        dtype=float,
    )
    b = np.array(
        [keyed_random(k, 9, 8, mode="k-wise", independence=2) for k in range(n_keys)],
        dtype=float,
    )
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 5 / np.sqrt(n_keys)


def test_hash_matches_blake2b_keyed_mode():
    import hashlib

    digest = hashlib.blake2b(
        (7).to_bytes(8, "little"), digest_size=8, key=(42).to_bytes(8, "little")
    ).digest()
    assert keyed_hash(42, 7) == int.from_bytes(digest, "little")
