import math

import numpy as np
import pytest

from dislat.chebyshev import estimate_spectral_norm
from dislat.lattice import (
    DisorderSpec,
    LatticeSpec,
    assemble_hopping_matrix,
    assemble_velocity_operator,
    displaced_positions,
    enumerate_sites,
    sample_atom_type,
    sample_displacement,
    sample_peierls_phase,
    quantized_peierls,
)

from conftest import INSTANCES, ALLOY


def test_enumerate_sites_1d():
    sites = enumerate_sites(LatticeSpec(dims=(4,)))
    assert [s[0] for s in sites] == [0, 1, 2, 3]
    assert [s[2][0] for s in sites] == [0.0, 1.0, 2.0, 3.0]


def test_enumerate_sites_2d_row_major():
    sites = enumerate_sites(LatticeSpec(dims=(2, 2)))
    assert sites[3][1] == (1, 1)
    assert sites[3][2] == (1.0, 1.0)


def test_sparsity_3d_cube():
    lat = LatticeSpec(dims=(2, 2, 2), boundary="periodic", cutoff=1.0)
    assert lat.s == 7  # self + 6 axis neighbours, counted per offset


def test_extent_validation():
    with pytest.raises(ValueError):
        LatticeSpec(dims=(3,))
    with pytest.raises(ValueError):
        LatticeSpec(dims=(4, 4, 4, 4))
    with pytest.raises(ValueError):
        LatticeSpec(dims=(8, 8), cutoff=3.0, sparsity_cap=16)


def test_atom_type_threshold():
    dis = DisorderSpec(kind="binary-alloy", key=11, p=0.5)
    for site in range(16):
        expect = int(dis.draw(site, 4) < 8)
        assert sample_atom_type(dis, site, 4) == expect


def test_atom_type_degenerate_probabilities():
    zero = DisorderSpec(kind="binary-alloy", key=1, p=0.0)
    one = DisorderSpec(kind="binary-alloy", key=1, p=1.0)
    assert all(sample_atom_type(zero, i, 6) == 0 for i in range(64))
    assert all(sample_atom_type(one, i, 6) == 1 for i in range(64))


def test_atom_type_marginal_five_sigma():
    dis = DisorderSpec(kind="binary-alloy", key=2718, p=0.25)
    n = 1 << 10
    ones = sum(sample_atom_type(dis, i, 10) for i in range(n))
    sigma = math.sqrt(n * 0.25 * 0.75)
    assert abs(ones - 0.25 * n) < 5 * sigma


def test_displacement_endpoint():
    # An m' = 1 draw of 0 gives u = 0, i.e. the -w endpoint.
    dis = DisorderSpec(kind="structural", key=0, displacement_width=0.4,
                       displacement_bits=1)
    draws = [sample_displacement(dis, site, 1, 64)[0] for site in range(64)]
    assert set(draws) <= {-0.4, 0.0}
    assert -0.4 in draws


def test_zero_width_is_clean():
    lat = LatticeSpec(dims=(8,))
    flat = DisorderSpec(kind="structural", key=3, t00=-1.0, displacement_width=0.0)
    clean = DisorderSpec(kind="none", t00=-1.0)
    a = assemble_hopping_matrix(lat, flat).toarray()
    b = assemble_hopping_matrix(lat, clean).toarray()
    assert np.array_equal(a, b)


def test_displaced_positions_stay_ordered():
    lat = LatticeSpec(dims=(8,))
    dis = DisorderSpec(kind="structural", key=12, displacement_width=0.3,
                       displacement_bits=8)
    pos = displaced_positions(lat, dis)[:, 0]
    assert np.all(np.diff(pos) > 0)


def test_peierls_antisymmetry_all_pairs():
    lat = LatticeSpec(dims=(16,))
    dis = DisorderSpec(kind="magnetic", key=9, t00=1.0, precision_bits=6)
    big_m = 1 << 6
    for j in range(16):
        for l, delta in enumerate(lat.offsets):
            if delta == (0,):
                assert quantized_peierls(dis, lat, j, l) == 0
                continue
            i = (j + delta[0]) % 16
            l_rev = lat.offsets.index((-delta[0],))
            q_fwd = quantized_peierls(dis, lat, j, l)
            q_rev = quantized_peierls(dis, lat, i, l_rev)
            assert (q_fwd + q_rev) % big_m == 0
            phase = sample_peierls_phase(dis, lat, j, l)
            assert 0.0 <= phase < 2 * math.pi


def test_magnetic_matrix_hermitian():
    lat, dis = INSTANCES["1d-magnet-16"]
    h = assemble_hopping_matrix(lat, dis).toarray()
    assert np.abs(h - h.conj().T).max() < 1e-14


def test_clean_open_chain_matches_tridiagonal():
    # Off-diagonal part is the tridiagonal chain scaled by e^{-gamma}; the
    # diagonal carries the on-site amplitude t at distance zero.
    gamma = 0.7
    lat = LatticeSpec(dims=(4,), boundary="open", cutoff=1.0)
    dis = DisorderSpec(kind="none", t00=-1.0, gamma00=gamma, precision_bits=6)
    h = assemble_hopping_matrix(lat, dis).toarray()
    hop = -math.exp(-gamma)
    expect = -np.eye(4) + hop * (np.eye(4, k=1) + np.eye(4, k=-1))
    assert np.abs(h - expect).max() < 1e-14


def test_degenerate_alloy_is_key_independent():
    lat = LatticeSpec(dims=(8,))
    base = dict(kind="binary-alloy", p=0.5, t00=-1.0, t11=-1.0, t01=-1.0,
                gamma00=0.5, gamma11=0.5, gamma01=0.5, precision_bits=6)
    a = assemble_hopping_matrix(lat, DisorderSpec(key=1, **base)).toarray()
    b = assemble_hopping_matrix(lat, DisorderSpec(key=999, **base)).toarray()
    clean = assemble_hopping_matrix(
        lat, DisorderSpec(kind="none", t00=-1.0, gamma00=0.5, precision_bits=6)
    ).toarray()
    assert np.array_equal(a, b)
    assert np.array_equal(a, clean)


def test_spectral_norm_below_alpha():
    lat = LatticeSpec(dims=(8,))
    dis = DisorderSpec(key=42, **ALLOY)
    h = assemble_hopping_matrix(lat, dis)
    assert estimate_spectral_norm(h.matrix) <= h.alpha
    assert h.alpha == 2 * lat.s * max(1.0, abs(dis.t00))


def test_velocity_of_diagonal_matrix_vanishes():
    import scipy.sparse as sp

    lat = LatticeSpec(dims=(8,))
    dis = DisorderSpec(kind="none", t00=-1.0, gamma00=0.5)
    h = assemble_hopping_matrix(lat, dis)
    h.matrix = sp.diags(h.toarray().diagonal()).tocsr()
    v = assemble_velocity_operator(h, axis=0)
    assert v.matrix.nnz == 0


def test_velocity_structure_on_chain():
    lat, dis = INSTANCES["1d-clean-8"]
    h = assemble_hopping_matrix(lat, dis)
    v = assemble_velocity_operator(h, axis=0).toarray()
    assert np.abs(v - v.conj().T).max() < 1e-14
    assert np.abs(v.real).max() < 1e-15  # i * (real h) * (real dx)
    eig = np.sort(np.linalg.eigvalsh(v))
    assert np.abs(eig + eig[::-1]).max() < 1e-12


@pytest.mark.parametrize("name", list(INSTANCES))
def test_hermiticity_and_determinism(name):
    lat, dis = INSTANCES[name]
    h1 = assemble_hopping_matrix(lat, dis)
    h2 = assemble_hopping_matrix(lat, dis)
    dense = h1.toarray()
    assert np.abs(dense - dense.conj().T).max() < 1e-13
    assert np.array_equal(dense, h2.toarray())
    assert estimate_spectral_norm(h1.matrix) <= h1.alpha * (1 + 1e-12)
    assert h1.max_row_nnz() <= 2 * h1.s


def test_coo_text_roundtrip():
    lat, dis = INSTANCES["1d-alloy-16"]
    h = assemble_hopping_matrix(lat, dis)
    text = h.to_coo_text()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert len(lines) == h.matrix.nnz
    r, c, re, im = lines[0].split()
    assert complex(float(re), float(im)) == h.toarray()[int(r), int(c)]
