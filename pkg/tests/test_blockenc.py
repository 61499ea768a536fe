import math

import numpy as np
import pytest
import scipy.sparse as sp

from dislat.blockenc import (
    BlockEncoding,
    assemble_full_encoding,
    build_amplitude_oracle,
    build_phase_oracle,
    build_sparse_oracles,
    build_type_projector,
    compose,
    dilation_encoding,
    extract_block,
    oracle_column_index,
    oracle_geometry,
    type_projector_longhand,
    verify_plus_projection,
)
from dislat.lattice import (
    DisorderSpec,
    LatticeSpec,
    assemble_doubled_matrix,
    assemble_hopping_matrix,
    sample_atom_type,
)

from conftest import INSTANCES, ALLOY


def test_column_oracle_chain():
    lat = LatticeSpec(dims=(4,), boundary="periodic")
    oracles = build_sparse_oracles(lat, DisorderSpec(kind="none", t00=-1.0))
    # slots ordered (self, left, right)
    assert oracle_column_index(oracles, 0, 1) == 1
    assert oracle_column_index(oracles, 1, 1) == 0
    assert oracle_column_index(oracles, 2, 1) == 2


def test_column_oracle_open_padding():
    lat = LatticeSpec(dims=(4,), boundary="open")
    oracles = build_sparse_oracles(lat, DisorderSpec(kind="none", t00=-1.0))
    assert oracle_column_index(oracles, 1, 0) == 0  # left slot of row 0 padded


def test_column_unitary_is_permutation():
    lat = LatticeSpec(dims=(4,), boundary="open")
    oracles = build_sparse_oracles(lat, DisorderSpec(kind="none", t00=-1.0))
    u = oracles.column_unitary().toarray()
    assert set(np.unique(u)) <= {0.0, 1.0}
    assert np.array_equal(u.sum(axis=0), np.ones(u.shape[0]))
    assert np.array_equal(u.sum(axis=1), np.ones(u.shape[0]))


def test_geometry_oracle_values():
    lat = LatticeSpec(dims=(4,), boundary="open", cutoff=1.0, d_max=4.0)
    dis = DisorderSpec(kind="none", t00=-1.0, precision_bits=4)
    oracles = build_sparse_oracles(lat, dis)
    d_self, phi_self = oracle_geometry(oracles, 0, 1)
    assert d_self == 0 and phi_self == 0
    d_nn, phi_nn = oracle_geometry(oracles, 1, 1)  # unit distance, d_max=4, m=4
    assert d_nn == 16 * 1 // 4 == 4
    assert phi_nn == 0  # zero-field model


def test_geometry_unitaries_are_permutations():
    lat = LatticeSpec(dims=(4,))
    dis = DisorderSpec(kind="magnetic", key=3, t00=1.0, precision_bits=3)
    oracles = build_sparse_oracles(lat, dis)
    for u in (oracles.distance_unitary(), oracles.phase_unitary()):
        dense = u.toarray()
        assert np.array_equal(dense @ dense.T.conj(), np.eye(dense.shape[0]))
        assert set(np.unique(dense.real)) <= {0.0, 1.0}


@pytest.mark.parametrize("t,gamma_q,m,d", [
    (0.8, 0.3, 3, 0),
    (0.8, 0.3, 3, 7),
    (1.0, 0.1, 3, 5),
    (-0.9, 0.25, 4, 11),
])
def test_amplitude_oracle_values(t, gamma_q, m, d):
    be = build_amplitude_oracle(t, gamma_q, m)
    block = extract_block(be)
    expect = t * math.exp(-gamma_q * d)
    assert abs(block[d, d] - expect) < 1e-12
    assert be.unitarity_defect() < 1e-12


def test_amplitude_oracle_rejects_negative_decay():
    with pytest.raises(ValueError):
        build_amplitude_oracle(0.5, -0.1, 3)


def test_amplitude_oracle_folds_large_t():
    be = build_amplitude_oracle(2.0, 0.2, 3)
    assert be.alpha == 2.0
    block = extract_block(be)
    assert abs(block[3, 3] - 2.0 * math.exp(-0.6)) < 1e-12


def test_phase_oracle():
    m = 4
    op = build_phase_oracle(m).toarray()
    assert op[0, 0] == 1.0
    assert abs(op[8, 8] - (-1.0)) < 1e-14  # phi = M/2 -> e^{i pi}
    assert abs(op[5, 5] - np.exp(2j * np.pi * 5 / 16)) < 1e-14
    assert np.abs(np.abs(np.diag(op)) - 1.0).max() < 1e-14


def test_type_projector_certain_alloy():
    dis = DisorderSpec(kind="binary-alloy", key=1, p=1.0)
    be = build_type_projector(dis, 3)
    block = extract_block(be)
    diag = np.real(np.diag(block))
    # every site projects onto type 1
    assert np.array_equal(diag.reshape(8, 2), np.tile([0.0, 1.0], (8, 1)))
    assert np.trace(block).real == 8.0


def test_type_projector_matches_sampling():
    dis = DisorderSpec(kind="binary-alloy", key=7, p=0.5)
    be = build_type_projector(dis, 3)
    diag = np.real(np.diag(extract_block(be))).reshape(8, 2)
    for site in range(8):
        g = sample_atom_type(dis, site, 3)
        assert diag[site, g] == 1.0 and diag[site, 1 - g] == 0.0
    assert np.trace(extract_block(be)).real == 8.0


def test_type_projector_longhand_matches_folded():
    dis = DisorderSpec(kind="binary-alloy", key=7, p=0.5)
    n_q = 2
    n = 1 << n_q
    long = type_projector_longhand(dis, n_q)
    folded = build_type_projector(dis, n_q).u.toarray()
    # long registers: [flag][freg n][cp 2][site n][type 2]; the helper
    # registers must return exactly to |0>, and the (flag, site, type)
    # action must match the folded permutation.
    sys_dim = 2 * n
    reg_dim = n * 2
    dim = 2 * reg_dim * sys_dim
    long_dense = long.toarray()
    lifted = np.zeros((2 * sys_dim, 2 * sys_dim), dtype=complex)
    for q_in in range(2):
        for s_in in range(sys_dim):
            col = (q_in * reg_dim + 0) * sys_dim + s_in
            vec = long_dense[:, col]
            # no amplitude may leave the zeroed helper registers
            mask = np.ones(dim, dtype=bool)
            for q_out in range(2):
                lo = (q_out * reg_dim) * sys_dim
                mask[lo : lo + sys_dim] = False
                lifted[q_out * sys_dim : (q_out + 1) * sys_dim, q_in * sys_dim + s_in] = vec[
                    lo : lo + sys_dim
                ]
            assert np.abs(vec[mask]).max() == 0.0
    assert np.abs(lifted - folded).max() == 0.0


def test_extract_block_identity():
    be = BlockEncoding(u=sp.identity(8, format="csr", dtype=complex), alpha=1.0,
                       n_anc=1, sys_dim=4)
    assert np.array_equal(extract_block(be), np.eye(4))


def test_block_of_adjoint_is_adjoint_of_block():
    lat, dis = INSTANCES["1d-alloy-16"]
    be = assemble_full_encoding(lat, dis)
    adj = BlockEncoding(u=be.u.getH().tocsr(), alpha=be.alpha, n_anc=be.n_anc,
                        sys_dim=be.sys_dim)
    assert np.abs(extract_block(adj) - extract_block(be).conj().T).max() < 1e-12


def test_full_encoding_clean_chain():
    lat, dis = INSTANCES["1d-clean-8"]
    be = assemble_full_encoding(lat, dis)
    h = assemble_hopping_matrix(lat, dis).toarray()
    assert np.abs(extract_block(be) - h).max() < 1e-10
    assert be.alpha == lat.s * 1.0


def test_full_encoding_zero_hopping():
    lat = LatticeSpec(dims=(4,))
    dis = DisorderSpec(kind="none", t00=0.0, gamma00=0.5)
    be = assemble_full_encoding(lat, dis)
    assert np.abs(extract_block(be)).max() == 0.0
    assert be.unitarity_defect() < 1e-12


def test_full_encoding_alloy_matches_doubled():
    lat = LatticeSpec(dims=(8,))
    dis = DisorderSpec(key=42, **ALLOY)
    be = assemble_full_encoding(lat, dis)
    block = extract_block(be)
    ref = assemble_doubled_matrix(lat, dis).toarray()
    assert np.abs(block - block.conj().T).max() < 1e-12
    assert np.abs(block - ref).max() < 1e-10
    assert be.alpha == 2 * lat.s * max(1.0, abs(dis.t00))


@pytest.mark.parametrize("name", list(INSTANCES))
def test_encoding_invariants_all_instances(name):
    lat, dis = INSTANCES[name]
    be = assemble_full_encoding(lat, dis)
    assert be.unitarity_defect() < 1e-12
    if dis.kind == "binary-alloy":
        ref = assemble_doubled_matrix(lat, dis).toarray()
    else:
        ref = assemble_hopping_matrix(lat, dis).toarray()
    assert np.abs(extract_block(be) - ref).max() < 1e-10


@pytest.mark.parametrize("d", range(9))
def test_plus_projection_identity(d):
    lat, dis = INSTANCES["1d-alloy-16"]
    assert verify_plus_projection(lat, dis, d) < 1e-10


def test_plus_projection_on_magnetic_instance():
    lat, dis = INSTANCES["2d-magnet-16"]
    for d in (1, 3, 5):
        assert verify_plus_projection(lat, dis, d) < 1e-10


def test_composition_property():
    rng = np.random.default_rng(5)
    n = 8
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    be_a = dilation_encoding(a)
    be_b = dilation_encoding(b, alpha=2.0 * np.linalg.norm(b, 2))
    prod = compose(be_a, be_b)
    assert prod.alpha == be_a.alpha * be_b.alpha
    assert np.abs(extract_block(prod) - a @ b).max() < 1e-10
    assert prod.unitarity_defect() < 1e-11


def test_compose_with_full_encoding():
    lat, dis = INSTANCES["1d-clean-8"]
    be = assemble_full_encoding(lat, dis)
    prod = compose(be, be)
    h = assemble_hopping_matrix(lat, dis).toarray()
    assert np.abs(extract_block(prod) - h @ h).max() < 1e-10


def test_geometry_register_folding():
    """Longhand O_d / O_phi pipeline with explicit geometry registers and m
    dilation ancillas reproduces the folded per-(slot, site) amplitude, with
    the registers returning exactly to zero."""
    lat = LatticeSpec(dims=(4,))
    dis = DisorderSpec(kind="magnetic", key=6, t00=0.9, gamma00=0.4, precision_bits=2)
    oracles = build_sparse_oracles(lat, dis)
    tables = oracles.tables
    m = 2
    big_m = 1 << m
    s_dim = oracles.slot_dim
    n = 4
    s = tables.s
    # registers: [slot][site][dreg M][preg M][anc M (m dilation bits)]
    sizes = [s_dim, n, big_m, big_m, big_m]
    dim = int(np.prod(sizes))

    def decompose(idx):
        parts = []
        rem = idx
        for size in reversed(sizes):
            parts.append(rem % size)
            rem = rem // size
        return parts[::-1]

    def perm_from(fn):
        idx = np.arange(dim)
        new = fn(*decompose(idx))
        flat = new[0]
        for part, size in zip(new[1:], sizes[1:]):
            flat = flat * size + part
        return sp.coo_matrix((np.ones(dim), (flat, idx)), shape=(dim, dim)).tocsr()

    dist_padded = np.vstack([tables.dist_q, np.zeros((s_dim - s, n), dtype=int)])
    phase_padded = np.vstack([tables.phase_q, np.zeros((s_dim - s, n), dtype=int)])
    o_d = perm_from(lambda l, j, d, p, a: [l, j, d ^ dist_padded[l, j], p, a])
    o_p = perm_from(lambda l, j, d, p, a: [l, j, d, p ^ phase_padded[l, j], a])

    gamma_q = dis.gamma00 * tables.d_max / big_m
    t_scaled = dis.t00 / tables.t_norm
    root = t_scaled ** (1.0 / m)
    u = o_p @ o_d
    idx = np.arange(dim)
    l_r, j_r, d_r, p_r, a_r = decompose(idx)
    for k in range(m):
        # rotation on dilation ancilla bit k, controlled by dreg bit k
        z = np.where((d_r >> k) & 1, root * math.exp(-gamma_q * (1 << k)), root)
        abit = (a_r >> k) & 1
        base = idx[abit == 0]
        zb = z[abit == 0].astype(complex)
        c = np.sqrt(1.0 - np.abs(zb) ** 2)
        partner = base + (1 << k)
        rows = np.concatenate([base, partner, base, partner])
        cols = np.concatenate([base, base, partner, partner])
        vals = np.concatenate([zb, c, -c, np.conj(zb)])
        u = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr() @ u
    u = sp.diags(np.exp(2j * np.pi * p_r / big_m)).tocsr() @ u
    u = o_d.getH() @ o_p.getH() @ u

    defect = BlockEncoding(u=u.tocsr(), alpha=1.0, n_anc=1, sys_dim=dim // 2)
    assert defect.unitarity_defect() < 1e-12

    dense = u.toarray()
    for l in range(s):
        for j in range(n):
            col = ((l * n + j) * big_m * big_m + 0) * big_m + 0
            amp = dense[col, col]
            dq = tables.dist_q[l, j]
            pq = tables.phase_q[l, j]
            expect = t_scaled * math.exp(-gamma_q * dq) * np.exp(2j * np.pi * pq / big_m)
            assert abs(amp - expect) < 1e-12
            # geometry registers return to zero in every output branch
            colvec = dense[:, col]
            for row in np.flatnonzero(np.abs(colvec) > 1e-15):
                _, _, d_out, p_out, _ = (arr[row] for arr in (l_r, j_r, d_r, p_r, a_r))
                assert d_out == 0 and p_out == 0
