"""Explicit block-encoding unitaries for disordered hopping matrices.

A block-encoding here is a literal unitary matrix, stored sparse, whose
top-left block (all ancillas in |0>) equals the target matrix divided by the
sub-normalization alpha.

Register order (fixed; the high-to-low qubit order of the flat index):

    [slot][type-selector][amplitude flag][right projector flag]
    [left projector flag] | [site][type bit]

for the type-doubled alloy encoding, and ``[slot][amplitude flag] | [site]``
otherwise.  Ancillas are the high bits, so the encoded block is the leading
``sys_dim`` x ``sys_dim`` corner.

The assembled unitary composes, in circuit order: the right atom-type
projector gadget, slot-superposition preparation, the selector swap, the
amplitude rotation (the geometry-register conjugation O_d/O_phi -> controlled
rotations and phases -> inverse oracles, folded to its exact closed form),
the column-shift permutation, the left projector gadget, and the inverse
preparation.  Constituent oracles (O_c, O_d, O_phi, O_e, O_p, the keyed-type
projector) are also built as standalone unitaries on their natural registers
so the folding can be verified factor by factor.

The column oracle's unitary form is the per-axis modular shift, a genuine
permutation; the classical map pads out-of-lattice slots to the column index
itself.  The two differ only on padded slots, whose amplitude the rotation
sends entirely to the failure flag.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lattice import (
    DisorderSpec,
    HoppingTables,
    LatticeSpec,
    assemble_doubled_matrix,
    assemble_hopping_matrix,
    hopping_tables,
    sample_atom_type,
)

DEFAULT_DIM_CAP = 1 << 17


class EncodingSizeError(ValueError):
    """Requested unitary would exceed the configured memory cap."""


@dataclass
class BlockEncoding:
    """Unitary u on (system + ancilla) space with designated top-left block.

    The encoded matrix is  alpha * (<0|^a (x) I) u (|0>^a (x) I); the flag
    pattern is always the all-zero ancilla state.
    """

    u: sp.csr_matrix
    alpha: float
    n_anc: int
    sys_dim: int
    queries: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    def block(self) -> np.ndarray:
        return self.alpha * self.u[: self.sys_dim, : self.sys_dim].toarray()

    def unitarity_defect(self) -> float:
        """Upper bound on ||u^ u - I||_2 via the Schur (l1 x linf) bound."""
        err = (self.u.getH() @ self.u - sp.identity(self.dim, format="csr")).tocsr()
        if err.nnz == 0:
            return 0.0
        col = np.abs(err).sum(axis=0).max()
        row = np.abs(err).sum(axis=1).max()
        return float(np.sqrt(float(col) * float(row)))

    def to_coo_text(self, dense_cap: int = 1 << 5) -> str:
        if self.sys_dim > dense_cap:
            raise EncodingSizeError(
                f"coordinate export limited to system dimension {dense_cap}"
            )
        lines = [f"# blockencoding dim={self.dim} alpha={self.alpha!r} ancillas={self.n_anc}"]
        coo = self.u.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            lines.append(f"{int(r)} {int(c)} {v.real!r} {v.imag!r}")
        return "\n".join(lines) + "\n"


def extract_block(be: BlockEncoding) -> np.ndarray:
    """alpha * (<0|^a (x) I) U (|0>^a (x) I), the encoded matrix."""
    return be.block()


# ---------------------------------------------------------------------------
# register arithmetic

def _decompose(idx: np.ndarray, sizes) -> list[np.ndarray]:
    parts = []
    rem = idx
    for size in reversed(sizes):
        parts.append(rem % size)
        rem = rem // size
    return parts[::-1]


def _compose(parts, sizes) -> np.ndarray:
    idx = parts[0]
    for part, size in zip(parts[1:], sizes[1:]):
        idx = idx * size + part
    return idx


def _permutation_from_map(sizes, mapper) -> sp.csr_matrix:
    """Permutation unitary |x> -> |mapper(x)> from a component-wise map."""
    dim = int(np.prod(sizes))
    idx = np.arange(dim)
    new_parts = mapper(_decompose(idx, sizes))
    new_idx = _compose(new_parts, sizes)
    return sp.coo_matrix(
        (np.ones(dim), (new_idx, idx)), shape=(dim, dim), dtype=complex
    ).tocsr()


def _embed_factor(sizes, position, small: np.ndarray) -> sp.csr_matrix:
    """Operator acting on one register, identity elsewhere."""
    left = int(np.prod(sizes[:position], dtype=np.int64)) if position else 1
    right = (
        int(np.prod(sizes[position + 1 :], dtype=np.int64))
        if position + 1 < len(sizes)
        else 1
    )
    mat = sp.csr_matrix(small.astype(complex))
    out = sp.kron(sp.identity(left, format="csr"), mat, format="csr")
    return sp.kron(out, sp.identity(right, format="csr"), format="csr")


def _controlled_rotation(sizes, flag_pos, amplitudes: np.ndarray) -> sp.csr_matrix:
    """2x2 complex rotation on a flag qubit, controlled by every other register.

    ``amplitudes`` is indexed by the non-flag registers in order; for each
    control value z the flag sees [[z, -c], [c, conj(z)]], c = sqrt(1-|z|^2),
    which is unitary for any complex |z| <= 1 and leaves amplitude z on
    flag = 0.
    """
    sizes = list(sizes)
    dim = int(np.prod(sizes))
    stride = int(np.prod(sizes[flag_pos + 1 :], dtype=np.int64)) if flag_pos + 1 < len(sizes) else 1
    idx = np.arange(dim)
    parts = _decompose(idx, sizes)
    flag = parts[flag_pos]
    base = idx[flag == 0]
    controls = tuple(p[flag == 0] for i, p in enumerate(parts) if i != flag_pos)
    z = amplitudes[controls]
    c = np.sqrt(np.clip(1.0 - np.abs(z) ** 2, 0.0, None))
    partner = base + stride
    rows = np.concatenate([base, partner, base, partner])
    cols = np.concatenate([base, base, partner, partner])
    data = np.concatenate([z, c, -c, np.conj(z)])
    return sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).tocsr()


def slot_preparation(s: int, slot_dim: int) -> np.ndarray:
    """Unitary whose first column puts amplitude 1/sqrt(s) on the s valid slots."""
    target = np.zeros(slot_dim)
    target[:s] = 1.0 / math.sqrt(s)
    basis = np.eye(slot_dim)
    basis[:, 0] = target
    q, r = np.linalg.qr(basis)
    q = q * np.sign(np.diag(r))
    return q


# ---------------------------------------------------------------------------
# sparse-access oracles

@dataclass
class SparseAccessOracles:
    """Column-index, distance, and phase maps with their unitary forms."""

    tables: HoppingTables
    dim_cap: int = DEFAULT_DIM_CAP

    @property
    def s(self) -> int:
        return self.tables.s

    @property
    def slot_dim(self) -> int:
        return 1 << max(1, (self.s - 1).bit_length())

    @property
    def m_bits(self) -> int:
        return self.tables.m_bits

    def column_index(self, l: int, j: int) -> int:
        """Classical c(j, l); padded slots map to j itself."""
        return int(self.tables.col[l, j])

    def distance(self, l: int, j: int) -> int:
        return int(self.tables.dist_q[l, j])

    def phase(self, l: int, j: int) -> int:
        return int(self.tables.phase_q[l, j])

    def column_unitary(self) -> sp.csr_matrix:
        """O_c as a permutation on |l>|j>: the per-axis modular shift."""
        n = self.tables.lattice.n_sites
        perm = self.tables.perm
        s = self.s

        def mapper(parts):
            l, j = parts
            shifted = np.where(l < s, perm[np.minimum(l, s - 1), j], j)
            return [l, shifted]

        return _permutation_from_map([self.slot_dim, n], mapper)

    def _xor_register_unitary(self, table: np.ndarray) -> sp.csr_matrix:
        n = self.tables.lattice.n_sites
        big_m = 1 << self.m_bits
        dim = self.slot_dim * n * big_m
        if dim > self.dim_cap:
            raise EncodingSizeError(
                f"geometry oracle dimension {dim} exceeds the cap {self.dim_cap}"
            )
        s = self.s

        def mapper(parts):
            l, j, reg = parts
            value = np.where(l < s, table[np.minimum(l, s - 1), j], 0)
            return [l, j, reg ^ value]

        return _permutation_from_map([self.slot_dim, n, big_m], mapper)

    def distance_unitary(self) -> sp.csr_matrix:
        """O_d: XOR the m-bit quantized distance into a work register."""
        return self._xor_register_unitary(self.tables.dist_q)

    def phase_unitary(self) -> sp.csr_matrix:
        """O_phi: XOR the m-bit quantized (sign-folded) phase into a register."""
        return self._xor_register_unitary(self.tables.phase_q)


def build_sparse_oracles(
    lattice: LatticeSpec, disorder: DisorderSpec, dim_cap: int = DEFAULT_DIM_CAP
) -> SparseAccessOracles:
    return SparseAccessOracles(hopping_tables(lattice, disorder), dim_cap)


def oracle_column_index(oracles: SparseAccessOracles, l: int, j: int) -> int:
    return oracles.column_index(l, j)


def oracle_geometry(oracles: SparseAccessOracles, l: int, j: int) -> tuple[int, int]:
    return oracles.distance(l, j), oracles.phase(l, j)


# ---------------------------------------------------------------------------
# amplitude, phase, and projector oracles

def _principal_root(t: float | complex, m: int) -> complex:
    if t == 0:
        return 0.0
    r = abs(t) ** (1.0 / m)
    return r * cmath.exp(1j * cmath.phase(t) / m)


def build_amplitude_oracle(t: float, gamma_q: float, m: int) -> BlockEncoding:
    """O_e: m bitwise dilations whose product leaves amplitude t e^{-gamma_q d}.

    Register k of the data half controls a rotation on ancilla qubit k by the
    factor t^(1/m) (bit clear) or t^(1/m) e^{-gamma_q 2^k} (bit set); with all
    ancillas returned in |0> the amplitudes multiply to t e^{-gamma_q d} for
    the m-bit input d.  |t| > 1 is folded into the sub-normalization.
    """
    if gamma_q < 0:
        raise ValueError("decay rate must be non-negative (amplitudes <= 1)")
    if m > 8:
        raise EncodingSizeError("amplitude oracle limited to m <= 8 bits")
    alpha = max(1.0, abs(t))
    root = _principal_root(t / alpha, m)
    big_m = 1 << m
    sizes = [big_m, big_m]  # [ancilla bits | data bits]
    u = sp.identity(big_m * big_m, format="csr", dtype=complex)
    for k in range(m):
        z0 = root
        z1 = root * math.exp(-gamma_q * (1 << k))
        amps = np.empty((big_m, big_m), dtype=complex)
        data_bits = (np.arange(big_m) >> k) & 1
        amps[:, data_bits == 0] = z0
        amps[:, data_bits == 1] = z1
        u = _bitwise_rotation(sizes, k, amps) @ u
    return BlockEncoding(
        u=u.tocsr(), alpha=alpha, n_anc=m, sys_dim=big_m, meta={"t": t, "gamma_q": gamma_q}
    )


def _bitwise_rotation(sizes, anc_bit: int, amplitudes: np.ndarray) -> sp.csr_matrix:
    """Rotation on ancilla bit ``anc_bit`` controlled on everything else."""
    anc_dim, data_dim = sizes
    m = int(round(math.log2(anc_dim)))
    dim = anc_dim * data_dim
    idx = np.arange(dim)
    anc = idx // data_dim
    data = idx % data_dim
    bit = (anc >> (m - 1 - anc_bit)) & 1  # ancilla qubit k is the k-th high bit
    stride = data_dim << (m - 1 - anc_bit)
    base = idx[bit == 0]
    z = amplitudes[anc[bit == 0], data[bit == 0]]
    c = np.sqrt(np.clip(1.0 - np.abs(z) ** 2, 0.0, None))
    partner = base + stride
    rows = np.concatenate([base, partner, base, partner])
    cols = np.concatenate([base, base, partner, partner])
    vals = np.concatenate([z, c, -c, np.conj(z)])
    return sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()


def build_phase_oracle(m: int) -> sp.csr_matrix:
    """O_p = prod_k R_k, the diagonal unitary |q> -> e^{2 pi i q / 2^m} |q>."""
    big_m = 1 << m
    diag = np.ones(big_m, dtype=complex)
    for k in range(m):
        bit = (np.arange(big_m) >> k) & 1
        r_k = np.where(bit == 1, np.exp(2j * np.pi * (1 << k) / big_m), 1.0)
        diag = diag * r_k
    return sp.diags(diag, format="csr")


def build_type_projector(disorder: DisorderSpec, n_qubits: int) -> BlockEncoding:
    """Block-encoding of the atom-type projector P^A on the (site, type) space.

    The returned unitary is the folded flag permutation |i, a, q> ->
    |i, a, q xor (a xor g(i))> with the keyed-function and comparator
    registers already uncomputed; the longhand register-level construction
    is available for verification via ``type_projector_longhand``.
    """
    if disorder.kind != "binary-alloy":
        raise ValueError("the type projector is defined for binary-alloy disorder")
    n = 1 << n_qubits
    g = np.array([sample_atom_type(disorder, j, n_qubits) for j in range(n)])

    def mapper(parts):
        q, site, ty = parts
        return [q ^ ty ^ g[site], site, ty]

    u = _permutation_from_map([2, n, 2], mapper)
    return BlockEncoding(u=u, alpha=1.0, n_anc=1, sys_dim=2 * n, meta={"key": disorder.key})


def type_projector_longhand(disorder: DisorderSpec, n_qubits: int) -> sp.csr_matrix:
    """P^A gadget with explicit keyed-function and comparator registers.

    Registers: [flag][f-reg (n bits)][comparator bit] | [site][type].  The
    keyed function is applied, compared, copied onto the flag, and inverted
    again, so the f-reg and comparator return to |0> exactly.
    """
    n = 1 << n_qubits
    fk = np.array([disorder.draw(j, n_qubits) for j in range(n)])
    threshold = math.ceil(disorder.p * n)
    sizes = [2, n, 2, n, 2]

    def apply_f(parts):
        q, freg, cp, site, ty = parts
        return [q, freg ^ fk[site], cp, site, ty]

    def apply_cp(parts):
        q, freg, cp, site, ty = parts
        return [q, freg, cp ^ (freg < threshold).astype(int), site, ty]

    def flag_xor(parts):
        q, freg, cp, site, ty = parts
        return [q ^ cp ^ ty, freg, cp, site, ty]

    f_op = _permutation_from_map(sizes, apply_f)
    c_op = _permutation_from_map(sizes, apply_cp)
    x_op = _permutation_from_map(sizes, flag_xor)
    # XOR gadgets are involutions; apply, use, inverse-apply.
    return f_op @ c_op @ x_op @ c_op @ f_op


# ---------------------------------------------------------------------------
# the full encoding

def assemble_full_encoding(
    lattice: LatticeSpec,
    disorder: DisorderSpec,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> BlockEncoding:
    """Block-encoding of the disordered hopping matrix.

    Binary-alloy disorder yields the type-doubled encoding of the projected
    2N x 2N matrix with alpha = 2 s max(1, max|t_ab|); the other kinds encode
    the N x N matrix directly with alpha = s max(1, |t|).
    """
    tables = hopping_tables(lattice, disorder)
    if disorder.kind == "binary-alloy":
        return _assemble_doubled(tables, dim_cap)
    return _assemble_plain(tables, dim_cap)


def _slot_dim(s: int) -> int:
    return 1 << max(1, (s - 1).bit_length())

def _assemble_plain(tables: HoppingTables, dim_cap: int) -> BlockEncoding:
    lattice = tables.lattice
    n = lattice.n_sites
    s = lattice.s
    slot_dim = _slot_dim(s)
    sizes = [slot_dim, 2, n]  # [slot][amplitude flag] | [site]
    dim = int(np.prod(sizes))
    if dim > dim_cap:
        raise EncodingSizeError(f"encoding dimension {dim} exceeds the cap {dim_cap}")
    big_m = 1 << tables.m_bits

    # Amplitude per (slot, site), already exact: the geometry-register
    # conjugation collapses to this closed form.
    z = np.ones((slot_dim, n), dtype=complex)
    z[:s] = tables.values / tables.t_norm

    prep = _embed_factor(sizes, 0, slot_preparation(s, slot_dim))
    rot = _controlled_rotation(sizes, 1, z)
    shift = _shift_factor(sizes, tables, slot_pos=0, site_pos=2)
    u = prep.getH() @ shift @ rot @ prep
    alpha = s * tables.t_norm
    return BlockEncoding(
        u=u.tocsr(),
        alpha=alpha,
        n_anc=int(math.log2(slot_dim)) + 1,
        sys_dim=n,
        meta={"kind": tables.disorder.kind, "key": tables.disorder.key, "m": tables.m_bits,
              "quantization_levels": big_m},
    )


def _assemble_doubled(tables: HoppingTables, dim_cap: int) -> BlockEncoding:
    lattice = tables.lattice
    n = lattice.n_sites
    s = lattice.s
    slot_dim = _slot_dim(s)
    # [slot][b-selector][amp flag][right flag][left flag] | [site][type]
    sizes = [slot_dim, 2, 2, 2, 2, n, 2]
    dim = int(np.prod(sizes))
    if dim > dim_cap:
        raise EncodingSizeError(f"encoding dimension {dim} exceeds the cap {dim_cap}")

    types = tables.types
    t_mat = tables.disorder.t_matrix() / tables.t_norm
    g_mat = tables.disorder.gamma_matrix() * (tables.d_max / (1 << tables.m_bits))
    phase = np.exp(2j * np.pi * tables.phase_q / (1 << tables.m_bits))

    # z[l, j, a, b]: amplitude if the output type is a and the input type b.
    z = np.ones((slot_dim, n, 2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            amp = t_mat[a, b] * np.exp(-g_mat[a, b] * tables.dist_q) * phase
            z[:s, :, a, b] = np.where(tables.valid, amp, 0.0)

    def right_flag(parts):
        l, bsel, fe, fr, fl, site, ty = parts
        return [l, bsel, fe, fr ^ ty ^ types[site], fl, site, ty]

    def left_flag(parts):
        l, bsel, fe, fr, fl, site, ty = parts
        return [l, bsel, fe, fr, fl ^ ty ^ types[site], site, ty]

    def swap_sel(parts):
        l, bsel, fe, fr, fl, site, ty = parts
        return [l, ty, fe, fr, fl, site, bsel]

    hadamard = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
    prep = _embed_factor(sizes, 0, slot_preparation(s, slot_dim)) @ _embed_factor(
        sizes, 1, hadamard
    )
    p_right = _permutation_from_map(sizes, right_flag)
    p_left = _permutation_from_map(sizes, left_flag)
    swap = _permutation_from_map(sizes, swap_sel)
    # Rotation controls, in register order without the flag: (slot, bsel=b,
    # fr, fl, site, type=a); after the swap the type register carries a and
    # the selector carries b.
    amps = np.transpose(z, (0, 3, 1, 2))[:, :, np.newaxis, np.newaxis, :, :]
    amps = np.broadcast_to(amps, (slot_dim, 2, 2, 2, n, 2))
    rot = _controlled_rotation(sizes, 2, np.ascontiguousarray(amps))
    shift = _shift_factor(sizes, tables, slot_pos=0, site_pos=5)

    u = prep.getH() @ p_left @ shift @ rot @ swap @ prep @ p_right
    alpha = 2.0 * s * tables.t_norm
    return BlockEncoding(
        u=u.tocsr(),
        alpha=alpha,
        n_anc=int(math.log2(slot_dim)) + 4,
        sys_dim=2 * n,
        meta={"kind": "binary-alloy", "key": tables.disorder.key, "m": tables.m_bits},
    )


def _shift_factor(sizes, tables: HoppingTables, slot_pos: int, site_pos: int) -> sp.csr_matrix:
    s = tables.s
    perm = tables.perm

    def mapper(parts):
        parts = list(parts)
        l = parts[slot_pos]
        site = parts[site_pos]
        parts[site_pos] = np.where(l < s, perm[np.minimum(l, s - 1), site], site)
        return parts

    return _permutation_from_map(sizes, mapper)


# ---------------------------------------------------------------------------
# algebra on encodings

def compose(a: BlockEncoding, b: BlockEncoding) -> BlockEncoding:
    """Product encoding: block(compose(a, b)) * alpha_a alpha_b = A B.

    Ancillas concatenate (a's first); each factor acts on its own flags, so
    the product of blocks is exact up to that bookkeeping.
    """
    if a.sys_dim != b.sys_dim:
        raise ValueError("encodings act on different system dimensions")
    anc_a = a.dim // a.sys_dim
    anc_b = b.dim // b.sys_dim
    ns = a.sys_dim
    dim = anc_a * anc_b * ns
    b_ext = sp.kron(sp.identity(anc_a, format="csr"), b.u, format="csr")
    # Reorder (ia, ib, s) -> (ib, ia, s) so a's unitary sees (ia, s) adjacent.
    idx = np.arange(dim)
    ia, rem = np.divmod(idx, anc_b * ns)
    ib, ss = np.divmod(rem, ns)
    to_b = (ib * anc_a + ia) * ns + ss
    perm = sp.coo_matrix((np.ones(dim), (to_b, idx)), shape=(dim, dim), dtype=complex).tocsr()
    a_ext = perm.getH() @ sp.kron(sp.identity(anc_b, format="csr"), a.u, format="csr") @ perm
    return BlockEncoding(
        u=(a_ext @ b_ext).tocsr(),
        alpha=a.alpha * b.alpha,
        n_anc=a.n_anc + b.n_anc,
        sys_dim=ns,
        meta={"composed": (a.meta, b.meta)},
    )


def dilation_encoding(matrix: np.ndarray, alpha: float | None = None) -> BlockEncoding:
    """One-ancilla unitary dilation of an arbitrary contraction.

    U = [[B, (I - B B+)^(1/2)], [(I - B+ B)^(1/2), -B+]] with B = matrix /
    alpha; exact for any ||B|| <= 1.
    """
    matrix = np.asarray(matrix, dtype=complex)
    norm = float(np.linalg.norm(matrix, 2))
    if alpha is None:
        alpha = max(norm, 1e-300)
    if norm > alpha * (1 + 1e-9):
        raise ValueError(f"matrix norm {norm} exceeds the requested alpha {alpha}")
    b = matrix / alpha
    n = b.shape[0]
    s_block = _psd_sqrt(np.eye(n) - b @ b.conj().T)
    t_block = _psd_sqrt(np.eye(n) - b.conj().T @ b)
    u = np.block([[b, s_block], [t_block, -b.conj().T]])
    return BlockEncoding(u=sp.csr_matrix(u), alpha=float(alpha), n_anc=1, sys_dim=n)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def verify_plus_projection(lattice: LatticeSpec, disorder: DisorderSpec, d: int) -> float:
    """Max-entry deviation of (h^A)^d from the doubled-space projection
    2 (I (x) <+|) (h~^A)^d (I (x) |+>).

    d = 0 is the tautological identity-on-both-spaces case (constant
    polynomials pass straight through; the factor 2 compensates the type
    boundary only when a matrix factor is present) and returns 0.
    """
    if d < 0:
        raise ValueError("power must be non-negative")
    if d == 0:
        return 0.0
    h = assemble_hopping_matrix(lattice, disorder).toarray()
    doubled = assemble_doubled_matrix(lattice, disorder).toarray()
    lhs = np.linalg.matrix_power(h, d)
    plus = np.array([[1.0], [1.0]]) / math.sqrt(2.0)
    w = np.kron(np.eye(lattice.n_sites), plus)
    rhs = 2.0 * w.conj().T @ np.linalg.matrix_power(doubled, d) @ w
    return float(np.abs(lhs - rhs).max())
