"""Lattice geometry, disorder ensembles, and hopping-matrix assembly.

Conventions fixed here and relied on everywhere else:

* Sites are indexed row-major over the per-axis extents; positions are
  coordinates times the lattice constant.  Energies are measured in units of
  the hopping scale, lengths in lattice constants, hbar = e = 1.
* The candidate-neighbour list ("slots") is fixed by the clean geometry: all
  integer offsets delta with |delta * a| <= cutoff, sorted by squared length
  then lexicographically, slot 0 being the self offset.  Slots are counted
  per offset even when two offsets wrap onto the same site of a small torus;
  a matrix element is the sum over slots that land on it.
* Structural displacements move the positions entering amplitudes, never the
  slot list.  Widths below half a lattice constant keep sites ordered.
* Distances entering amplitudes are quantized to m bits, d_q = floor(M d /
  d_max) clamped to M - 1, with gamma_q = gamma * d_max / M, so the classical
  assembly reproduces exactly what the geometry oracles emit.  The default
  d_max = 2 * cutoff makes the unit nearest-neighbour distance quantize
  without rounding loss.
* Peierls phases are drawn once per unordered (pair, offset) class, from the
  side with the smaller site index, and negated for the reverse direction.
  A raw per-(row, slot) draw would break Hermiticity.
* Diagonal entries carry the same amplitude law at distance zero, i.e. the
  on-site energy of a type-a atom is t_aa.  Expectations quoted for
  zero-diagonal chains hold after shifting by that uniform on-site level.
* Open-boundary rows with missing neighbours keep their slots, padded to the
  site itself with amplitude zero, so the slot map stays total.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .randomness import HASH_NAME, keyed_random

DISORDER_KINDS = ("none", "binary-alloy", "structural", "magnetic")
BOUNDARIES = ("open", "periodic")


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of a D-dimensional lattice with 2^n sites.

    ``dims`` are per-axis extents (each a power of two, >= 2); ``cutoff`` is
    the hop radius r_c in length units; ``d_max`` overrides the distance
    quantization range (default 2 * cutoff).
    """

    dims: tuple[int, ...]
    boundary: str = "periodic"
    constant: float = 1.0
    cutoff: float = 1.0
    d_max: float | None = None
    sparsity_cap: int = 128

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(L) for L in self.dims))
        if not 1 <= len(self.dims) <= 3:
            raise ValueError("lattice dimension must be 1, 2, or 3")
        for L in self.dims:
            if L < 2 or L & (L - 1):
                raise ValueError(f"extent {L} is not a power of two >= 2")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if self.constant <= 0:
            raise ValueError("lattice constant must be positive")
        if self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")
        offsets = _offsets_within(self.dims, self.constant, self.cutoff)
        if len(offsets) > self.sparsity_cap:
            raise ValueError(
                f"row sparsity {len(offsets)} exceeds the cap {self.sparsity_cap}; "
                "reduce the cutoff or raise sparsity_cap"
            )

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_qubits(self) -> int:
        return int(self.n_sites - 1).bit_length()

    @property
    def offsets(self) -> tuple[tuple[int, ...], ...]:
        return _offsets_within(self.dims, self.constant, self.cutoff)

    @property
    def s(self) -> int:
        """Slot count: offsets within the cutoff, self included."""
        return len(self.offsets)

    @property
    def quantization_range(self) -> float:
        if self.d_max is not None:
            return float(self.d_max)
        return 2.0 * self.cutoff if self.cutoff > 0 else 1.0


@dataclass(frozen=True)
class DisorderSpec:
    """Disorder ensemble parameters plus the randomness key.

    ``kind`` selects the channel; exactly one channel is active per spec.
    For ``binary-alloy`` the pair amplitudes t_ab and decay rates gamma_ab
    (a, b atom types) are symmetric by construction, t_01 = t_10.  Kinds
    other than the alloy use (t00, gamma00) as the single amplitude law.
    ``precision_bits`` (m) sets both the phase and the distance quantization;
    ``displacement_bits`` (m') and ``displacement_width`` (w) control the
    structural channel.
    """

    kind: str = "none"
    key: int = 0
    p: float = 0.5
    t00: float = -1.0
    t11: float = -1.0
    t01: float = -1.0
    gamma00: float = 0.5
    gamma11: float = 0.5
    gamma01: float = 0.5
    precision_bits: int = 8
    displacement_bits: int = 8
    displacement_width: float = 0.0
    mode: str = "keyed-hash"
    independence: int = 0

    def __post_init__(self):
        if self.kind not in DISORDER_KINDS:
            raise ValueError(f"kind must be one of {DISORDER_KINDS}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("alloy probability p must lie in [0, 1]")
        if self.precision_bits < 1 or self.displacement_bits < 1:
            raise ValueError("bit widths m, m' must be >= 1")
        if min(self.gamma00, self.gamma11, self.gamma01) < 0:
            raise ValueError("decay rates must be non-negative")
        if self.mode == "k-wise" and self.independence < 1:
            raise ValueError("k-wise mode needs independence t >= 1")

    def t_matrix(self) -> np.ndarray:
        return np.array([[self.t00, self.t01], [self.t01, self.t11]])

    def gamma_matrix(self) -> np.ndarray:
        return np.array([[self.gamma00, self.gamma01], [self.gamma01, self.gamma11]])

    def t_norm(self) -> float:
        """max(1, max_ab |t_ab|), the amplitude share of the sub-normalization."""
        if self.kind == "binary-alloy":
            return max(1.0, float(np.abs(self.t_matrix()).max()))
        return max(1.0, abs(self.t00))

    def draw(self, x: int, out_bits: int) -> int:
        return keyed_random(self.key, x, out_bits, self.mode, self.independence)


@dataclass
class HoppingMatrix:
    """Sparse Hermitian hopping matrix with its sub-normalization certificate.

    ``alpha`` = 2 s max(1, max|t_ab|) bounds the spectral norm with room for
    the type-doubled encoding; ``positions`` are the (possibly displaced)
    site positions used for the amplitudes.
    """

    dim: int
    matrix: sp.csr_matrix
    s: int
    alpha: float
    positions: np.ndarray
    lattice: LatticeSpec | None = None
    disorder: DisorderSpec | None = None
    meta: dict = field(default_factory=dict)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def entries(self):
        """Iterate (row, col, value) triples in deterministic CSR order."""
        coo = self.matrix.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            yield int(r), int(c), complex(v)

    def max_row_nnz(self) -> int:
        return int(np.diff(self.matrix.indptr).max())

    def to_coo_text(self) -> str:
        lines = [f"# hopping dim={self.dim} s={self.s} alpha={self.alpha!r} hash={HASH_NAME}"]
        for r, c, v in self.entries():
            lines.append(f"{r} {c} {v.real!r} {v.imag!r}")
        return "\n".join(lines) + "\n"


@lru_cache(maxsize=None)
def _offsets_within(dims, constant, cutoff):
    ndim = len(dims)
    reach = int(math.floor(cutoff / constant + 1e-12))
    ranges = [range(-min(reach, L - 1), min(reach, L - 1) + 1) for L in dims]
    found = []
    for delta in itertools.product(*ranges):
        d2 = sum(x * x for x in delta) * constant * constant
        if d2 <= cutoff * cutoff * (1 + 1e-12):
            found.append((d2, delta))
    found.sort(key=lambda item: (item[0], item[1]))
    return tuple(delta for _, delta in found)


def site_coords(spec: LatticeSpec) -> np.ndarray:
    """(N, D) integer coordinates in row-major index order."""
    idx = np.arange(spec.n_sites)
    return np.stack(np.unravel_index(idx, spec.dims), axis=1)


def enumerate_sites(spec: LatticeSpec):
    """List of (index, integer coordinates, position) in index order."""
    coords = site_coords(spec)
    pos = coords * spec.constant
    return [
        (i, tuple(int(c) for c in coords[i]), tuple(float(x) for x in pos[i]))
        for i in range(spec.n_sites)
    ]


def sample_atom_type(disorder: DisorderSpec, site: int, n_bits: int) -> int:
    """Alloy atom type: comparator on the keyed draw, 1 iff draw < ceil(p N)."""
    if disorder.kind != "binary-alloy":
        raise ValueError("atom types are defined for binary-alloy disorder")
    n_total = 1 << n_bits
    threshold = math.ceil(disorder.p * n_total)
    return int(disorder.draw(site, n_bits) < threshold)


def sample_displacement(disorder: DisorderSpec, site: int, ndim: int, n_sites: int) -> np.ndarray:
    """Per-axis displacement w (2u - 1), u the m'-bit keyed fraction in [0, 1).

    The axis tag keeps draws on different axes independent: input = site +
    axis * N.  Kinds are exclusive, so the tag space never collides with the
    alloy or Peierls inputs.
    """
    if disorder.kind != "structural":
        raise ValueError("displacements are defined for structural disorder")
    mp = disorder.displacement_bits
    out = np.empty(ndim)
    for axis in range(ndim):
        u = disorder.draw(site + axis * n_sites, mp) / float(1 << mp)
        out[axis] = disorder.displacement_width * (2.0 * u - 1.0)
    return out


def _slot_of_offset(spec: LatticeSpec, delta: tuple[int, ...]) -> int:
    return spec.offsets.index(delta)


def sample_peierls_phase(
    disorder: DisorderSpec, lattice: LatticeSpec, column: int, slot: int
) -> float:
    """Peierls phase in [0, 2 pi) for the (column, slot) hop, antisymmetrized.

    The raw m-bit draw belongs to the canonical representative of the
    unordered (pair, offset) class: the side whose column index is smaller.
    The reverse direction carries the negated quantized phase (M - raw) mod M,
    so phi_ij + phi_ji = 0 mod 2 pi exactly.
    """
    if disorder.kind != "magnetic":
        raise ValueError("Peierls phases are defined for magnetic disorder")
    m = disorder.precision_bits
    big_m = 1 << m
    q = quantized_peierls(disorder, lattice, column, slot)
    return 2.0 * math.pi * q / big_m


def quantized_peierls(disorder, lattice, column, slot) -> int:
    """m-bit quantized phase for the (column, slot) hop (0 for self/padded)."""
    s = lattice.s
    m = disorder.precision_bits
    big_m = 1 << m
    delta = lattice.offsets[slot]
    target, valid = _neighbour_of(lattice, column, delta)
    if not valid or target == column:
        return 0
    if column < target:
        return disorder.draw(s * column + slot, m)
    reverse_slot = _slot_of_offset(lattice, tuple(-x for x in delta))
    raw = disorder.draw(s * target + reverse_slot, m)
    return (big_m - raw) % big_m


def _neighbour_of(lattice: LatticeSpec, site: int, delta) -> tuple[int, bool]:
    coords = np.unravel_index(site, lattice.dims)
    shifted = [c + d for c, d in zip(coords, delta)]
    if lattice.boundary == "periodic":
        wrapped = [c % L for c, L in zip(shifted, lattice.dims)]
        return int(np.ravel_multi_index(wrapped, lattice.dims)), True
    if all(0 <= c < L for c, L in zip(shifted, lattice.dims)):
        return int(np.ravel_multi_index(shifted, lattice.dims)), True
    return site, False


def displaced_positions(lattice: LatticeSpec, disorder: DisorderSpec) -> np.ndarray:
    pos = site_coords(lattice) * lattice.constant
    if disorder.kind != "structural" or disorder.displacement_width == 0.0:
        return pos.astype(float)
    if disorder.displacement_width >= lattice.constant / 2:
        raise ValueError("displacement width must stay below half a lattice constant")
    n = lattice.n_sites
    disp = np.array(
        [sample_displacement(disorder, i, lattice.ndim, n) for i in range(n)]
    )
    return pos + disp


@dataclass
class HoppingTables:
    """Per-(slot, column) data shared by the classical assembly and the oracles.

    ``col`` is the padded classical column map c(j, l); ``perm`` the modular
    shift the unitary oracle applies (equal to ``col`` on valid slots);
    ``values`` the exact complex slot amplitudes, zero on padded slots.
    """

    lattice: LatticeSpec
    disorder: DisorderSpec
    positions: np.ndarray
    types: np.ndarray
    col: np.ndarray
    perm: np.ndarray
    valid: np.ndarray
    dist_q: np.ndarray
    phase_q: np.ndarray
    values: np.ndarray
    d_max: float
    t_norm: float

    @property
    def s(self) -> int:
        return self.lattice.s

    @property
    def m_bits(self) -> int:
        return self.disorder.precision_bits


def hopping_tables(lattice: LatticeSpec, disorder: DisorderSpec) -> HoppingTables:
    """Compute every slot-resolved quantity entering the hopping matrix."""
    n = lattice.n_sites
    s = lattice.s
    dims = np.array(lattice.dims)
    coords = site_coords(lattice)
    positions = displaced_positions(lattice, disorder)
    m = disorder.precision_bits
    big_m = 1 << m
    d_max = lattice.quantization_range

    if disorder.kind == "binary-alloy":
        types = np.array(
            [sample_atom_type(disorder, j, lattice.n_qubits) for j in range(n)]
        )
    else:
        types = np.zeros(n, dtype=int)

    col = np.empty((s, n), dtype=np.int64)
    perm = np.empty((s, n), dtype=np.int64)
    valid = np.empty((s, n), dtype=bool)
    dist_q = np.zeros((s, n), dtype=np.int64)
    phase_q = np.zeros((s, n), dtype=np.int64)

    box = lattice.constant * dims
    for l, delta in enumerate(lattice.offsets):
        shifted = coords + np.array(delta)
        wrapped = shifted % dims
        perm[l] = np.ravel_multi_index(tuple(wrapped.T), lattice.dims)
        if lattice.boundary == "periodic":
            inside = np.ones(n, dtype=bool)
        else:
            inside = np.all((shifted >= 0) & (shifted < dims), axis=1)
        valid[l] = inside
        col[l] = np.where(inside, perm[l], np.arange(n))
        if lattice.boundary == "open":
            perm[l] = np.where(inside, perm[l], _open_shift(shifted, dims))

        diff = positions[perm[l]] - positions
        if lattice.boundary == "periodic":
            diff = diff - box * np.round(diff / box)
        dist = np.linalg.norm(diff, axis=1)
        dq = np.floor(big_m * dist / d_max).astype(np.int64)
        dist_q[l] = np.where(inside, np.minimum(dq, big_m - 1), 0)

        if disorder.kind == "magnetic" and delta != (0,) * lattice.ndim:
            phase_q[l] = [
                quantized_peierls(disorder, lattice, j, l) if inside[j] else 0
                for j in range(n)
            ]

    t_mat = disorder.t_matrix()
    g_mat = disorder.gamma_matrix() * (d_max / big_m)
    t_ab = t_mat[types[perm], types[np.newaxis, :]]
    g_ab = g_mat[types[perm], types[np.newaxis, :]]
    values = t_ab * np.exp(-g_ab * dist_q) * np.exp(2j * np.pi * phase_q / big_m)
    values = np.where(valid, values, 0.0)

    return HoppingTables(
        lattice=lattice,
        disorder=disorder,
        positions=positions,
        types=types,
        col=col,
        perm=perm,
        valid=valid,
        dist_q=dist_q,
        phase_q=phase_q,
        values=values,
        d_max=d_max,
        t_norm=disorder.t_norm(),
    )


def _open_shift(shifted: np.ndarray, dims: np.ndarray) -> np.ndarray:
    # Unitary column oracle on open boundaries: wrap on the index register.
    # The wrapped target is never a physical neighbour; its amplitude is zero.
    wrapped = shifted % dims
    return np.ravel_multi_index(tuple(wrapped.T), tuple(dims))


def assemble_hopping_matrix(lattice: LatticeSpec, disorder: DisorderSpec) -> HoppingMatrix:
    """Disordered N x N hopping matrix, summed over slots."""
    tables = hopping_tables(lattice, disorder)
    return hopping_from_tables(tables)


def hopping_from_tables(tables: HoppingTables) -> HoppingMatrix:
    lattice = tables.lattice
    n = lattice.n_sites
    mask = tables.valid & (tables.values != 0.0)
    rows = tables.col[mask]
    cols = np.broadcast_to(np.arange(n), tables.col.shape)[mask]
    vals = tables.values[mask]
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex).tocsr()
    mat.sum_duplicates()
    alpha = 2.0 * lattice.s * tables.t_norm
    return HoppingMatrix(
        dim=n,
        matrix=mat,
        s=lattice.s,
        alpha=alpha,
        positions=tables.positions,
        lattice=lattice,
        disorder=tables.disorder,
        meta={"hash": HASH_NAME, "key": tables.disorder.key, "d_max": tables.d_max},
    )


def assemble_doubled_matrix(lattice: LatticeSpec, disorder: DisorderSpec) -> sp.csr_matrix:
    """Type-doubled 2N x 2N matrix: the hopping entries placed on the
    (site, type) pairs selected by the atom-type projector on both sides."""
    tables = hopping_tables(lattice, disorder)
    n = lattice.n_sites
    mask = tables.valid & (tables.values != 0.0)
    i = tables.col[mask]
    j = np.broadcast_to(np.arange(n), tables.col.shape)[mask]
    vals = tables.values[mask]
    rows = 2 * i + tables.types[i]
    cols = 2 * j + tables.types[j]
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n), dtype=complex)
    mat = mat.tocsr()
    mat.sum_duplicates()
    return mat


def assemble_velocity_operator(
    h: HoppingMatrix, positions: np.ndarray | None = None, axis: int = 0
) -> HoppingMatrix:
    """Velocity along an axis: [v]_ij = i h_ij (x_i - x_j), hbar = 1.

    Periodic boundaries use the minimum-image coordinate difference, matching
    the distance entering the amplitudes.  The result shares h's sparsity
    pattern minus the diagonal and inherits the exponential decay.
    """
    if positions is None:
        positions = h.positions
    coo = h.matrix.tocoo()
    xi = positions[coo.row, axis]
    xj = positions[coo.col, axis]
    diff = xi - xj
    if h.lattice is not None and h.lattice.boundary == "periodic":
        span = h.lattice.constant * h.lattice.dims[axis]
        diff = diff - span * np.round(diff / span)
    data = 1j * coo.data * diff
    keep = data != 0.0
    mat = sp.coo_matrix(
        (data[keep], (coo.row[keep], coo.col[keep])), shape=h.matrix.shape
    ).tocsr()
    vmax = float(np.abs(mat.data).max()) if mat.nnz else 0.0
    return HoppingMatrix(
        dim=h.dim,
        matrix=mat,
        s=h.s,
        alpha=2.0 * h.s * max(1.0, vmax),
        positions=positions,
        lattice=h.lattice,
        disorder=h.disorder,
        meta=dict(h.meta, velocity_axis=axis),
    )
