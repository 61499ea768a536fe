"""Ground-truth oracles and the classical light-cone competitor.

Exact diagonalization supplies f(h) = V f(lambda) V+ references for every
matrix-function path.  The kernel-polynomial competitor evaluates single
elements of p(h / alpha) by the Chebyshev vector recurrence seeded at one
site, touching only the light cone of sites within graph distance d; its
cost scales with the cone volume O(d^D), which is the classical side of the
comparison.  No damping kernel is applied: the comparison target is the same
truncated expansion the transform path uses.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from .chebyshev import ChebyshevExpansion
from .lattice import DisorderSpec, HoppingMatrix, LatticeSpec, assemble_hopping_matrix

DENSE_EIG_CAP = 1 << 12


@dataclass
class EigenDecomposition:
    """Full Hermitian eigendecomposition with its residual certificate."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float

    def matrix_function(self, f) -> np.ndarray:
        v = self.eigenvectors
        return (v * f(self.eigenvalues)) @ v.conj().T


def exact_diagonalize(h, cap: int = DENSE_EIG_CAP) -> EigenDecomposition:
    """Dense Hermitian eigendecomposition (the oracle for everything else)."""
    mat = h.toarray() if isinstance(h, HoppingMatrix) else (
        h.toarray() if sp.issparse(h) else np.asarray(h)
    )
    n = mat.shape[0]
    if n > cap:
        raise ValueError(f"dense diagonalization capped at dimension {cap}")
    lam, vecs = np.linalg.eigh(mat)
    residual = float(np.abs(mat @ vecs - vecs * lam).max())
    return EigenDecomposition(eigenvalues=lam, eigenvectors=vecs, residual=residual)


@dataclass
class LightconeResult:
    value: complex
    touched_sites: int
    cone: np.ndarray = field(repr=False, default=None)


def kpm_lightcone_element(
    h_sparse: sp.spmatrix,
    expansion: ChebyshevExpansion,
    alpha: float,
    i: int,
    j: int,
) -> LightconeResult:
    """[p(h / alpha)]_{ij} by the cone-restricted Chebyshev recurrence.

    Only sites within graph distance d of the seed column j can be touched by
    T_k(h / alpha) |j> for k <= d, so the recurrence runs in the restricted
    submatrix; the result is bit-identical to the full-lattice recurrence.
    """
    h_sparse = sp.csr_matrix(h_sparse)
    degree = expansion.degree
    dist = _hop_distances(h_sparse, j)
    cone = np.flatnonzero(dist <= degree)
    local = {site: idx for idx, site in enumerate(cone)}
    if i not in local:
        return LightconeResult(value=0.0 + 0.0j, touched_sites=len(cone), cone=cone)
    sub = h_sparse[cone][:, cone] / alpha
    seed = np.zeros(len(cone), dtype=complex)
    seed[local[j]] = 1.0
    value = _clenshaw_element(expansion.coeffs, sub, seed, local[i])
    return LightconeResult(value=value, touched_sites=len(cone), cone=cone)


def _hop_distances(h: sp.csr_matrix, source: int) -> np.ndarray:
    pattern = sp.csr_matrix(
        (np.ones(h.nnz), h.indices, h.indptr), shape=h.shape
    )
    dist = csgraph.shortest_path(
        pattern, method="D", unweighted=True, directed=False, indices=source
    )
    return dist


def _clenshaw_element(coeffs, a_scaled, seed, row) -> complex:
    b1 = np.zeros_like(seed)
    b2 = np.zeros_like(seed)
    for k in range(len(coeffs) - 1, 0, -1):
        b1, b2 = coeffs[k] * seed + 2.0 * (a_scaled @ b1) - b2, b1
    out = coeffs[0] * seed + a_scaled @ b1 - b2
    return complex(out[row])


def touched_sites_count(lattice: LatticeSpec, degree: int, seed: int | None = None) -> int:
    """Cone size for a clean lattice: sites within ``degree`` hops of the seed."""
    disorder = DisorderSpec(kind="none", t00=-1.0, gamma00=0.0)
    h = assemble_hopping_matrix(lattice, disorder)
    if seed is None:
        seed = int(np.ravel_multi_index(tuple(L // 2 for L in lattice.dims), lattice.dims))
    dist = _hop_distances(h.matrix, seed)
    return int(np.count_nonzero(dist <= degree))


@dataclass
class ScalingRow:
    degree: int
    touched: int
    seconds: float


@dataclass
class ScalingTable:
    dimension: int
    rows: list[ScalingRow]
    fitted_exponent: float

    def to_csv(self, machine_note: str = "") -> str:
        lines = [f"# light-cone scaling D={self.dimension} {machine_note}".rstrip()]
        lines.append("degree,touched_sites,seconds")
        for row in self.rows:
            lines.append(f"{row.degree},{row.touched},{row.seconds!r}")
        lines.append(f"# fitted_exponent,{self.fitted_exponent!r}")
        return "\n".join(lines) + "\n"


def benchmark_lightcone_scaling(
    dimension: int,
    degrees,
    repetitions: int = 5,
    lattice: LatticeSpec | None = None,
) -> ScalingTable:
    """Touched-site counts and recurrence wall times over a degree sweep.

    The lattice must be large enough that no cone wraps; wrapping degrees are
    dropped with a warning.  Timings are medians over ``repetitions`` runs
    with one warm-up discarded.
    """
    degrees = sorted(int(d) for d in degrees)
    if lattice is None:
        need = 2 * max(degrees) + 3
        extent = 1 << max(2, (need - 1).bit_length())
        lattice = LatticeSpec(dims=(extent,) * dimension, boundary="open", cutoff=1.0)
    usable = [d for d in degrees if 2 * d + 1 <= min(lattice.dims)]
    if len(usable) < len(degrees):
        warnings.warn("light cone would wrap the lattice; truncating the degree range")
    disorder = DisorderSpec(kind="none", t00=-1.0, gamma00=0.0)
    h = assemble_hopping_matrix(lattice, disorder)
    center = int(np.ravel_multi_index(tuple(L // 2 for L in lattice.dims), lattice.dims))

    rows = []
    for d in usable:
        coeffs = np.zeros(d + 1)
        coeffs[-1] = 1.0
        expansion = ChebyshevExpansion(coeffs=coeffs.astype(complex), target="monomial")
        times = []
        for rep in range(repetitions + 1):
            t0 = time.perf_counter()
            result = kpm_lightcone_element(h.matrix, expansion, h.alpha, center, center)
            times.append(time.perf_counter() - t0)
        rows.append(ScalingRow(degree=d, touched=result.touched_sites,
                               seconds=float(np.median(times[1:]))))

    logs = np.log([r.degree for r in rows])
    logt = np.log([r.touched for r in rows])
    slope = float(np.polyfit(logs, logt, 1)[0]) if len(rows) > 1 else float("nan")
    return ScalingTable(dimension=dimension, rows=rows, fitted_exponent=slope)
