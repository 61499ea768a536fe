"""Physical observables of the disordered one-body problem.

Everything here reduces to certified polynomial transforms of the hopping
matrix: the thermal one-body reduced density matrix (Fermi-Dirac of
h - mu I), the eta-broadened retarded Green's function, the spectral
function/LDOS in real and momentum space, and the static Kubo-Bastin
conductivity evaluated on a Chebyshev-Lobatto grid.

Units: e = hbar = 1, lengths in lattice constants, V_at the unit-cell
volume.  Green's functions are handled in their eta-scaled form eta G^R
(spectral norm <= 1); the spectral matrix uses the anti-Hermitian part,
S = (i/(2 pi)) (G - G+), which is the correct matrix continuation of
-Im G^R / pi when hopping phases make G non-symmetric.

The chemical potential is folded into the scalar targets (shifting the
Fermi function and the frequency argument), never into the operator, so a
single encoding of h serves every mu.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .chebyshev import (
    ChebyshevExpansion,
    chebyshev_matrix_stack,
    clenshaw_matrix_apply,
    fermi_dirac_expansion,
    greens_coefficients_analytic,
    greens_degree_bound,
    greens_expansion,
    greens_tail_bound,
)
from .lattice import HoppingMatrix

GREENS_WINDOW = 0.5


@dataclass
class ObservableRecord:
    """A computed observable with its error budget and provenance."""

    kind: str
    params: dict
    values: object
    error_budget: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        values = self.values
        if isinstance(values, np.ndarray):
            values = values.tolist()
        if isinstance(values, complex):
            values = [values.real, values.imag]
        return {
            "kind": self.kind,
            "params": self.params,
            "values": values,
            "error_budget": self.error_budget,
            "provenance": self.provenance,
        }


def as_dense_operator(h, alpha: float | None = None) -> tuple[np.ndarray, float]:
    """Accept a HoppingMatrix or a raw (matrix, alpha) pair."""
    if isinstance(h, HoppingMatrix):
        return h.toarray(), h.alpha
    mat = h.toarray() if sp.issparse(h) else np.asarray(h, dtype=complex)
    if alpha is None:
        alpha = float(np.linalg.norm(mat, 2)) * (1.0 + 1e-12)
        alpha = max(alpha, 1e-300)
    return mat, float(alpha)


def hermitian_imag_part(a: np.ndarray) -> np.ndarray:
    """(A - A+) / 2i, the matrix-valued imaginary part."""
    return (a - a.conj().T) / 2j


# ---------------------------------------------------------------------------
# static: the one-body reduced density matrix

def one_rdm(
    h,
    beta: float,
    mu: float = 0.0,
    eps: float = 1e-8,
    alpha: float | None = None,
    expansion: ChebyshevExpansion | None = None,
) -> np.ndarray:
    """Thermal 1-RDM D = (e^{beta (h - mu I)} + I)^{-1} via Chebyshev transform."""
    mat, alpha = as_dense_operator(h, alpha)
    if expansion is None:
        expansion = fermi_dirac_expansion(beta, mu, alpha, eps)
    d = clenshaw_matrix_apply(expansion, mat / alpha)
    return (d + d.conj().T) / 2


def local_one_body_expectation(d: np.ndarray, o_sparse) -> float:
    """Tr(O rho) = sum_ij O_ij D_ji for a local Hermitian one-body O."""
    o = o_sparse.toarray() if sp.issparse(o_sparse) else np.asarray(o_sparse)
    if np.abs(o - o.conj().T).max() > 1e-12 * max(1.0, np.abs(o).max()):
        raise ValueError("local observable must be Hermitian")
    value = complex(np.sum(o * d.T))
    if abs(value.imag) > 1e-12 * max(1.0, abs(value)):
        raise ArithmeticError(f"one-body expectation came out complex: {value}")
    return float(value.real)


# ---------------------------------------------------------------------------
# dynamic: Green's function and LDOS

def greens_alpha(alpha: float) -> float:
    """Inflated sub-normalization keeping the spectrum inside the half window."""
    return alpha / GREENS_WINDOW


def retarded_greens(
    h,
    omega: float,
    eta: float,
    mu: float = 0.0,
    eps: float = 1e-8,
    alpha: float | None = None,
) -> np.ndarray:
    """eta-scaled retarded Green's matrix eta ((omega + i eta) I - (h - mu I))^{-1}.

    The frequency is shifted by mu and the sub-normalization doubled so both
    the spectrum and the shifted frequency sit inside [-1/2, 1/2]; violations
    raise with an alpha-inflation instruction from the expansion layer.
    """
    mat, alpha = as_dense_operator(h, alpha)
    a_g = greens_alpha(alpha)
    expansion = greens_expansion(omega + mu, eta, a_g, eps, window=GREENS_WINDOW)
    return clenshaw_matrix_apply(expansion, mat / a_g)


def spectral_function(
    h,
    omega: float,
    eta: float,
    mu: float = 0.0,
    eps: float = 1e-8,
    alpha: float | None = None,
) -> np.ndarray:
    """pi eta S(omega): minus the matrix imaginary part of the scaled Green's
    function; Hermitian and positive semidefinite up to the approximation."""
    g_scaled = retarded_greens(h, omega, eta, mu, eps, alpha)
    return -hermitian_imag_part(g_scaled)


def ldos_site(
    h,
    omega: float,
    eta: float,
    site: int,
    mu: float = 0.0,
    eps: float = 1e-8,
    alpha: float | None = None,
) -> float:
    """Local density of states S(omega)_ii at one site."""
    pes = spectral_function(h, omega, eta, mu, eps, alpha)
    return float(pes[site, site].real / (math.pi * eta))


def fourier_matrix(dims) -> np.ndarray:
    """Per-axis discrete Fourier transform on the row-major site register."""
    out = np.ones((1, 1), dtype=complex)
    for length in dims:
        x = np.arange(length)
        axis = np.exp(-2j * np.pi * np.outer(x, x) / length) / math.sqrt(length)
        out = np.kron(out, axis)
    return out


def ldos_momentum(
    h,
    omega: float,
    eta: float,
    kvec,
    mu: float = 0.0,
    eps: float = 1e-8,
    alpha: float | None = None,
    dims=None,
) -> float:
    """Momentum-space LDOS [F S(omega) F+]_kk; the classical fast transform
    stands in for the quantum Fourier transform."""
    if dims is None:
        if not isinstance(h, HoppingMatrix) or h.lattice is None:
            raise ValueError("momentum LDOS needs the lattice extents (dims)")
        dims = h.lattice.dims
    kvec = (kvec,) if isinstance(kvec, int) else tuple(kvec)
    if len(kvec) != len(dims):
        raise ValueError("momentum index must have one component per axis")
    k = int(np.ravel_multi_index(kvec, dims))
    f = fourier_matrix(dims)
    pes = spectral_function(h, omega, eta, mu, eps, alpha)
    tilde = f @ pes @ f.conj().T
    return float(tilde[k, k].real / (math.pi * eta))


# ---------------------------------------------------------------------------
# Chebyshev-Lobatto quadrature

@dataclass
class QuadratureGrid:
    """Nodes cos(j pi / d) with Clenshaw-Curtis weights integrating [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values: np.ndarray):
        return self.weights @ np.asarray(values)


def lobatto_grid_weights(degree: int) -> QuadratureGrid:
    """Chebyshev-Lobatto nodes and analytic interpolatory weights.

    w_j = e_j sum_{k even} (2 - delta_{k0} - delta_{kd}) / d * (2 / (1 - k^2))
    cos(k j pi / d), with e_j halving the endpoints; exact for polynomials
    through degree d and summing to 2.
    """
    if degree < 2:
        raise ValueError("the Lobatto grid needs degree >= 2")
    j = np.arange(degree + 1)
    nodes = np.cos(j * np.pi / degree)
    k = np.arange(0, degree + 1, 2)
    moments = 2.0 / (1.0 - k.astype(float) ** 2)
    coeff_scale = (2.0 - (k == 0) - (k == degree)) / degree
    cos_table = np.cos(np.outer(k, j) * np.pi / degree)
    weights = (coeff_scale * moments) @ cos_table
    weights = weights * np.where((j == 0) | (j == degree), 0.5, 1.0)
    return QuadratureGrid(nodes=nodes, weights=weights, degree=degree)


# ---------------------------------------------------------------------------
# Kubo-Bastin conductivity

@dataclass
class ConductivityResult:
    sigma_xy: complex
    sigma_xx: complex
    nodes: int
    window: float
    error_budget: dict
    meta: dict = field(default_factory=dict)


def _complex_fermi(z, beta: float):
    """1 / (1 + e^{beta z}) continued off the real axis, overflow-safe."""
    w = beta * np.asarray(z, dtype=complex)
    out = np.empty_like(w)
    big = w.real > 30.0
    out[big] = np.exp(-w[big])
    out[~big] = 1.0 / (1.0 + np.exp(w[~big]))
    return out


class _EigenGreens:
    """Eigenbasis evaluation of the conductivity traces (reference path and
    analytic continuation for the quadrature error budget)."""

    def __init__(self, h: np.ndarray, vx: np.ndarray, vy: np.ndarray, mu: float, eta: float):
        lam, vecs = np.linalg.eigh(h)
        self.lam = lam - mu
        self.eta = eta
        vx_e = vecs.conj().T @ vx @ vecs
        vy_e = vecs.conj().T @ vy @ vecs
        self.wxy = vx_e * vy_e.T
        self.wxy_bar = np.conj(vx_e) * np.conj(vy_e).T

    def trace_pair(self, omega) -> complex:
        """(1/N) Tr[vx S vy dG] - its Hermitian conjugate, continued in omega."""
        n = len(self.lam)
        g = 1.0 / (omega + 1j * self.eta - self.lam)
        g_bar = 1.0 / (omega - 1j * self.eta - self.lam)
        s = (self.eta / math.pi) / ((omega - self.lam) ** 2 + self.eta**2)
        t_fwd = -np.sum(self.wxy * s[np.newaxis, :] * (g**2)[:, np.newaxis]) / n
        t_rev = -np.sum(self.wxy_bar * s[np.newaxis, :] * (g_bar**2)[:, np.newaxis]) / n
        return t_fwd - t_rev


def kubo_bastin_conductivity(
    h,
    vx,
    vy,
    beta: float,
    mu: float = 0.0,
    eta: float = 0.3,
    eps: float = 1e-6,
    nodes: int | None = None,
    alpha: float | None = None,
    method: str = "chebyshev",
    trace_mode: str = "exact",
    hutchinson_probes: int = 32,
    rng_key: int = 0,
) -> ConductivityResult:
    """Static conductivity tensor elements via the Kubo-Bastin integral.

    sigma^{ab} = (i / V_at) * integral dw f_beta(w) (1/N) Tr[v^a S(w) v^b
    dG^R/dw - h.c.], with dG^R/dw = -(G^R)^2, evaluated on a Chebyshev-
    Lobatto grid over the full rescaled spectral window.  ``method`` selects
    Chebyshev transforms ("chebyshev") or eigenbasis evaluation ("exact") for
    the per-node Green's functions; ``trace_mode`` selects exact traces or
    Hutchinson probes.  The reported budget combines the polynomial
    certificates, the interpolatory quadrature bound, and (if stochastic)
    three standard errors.
    """
    hd, alpha = as_dense_operator(h, alpha)
    vxd, _ = as_dense_operator(vx, 1.0)
    vyd, _ = as_dense_operator(vy, 1.0)
    n = hd.shape[0]
    lattice = h.lattice if isinstance(h, HoppingMatrix) else None
    v_at = (lattice.constant ** lattice.ndim) if lattice is not None else 1.0

    a_g = greens_alpha(alpha)
    window = GREENS_WINDOW * a_g - abs(mu)
    if window <= 0:
        raise ValueError("chemical potential outside the encodable window")
    d_g = greens_degree_bound(0.0, eta / a_g, eps)
    if nodes is None:
        fermi_scale = math.ceil((beta * window / math.pi + 1.0) * math.log(10.0 / eps))
        nodes = max(64, d_g, fermi_scale)
    elif nodes < d_g / 2:
        raise ValueError(
            f"quadrature grid of {nodes} nodes cannot resolve a Green's degree of "
            f"{d_g}; use at least {math.ceil(d_g / 2)} nodes"
        )

    grid = lobatto_grid_weights(nodes)
    omegas = window * grid.nodes
    eigen_xy = _EigenGreens(hd, vxd, vyd, mu, eta)
    eigen_xx = _EigenGreens(hd, vxd, vxd, mu, eta)

    # The scalar Fermi weight is itself carried by a certified expansion, so
    # the budget composes the same way the matrix transforms do.
    fermi_exp = fermi_dirac_expansion(beta, 0.0, window, eps)
    fermi_vals = np.real(fermi_exp(grid.nodes))
    eps_f = fermi_exp.eps_cert

    eps_g_max = 0.0
    sem_acc = 0.0
    vals_xy = np.empty(len(omegas), dtype=complex)
    vals_xx = np.empty(len(omegas), dtype=complex)

    eta_p = eta / a_g
    if method == "chebyshev":
        # One Chebyshev matrix stack serves every node; per-node coefficients
        # are analytic and their tails certify the per-node error.
        degrees = [
            greens_degree_bound((w + mu) / a_g, eta_p, eps) for w in omegas
        ]
        stack = chebyshev_matrix_stack(hd / a_g, max(degrees))

    for idx, w in enumerate(omegas):
        if method == "exact":
            vals_xy[idx] = eigen_xy.trace_pair(w)
            vals_xx[idx] = eigen_xx.trace_pair(w)
            continue
        if method != "chebyshev":
            raise ValueError(f"unknown method {method!r}")
        omega_p = (w + mu) / a_g
        d_here = degrees[idx]
        coeffs = greens_coefficients_analytic(omega_p, eta_p, d_here)
        eps_g_max = max(eps_g_max, greens_tail_bound(omega_p, eta_p, d_here))
        eta_g = np.tensordot(coeffs, stack[: d_here + 1], axes=1)
        g_mat = eta_g / eta
        s_mat = -hermitian_imag_part(eta_g) / (math.pi * eta)
        dg_mat = -(g_mat @ g_mat)
        if trace_mode == "exact":
            t_xy = np.trace(vxd @ s_mat @ vyd @ dg_mat) / n
            t_xx = np.trace(vxd @ s_mat @ vxd @ dg_mat) / n
        elif trace_mode == "hutchinson":

            def apply_xy(vec, _s=s_mat, _dg=dg_mat):
                return vxd @ (_s @ (vyd @ (_dg @ vec)))

            def apply_xx(vec, _s=s_mat, _dg=dg_mat):
                return vxd @ (_s @ (vxd @ (_dg @ vec)))

            t_xy, sem_xy = _hutchinson_complex(apply_xy, n, hutchinson_probes, rng_key + 2 * idx)
            t_xx, sem_xx = _hutchinson_complex(apply_xx, n, hutchinson_probes, rng_key + 2 * idx + 1)
            sem_acc += abs(grid.weights[idx]) * fermi_vals[idx] * (sem_xy + sem_xx)
        else:
            raise ValueError(f"unknown trace mode {trace_mode!r}")
        vals_xy[idx] = t_xy - np.conj(t_xy)
        vals_xx[idx] = t_xx - np.conj(t_xx)

    prefactor = 1j / v_at
    sigma_xy = prefactor * window * grid.integrate(fermi_vals * vals_xy)
    sigma_xx = prefactor * window * grid.integrate(fermi_vals * vals_xx)

    budget = _kubo_budget(
        (eigen_xy, eigen_xx), beta, eta, window, nodes, v_at,
        float(np.linalg.norm(vxd, 2)), float(np.linalg.norm(vyd, 2)),
        eps_f, eps_g_max, method,
    )
    if trace_mode == "hutchinson":
        budget["stochastic"] = 3.0 * window * sem_acc / v_at
    budget["total"] = float(sum(budget.values()))

    return ConductivityResult(
        sigma_xy=complex(sigma_xy),
        sigma_xx=complex(sigma_xx),
        nodes=nodes,
        window=float(window),
        error_budget=budget,
        meta={
            "beta": beta, "mu": mu, "eta": eta, "eps": eps,
            "method": method, "trace_mode": trace_mode, "v_at": v_at,
        },
    )


def _hutchinson_complex(apply_f, n, k_probes, rng_key) -> tuple[complex, float]:
    rng = np.random.default_rng(np.uint64(rng_key))
    draws = np.empty(k_probes, dtype=complex)
    for k in range(k_probes):
        sigma = rng.integers(0, 2, size=n) * 2 - 1
        psi = sigma / math.sqrt(n)
        draws[k] = np.vdot(psi, apply_f(psi))
    mean = complex(draws.mean())
    sem = float(np.abs(draws - mean).std(ddof=1) / math.sqrt(k_probes)) if k_probes > 1 else 0.0
    return mean, sem


def _kubo_budget(
    eigen_pair, beta, eta, window, nodes, v_at, vx_norm, vy_norm, eps_f, eps_g, method
) -> dict:
    budget = {}
    if method == "chebyshev":
        # Triangle-inequality propagation of the polynomial certificates:
        # ||Delta S|| <= eps_g / (pi eta), ||Delta (G^2)|| <= 2 eps_g / eta^2,
        # each trace bounded by the product of operator norms; the Hermitian
        # conjugate and the Fermi-weight certificate enter the same way.
        per_node = (vx_norm * vy_norm / (math.pi * eta**3)) * (3.0 * eps_g + eps_f)
        budget["polynomial"] = float(4.0 * window * per_node / v_at)
    budget["quadrature"] = max(
        _quadrature_tail(eigen, beta, eta, window, nodes, v_at)
        for eigen in eigen_pair
    )
    return budget


def _quadrature_tail(eigen, beta, eta, window, nodes, v_at) -> float:
    """Interpolation bound 4 M rho^{-d} / (rho - 1) for the scaled integrand."""
    poles = []
    for lam in eigen.lam:
        poles.append(complex(lam, eta) / window)
        poles.append(complex(lam, -eta) / window)
    if beta > 0:
        poles.append(complex(0.0, math.pi / beta) / window)
    rho_min = min(_bernstein_rho(p) for p in poles)
    rho_use = (1.0 + rho_min) / 2.0
    if rho_use <= 1.0 + 1e-9:
        return float("inf")
    theta = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
    ellipse = (rho_use * np.exp(1j * theta) + np.exp(-1j * theta) / rho_use) / 2.0
    m_max = 0.0
    for z in ellipse:
        w = window * z
        val = _complex_fermi(np.array([w]), beta)[0] * eigen.trace_pair(w)
        m_max = max(m_max, abs(val))
    tail = 4.0 * m_max * rho_use ** (-nodes) / (rho_use - 1.0)
    return float(2.0 * window * tail / v_at)


def _bernstein_rho(z: complex) -> float:
    root = cmath.sqrt(z * z - 1.0)
    return max(abs(z + root), abs(z - root))
