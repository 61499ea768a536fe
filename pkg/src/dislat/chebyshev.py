"""Certified Chebyshev expansions and idealized polynomial transforms.

Expansion convention: f(x) ~ sum_{k=0}^d a_k T_k(x) with

    a_k = (2 - delta_{k0}) / pi * integral_{-1}^{1} f(x) T_k(x) / sqrt(1-x^2) dx.

For a function analytic and bounded by M inside the Bernstein ellipse of
parameter rho > 1, the coefficients obey |a_k| <= 2 M rho^{-k} and the
degree-d truncation error is at most 2 M rho^{-d} / (rho - 1).

Two targets are certified here:

* the Fermi-Dirac factor 1 / (e^{beta (alpha x - mu)} + 1), resolved at
  degree ceil((alpha beta + 1) ln(2 * 1.1 * alpha beta / eps)) from the
  pole at height pi / (alpha beta) above the interval;
* the eta-scaled retarded Green's kernel eta / ((omega + i eta) - alpha x),
  whose coefficients are analytic in closed form and decay like
  eta' (1 + eta')^{-k} with eta' = eta / alpha.

The polynomial transform of an encoded matrix is simulated at the
exact-polynomial level: the result is a fresh unitary dilation of
p(h / alpha), with the degree recorded as the query count.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.sparse as sp
from numpy.polynomial.chebyshev import chebval
from scipy.special import expit

from .blockenc import BlockEncoding, dilation_encoding, extract_block

DEGREE_FLOOR = 16
CERT_GRID_POINTS = 10_000
EPS_PRECISION_FLOOR = 1e-12


@dataclass
class ChebyshevExpansion:
    """Coefficients with provenance and a certified uniform error."""

    coeffs: np.ndarray
    target: str
    params: dict = field(default_factory=dict)
    rho: float = float("inf")
    bound_m: float = 0.0
    eps_cert: float = 0.0
    tail_bound: float = float("inf")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return chebval(x, self.coeffs)

    def is_real(self, tol: float = 1e-14) -> bool:
        return bool(np.abs(self.coeffs.imag).max() <= tol)

    def truncated(self, degree: int) -> "ChebyshevExpansion":
        if degree >= self.degree:
            return self
        return ChebyshevExpansion(
            coeffs=self.coeffs[: degree + 1].copy(),
            target=self.target,
            params=dict(self.params),
            rho=self.rho,
            bound_m=self.bound_m,
            eps_cert=float("nan"),
            tail_bound=ellipse_bound(self.rho, self.bound_m, degree)
            if self.rho > 1 and self.bound_m > 0
            else float("inf"),
        )

    def to_json_dict(self) -> dict:
        return {
            "target": self.target,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "degree": self.degree,
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coeffs],
            "eps_cert": float(self.eps_cert),
            "tail_bound": float(self.tail_bound),
            "rho": float(self.rho),
        }


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return float(v) if isinstance(v, (int, float, np.floating)) else v


def ellipse_bound(rho: float, bound_m: float, degree: int) -> float:
    """Truncation tail 2 M rho^{-d} / (rho - 1) for an ellipse-bounded target."""
    if rho <= 1:
        raise ValueError("the Bernstein parameter rho must exceed 1")
    if bound_m <= 0:
        raise ValueError("the ellipse bound M must be positive")
    return 2.0 * bound_m * rho ** (-degree) / (rho - 1.0)


def _cheb_coeffs_dct(fvals: np.ndarray) -> np.ndarray:
    """Expansion coefficients from samples at Gauss-Chebyshev nodes (DCT-II)."""
    k = len(fvals)
    out = scipy.fft.dct(fvals, type=2) / k
    out[0] /= 2.0
    return out


def _gauss_chebyshev_nodes(k: int) -> np.ndarray:
    return np.cos(np.pi * (np.arange(k) + 0.5) / k)


def chebyshev_interpolate(f, degree: int, oversample: int = 4) -> np.ndarray:
    """Quadrature coefficients a_0..a_degree for a callable target."""
    k = max(oversample * max(degree, 1), 64)
    x = _gauss_chebyshev_nodes(k)
    vals = np.asarray(f(x), dtype=complex)
    if np.abs(vals.imag).max() == 0.0:
        return _cheb_coeffs_dct(vals.real.astype(float))[: degree + 1].astype(complex)
    re = _cheb_coeffs_dct(vals.real.astype(float))
    im = _cheb_coeffs_dct(vals.imag.astype(float))
    return (re + 1j * im)[: degree + 1]


def _measure_uniform_error(f, coeffs: np.ndarray, points: int = CERT_GRID_POINTS) -> float:
    grid = np.linspace(-1.0, 1.0, points)
    return float(np.abs(f(grid) - chebval(grid, coeffs)).max())


# ---------------------------------------------------------------------------
# Fermi-Dirac

def fermi_degree_bound(alpha_beta: float, eps: float) -> int:
    """Degree guaranteeing a uniform error eps for the Fermi-Dirac target."""
    if alpha_beta <= 0:
        return 0
    return math.ceil((alpha_beta + 1.0) * math.log(2.0 * 1.1 * alpha_beta / eps))


def fermi_dirac_expansion(
    beta: float,
    mu: float,
    alpha: float,
    eps: float,
    degree: int | None = None,
) -> ChebyshevExpansion:
    """Expansion of x -> 1 / (e^{beta (alpha x - mu)} + 1) on [-1, 1].

    Applied at x = h / alpha this reproduces the Fermi-Dirac function of
    h - mu I, with the chemical potential folded into the scalar target, so
    one encoding serves every mu.  The nearest poles sit at height
    pi / (alpha beta) whatever mu is, hence the mu-independent degree bound.
    """
    if beta < 0:
        raise ValueError("inverse temperature must be non-negative")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if eps < EPS_PRECISION_FLOOR:
        raise ValueError(f"eps below the floating-point floor {EPS_PRECISION_FLOOR}")
    if abs(mu) >= alpha:
        raise ValueError("require |mu| < alpha so the rescaled pole stays off-axis")
    ab = alpha * beta

    def f(x):
        return expit(-(ab * np.asarray(x) - beta * mu))

    if degree is None:
        degree = max(DEGREE_FLOOR, fermi_degree_bound(ab, eps))
    coeffs = chebyshev_interpolate(f, degree)
    rho = 1.0 + 1.0 / ab if ab > 0 else float("inf")
    bound_m = 1.1
    tail = ellipse_bound(rho, bound_m, degree) if ab > 0 else 0.0
    return ChebyshevExpansion(
        coeffs=coeffs,
        target="fermi-dirac",
        params={"beta": beta, "mu": mu, "alpha": alpha, "eps": eps},
        rho=rho,
        bound_m=bound_m,
        eps_cert=_measure_uniform_error(f, coeffs),
        tail_bound=tail,
    )


# ---------------------------------------------------------------------------
# retarded Green's kernel

def greens_branch_point(omega_p: float, eta_p: float) -> tuple[complex, complex]:
    """(sqrt(u^2 - 1), zeta) with the branch making |zeta| = |u + sqrt| > 1."""
    u = omega_p + 1j * eta_p
    root = cmath.sqrt(u * u - 1.0)
    if abs(u + root) < 1.0:
        root = -root
    return root, u + root


def greens_coefficients_analytic(omega_p: float, eta_p: float, k_max: int) -> np.ndarray:
    """Closed-form coefficients of eta' / ((omega' + i eta') - x).

    a_k = (2 - delta_{k0}) eta' / (sqrt(u^2 - 1) zeta^k), u = omega' + i eta',
    zeta the branch of u + sqrt(u^2 - 1) outside the unit circle.
    """
    root, zeta = greens_branch_point(omega_p, eta_p)
    k = np.arange(k_max + 1)
    coeffs = 2.0 * eta_p / (root * zeta**k)
    coeffs[0] /= 2.0
    return coeffs


def greens_degree_bound(omega_p: float, eta_p: float, eps: float) -> int:
    """Degree making the analytic coefficient tail smaller than eps."""
    root, zeta = greens_branch_point(omega_p, eta_p)
    az = abs(zeta)
    scale = 2.0 * eta_p / (abs(root) * (1.0 - 1.0 / az))
    return max(1, math.ceil(math.log(max(scale / eps, 2.0)) / math.log(az)) + 2)


def greens_tail_bound(omega_p: float, eta_p: float, degree: int) -> float:
    """Certified uniform tail of the analytic coefficient series past ``degree``."""
    root, zeta = greens_branch_point(omega_p, eta_p)
    az = abs(zeta)
    return 2.0 * eta_p / abs(root) * az ** (-(degree + 1)) / (1.0 - 1.0 / az)


def chebyshev_matrix_stack(h_scaled: np.ndarray, degree: int) -> np.ndarray:
    """T_0(h), ..., T_degree(h) for reuse across many coefficient sets."""
    n = h_scaled.shape[0]
    dense = h_scaled.toarray() if sp.issparse(h_scaled) else np.asarray(h_scaled, dtype=complex)
    stack = np.empty((degree + 1, n, n), dtype=complex)
    stack[0] = np.eye(n)
    if degree >= 1:
        stack[1] = dense
    for k in range(2, degree + 1):
        stack[k] = 2.0 * (dense @ stack[k - 1]) - stack[k - 2]
    return stack


def greens_expansion(
    omega: float,
    eta: float,
    alpha: float,
    eps: float,
    degree: int | None = None,
    window: float = 0.5,
) -> ChebyshevExpansion:
    """Expansion of the eta-scaled retarded kernel eta / ((omega + i eta) - alpha x).

    The caller must have inflated alpha so the spectrum and omega both lie in
    [-window, window] * alpha (double the bare sub-normalization suffices);
    outside that window the pole handling degrades and the call is refused.
    Analytic coefficients are cross-checked against quadrature before the
    expansion is certified on a dense grid.
    """
    if eta <= 0:
        raise ValueError("broadening eta must be positive")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    omega_p = omega / alpha
    eta_p = eta / alpha
    if abs(omega_p) > window + 1e-12:
        raise ValueError(
            f"omega/alpha = {omega_p:.4f} outside [-{window}, {window}]; "
            "inflate alpha (e.g. double it) so the spectrum sits well inside the window"
        )
    if degree is None:
        degree = max(DEGREE_FLOOR, greens_degree_bound(omega_p, eta_p, eps))
    coeffs = greens_coefficients_analytic(omega_p, eta_p, degree)

    def f(x):
        return eta_p / ((omega_p + 1j * eta_p) - np.asarray(x))

    check_to = min(degree, 60)
    quad = chebyshev_interpolate(f, degree)[: check_to + 1]
    mismatch = float(np.abs(coeffs[: check_to + 1] - quad).max())
    if mismatch > 1e-6:
        raise ArithmeticError(
            f"analytic Green's coefficients disagree with quadrature by {mismatch:.2e}"
        )

    root, zeta = greens_branch_point(omega_p, eta_p)
    rho = (1.0 + abs(zeta)) / 2.0
    bound_m = _ellipse_max(f, rho) * 1.05
    return ChebyshevExpansion(
        coeffs=coeffs,
        target="greens",
        params={"omega": omega, "eta": eta, "alpha": alpha, "eps": eps},
        rho=rho,
        bound_m=bound_m,
        eps_cert=_measure_uniform_error(f, coeffs),
        tail_bound=ellipse_bound(rho, bound_m, degree),
    )


def _ellipse_max(f, rho: float, samples: int = 512) -> float:
    theta = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    z = (rho * np.exp(1j * theta) + np.exp(-1j * theta) / rho) / 2.0
    return float(np.abs(f(z)).max())


# ---------------------------------------------------------------------------
# applying expansions to matrices

def estimate_spectral_norm(matrix, iters: int = 30, seed: int = 7) -> float:
    """Power-iteration estimate of the spectral norm (norm guard only)."""
    rng = np.random.default_rng(seed)
    n = matrix.shape[0]
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = matrix @ v
        if sp.issparse(w):
            w = np.asarray(w).ravel()
        est = np.linalg.norm(w)
        if est == 0.0:
            return 0.0
        v = w / est
    return float(est)


def clenshaw_matrix_apply(
    expansion: ChebyshevExpansion,
    h_scaled,
    vector: np.ndarray | None = None,
    check_norm: bool = True,
):
    """Evaluate sum_k a_k T_k(h_scaled) (or its action on a vector) by the
    backward Clenshaw recurrence.  Requires ||h_scaled|| <= 1."""
    if check_norm and estimate_spectral_norm(h_scaled) > 1.0 + 1e-8:
        raise ValueError("scaled operator norm exceeds 1; check the sub-normalization")
    a = expansion.coeffs
    if vector is not None:
        b1 = np.zeros_like(vector, dtype=complex)
        b2 = np.zeros_like(vector, dtype=complex)
        for k in range(len(a) - 1, 0, -1):
            b1, b2 = a[k] * vector + 2.0 * (h_scaled @ b1) - b2, b1
        return a[0] * vector + (h_scaled @ b1) - b2
    n = h_scaled.shape[0]
    dense = h_scaled.toarray() if sp.issparse(h_scaled) else np.asarray(h_scaled)
    eye = np.eye(n, dtype=complex)
    b1 = np.zeros((n, n), dtype=complex)
    b2 = np.zeros((n, n), dtype=complex)
    for k in range(len(a) - 1, 0, -1):
        b1, b2 = a[k] * eye + 2.0 * (dense @ b1) - b2, b1
    return a[0] * eye + dense @ b1 - b2


def qsvt_simulate(be: BlockEncoding, expansion: ChebyshevExpansion) -> BlockEncoding:
    """Idealized polynomial transform of a block-encoded Hermitian matrix.

    Phase-factor synthesis is out of scope: the result is the exact
    polynomial of the encoded block, evaluated in the eigenbasis and wrapped
    in a fresh unitary dilation.  Polynomials exceeding 1 on [-1, 1] are
    rescaled and the excess reported as extra sub-normalization.  The degree
    is recorded as the query count a real transform would spend.
    """
    h_scaled = extract_block(be) / be.alpha
    if np.abs(h_scaled - h_scaled.conj().T).max() > 1e-10:
        raise ValueError("encoded block is not Hermitian")
    grid = np.linspace(-1.0, 1.0, 4096)
    p_max = float(np.abs(chebval(grid, expansion.coeffs)).max())
    w, v = np.linalg.eigh((h_scaled + h_scaled.conj().T) / 2)
    vals = chebval(w, expansion.coeffs)
    peak = max(p_max, float(np.abs(vals).max()))
    rescale = 1.0 if peak <= 1.0 else peak * (1.0 + 1e-12)
    transformed = (v * vals) @ v.conj().T
    out = dilation_encoding(transformed / rescale, alpha=1.0)
    out.alpha = rescale
    out.queries = expansion.degree
    out.meta = {
        "target": expansion.target,
        "params": dict(expansion.params),
        "rescale": rescale,
        "input_alpha": be.alpha,
    }
    return out
