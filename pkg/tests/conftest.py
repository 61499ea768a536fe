"""Shared model instances covering both geometries and every disorder kind."""

import numpy as np
import pytest

from dislat.lattice import DisorderSpec, LatticeSpec

ALLOY = dict(
    kind="binary-alloy", p=0.5, t00=1.0, t11=0.7, t01=0.85,
    gamma00=0.5, gamma11=0.6, gamma01=0.55, precision_bits=6,
)

INSTANCES = {
    "1d-clean-8": (
        LatticeSpec(dims=(8,)),
        DisorderSpec(kind="none", t00=-1.0, gamma00=0.5, precision_bits=6),
    ),
    "1d-open-clean-8": (
        LatticeSpec(dims=(8,), boundary="open"),
        DisorderSpec(kind="none", t00=-1.0, gamma00=0.5, precision_bits=6),
    ),
    "1d-alloy-16": (LatticeSpec(dims=(16,)), DisorderSpec(key=42, **ALLOY)),
    "1d-alloy-32": (LatticeSpec(dims=(32,)), DisorderSpec(key=7, **ALLOY)),
    "1d-alloy-64": (LatticeSpec(dims=(64,)), DisorderSpec(key=3, **ALLOY)),
    "1d-alloy-open-16": (
        LatticeSpec(dims=(16,), boundary="open"),
        DisorderSpec(key=5, **ALLOY),
    ),
    "1d-hot-alloy-16": (
        LatticeSpec(dims=(16,)),
        DisorderSpec(key=21, **{**ALLOY, "t00": 1.5}),
    ),
    "1d-struct-16": (
        LatticeSpec(dims=(16,)),
        DisorderSpec(kind="structural", key=5, t00=-1.0, gamma00=0.5,
                     displacement_width=0.3, displacement_bits=6, precision_bits=6),
    ),
    "1d-magnet-16": (
        LatticeSpec(dims=(16,)),
        DisorderSpec(kind="magnetic", key=9, t00=1.0, gamma00=0.5, precision_bits=6),
    ),
    "2d-clean-16": (
        LatticeSpec(dims=(4, 4)),
        DisorderSpec(kind="none", t00=-1.0, gamma00=0.5, precision_bits=6),
    ),
    "2d-alloy-64": (LatticeSpec(dims=(8, 8)), DisorderSpec(key=11, **ALLOY)),
    "2d-magnet-16": (
        LatticeSpec(dims=(4, 4)),
        DisorderSpec(kind="magnetic", key=13, t00=1.0, gamma00=0.5, precision_bits=6),
    ),
    "2d-struct-16": (
        LatticeSpec(dims=(4, 4), boundary="open"),
        DisorderSpec(kind="structural", key=17, t00=-1.0, gamma00=0.5,
                     displacement_width=0.25, displacement_bits=6, precision_bits=6),
    ),
}

SMALL_NAMES = [name for name, (lat, _) in INSTANCES.items() if lat.n_sites <= 16]
ALL_NAMES = list(INSTANCES)


@pytest.fixture(params=ALL_NAMES)
def instance(request):
    return INSTANCES[request.param]


def fermi_reference(eigen, beta, mu):
    """Eigendecomposition Fermi-Dirac oracle (independent of Clenshaw)."""
    lam = eigen.eigenvalues
    v = eigen.eigenvectors
    with np.errstate(over="ignore"):
        occ = 1.0 / (np.exp(beta * (lam - mu)) + 1.0)
    return (v * occ) @ v.conj().T


def greens_reference(eigen, omega, eta, mu):
    """Eigendecomposition retarded Green's oracle."""
    lam = eigen.eigenvalues
    v = eigen.eigenvectors
    return (v * (1.0 / (omega + 1j * eta - (lam - mu)))) @ v.conj().T
