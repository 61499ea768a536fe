"""dislat: quantum linear algebra for disordered tight-binding lattices, on a desk.

The package builds disordered hopping matrices from keyed randomness,
constructs and verifies explicit block-encoding unitaries for them, applies
polynomial matrix transforms with certified Chebyshev degree bounds, and
estimates physical observables (1-RDM, Green's function, LDOS, Kubo-Bastin
conductivity), cross-checked against exact diagonalization and a classical
light-cone baseline.
"""

__version__ = "0.1.0"

from .lattice import DisorderSpec, HoppingMatrix, LatticeSpec  # noqa: F401
