"""Clock-Hamiltonian gadget: deciding circuit output from one LDOS value.

A gate circuit C = U_T ... U_1 on r qubits with input x is extended to
C' = U_1+ ... U_T+ (Z on the output qubit) U_T ... U_1, written as M = 2T + 1
gates V_0 ... V_{M-1}.  The clock unitary W = sum_l |l+1 mod M><l| (x) V_l
yields the Hermitian h = (W + W+) / 2 whose spectrum is exactly
{+-cos(2 pi l / M)}, split into a "+" family weighted by |alpha_{x,0}|^2 and
a "-" family weighted by |alpha_{x,1}|^2 on the state |s_x> = |clock 0>|x>|0...>.

Evaluating the scaled spectral function S'(omega, eta, h) = eta^2 /
((omega - h)^2 + eta^2) at the "-" family eigenvalue closest to zero
(omega = -cos(pi T / M) for even T, +cos(pi T / M) for odd) with eta = c Delta,
Delta = pi / (2M), c = 1 / sqrt(4M) separates the promise classes by at least
2 epsilon with epsilon = 1 / (6M) around the threshold g / M, g = 1.

Conventions: qubit 0 is the most significant bit of the work register and is
the measured output qubit; the flat index is clock-major, so |s_x> has index
j = x << (r - n).  The clock register is handled on its M active levels (its
qubit embedding would add floor(log M) + 1 wires with inert extra levels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

_SINGLE = {
    "i": np.eye(2),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]]),
    "z": np.diag([1.0, -1.0]).astype(complex),
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "s": np.diag([1.0, 1j]),
    "t": np.diag([1.0, np.exp(1j * math.pi / 4)]),
}
_DOUBLE = {
    "cx": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "cz": np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex),
    "swap": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


@dataclass
class GateCircuit:
    """1- and 2-qubit gates on r qubits with an n-bit input string."""

    n_qubits: int
    gates: list  # (unitary 2x2 or 4x4, wires tuple)
    input_bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.input_bits) > self.n_qubits:
            raise ValueError("input string longer than the register")
        for u, wires in self.gates:
            u = np.asarray(u)
            if u.shape not in ((2, 2), (4, 4)):
                raise ValueError("gates act on at most 2 qubits")
            if np.abs(u @ u.conj().T - np.eye(u.shape[0])).max() > 1e-12:
                raise ValueError("gate is not unitary to 1e-12")
            if len(wires) != int(math.log2(u.shape[0])):
                raise ValueError("wire count does not match the gate arity")
            if any(not 0 <= w < self.n_qubits for w in wires):
                raise ValueError("gate wire outside the register")

    @property
    def depth(self) -> int:
        return len(self.gates)

    def embedded_gates(self) -> list[np.ndarray]:
        return [embed_gate(u, wires, self.n_qubits) for u, wires in self.gates]

    def unitary(self) -> np.ndarray:
        out = np.eye(1 << self.n_qubits, dtype=complex)
        for g in self.embedded_gates():
            out = g @ out
        return out

    def input_state(self) -> np.ndarray:
        bits = list(self.input_bits) + [0] * (self.n_qubits - len(self.input_bits))
        index = 0
        for b in bits:
            index = (index << 1) | int(b)
        state = np.zeros(1 << self.n_qubits, dtype=complex)
        state[index] = 1.0
        return state

    def output_probability(self) -> float:
        """|alpha_{x,1}|^2: probability the output qubit (wire 0) reads 1."""
        final = self.unitary() @ self.input_state()
        half = 1 << (self.n_qubits - 1)
        return float(np.sum(np.abs(final[half:]) ** 2))


def embed_gate(u: np.ndarray, wires, n_qubits: int) -> np.ndarray:
    """Dense embedding of a small gate; wire 0 is the most significant bit."""
    u = np.asarray(u, dtype=complex)
    dim = 1 << n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    wires = tuple(wires)
    rest = [q for q in range(n_qubits) if q not in wires]
    shifts = [n_qubits - 1 - q for q in wires]
    rest_shifts = [n_qubits - 1 - q for q in rest]
    for other in range(1 << len(rest)):
        base = 0
        for bit_pos, shift in enumerate(rest_shifts):
            if (other >> (len(rest) - 1 - bit_pos)) & 1:
                base |= 1 << shift
        states = []
        for local in range(u.shape[0]):
            idx = base
            for bit_pos, shift in enumerate(shifts):
                if (local >> (len(wires) - 1 - bit_pos)) & 1:
                    idx |= 1 << shift
            states.append(idx)
        out[np.ix_(states, states)] = u
    return out


def parse_circuit(text: str, n_qubits: int, input_bits) -> GateCircuit:
    """Minimal gate-list format: one gate per line, ``name wire [wire]``.

    Names: i x y z h s t (1 wire), cx cz swap (2 wires).  A line starting
    with ``u4`` takes two wires followed by 32 floats (row-major re im pairs
    of a 4x4 unitary).  '#' comments and blank lines are skipped.
    """
    gates = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        name = tokens[0].lower()
        try:
            if name in _SINGLE:
                gates.append((_SINGLE[name], (int(tokens[1]),)))
            elif name in _DOUBLE:
                gates.append((_DOUBLE[name], (int(tokens[1]), int(tokens[2]))))
            elif name == "u4":
                wires = (int(tokens[1]), int(tokens[2]))
                vals = [float(v) for v in tokens[3:]]
                if len(vals) != 32:
                    raise ValueError("u4 expects 32 numbers")
                flat = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
                gates.append((flat.reshape(4, 4), wires))
            else:
                raise ValueError(f"unknown gate {name!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"circuit line {lineno}: {exc}") from exc
    return GateCircuit(n_qubits=n_qubits, gates=gates, input_bits=tuple(input_bits))


@dataclass
class ClockConstruction:
    circuit: GateCircuit
    extended: list[np.ndarray]
    clock_unitary: sp.csr_matrix
    hamiltonian: sp.csr_matrix
    meta: dict = field(default_factory=dict)

    @property
    def period(self) -> int:
        return len(self.extended)

    @property
    def clock_register_qubits(self) -> int:
        return int(math.floor(math.log2(self.period))) + 1

    @property
    def decision_omega(self) -> float:
        t_depth = self.circuit.depth
        m = self.period
        value = math.cos(math.pi * t_depth / m)
        return value if t_depth % 2 == 1 else -value

    @property
    def gap(self) -> float:
        return math.pi / (2 * self.period)

    @property
    def c_parameter(self) -> float:
        return 1.0 / math.sqrt(4 * self.period)

    @property
    def epsilon(self) -> float:
        return 1.0 / (6 * self.period)

    def state_index(self) -> int:
        """Index of |s_x> = |clock 0>|x>|0^(r-n)>."""
        bits = list(self.circuit.input_bits)
        x = 0
        for b in bits:
            x = (x << 1) | int(b)
        return x << (self.circuit.n_qubits - len(bits))

    def predicted_spectrum(self) -> np.ndarray:
        """Eigenvalues with multiplicities from the two cyclic families."""
        m = self.period
        r = self.circuit.n_qubits
        plus = [math.cos(2 * math.pi * l / m) for l in range(m)]
        minus = [math.cos(math.pi * (2 * l + 1) / m) for l in range(m)]
        values = np.repeat(np.array(plus + minus), 1 << (r - 1))
        return np.sort(values)


def extend_circuit(circuit: GateCircuit) -> list[np.ndarray]:
    """V_0..V_{M-1} = (U_1, ..., U_T, Z on the output qubit, U_T+, ..., U_1+)."""
    if circuit.depth < 1:
        raise ValueError("the construction needs at least one gate")
    forward = circuit.embedded_gates()
    z_out = embed_gate(_SINGLE["z"], (0,), circuit.n_qubits)
    return forward + [z_out] + [g.conj().T for g in reversed(forward)]


def clock_unitary(circuit: GateCircuit) -> ClockConstruction:
    """W = sum_l |l+1 mod M><l| (x) V_l and h = (W + W+) / 2."""
    extended = extend_circuit(circuit)
    m = len(extended)
    dim_work = 1 << circuit.n_qubits
    blocks = [[None] * m for _ in range(m)]
    for l in range(m):
        blocks[(l + 1) % m][l] = sp.csr_matrix(extended[l])
    w = sp.bmat(blocks, format="csr")
    h = ((w + w.getH()) / 2.0).tocsr()
    return ClockConstruction(
        circuit=circuit,
        extended=extended,
        clock_unitary=w,
        hamiltonian=h,
        meta={"period": m, "work_dim": dim_work},
    )


def scaled_spectral_value(h, omega: float, eta: float, index: int) -> float:
    """S'(omega, eta, h)_{jj} = [eta^2 ((omega - h)^2 + eta^2)^{-1}]_{jj}, exact."""
    dense = h.toarray() if sp.issparse(h) else np.asarray(h)
    lam, vecs = np.linalg.eigh(dense)
    weights = np.abs(vecs[index]) ** 2
    lorentz = eta**2 / ((omega - lam) ** 2 + eta**2)
    return float(weights @ lorentz)


@dataclass
class LdosDecision:
    decision: str
    value: float
    threshold: float
    epsilon: float
    margin: float
    alpha1_sq: float
    omega: float
    eta: float
    index: int


def ldos_decision(construction: ClockConstruction) -> LdosDecision:
    """Decide the circuit promise from one diagonal of the spectral function.

    YES when S'_{jj} >= g/M + eps, NO when <= g/M - eps (g = 1,
    eps = 1/(6M)); values strictly inside the forbidden band report
    "promise violated" as a diagnostic.  The true |alpha_{x,1}|^2 from direct
    state-vector simulation is returned alongside for verification.
    """
    m = construction.period
    omega = construction.decision_omega
    eta = construction.c_parameter * construction.gap
    index = construction.state_index()
    value = scaled_spectral_value(construction.hamiltonian, omega, eta, index)
    threshold = 1.0 / m
    eps = construction.epsilon
    margin = value - threshold
    if value >= threshold + eps:
        decision = "YES"
    elif value <= threshold - eps:
        decision = "NO"
    else:
        decision = "promise violated"
    return LdosDecision(
        decision=decision,
        value=value,
        threshold=threshold,
        epsilon=eps,
        margin=margin,
        alpha1_sq=construction.circuit.output_probability(),
        omega=omega,
        eta=eta,
        index=index,
    )


def family_sums(construction: ClockConstruction, omega: float, eta: float):
    """(S+, S-): Lorentzian sums over the two cyclic eigenvalue families."""
    m = construction.period
    plus = np.array([math.cos(2 * math.pi * l / m) for l in range(m)])
    minus = np.array([math.cos(math.pi * (2 * l + 1) / m) for l in range(m)])
    lor = lambda x: eta**2 / ((omega - x) ** 2 + eta**2)  # noqa: E731
    return float(lor(plus).sum()), float(lor(minus).sum())
