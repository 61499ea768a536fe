"""Extracting numbers from block-encoded matrix functions.

Matrix elements are the amplitudes an amplitude-estimation routine would
measure, times the sub-normalization.  The estimation itself is simulated by
a contract-respecting noise model rather than a phase-estimation circuit:
the returned value deviates from the truth by at most eps with probability
at least 1 - delta, and the modeled query count is ceil(C (1/eps) ln(1/delta))
with the constant C = 1 documented here (asymptotics hide it).

Bulk traces come either from the maximally-entangled-state identity, which
turns Tr(f(h))/N into a single amplitude on the doubled space, or from
stochastic trace estimation with random-sign (Hutchinson) probes normalized
so each probe estimates Tr(f(h))/N directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blockenc import BlockEncoding

QAE_QUERY_CONSTANT = 1.0


@dataclass
class EstimateRecord:
    """Point estimate with its accuracy contract and modeled cost."""

    value: float | complex
    target_eps: float
    delta: float | None = None
    queries: int | None = None
    samples: int | None = None
    std_error: float | None = None

    def to_json_dict(self) -> dict:
        out = {
            "value": [self.value.real, self.value.imag]
            if isinstance(self.value, complex)
            else float(self.value),
            "target_eps": float(self.target_eps),
        }
        if self.delta is not None:
            out["delta"] = float(self.delta)
        if self.queries is not None:
            out["queries"] = int(self.queries)
        if self.samples is not None:
            out["samples"] = int(self.samples)
        if self.std_error is not None:
            out["std_error"] = float(self.std_error)
        return out


def qae_query_count(eps: float, delta: float) -> int:
    return math.ceil(QAE_QUERY_CONSTANT * (1.0 / eps) * math.log(1.0 / delta))


def matrix_element(be_f: BlockEncoding, i: int, j: int) -> complex:
    """alpha_f <0, i| U_f |0, j>: the amplitude QAE would target, rescaled."""
    if not (0 <= i < be_f.sys_dim and 0 <= j < be_f.sys_dim):
        raise IndexError("matrix element indices outside the system dimension")
    return complex(be_f.alpha * be_f.u[i, j])


def amplitude_estimate(
    true_amplitude: float, eps: float, delta: float, rng_key: int
) -> EstimateRecord:
    """Simulated amplitude estimation respecting the (eps, delta) contract.

    Noise is a centered Gaussian of scale eps/3; with probability 1 - delta
    it is redrawn until it lands inside [-eps, eps], otherwise the raw draw
    is kept.  Deterministic in rng_key.
    """
    if abs(true_amplitude) > 1 + 1e-12:
        raise ValueError("amplitudes are bounded by 1")
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ValueError("eps and delta must lie in (0, 1)")
    rng = np.random.default_rng(np.uint64(rng_key))
    noise = rng.normal(0.0, eps / 3.0)
    if rng.random() < 1.0 - delta:
        while abs(noise) > eps:
            noise = rng.normal(0.0, eps / 3.0)
    return EstimateRecord(
        value=float(true_amplitude + noise),
        target_eps=eps,
        delta=delta,
        queries=qae_query_count(eps, delta),
    )


def entangled_trace(be_f: BlockEncoding) -> float:
    """Tr(f(h)) / N through the maximally entangled state.

    (1/sqrt(N) sum_i <i|<i|) (I (x) f(h)) (1/sqrt(N) sum_j |j>|j>) collapses
    to the mean of the diagonal amplitudes of the encoded block; the value is
    computed exactly from those amplitudes, times the sub-normalization.
    """
    n = be_f.sys_dim
    diag = be_f.u.diagonal()[:n]
    value = be_f.alpha * complex(diag.sum()) / n
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise ArithmeticError(f"entangled trace came out complex: {value}")
    return float(value.real)


def hutchinson_trace_estimate(
    apply_f, n: int, k_probes: int, rng_key: int
) -> EstimateRecord:
    """Mean of <psi|f|psi> over K random-sign probes psi = sigma / sqrt(N).

    Unbiased for Tr(f)/N; the standard error comes from the sample variance.
    Deterministic in rng_key.
    """
    if k_probes < 1:
        raise ValueError("need at least one probe")
    rng = np.random.default_rng(np.uint64(rng_key))
    draws = np.empty(k_probes)
    for k in range(k_probes):
        sigma = rng.integers(0, 2, size=n) * 2 - 1
        psi = sigma / math.sqrt(n)
        draws[k] = np.real(np.vdot(psi, apply_f(psi)))
    mean = float(draws.mean())
    sem = float(draws.std(ddof=1) / math.sqrt(k_probes)) if k_probes > 1 else float("nan")
    return EstimateRecord(
        value=mean,
        target_eps=float("nan"),
        samples=k_probes,
        std_error=sem,
    )
