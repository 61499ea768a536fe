"""Batch front door: experiment configs in, reproducible result files out.

Configs are versioned JSON with a strict schema (unknown fields are
rejected, with the offending path in the error).  Every run writes a
manifest echoing the fully resolved config, the package version, the pinned
keyed-hash identifier, and a hash of the config itself, so any number in any
CSV is traceable to (config, key, code version).  Identical configs produce
byte-identical outputs; disorder keys are independent work units and partial
failures are reported per key without aborting the sweep.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import benchmark_lightcone_scaling, exact_diagonalize
from .blockenc import assemble_full_encoding, extract_block
from .bqp import clock_unitary, ldos_decision, parse_circuit
from .lattice import (
    DisorderSpec,
    LatticeSpec,
    assemble_doubled_matrix,
    assemble_hopping_matrix,
    assemble_velocity_operator,
)
from .observables import (
    kubo_bastin_conductivity,
    ldos_momentum,
    ldos_site,
    one_rdm,
    retarded_greens,
    spectral_function,
)
from .randomness import HASH_NAME

CONFIG_VERSION = 1
TASKS = (
    "rdm",
    "ldos",
    "momentum-ldos",
    "greens",
    "conductivity",
    "bqp-check",
    "benchmark",
    "verify-encoding",
)

_LATTICE_FIELDS = {"dims", "boundary", "constant", "cutoff", "d_max", "sparsity_cap"}
_DISORDER_FIELDS = {
    "kind", "key", "p", "t00", "t11", "t01", "gamma00", "gamma11", "gamma01",
    "precision_bits", "displacement_bits", "displacement_width", "mode", "independence",
}
_TOP_FIELDS = {"version", "model", "task", "params", "keys", "output"}


class ConfigError(ValueError):
    pass


def _reject_unknown(obj: dict, allowed: set, path: str):
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(unknown)}")


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config line {exc.lineno}: {exc.msg}") from exc
    return config


def resolve_config(config: dict) -> dict:
    if not isinstance(config, dict):
        raise ConfigError("top level: expected an object")
    _reject_unknown(config, _TOP_FIELDS, "top level")
    if config.get("version") != CONFIG_VERSION:
        raise ConfigError(f"version: expected {CONFIG_VERSION}")
    task = config.get("task")
    if task not in TASKS:
        raise ConfigError(f"task: expected one of {', '.join(TASKS)}")
    params = config.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params: expected an object")
    model = config.get("model")
    if task in ("bqp-check", "benchmark"):
        resolved_model = model or {}
    else:
        if not isinstance(model, dict):
            raise ConfigError("model: expected an object with lattice and disorder")
        _reject_unknown(model, {"lattice", "disorder"}, "model")
        _reject_unknown(model.get("lattice", {}), _LATTICE_FIELDS, "model.lattice")
        _reject_unknown(model.get("disorder", {}), _DISORDER_FIELDS, "model.disorder")
        resolved_model = model
    keys = config.get("keys")
    if keys is None:
        base = resolved_model.get("disorder", {}).get("key", 0) if resolved_model else 0
        keys = [base]
    if not (isinstance(keys, list) and all(isinstance(k, int) for k in keys)):
        raise ConfigError("keys: expected a list of integers")
    return {
        "version": CONFIG_VERSION,
        "model": resolved_model,
        "task": task,
        "params": params,
        "keys": keys,
        "output": config.get("output", "results"),
    }


def build_model(model: dict, key: int | None = None):
    lat = dict(model["lattice"])
    lat["dims"] = tuple(lat["dims"])
    try:
        lattice = LatticeSpec(**lat)
        dis_fields = dict(model.get("disorder", {}))
        if key is not None:
            dis_fields["key"] = key
        disorder = DisorderSpec(**dis_fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    return lattice, disorder


def _fmt(x) -> str:
    if isinstance(x, complex):
        return f"{x.real!r},{x.imag!r}"
    return repr(float(x))


def _omega_list(params: dict) -> list[float]:
    if "omegas" in params:
        return [float(w) for w in params["omegas"]]
    if "omega_grid" in params:
        grid = params["omega_grid"]
        _reject_unknown(grid, {"min", "max", "count"}, "params.omega_grid")
        return list(np.linspace(grid["min"], grid["max"], int(grid["count"])))
    raise ConfigError("params: need omegas or omega_grid")


def _site_list(params: dict, n: int) -> list[int]:
    sites = params.get("sites", "all")
    if sites == "all":
        return list(range(n))
    return [int(i) for i in sites]


# ---------------------------------------------------------------------------
# per-key task runners (each returns a list of (filename, text) pairs)

def _run_rdm(lattice, disorder, params, tag):
    h = assemble_hopping_matrix(lattice, disorder)
    d = one_rdm(h, beta=params.get("beta", 1.0), mu=params.get("mu", 0.0),
                eps=params.get("eps", 1e-8))
    pairs = params.get("elements")
    lines = ["i,j,re,im"]
    if pairs is None:
        for i in range(h.dim):
            lines.append(f"{i},{i},{_fmt(complex(d[i, i]))}")
    else:
        for i, j in pairs:
            lines.append(f"{i},{j},{_fmt(complex(d[i, j]))}")
    return [(f"rdm_{tag}.csv", "\n".join(lines) + "\n")]


def _run_ldos(lattice, disorder, params, tag):
    h = assemble_hopping_matrix(lattice, disorder)
    eta = float(params.get("eta", 0.2))
    mu = float(params.get("mu", 0.0))
    eps = float(params.get("eps", 1e-8))
    omegas = _omega_list(params)
    sites = _site_list(params, h.dim)
    lines = ["omega,site,ldos"]
    for w in omegas:
        pes = spectral_function(h, w, eta, mu, eps)
        diag = np.real(np.diag(pes)) / (math.pi * eta)
        for i in sites:
            lines.append(f"{float(w)!r},{i},{float(diag[i])!r}")
    return [(f"ldos_{tag}.csv", "\n".join(lines) + "\n")]


def _run_momentum_ldos(lattice, disorder, params, tag):
    h = assemble_hopping_matrix(lattice, disorder)
    eta = float(params.get("eta", 0.2))
    mu = float(params.get("mu", 0.0))
    eps = float(params.get("eps", 1e-8))
    omegas = _omega_list(params)
    kvecs = [tuple(k) for k in params.get("kvecs", [[0] * lattice.ndim])]
    lines = ["omega,k,ldos"]
    for w in omegas:
        for kv in kvecs:
            val = ldos_momentum(h, w, eta, kv, mu, eps)
            lines.append(f"{float(w)!r},{'/'.join(map(str, kv))},{float(val)!r}")
    return [(f"momentum_ldos_{tag}.csv", "\n".join(lines) + "\n")]


def _run_greens(lattice, disorder, params, tag):
    h = assemble_hopping_matrix(lattice, disorder)
    eta = float(params.get("eta", 0.2))
    mu = float(params.get("mu", 0.0))
    eps = float(params.get("eps", 1e-8))
    omegas = _omega_list(params)
    pairs = params.get("elements") or [[i, i] for i in range(h.dim)]
    lines = ["omega,i,j,re,im"]
    for w in omegas:
        g = retarded_greens(h, w, eta, mu, eps)
        for i, j in pairs:
            lines.append(f"{float(w)!r},{i},{j},{_fmt(complex(g[i, j]))}")
    return [(f"greens_{tag}.csv", "\n".join(lines) + "\n")]


def _run_conductivity(lattice, disorder, params, tag):
    h = assemble_hopping_matrix(lattice, disorder)
    vx = assemble_velocity_operator(h, axis=0)
    vy = assemble_velocity_operator(h, axis=min(1, lattice.ndim - 1))
    result = kubo_bastin_conductivity(
        h, vx, vy,
        beta=float(params.get("beta", 1.0)),
        mu=float(params.get("mu", 0.0)),
        eta=float(params.get("eta", 0.3)),
        eps=float(params.get("eps", 1e-6)),
        nodes=params.get("nodes"),
        method=params.get("method", "chebyshev"),
        trace_mode=params.get("trace_mode", "exact"),
        hutchinson_probes=int(params.get("hutchinson_probes", 32)),
        rng_key=int(params.get("rng_key", 0)),
    )
    payload = {
        "sigma_xy": [result.sigma_xy.real, result.sigma_xy.imag],
        "sigma_xx": [result.sigma_xx.real, result.sigma_xx.imag],
        "nodes": result.nodes,
        "window": result.window,
        "error_budget": result.error_budget,
        "meta": result.meta,
    }
    return [(f"conductivity_{tag}.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")]


def _run_verify_encoding(lattice, disorder, params, tag):
    from .blockenc import verify_plus_projection

    be = assemble_full_encoding(lattice, disorder)
    block = extract_block(be)
    if disorder.kind == "binary-alloy":
        reference = assemble_doubled_matrix(lattice, disorder).toarray()
    else:
        reference = assemble_hopping_matrix(lattice, disorder).toarray()
    deviation = float(np.abs(block - reference).max())
    report = {
        "block_deviation": deviation,
        "unitarity_defect": be.unitarity_defect(),
        "alpha": be.alpha,
        "ancilla_qubits": be.n_anc,
        "plus_projection": {
            str(d): verify_plus_projection(lattice, disorder, d)
            for d in range(int(params.get("max_power", 4)) + 1)
        },
    }
    return [(f"verify_{tag}.json", json.dumps(report, sort_keys=True, indent=2) + "\n")]


def _run_bqp_check(params, tag):
    text = params.get("circuit")
    if text is None and "circuit_file" in params:
        text = Path(params["circuit_file"]).read_text()
    if text is None:
        raise ConfigError("params: bqp-check needs circuit or circuit_file")
    circuit = parse_circuit(
        text, int(params["n_qubits"]), [int(b) for b in params.get("input_bits", [])]
    )
    construction = clock_unitary(circuit)
    verdict = ldos_decision(construction)
    payload = {
        "decision": verdict.decision,
        "value": verdict.value,
        "threshold": verdict.threshold,
        "epsilon": verdict.epsilon,
        "margin": verdict.margin,
        "alpha1_sq": verdict.alpha1_sq,
        "omega": verdict.omega,
        "eta": verdict.eta,
        "state_index": verdict.index,
        "period": construction.period,
        "clock_register_qubits": construction.clock_register_qubits,
    }
    return [(f"bqp_{tag}.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")]


def _run_benchmark(params, tag):
    dims = params.get("dimensions", [1, 2])
    out = []
    for d in dims:
        default_degrees = {1: [4, 8, 16, 32, 64], 2: [4, 8, 16, 32], 3: [2, 4, 8, 12]}
        degrees = params.get("degrees", default_degrees[int(d)])
        table = benchmark_lightcone_scaling(int(d), degrees,
                                            repetitions=int(params.get("repetitions", 5)))
        out.append((f"lightcone_d{d}_{tag}.csv", table.to_csv()))
    return out


def run_key(resolved: dict, key: int):
    task = resolved["task"]
    params = resolved["params"]
    tag = f"key{key}"
    if task == "bqp-check":
        return _run_bqp_check(params, tag)
    if task == "benchmark":
        return _run_benchmark(params, tag)
    lattice, disorder = build_model(resolved["model"], key)
    runner = {
        "rdm": _run_rdm,
        "ldos": _run_ldos,
        "momentum-ldos": _run_momentum_ldos,
        "greens": _run_greens,
        "conductivity": _run_conductivity,
        "verify-encoding": _run_verify_encoding,
    }[task]
    return runner(lattice, disorder, params, tag)


def run_experiment(config: dict, out_dir: str | Path | None = None, threads: int = 1) -> int:
    """Execute a resolved config; returns a process exit status."""
    resolved = resolve_config(config)
    out = Path(out_dir if out_dir is not None else resolved["output"])
    out.mkdir(parents=True, exist_ok=True)
    canonical = json.dumps(resolved, sort_keys=True)
    config_hash = hashlib.sha256(canonical.encode()).hexdigest()

    statuses: dict[int, dict] = {}

    def _one(key: int):
        try:
            files = run_key(resolved, key)
            for name, text in files:
                (out / name).write_text(text)
            return key, {"status": "ok", "files": [name for name, _ in files]}
        except Exception as exc:  # noqa: BLE001  (per-key isolation is the contract)
            return key, {"status": f"error: {exc}", "files": []}

    keys = resolved["keys"]
    if threads > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for key, status in pool.map(_one, keys):
                statuses[key] = status
    else:
        for key in keys:
            statuses[key] = _one(key)[1]

    manifest = {
        "config": resolved,
        "config_sha256": config_hash,
        "code_version": __version__,
        "keyed_hash": HASH_NAME,
        "runs": {str(k): statuses[k] for k in sorted(statuses)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    ok = sum(1 for s in statuses.values() if s["status"] == "ok")
    if ok == 0:
        return 3
    return 0


# ---------------------------------------------------------------------------
# command line

def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.keys:
        config["keys"] = [int(k) for k in args.keys.split(",")]
    return run_experiment(config, args.out, threads=args.threads)


def _cmd_verify(args) -> int:
    n = args.n
    config = {
        "version": 1,
        "model": {
            "lattice": {"dims": [n], "boundary": "periodic", "cutoff": 1.0},
            "disorder": {"kind": "binary-alloy", "p": 0.5, "t00": 1.0, "t11": 0.7,
                         "t01": 0.85, "gamma00": 0.5, "gamma11": 0.6, "gamma01": 0.55,
                         "precision_bits": 6},
        },
        "task": "verify-encoding",
        "params": {},
        "keys": [int(k) for k in args.keys.split(",")] if args.keys else [42],
        "output": args.out or "results",
    }
    status = run_experiment(config, args.out, threads=args.threads)
    out = Path(args.out or "results")
    for key in config["keys"]:
        report_path = out / f"verify_key{key}.json"
        if report_path.exists():
            report = json.loads(report_path.read_text())
            print(
                f"key {key}: block deviation {report['block_deviation']:.3e}, "
                f"unitarity defect {report['unitarity_defect']:.3e}"
            )
    return status


def _cmd_bench(args) -> int:
    config = {
        "version": 1,
        "task": "benchmark",
        "params": {"dimensions": [int(d) for d in args.dims.split(",")]},
        "keys": [0],
        "output": args.out or "results",
    }
    return run_experiment(config, args.out, threads=1)


def _cmd_bqp(args) -> int:
    config = {
        "version": 1,
        "task": "bqp-check",
        "params": {
            "circuit_file": args.circuit,
            "n_qubits": args.qubits,
            "input_bits": [int(b) for b in args.input] if args.input else [],
        },
        "keys": [0],
        "output": args.out or "results",
    }
    status = run_experiment(config, args.out, threads=1)
    out = Path(args.out or "results") / "bqp_key0.json"
    if out.exists():
        print(out.read_text().rstrip())
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dislat",
        description="quantum linear algebra for disordered lattices, desk scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--keys", help="comma-separated disorder keys")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--cap-qubits", type=int, default=None, dest="cap_qubits")
    p_run.set_defaults(func=_cmd_run)

    p_ver = sub.add_parser("verify", help="verify the block encoding on a stock model")
    p_ver.add_argument("--n", type=int, default=16)
    p_ver.add_argument("--keys", default=None)
    p_ver.add_argument("--out", default=None)
    p_ver.add_argument("--threads", type=int, default=1)
    p_ver.set_defaults(func=_cmd_verify)

    p_bench = sub.add_parser("bench", help="light-cone scaling benchmark")
    p_bench.add_argument("--dims", default="1,2")
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=_cmd_bench)

    p_bqp = sub.add_parser("bqp-check", help="clock-gadget decision for a circuit file")
    p_bqp.add_argument("circuit")
    p_bqp.add_argument("--qubits", type=int, required=True)
    p_bqp.add_argument("--input", default="")
    p_bqp.add_argument("--out", default=None)
    p_bqp.set_defaults(func=_cmd_bqp)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
