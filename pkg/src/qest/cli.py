"""Command-line front end: seeded runs from JSON configs to JSON/CSV reports.

Subcommands
    diag         exact, circuit, and shot estimates of one diagonal element
    mean         scenario A or B observable-mean estimation
    partition    scenario C weighted partition functions and trace ratios
    walk-gap     chain sweeps relating spectral gaps to walk phase gaps
    compile-mux  multiplexor expansion into an RY/CNOT gate file

Exit codes: 0 success, 2 config error, 3 numerical or domain error,
4 sampler failure. Every output embeds the RunManifest of the run; for the
line-oriented formats (gate files, CSV) the manifest rides in leading
comment lines starting with '#'.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import (
    compose_gate_unitary,
    expand_multiplexor,
    leakage_amplitude,
    multiplexor_block,
    run_tomography_circuit,
)
from .estimation import (
    ancilla_zero_probability,
    empirical_distribution,
    estimate_diag_element,
    sample_measurements,
)
from .numerics import (
    DomainError,
    FunctionSpec,
    HermitianOperator,
    UnitaryOperator,
    eigendecompose,
    exact_diag_element,
    matrix_from_json,
)
from .sampler import (
    MarkovChain,
    SamplerError,
    phase_gap,
    spectral_gap,
    szegedy_walk_operator,
)
from .scenarios import (
    EstimateReport,
    ScenarioSpec,
    choose_dt,
    choose_gamma,
    run_scenario_mean,
    run_scenario_partition,
    shift_nonnegative,
    signed_partition,
    split_signed_coeffs,
    trace_ratio,
)
from .synth import random_reversible_chain

# Reports include a closed-form oracle comparison up to this dimension.
ORACLE_DIM_CAP = 2 ** 6

VERIFY_ANGLE_CAP = 2 ** 10


class ConfigError(ValueError):
    """The run configuration is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class RunManifest:
    """Provenance block embedded in every output."""

    command: str
    config_path: str
    seed: int
    output_path: str
    timestamp: str
    tool_version: str

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config_path": self.config_path,
            "seed": self.seed,
            "output_path": self.output_path,
            "timestamp": self.timestamp,
            "tool_version": self.tool_version,
        }


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _load_config(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _resolve_matrix(value, base: Path) -> np.ndarray:
    """Accept an inline matrix object or a path to a JSON file holding one."""
    if isinstance(value, str):
        try:
            with open(base / value) as fh:
                value = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load matrix file {value}: {exc}") from exc
    if not isinstance(value, dict):
        raise ConfigError(f"expected a matrix object or path, got {type(value).__name__}")
    return matrix_from_json(value)


def _function_spec(value) -> FunctionSpec:
    if isinstance(value, dict):
        return FunctionSpec.from_json(value)
    if isinstance(value, (list, tuple)):
        return FunctionSpec.weighted_exponential(tuple(value), 0.0)
    if isinstance(value, str):
        return FunctionSpec.weighted_exponential(value, 0.0)
    raise ConfigError(f"cannot interpret function spec {value!r}")


def _observable(value, base: Path):
    """Spectral pair from either an explicit pair or a plain matrix."""
    if isinstance(value, dict) and "eigenvalues" in value:
        u = UnitaryOperator(_resolve_matrix(value["basis_changer"], base))
        vals = np.array(value["eigenvalues"], dtype=float)
        if vals.shape != (u.dim,):
            raise ConfigError("observable eigenvalue count does not match basis")
        from .numerics import SpectralDecomposition

        return SpectralDecomposition(vals, u)
    return eigendecompose(HermitianOperator(_resolve_matrix(value, base)))


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r}")
    return cfg[key]


def _scenario_from_config(cfg: dict, base: Path, seed: int, n_sam) -> ScenarioSpec:
    kind = _require(cfg, "kind")
    kwargs = {
        "kind": kind,
        "n_sam": int(n_sam if n_sam is not None else cfg.get("n_sam", 10000)),
        "seed": seed,
        "n_probe": int(cfg.get("n_probe", 4)),
        "dt": cfg.get("dt", "auto"),
        "gamma": cfg.get("gamma", "auto"),
        "beta": float(cfg.get("beta", 0.0)),
        "proposal": cfg.get("proposal", "single-bit-flip"),
        "burn_in": int(cfg.get("burn_in", 1000)),
        "thinning": int(cfg.get("thinning", 1)),
    }
    try:
        if kind == "A":
            kwargs["rho"] = HermitianOperator(_resolve_matrix(_require(cfg, "rho"), base))
            kwargs["observable"] = _observable(_require(cfg, "observable"), base)
        elif kind == "B":
            kwargs["hamiltonian"] = HermitianOperator(
                _resolve_matrix(_require(cfg, "hamiltonian"), base)
            )
            kwargs["observable"] = _observable(_require(cfg, "observable"), base)
        elif kind == "C":
            kwargs["hamiltonian"] = HermitianOperator(
                _resolve_matrix(_require(cfg, "hamiltonian"), base)
            )
            kwargs["g"] = _function_spec(_require(cfg, "g"))
        else:
            raise ConfigError(f"unknown scenario kind {kind!r}")
        return ScenarioSpec(**kwargs)
    except DomainError as exc:
        # Bad operator data inside a config file is a config problem.
        raise ConfigError(str(exc)) from exc


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj: dict, out_path: str | None) -> None:
    _emit(json.dumps(obj, indent=2, sort_keys=True) + "\n", out_path)


def _scenario_mode(flag_mode: str) -> str:
    return "exact-mu" if flag_mode == "exact" else "circuit-mu"


def cmd_diag(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).parent
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    manifest = RunManifest(
        "diag", args.config, seed, args.out or "-", _now(), __version__
    )

    try:
        a = HermitianOperator(_resolve_matrix(_require(cfg, "a"), base))
        if "v" in cfg:
            v = UnitaryOperator(_resolve_matrix(cfg["v"], base))
        else:
            v = UnitaryOperator(np.eye(a.dim))
        f = _function_spec(_require(cfg, "f"))
        x0 = int(_require(cfg, "x0"))
        n_probe = int(cfg.get("n_probe", 4))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    eigvals = np.linalg.eigvalsh(a.entries)
    dt = cfg.get("dt", "auto")
    dt = choose_dt(float(eigvals.max()), n_probe) if dt == "auto" else float(dt)
    gamma = cfg.get("gamma", "auto")
    gamma = choose_gamma(f, dt, n_probe) if gamma == "auto" else float(gamma)

    from .circuit import CircuitConfig

    circuit_cfg = CircuitConfig(n_probe=n_probe, dt=dt, gamma=gamma, f=f)
    exact_mu = exact_diag_element(a, v, f, x0)
    state = run_tomography_circuit(a, v, x0, circuit_cfg)
    circuit_mu = estimate_diag_element(ancilla_zero_probability(state), gamma)

    n_slots = circuit_cfg.n_slots
    leakage = []
    for lam in eigvals:
        k = lam * dt
        nearest = int(np.round(k * n_slots / (2 * np.pi))) % n_slots
        on_slot = abs(leakage_amplitude(k, nearest, n_slots)) ** 2
        leakage.append(
            {
                "eigenvalue": float(lam),
                "grid_position": float(k * n_slots / (2 * np.pi)),
                "nearest_slot": nearest,
                "off_slot_mass": float(1 - on_slot),
            }
        )

    n_sam = args.n_sam if args.n_sam is not None else int(cfg.get("n_sam", 10000))
    samples = sample_measurements(state, n_sam, seed)
    freq = empirical_distribution(samples, ("ancilla",)).frequency((0,))
    report = {
        "manifest": manifest.to_json(),
        "x0": x0,
        "dt": dt,
        "gamma": gamma,
        "n_probe": n_probe,
        "exact_mu": exact_mu,
        "circuit_mu": circuit_mu,
        "shots": {
            "n_sam": n_sam,
            "ancilla_zero_frequency": freq,
            "mu_hat": estimate_diag_element(freq, gamma),
        },
        "leakage": leakage,
    }
    _emit_json(report, args.out)
    return 0


def _thermal_density(h: HermitianOperator, beta: float) -> np.ndarray:
    dec = eigendecompose(h)
    weights = np.exp(-beta * dec.eigenvalues)
    u = dec.basis_changer.entries
    return (u * (weights / weights.sum())) @ u.conj().T


def _mean_oracle(spec: ScenarioSpec) -> float:
    u = spec.observable.basis_changer.entries
    omega = (u * spec.observable.eigenvalues) @ u.conj().T
    if spec.kind == "A":
        rho = spec.rho.entries
    else:
        rho = _thermal_density(spec.hamiltonian, spec.beta)
    return float(np.trace(omega @ rho).real)


def cmd_mean(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).parent
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    spec = _scenario_from_config(cfg, base, seed, args.n_sam)
    if spec.kind not in ("A", "B"):
        raise ConfigError("the mean command needs a kind A or B config")
    manifest = RunManifest(
        "mean", args.config, seed, args.out or "-", _now(), __version__
    )
    report = run_scenario_mean(spec, _scenario_mode(args.mode))
    out = {"manifest": manifest.to_json(), "report": report.to_json()}
    if spec.dim <= ORACLE_DIM_CAP:
        exact = _mean_oracle(spec)
        out["oracle"] = {
            "exact_value": exact,
            "abs_error": abs(report.point_estimate - exact),
        }
    _emit_json(out, args.out)
    return 0


def cmd_partition(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).parent
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    spec = _scenario_from_config(cfg, base, seed, args.n_sam)
    if spec.kind != "C":
        raise ConfigError("the partition command needs a kind C config")
    manifest = RunManifest(
        "partition", args.config, seed, args.out or "-", _now(), __version__
    )
    mode = _scenario_mode(args.mode)

    g_coeffs = _partition_coeffs(spec.g)
    signed = any(c < 0 for c in g_coeffs)
    if signed:
        g_plus, g_minus = split_signed_coeffs(g_coeffs)
        zg = signed_partition(spec, g_plus, g_minus, mode)
    else:
        zg = run_scenario_partition(spec, mode)

    one_spec = _replace_weight(spec, FunctionSpec.constant(1.0), seed_offset=2)
    z1 = run_scenario_partition(one_spec, mode)
    ratio = trace_ratio(zg, z1)

    out = {
        "manifest": manifest.to_json(),
        "z_g": zg.to_json(),
        "z_1": z1.to_json(),
        "trace_ratio": ratio.to_json(),
    }
    if spec.dim <= ORACLE_DIM_CAP:
        out["oracle"] = _partition_oracle(spec, g_coeffs)
    _emit_json(out, args.out)
    return 0


def _partition_coeffs(g: FunctionSpec):
    if g.family == "identity":
        return (0.0, 1.0)
    if g.family == "weighted_exponential" and g.beta == 0.0:
        return g.g_coeffs
    raise ConfigError("partition weights must be polynomial coefficient lists")


def _replace_weight(spec: ScenarioSpec, g: FunctionSpec, seed_offset: int) -> ScenarioSpec:
    return ScenarioSpec(
        kind="C",
        n_sam=spec.n_sam,
        seed=(spec.seed + seed_offset) % 2 ** 64,
        n_probe=spec.n_probe,
        dt=spec.dt,
        gamma=spec.gamma,
        beta=spec.beta,
        proposal=spec.proposal,
        burn_in=spec.burn_in,
        thinning=spec.thinning,
        hamiltonian=spec.hamiltonian,
        g=g,
    )


def _partition_oracle(spec: ScenarioSpec, g_coeffs) -> dict:
    shifted, shift = shift_nonnegative(spec.hamiltonian)
    energies = np.linalg.eigvalsh(shifted.entries)
    gvals = np.polyval(np.asarray(g_coeffs)[::-1], energies)
    boltz = np.exp(-spec.beta * energies)
    zg = float(np.sum(gvals * boltz))
    z1 = float(np.sum(boltz))
    return {
        "shift": shift,
        "z_g": zg,
        "z_1": z1,
        "trace_ratio": zg / z1,
    }


def _chains_from_config(cfg: dict, base: Path, seed: int):
    rows = []
    for item in cfg.get("chains", []):
        if isinstance(item, str):
            try:
                with open(base / item) as fh:
                    item = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot load chain file: {exc}") from exc
        if not isinstance(item, dict) or "transition" not in item:
            raise ConfigError("chain entries need a 'transition' matrix")
        rows.append(item)
    chains = []
    for item in rows:
        try:
            chains.append(MarkovChain.from_json(item))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    rand = cfg.get("random")
    if rand:
        n_chains = int(rand.get("n_chains", 10))
        dims = rand.get("dims")
        if dims is None:
            dims = [int(rand.get("dim", 4))] * n_chains
        proposal = rand.get("proposal", "uniform")
        rng = np.random.default_rng(int(rand.get("seed", seed)))
        for i in range(n_chains):
            chains.append(random_reversible_chain(rng, int(dims[i % len(dims)]), proposal))
    if not chains:
        raise ConfigError("walk-gap config names no chains")
    return chains


def cmd_walk_gap(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).parent
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    manifest = RunManifest(
        "walk-gap", args.config, seed, args.out or "-", _now(), __version__
    )
    chains = _chains_from_config(cfg, base, seed)

    lines = [f"# manifest: {json.dumps(manifest.to_json(), sort_keys=True)}"]
    lines.append("delta,phase_gap,ratio,status")
    for chain in chains:
        try:
            delta = spectral_gap(chain)
        except DomainError:
            lines.append(",,,non-reversible")
            continue
        try:
            if delta <= 0:
                raise DomainError("zero spectral gap")
            walk = szegedy_walk_operator(chain)
            gap = phase_gap(walk, chain)
        except DomainError:
            lines.append(",,,degenerate")
            continue
        ratio = float(gap / np.sqrt(2 * delta))
        lines.append(f"{delta!r},{float(gap)!r},{ratio!r},ok")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _load_angles(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read angles file {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        try:
            return [float(tok) for tok in text.split()]
        except ValueError as exc:
            raise ConfigError(f"angles file is neither JSON nor numbers: {exc}") from exc
    if isinstance(obj, dict):
        obj = obj.get("angles")
    if not isinstance(obj, list) or not obj:
        raise ConfigError("angles file must hold a nonempty list of numbers")
    return [float(x) for x in obj]


def cmd_compile_mux(args) -> int:
    angles = _load_angles(args.config)
    if len(angles) & (len(angles) - 1):
        raise ConfigError(f"angle count must be a power of two, got {len(angles)}")
    seed = args.seed if args.seed is not None else 0
    manifest = RunManifest(
        "compile-mux", args.config, seed, args.out or "-", _now(), __version__
    )
    seq = expand_multiplexor(angles)
    header = f"# manifest: {json.dumps(manifest.to_json(), sort_keys=True)}\n"
    header += f"# qubits: {seq.n_qubits} gates: {len(seq)}\n"
    _emit(header + seq.to_text(), args.out)
    if len(angles) <= VERIFY_ANGLE_CAP:
        deviation = float(
            np.abs(compose_gate_unitary(seq) - multiplexor_block(angles)).max()
        )
        sys.stderr.write(f"verification: max unitary deviation {deviation:.3e}\n")
    else:
        sys.stderr.write("verification: skipped (angle count above cap)\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qest",
        description="Seeded estimation runs for diagonal elements, observable "
        "means, partition functions, and walk gap diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in [
        ("diag", cmd_diag),
        ("mean", cmd_mean),
        ("partition", cmd_partition),
        ("walk-gap", cmd_walk_gap),
        ("compile-mux", cmd_compile_mux),
    ]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the run config")
        p.add_argument("--seed", type=int, default=None, help="64-bit seed (default 0)")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--mode", choices=("exact", "shots"), default="exact")
        p.add_argument("--n-sam", type=int, default=None, dest="n_sam")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        sys.stderr.write("error: seed must fit in 64 bits\n")
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except DomainError as exc:
        sys.stderr.write(f"domain error: {exc}\n")
        return 3
    except SamplerError as exc:
        sys.stderr.write(f"sampler error: {exc}\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
