"""Command-line sweeps that write CSV (and SVG) artifacts.

Each subcommand reads one JSON document (``--config PATH`` or ``-`` for
stdin); ``--seed``, ``--trials`` and ``--out`` override the matching
top-level fields. Exit status is 0 on success, 2 for configuration errors
and 3 when a run detects a numerical inconsistency.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .extraction import (
    ExtractionConfig,
    average_fisher,
    exact_abort_probability,
    exact_outcome_table,
    fisher_information,
    outcome_probability,
    sector_probability,
)
from .game import AncillaSpec, exact_win_probability, monte_carlo_win
from .noise import (
    NoiseParams,
    NumericalValidationError,
    closed_form_pwin,
    lindblad_integrator_oracle,
    noisy_ancilla,
    noisy_win_probability,
)
from .resources import cost_comparison, decode_probability_curve, entanglement_audit
from .seeding import GENERATOR, MAX_SEED, derive_seed
from .svg import line_chart

COMMON_FIELDS = {"seed": 0, "trials": None, "output_path": None}
SIM_CHECK_TOL = 1e-10
CLOSED_FORM_TOL = 1e-9


class ConfigError(ValueError):
    pass


@dataclass
class SweepResult:
    header: list[str]
    rows: list[list[Any]]
    seed: int
    extra: dict[str, "SweepResult"] = field(default_factory=dict)

    def to_csv(self, reproducible: bool = False) -> str:
        meta = [f"#seed={self.seed}", f"#version={__version__}", f"#generator={GENERATOR}"]
        if not reproducible:
            meta.append("#timestamp=" + datetime.now(timezone.utc).isoformat(timespec="seconds"))
        lines = [",".join(meta), ",".join(self.header)]
        lines += [",".join(_fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _as_list(value, name: str) -> list:
    out = value if isinstance(value, list) else [value]
    if not out:
        raise ConfigError(f"{name}: empty sweep list")
    return out


def _int(value, name: str, lo: int | None = None, hi: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ConfigError(f"{name}: {value} outside [{lo}, {hi}]")
    return value


def _float(value, name: str, lo: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{name}: must be >= {lo}, got {value}")
    return float(value)


def _complex(value, name: str) -> complex:
    if isinstance(value, list) and len(value) == 2:
        return complex(_float(value[0], name), _float(value[1], name))
    return complex(_float(value, name))


def _load(args, defaults: dict) -> dict:
    if args.config is None:
        raw = {}
    else:
        try:
            text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
            raw = json.loads(text)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    allowed = {**COMMON_FIELDS, **defaults}
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown field")
    cfg = {**allowed, **raw}
    for key, flag in (("seed", args.seed), ("trials", args.trials), ("output_path", args.out)):
        if flag is not None:
            cfg[key] = flag
    cfg["seed"] = _int(cfg["seed"], "seed", 0, MAX_SEED)
    if cfg["trials"] is not None:
        cfg["trials"] = _int(cfg["trials"], "trials")
    if cfg["output_path"] is not None and not isinstance(cfg["output_path"], str):
        raise ConfigError(f"output_path: expected a string, got {cfg['output_path']!r}")
    return cfg


def _ancilla(spec, D: int, K: int, name: str) -> AncillaSpec:
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{name}: expected an object with a 'kind' field")
    unknown = sorted(set(spec) - {"kind", "coeffs"})
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown field")
    kind = spec["kind"]
    try:
        if kind == "maximal":
            return AncillaSpec.maximal(D, K)
        if kind == "product":
            return AncillaSpec.product(D, K)
        if kind == "schmidt":
            coeffs = [_complex(c, f"{name}.coeffs") for c in _as_list(spec.get("coeffs", []), f"{name}.coeffs")]
            if len(coeffs) != D:
                raise ConfigError(f"{name}.coeffs: {len(coeffs)} coefficients for D={D}")
            return AncillaSpec.schmidt(coeffs, K)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{name}: {exc}") from exc
    raise ConfigError(f"{name}.kind: unknown ancilla kind {kind!r}")


def _dim(value, N: int, name: str) -> int:
    if value == "auto":
        return N + 1
    return _int(value, name, 2)


CLOCK_DEFAULTS = {
    "N": [1],
    "D": ["auto"],
    "K": [2],
    "ancillas": [{"kind": "maximal"}],
    "modes": ["exact"],
    "grid": 32,
    "allow_oversized": False,
}


def cmd_clock_game(cfg: dict) -> SweepResult:
    grid = _int(cfg["grid"], "grid", 1)
    Ns = [_int(v, "N", 1) for v in _as_list(cfg["N"], "N")]
    Ds = _as_list(cfg["D"], "D")
    Ks = [_int(v, "K", 2) for v in _as_list(cfg["K"], "K")]
    ancillas = _as_list(cfg["ancillas"], "ancillas")
    modes = _as_list(cfg["modes"], "modes")
    for m in modes:
        if m not in ("exact", "monte_carlo"):
            raise ConfigError(f"modes: unknown mode {m!r}")
    if "monte_carlo" in modes and (cfg["trials"] is None or cfg["trials"] < 1):
        raise ConfigError(f"trials: monte_carlo mode needs trials >= 1, got {cfg['trials']}")
    oversized = bool(cfg["allow_oversized"])

    # validate every grid point before running any of them
    points = []
    for N, Dv, K in itertools.product(Ns, Ds, Ks):
        D = _dim(Dv, N, "D")
        if N > D - 1 and not oversized:
            raise ConfigError(f"D: N={N} needs D >= {N + 1}, got {D}")
        for i, a in enumerate(ancillas):
            anc = _ancilla(a, D, K, f"ancillas[{i}]")
            for mode in modes:
                points.append((N, D, K, anc, mode))

    rows = []
    for idx, (N, D, K, anc, mode) in enumerate(points):
        if mode == "exact":
            p, err = exact_win_probability(N, anc, grid=grid, allow_oversized=oversized), 0.0
        else:
            p, err = monte_carlo_win(
                N, anc, cfg["trials"], grid=grid, seed=derive_seed(cfg["seed"], idx), allow_oversized=oversized
            )
        if not -1e-9 <= p <= 1 + 1e-9:
            raise NumericalValidationError(f"win probability {p} outside [0, 1]")
        rows.append([N, D, K, anc.label(), mode, float(p), float(err)])
    return SweepResult(["N", "D", "K", "ancilla", "mode", "p_win", "stderr"], rows, cfg["seed"])


NOISE_DEFAULTS = {
    "D": [2],
    "dtGamma1": [0.0, 0.001, 0.01],
    "dtGamma2": [0.0],
    "n": 1,
    "oracle": False,
    "oracle_steps": 200,
}


def cmd_noise_sweep(cfg: dict) -> SweepResult:
    Ds = [_int(v, "D", 2) for v in _as_list(cfg["D"], "D")]
    g1s = [_float(v, "dtGamma1", 0.0) for v in _as_list(cfg["dtGamma1"], "dtGamma1")]
    g2s = [_float(v, "dtGamma2", 0.0) for v in _as_list(cfg["dtGamma2"], "dtGamma2")]
    n = _int(cfg["n"], "n", 0)
    oracle = cfg["oracle"]
    if not isinstance(oracle, bool):
        raise ConfigError(f"oracle: expected true or false, got {oracle!r}")
    steps = _int(cfg["oracle_steps"], "oracle_steps", 1)
    header = ["D", "dtGamma1", "dtGamma2", "p_win_sim", "p_win_closed", "abs_diff"]
    if oracle:
        header += ["p_win_oracle", "oracle_diff"]
    rows = []
    for D, g1, g2 in itertools.product(Ds, g1s, g2s):
        # rates are given as products with delta_t, so delta_t is fixed at 1
        params = NoiseParams.uniform(D, 1.0, g1, g2)
        sim = noisy_win_probability(D, n % D, noisy_ancilla(D, params))
        closed = closed_form_pwin(D, params)
        diff = abs(sim - closed)
        if diff > CLOSED_FORM_TOL:
            raise NumericalValidationError(f"D={D}: simulated {sim} vs closed form {closed}")
        row = [D, g1, g2, sim, closed, diff]
        if oracle:
            exact = noisy_win_probability(D, n % D, lindblad_integrator_oracle(D, params, steps=steps))
            row += [exact, abs(exact - sim)]
        rows.append(row)
    return SweepResult(header, rows, cfg["seed"])


FISHER_DEFAULTS = {"n_min": 1, "n_max": 40, "grid": 256, "simulate": False, "svg": None}


def _simulation_check(n: int) -> None:
    for phi in 2 * np.pi * np.arange(16) / 16:
        table = exact_outcome_table(ExtractionConfig(n, 0.0, phi))
        for k in range(n):
            for bit in (0, 1):
                expected = sector_probability(n, k) * outcome_probability(n, k, phi, 0.0, bit)
                if abs(table[k, bit] - expected) > SIM_CHECK_TOL:
                    raise NumericalValidationError(f"n={n}, k={k}: simulated {table[k, bit]} vs {expected}")
    if abs(exact_abort_probability(ExtractionConfig(n)) - 2 / 2 ** (n + 1)) > SIM_CHECK_TOL:
        raise NumericalValidationError(f"n={n}: abort mass mismatch")


def cmd_fisher_curve(cfg: dict) -> SweepResult:
    lo = _int(cfg["n_min"], "n_min", 1)
    hi = _int(cfg["n_max"], "n_max", lo, 200)
    grid = _int(cfg["grid"], "grid", 64)
    simulate = cfg["simulate"]
    if not isinstance(simulate, bool):
        raise ConfigError(f"simulate: expected true or false, got {simulate!r}")
    if simulate and hi > 12:
        raise ConfigError(f"n_max: simulation cross-check limited to n <= 12, got {hi}")
    rows = []
    for n in range(lo, hi + 1):
        if simulate:
            _simulation_check(n)
        rows.append([n, average_fisher(n, grid), fisher_information(n, np.pi / 2).total])
    return SweepResult(["n", "avg_fisher", "fisher_at_pi_2"], rows, cfg["seed"])


AUDIT_DEFAULTS = {
    "N": [1, 2, 3],
    "D": "auto",
    "ancillas": [{"kind": "maximal"}, {"kind": "product"}],
    "costs": [[5, 1023]],
}


def cmd_audit(cfg: dict) -> SweepResult:
    Ns = [_int(v, "N", 1) for v in _as_list(cfg["N"], "N")]
    ancillas = _as_list(cfg["ancillas"], "ancillas")
    costs = _as_list(cfg["costs"], "costs")
    pairs = []
    for i, c in enumerate(costs):
        if not isinstance(c, list) or len(c) != 2:
            raise ConfigError(f"costs[{i}]: expected [M, N]")
        M, N = _int(c[0], f"costs[{i}].M", 2), _int(c[1], f"costs[{i}].N", 1)
        pairs.append((M, N))
    rows = []
    for N in Ns:
        D = _dim(cfg["D"], N, "D")
        for i, a in enumerate(ancillas):
            anc = _ancilla(a, D, 2, f"ancillas[{i}]")
            report = entanglement_audit(anc, N)
            if anc.kind == "schmidt":
                decode = decode_probability_curve(anc.coeffs)
            elif anc.kind == "maximal":
                decode = decode_probability_curve(np.full(D, D**-0.5))
            else:
                decode = decode_probability_curve(np.eye(D)[0])
            rows.append([N, D, report.measured_entropy, report.bound, report.satisfied, decode])
    cost_rows = []
    for M, N in pairs:
        c = cost_comparison(M, N)
        cost_rows.append([c.M, c.N, c.gottesman_qubits, c.clockgame_qubits])
    result = SweepResult(["N", "D", "entropy_ebits", "bound_ebits", "satisfied", "decode_prob"], rows, cfg["seed"])
    result.extra["costs"] = SweepResult(["M", "N", "gottesman", "clockgame"], cost_rows, cfg["seed"])
    return result


COMMANDS = {
    "clock-game": (cmd_clock_game, CLOCK_DEFAULTS),
    "noise-sweep": (cmd_noise_sweep, NOISE_DEFAULTS),
    "fisher-curve": (cmd_fisher_curve, FISHER_DEFAULTS),
    "audit": (cmd_audit, AUDIT_DEFAULTS),
}


def _u64(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64-1], got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clockgame", description="Clock-game simulation sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON config file, or - for stdin")
        p.add_argument("--seed", type=_u64, metavar="U64")
        p.add_argument("--trials", type=int, metavar="N")
        p.add_argument("--out", metavar="PATH", help="CSV output path (default: stdout)")
        p.add_argument("--reproducible", action="store_true", help="omit the timestamp from CSV metadata")
    return parser


def _write_outputs(command: str, cfg: dict, result: SweepResult, reproducible: bool) -> None:
    out = cfg["output_path"]
    csv = result.to_csv(reproducible)
    extras = {k: v.to_csv(reproducible) for k, v in result.extra.items()}
    svg = None
    if command == "fisher-curve":
        svg = line_chart(
            [r[0] for r in result.rows],
            [r[1] for r in result.rows],
            title="Average Fisher information per ancilla photon",
            xlabel="ancilla pairs n",
            ylabel="average Fisher information",
        )
    if out is None:
        sys.stdout.write(csv)
        for text in extras.values():
            sys.stdout.write("\n" + text)
    else:
        path = Path(out)
        path.write_text(csv, encoding="utf-8")
        for key, text in extras.items():
            path.with_name(f"{path.stem}_{key}.csv").write_text(text, encoding="utf-8")
        if svg is not None and cfg.get("svg") is None:
            path.with_suffix(".svg").write_text(svg, encoding="utf-8")
    if svg is not None and cfg.get("svg") is not None:
        Path(cfg["svg"]).write_text(svg, encoding="utf-8")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    func, defaults = COMMANDS[args.command]
    try:
        cfg = _load(args, defaults)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            result = func(cfg)
        _write_outputs(args.command, cfg, result, args.reproducible)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalValidationError as exc:
        print(f"numerical validation failed: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"config error: output_path: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
