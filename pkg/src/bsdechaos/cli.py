"""Command-line front end.

Exit codes: 0 success, 2 usage or config error, 3 validation failure,
4 capacity error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .calculus import (THETAS, TerminalSpec, contraction_constant, contraction_constant_minform,
                       linear_generator, make_standard_data, validate_standard_data)
from .config import ExperimentConfig, load_config
from .drivers import make_donsker_driver, make_jump_driver, make_mixed_driver
from .engine import Backend, solution_json, solve_mckean_vlasov, solve_mean_field
from .errors import CapacityError, ConfigError, InvalidArgument, InsufficientMoments, ValidationFailure
from .lab import DataSequenceSpec, build_data_sequence, chaos_sweep, double_sweep, stability_sweep
from .measures import EmpiricalMeasure, fg_bound, fg_moments, fg_sample_size, quantile_grid

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_CAPACITY = 0, 2, 3, 4

COMMANDS = ("validate", "constants", "solve-mv", "solve-mf", "chaos-sweep", "stability-sweep",
            "double-sweep", "fg-bound", "fg-sample-size")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bsdechaos", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="experiment config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int)
        s.add_argument("--out", help="output path (CSV for sweeps, JSON otherwise)")
        if name == "constants":
            s.add_argument("--beta", type=float, nargs="+", default=[240.0])
            s.add_argument("--phi", type=float, nargs="+", default=[0.0])
        if name in ("fg-sample-size", "fg-bound"):
            s.add_argument("--eps", type=float)
            s.add_argument("--cd", type=float)
            s.add_argument("--r0", type=float)
            s.add_argument("--n", type=int)
            s.add_argument("--law", choices=("uniform", "dirac", "normal", "compact"))
            s.add_argument("--compact", action="store_true", help="print a single summary line")
        if name in ("validate", "solve-mv", "solve-mf", "chaos-sweep"):
            s.add_argument("--k", type=int)
            s.add_argument("--beta-hat", type=float)
        if name == "solve-mf":
            s.add_argument("--players", type=int)
        if name == "solve-mv" or name == "solve-mf":
            s.add_argument("--backend", choices=("tree", "lattice", "ensemble", "additive"))
        if name in ("chaos-sweep", "double-sweep"):
            s.add_argument("--reps", type=int)
        if name == "stability-sweep":
            s.add_argument("--reps", type=int)
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for flag, key in (("seed", "run.seed"), ("threads", "run.threads"), ("out", "run.out"),
                      ("k", "driver.k"), ("beta_hat", "run.beta_hat"), ("players", "sweep.players"),
                      ("backend", "run.backend"), ("reps", "sweep.reps"), ("eps", "fg.eps"),
                      ("cd", "fg.cd"), ("r0", "fg.r0"), ("n", "fg.n"), ("law", "fg.law")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg.set(key, v)
    if cfg["run.threads"] < 1:
        raise ConfigError("threads must be at least 1")
    return cfg


def _driver(cfg: ExperimentConfig, k: int):
    mode = cfg["driver.mode"]
    T = cfg["driver.horizon"]
    if mode == "rademacher":
        return make_donsker_driver(k, T, "rademacher")
    if mode == "gaussian_coupled":
        ks = cfg["driver.skeleton_steps"] or None
        return make_donsker_driver(k, T, "gaussian_coupled", ks)
    if mode == "jump":
        return make_jump_driver(k, T, cfg["driver.mark_scale"])
    if mode == "mixed":
        return make_mixed_driver(k, T, cfg["driver.jump_share"])
    raise ConfigError(f"unknown driver mode {mode!r}")


def _generator_params(cfg) -> dict:
    return {n: cfg[f"generator.{n}"] for n in ("a", "bz", "bu", "e", "c0")}


def _terminal(cfg) -> TerminalSpec:
    return TerminalSpec(cfg["terminal.payoff"], cfg["terminal.kappa"], cfg["terminal.gamma"])


def _theta(cfg):
    name = cfg["terminal.theta"]
    if name not in THETAS:
        raise ConfigError(f"unknown theta family {name!r}")
    return THETAS[name]


def _standard_data(cfg, k=None):
    return make_standard_data(_driver(cfg, k or cfg["driver.k"]), linear_generator(**_generator_params(cfg)),
                              _terminal(cfg), _theta(cfg), cfg["run.beta_hat"])


def _sequence_spec(cfg) -> DataSequenceSpec:
    mode = cfg["driver.mode"]
    return DataSequenceSpec(ks=tuple(cfg["driver.ks"]), mode=mode, horizon=cfg["driver.horizon"],
                            skeleton_steps=cfg["driver.skeleton_steps"] or None,
                            jump_share=cfg["driver.jump_share"], mark_scale=cfg["driver.mark_scale"],
                            generator=_generator_params(cfg), terminal=_terminal(cfg),
                            theta=cfg["terminal.theta"], beta_hat=cfg["run.beta_hat"])


def _backend(cfg) -> Backend:
    return Backend(cfg["run.backend"], cfg["run.max_nodes"], cfg["run.particles"], cfg["run.seed"],
                   threads=cfg["run.threads"])


def _emit(text: str, out: str, stream) -> None:
    if out:
        Path(out).write_text(text)
    else:
        stream.write(text if text.endswith("\n") else text + "\n")


def _emit_sweep(cm, out: str, stream) -> None:
    if out:
        Path(out).write_text(cm.to_csv())
        Path(str(out) + ".summary.json").write_text(cm.summary_json() + "\n")
    else:
        stream.write(cm.to_csv())


def _law(cfg) -> EmpiricalMeasure:
    name, m = cfg["fg.law"], cfg["fg.atoms"]
    if name == "dirac":
        return EmpiricalMeasure.uniform(np.zeros((1, 1)))
    if name in ("uniform", "compact"):
        return quantile_grid(lambda u: u, m)
    if name == "normal":
        return quantile_grid(norm.ppf, m)
    raise ConfigError(f"unknown law {name!r}")


def _cmd_constants(args, cfg, out):
    rows = []
    lines = []
    for beta in args.beta:
        for phi in args.phi:
            M = contraction_constant(beta, phi)
            Mmin, gstar = contraction_constant_minform(beta, phi)
            rel = abs(M - Mmin) / M
            rows.append({"beta": beta, "phi": phi, "M_tilde": M, "M_tilde_minform": Mmin, "argmin_gamma": gstar,
                         "relative_discrepancy": rel, "below_quarter": M < 0.25, "below_third": M < 1 / 3})
            lines.append(f"beta={beta:g} phi={phi:g} M_tilde={M:.10f} minform={Mmin:.10f} rel_diff={rel:.2e} "
                         f"M<1/4:{'yes' if M < 0.25 else 'no'} 3M<1:{'yes' if 3 * M < 1 else 'no'}"
                         + ("" if rel < 1e-6 else " DISCREPANCY"))
    _emit("\n".join(lines) if not out else json.dumps(rows, indent=2), out, sys.stdout)
    return EXIT_OK


def _cmd_fg_sample_size(args, cfg, out):
    mom = fg_moments(_law(cfg)) if cfg["fg.law"] != "compact" else None
    rep = fg_sample_size(cfg["fg.eps"], cfg["fg.cd"], cfg["fg.r0"], mom, cfg["fg.dim"])
    text = (f"ell1={rep.ell1} ell2={rep.ell2} N={rep.N_eps}" if args.compact else rep.to_json())
    _emit(text, out, sys.stdout)
    return EXIT_OK


def _cmd_fg_bound(args, cfg, out):
    res = fg_bound(_law(cfg), cfg["fg.n"], cfg["fg.cd"])
    res["N"] = cfg["fg.n"]
    res["law"] = cfg["fg.law"]
    text = (f"N={res['N']} bound={res['bound']:.6g} remainder={res['remainder']:.3g} (up to C_d)"
            if args.compact else json.dumps(res, indent=2, sort_keys=True))
    _emit(text, out, sys.stdout)
    return EXIT_OK


def _cmd_validate(args, cfg, out):
    sd = _standard_data(cfg)
    rep = validate_standard_data(sd)
    _emit(rep.to_json(), out, sys.stdout)
    if not rep.passed:
        sys.stderr.write(f"validation failed: {', '.join(rep.failed())}\n")
        return EXIT_VALIDATION
    return EXIT_OK


def _cmd_solve(args, cfg, out, mean_field: bool):
    sd = _standard_data(cfg)
    backend = _backend(cfg)
    tol = cfg["run.tol"] or None
    if mean_field:
        sols, st = solve_mean_field(sd, cfg["sweep.players"], tol, cfg["run.q_max"], backend)
    else:
        sol, st = solve_mckean_vlasov(sd, tol, cfg["run.q_max"], backend)
        sols = [sol]
    _emit(solution_json(sols, st), out, sys.stdout)
    return EXIT_OK


def _cmd_chaos(args, cfg, out):
    sd = _standard_data(cfg)
    rep = validate_standard_data(sd)
    if not rep.passed:
        raise ValidationFailure(f"assumption(s) {', '.join(rep.failed())} failed", rep)
    cm = chaos_sweep(sd, cfg["sweep.Ns"], cfg["sweep.reps"], cfg["run.seed"], cfg["run.threads"],
                     pool_size=cfg["sweep.pool"] or None)
    _emit_sweep(cm, out, sys.stdout)
    return EXIT_OK


def _cmd_stability(args, cfg, out):
    seq = build_data_sequence(_sequence_spec(cfg))
    cm = stability_sweep(seq, cfg["sweep.reference_k"] or None, seed=cfg["run.seed"],
                         reps=cfg["sweep.reps"], n_paths=cfg["sweep.n_paths"], threads=cfg["run.threads"],
                         mean_field_N=cfg["sweep.mean_field_N"] or None)
    _emit_sweep(cm, out, sys.stdout)
    return EXIT_OK


def _cmd_double(args, cfg, out):
    seq = build_data_sequence(_sequence_spec(cfg))
    cm = double_sweep(seq, cfg["sweep.Ns"], cfg["sweep.reps"], cfg["run.seed"], cfg["run.threads"],
                      pool_size=cfg["sweep.pool"] or None)
    _emit_sweep(cm, out, sys.stdout)
    return EXIT_OK


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            sys.stderr.write(parser.format_usage())
            return EXIT_CONFIG
        cfg = _config(args)
        out = cfg["run.out"]
        cmd = args.command
        if cmd == "constants":
            return _cmd_constants(args, cfg, out)
        if cmd == "fg-sample-size":
            return _cmd_fg_sample_size(args, cfg, out)
        if cmd == "fg-bound":
            return _cmd_fg_bound(args, cfg, out)
        if cmd == "validate":
            return _cmd_validate(args, cfg, out)
        if cmd == "solve-mv":
            return _cmd_solve(args, cfg, out, False)
        if cmd == "solve-mf":
            return _cmd_solve(args, cfg, out, True)
        if cmd == "chaos-sweep":
            return _cmd_chaos(args, cfg, out)
        if cmd == "stability-sweep":
            return _cmd_stability(args, cfg, out)
        return _cmd_double(args, cfg, out)
    except (ConfigError, InvalidArgument, InsufficientMoments) as exc:
        sys.stderr.write(f"error: {exc}\n")
        if isinstance(exc, ConfigError) and "invalid choice" in str(exc):
            sys.stderr.write(parser.format_usage())
        return EXIT_CONFIG
    except ValidationFailure as exc:
        sys.stderr.write(f"validation failed: {exc}\n")
        if exc.report is not None:
            sys.stdout.write(exc.report.to_json() + "\n")
        return EXIT_VALIDATION
    except CapacityError as exc:
        sys.stderr.write(f"capacity error: {exc}\n")
        return EXIT_CAPACITY


def main() -> None:
    sys.exit(run())
