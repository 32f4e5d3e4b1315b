"""Batch front door: ``python3 -m posbvp --command interval --f logistic --r 0.01``.

Every run writes ``report.json`` into ``--out``; the report embeds the fully
resolved configuration, so feeding that block back through ``--config``
reproduces it.  Exit codes: 0 ok, 1 hypothesis violation, 2 numerical
non-convergence, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import shooting, variational
from .discrete_space import write_csv
from .energy import EnergyContext
from .errors import (
    Diverged,
    HypothesisViolation,
    NoNontrivialSolution,
    NotConverged,
    PosBVPError,
    Resonance,
)
from .function_model import (
    DEFAULT_PHI_TOL,
    hypothesis_report,
    parse_nonlinearity,
    parse_weight,
    taylor_certificate,
)

EXIT_OK, EXIT_HYPOTHESIS, EXIT_NUMERICS, EXIT_CONFIG = 0, 1, 2, 3
COMMANDS = ("check", "interval", "solve", "sweep", "oracle")

TOLERANCES = {
    "phi_tol": DEFAULT_PHI_TOL,
    "gap_tol": variational.GAP_TOL,
    "eps_edge": variational.EPS_EDGE,
    "eps_abs": variational.EPS_ABS,
    "fp_tol": variational.FP_TOL,
}

DEFAULTS = {
    "command": None,
    "f": "logistic",
    "alpha": "constant:1",
    "r": 0.01,
    "n": 511,
    "a": None,
    "lambda": None,
    "lambda_range": None,
    "k": 5,
    "seed": 0,
    "restarts": variational.DEFAULT_RESTARTS,
    "n_steps": shooting.DEFAULT_STEPS,
    "skip_hypotheses": False,
    "out": "out",
    "tolerances": {},
}

# long names accepted in config files
ALIASES = {"f_spec": "f", "alpha_spec": "alpha", "out_path": "out"}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="posbvp", description="Small-energy positive solutions of -u'' = lam alpha(t) f(u).")
    p.add_argument("--config", help="JSON file of run settings; flags override it")
    p.add_argument("--command", choices=COMMANDS)
    p.add_argument("--r", type=float)
    p.add_argument("--n", type=int, help="interior grid nodes")
    p.add_argument("--a", type=float, help="upper end of the range where F/xi^2 must be non-increasing")
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--lambda-range", help="LO:HI:K")
    p.add_argument("--k", type=int, help="number of lambda samples for solve")
    p.add_argument("--f", help="FAMILY[:PARAMS], e.g. linear:1 or tabulated:f.csv")
    p.add_argument("--alpha", help="constant[:V] or tabulated:PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--n-steps", type=int, help="RK4 steps for the shooting oracle")
    p.add_argument("--out", help="output directory")
    p.add_argument("--skip-hypotheses", action="store_true", default=None)
    return p


def _parse_range(value):
    if value is None:
        return None
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"lambda_range must be LO:HI:K, got {value!r}")
        value = parts
    try:
        lo, hi, count = float(value[0]), float(value[1]), int(value[2])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad lambda_range {value!r}") from exc
    if not lo < hi:
        raise ConfigError("lambda_range needs lo < hi")
    if count < 1:
        raise ConfigError("lambda_range count must be positive")
    return [lo, hi, count]


def resolve_config(argv=None):
    """Merge defaults, the optional JSON file and command-line flags."""
    args = build_parser().parse_args(argv)
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in loaded.items():
            key = ALIASES.get(key, key)
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r}")
            cfg[key] = value
    flags = {
        "command": args.command, "r": args.r, "n": args.n, "a": args.a, "lambda": args.lambda_,
        "lambda_range": args.lambda_range, "k": args.k, "f": args.f, "alpha": args.alpha,
        "seed": args.seed, "restarts": args.restarts, "n_steps": args.n_steps, "out": args.out,
        "skip_hypotheses": args.skip_hypotheses,
    }
    cfg.update({k: v for k, v in flags.items() if v is not None})
    tol = dict(TOLERANCES)
    for key, value in (cfg["tolerances"] or {}).items():
        if key not in TOLERANCES:
            raise ConfigError(f"unknown tolerance {key!r}")
        tol[key] = float(value)
    cfg["tolerances"] = tol
    cfg["lambda_range"] = _parse_range(cfg["lambda_range"])
    if cfg["command"] not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}")
    try:
        cfg["r"] = float(cfg["r"])
        cfg["n"] = int(cfg["n"])
        cfg["seed"] = int(cfg["seed"])
        cfg["k"] = int(cfg["k"])
        cfg["restarts"] = int(cfg["restarts"])
        cfg["n_steps"] = int(cfg["n_steps"])
        cfg["a"] = None if cfg["a"] is None else float(cfg["a"])
        cfg["lambda"] = None if cfg["lambda"] is None else float(cfg["lambda"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg["skip_hypotheses"] = bool(cfg["skip_hypotheses"])
    if not cfg["r"] > 0:
        raise ConfigError("r must be positive")
    if cfg["n"] < 16:
        raise ConfigError("n must be at least 16")
    if cfg["k"] < 1:
        raise ConfigError("k must be positive")
    return cfg


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_report(out, payload):
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_clean(payload), sort_keys=True, indent=2) + "\n"
    (out / "report.json").write_text(text)


class Run:
    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.tol = cfg["tolerances"]
        try:
            self.f = parse_nonlinearity(cfg["f"])
            self.alpha = parse_weight(cfg["alpha"])
        except (ValueError, KeyError, OSError) as exc:
            raise ConfigError(f"bad nonlinearity or weight: {exc}") from exc

    @property
    def a(self):
        return self.cfg["a"] if self.cfg["a"] is not None else math.sqrt(self.cfg["r"])

    def context(self):
        return EnergyContext.build(self.f, self.alpha, self.cfg["n"])

    def estimate(self, ctx):
        t = self.tol
        return variational.estimate(ctx, self.cfg["r"], restarts=self.cfg["restarts"], seed=self.cfg["seed"],
                                    eps_edge=t["eps_edge"], eps_abs=t["eps_abs"], gap_tol=t["gap_tol"])

    def hypotheses(self):
        rep = hypothesis_report(self.f, self.a, self.tol["phi_tol"])
        cert = taylor_certificate(self.f)
        body = rep.to_dict()
        body["taylor_k"] = cert.k
        body["taylor_status"] = cert.status
        return rep, body

    def require_hypotheses(self):
        rep, body = self.hypotheses()
        if not rep.nonincreasing:
            raise HypothesisViolation(f"F(xi)/xi^2 is not non-increasing on ]0, {self.a}]")
        if self.cfg["r"] > self.a ** 2:
            raise HypothesisViolation(f"r = {self.cfg['r']} exceeds a^2 = {self.a ** 2}")
        return body

    # -- commands --

    def check(self):
        rep, body = self.hypotheses()
        if not rep.nonincreasing:
            self.partial = {"hypotheses": body}
            raise HypothesisViolation(f"F(xi)/xi^2 is not non-increasing on ]0, {self.a}]")
        return {"hypotheses": body}

    def interval(self):
        est = self.estimate(self.context())
        self._write_eta(est)
        if not est.converged:
            raise NotConverged("ball or sphere ascent did not converge")
        return {"estimates": est.to_dict()}

    def solve(self):
        body = {"hypotheses": None if self.cfg["skip_hypotheses"] else self.require_hypotheses()}
        ctx = self.context()
        if self.cfg["lambda"] is not None:
            est = self.estimate(ctx)
            lam = self.cfg["lambda"]
            try:
                rep = variational.solve_at(ctx, lam, self.cfg["r"], est.profile, fp_tol=self.tol["fp_tol"])
            except NoNontrivialSolution as exc:
                body.update(estimates=est.to_dict(), solutions=[], trivial={"lambda": lam, "message": str(exc)})
                self._write_solutions([])
                return body
            self._attach_oracle(ctx, [rep])
            solutions = [rep]
            body.update(estimates=est.to_dict(), solutions=[s.to_dict() for s in solutions])
        else:
            t = self.tol
            ch = variational.characterize(
                ctx, self.cfg["r"], k=self.cfg["k"], a=self.a, phi_tol=t["phi_tol"],
                n_steps=self.cfg["n_steps"], fp_tol=t["fp_tol"], skip_hypotheses=True,
                estimate_kw={"restarts": self.cfg["restarts"], "seed": self.cfg["seed"],
                             "eps_edge": t["eps_edge"], "eps_abs": t["eps_abs"], "gap_tol": t["gap_tol"]},
            )
            solutions = ch.solutions
            body.update(ch.to_dict())
            if body["hypotheses"] is None:
                body["hypotheses"] = ch.hypotheses.to_dict()
            est = ch.estimates
            numeric = [e for e in ch.failures if e["error"] in ("NotConverged", "Diverged")]
            self._write_eta(est)
            self._write_solutions(solutions)
            if numeric:
                self.partial = body
                raise NotConverged(f"{len(numeric)} of {self.cfg['k']} lambda samples failed to converge")
            return body
        self._write_eta(est)
        self._write_solutions(solutions)
        return body

    def _attach_oracle(self, ctx, reps):
        prob = shooting.ShootingProblem(self.f, self.alpha, self.cfg["n_steps"])
        for rep in reps:
            try:
                shot = shooting.shoot_auto(self.f, self.alpha, rep.lam, self.cfg["r"],
                                           guess=rep.u.values[0] / ctx.grid.h, problem=prob)
            except PosBVPError:
                shot = None
            if shot is not None:
                rep.oracle_energy = shot.energy
                rep.oracle_delta = abs(rep.energy - shot.energy) / shot.energy

    def sweep(self):
        lo, hi, count = self._range()
        lams = np.linspace(lo, hi, count)
        rows = shooting.lambda_sweep(self.context(), lams, self.cfg["r"], n_steps=self.cfg["n_steps"])
        self.out.mkdir(parents=True, exist_ok=True)
        shooting.write_sweep_csv(rows, self.out / "sweep.csv")
        ok = [row.lam for row in rows if row.success]
        return {"sweep": {
            "count": len(rows),
            "successes": len(ok),
            "success_fraction": shooting.success_fraction(rows, (lo, hi)),
            "observed_range": [min(ok), max(ok)] if ok else None,
            "status_counts": dict(sorted(Counter(row.status for row in rows).items())),
        }}

    def oracle(self):
        if self.cfg["lambda"] is None and self.cfg["lambda_range"] is None:
            raise ConfigError("oracle needs --lambda or --lambda-range")
        body = {}
        if self.cfg["lambda"] is not None:
            lam = self.cfg["lambda"]
            try:
                shot = shooting.shoot_auto(self.f, self.alpha, lam, self.cfg["r"], n_steps=self.cfg["n_steps"])
            except Resonance as exc:
                shot, body["resonance"] = None, str(exc)
            body["shot"] = None if shot is None else shot.to_dict()
            if shot is not None:
                (self.out / "solutions").mkdir(parents=True, exist_ok=True)
                shot.trajectory.write_csv(self.out / "solutions" / "oracle_trajectory.csv")
        if self.cfg["lambda_range"] is not None:
            lo, hi, count = self._range()
            derivs, _ = self.f.derivatives_at_zero(1)
            slope = derivs[0] if derivs else None
            if slope is None or not slope > 0:
                body["spectrum"] = {"skipped": "f'(0) is not positive; no linearization to scan"}
            else:
                c = 0.5 * slope
                spectrum = {"c": c, "grid": count}
                for scale in ("primitive", "derivative"):
                    spectrum[scale] = shooting.eigen_scan(c, self.alpha, (lo, hi), grid=count,
                                                          n_steps=self.cfg["n_steps"], scaling=scale)
                body["spectrum"] = spectrum
        return body

    def _range(self):
        if self.cfg["lambda_range"] is None:
            raise ConfigError(f"{self.cfg['command']} needs --lambda-range")
        return self.cfg["lambda_range"]

    def _write_eta(self, est):
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / "eta.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "eta"])
            for s, e in est.eta_samples:
                w.writerow([f"{s:.17g}", f"{e:.17g}"])

    def _write_solutions(self, reps):
        folder = self.out / "solutions"
        folder.mkdir(parents=True, exist_ok=True)
        for i, rep in enumerate(reps):
            write_csv(rep.u, folder / f"u_{i:02d}.csv")
        with open(folder / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(variational.SOLUTION_COLUMNS)
            for rep in reps:
                w.writerow(rep.csv_row())


def _exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, HypothesisViolation):
        return EXIT_HYPOTHESIS
    if isinstance(exc, (NotConverged, Diverged, PosBVPError, ArithmeticError)):
        return EXIT_NUMERICS
    return EXIT_CONFIG


def run(cfg):
    """Dispatch one resolved configuration; returns the exit code."""
    out = Path(cfg["out"])
    runner = None
    try:
        runner = Run(cfg)
        body = getattr(runner, cfg["command"])()
    except (ConfigError, PosBVPError, ValueError, ArithmeticError) as exc:
        code = _exit_code(exc)
        payload = dict(getattr(runner, "partial", None) or {})
        payload.update(config=cfg, exit_code=code,
                       error={"type": type(exc).__name__, "message": str(exc)})
        write_report(out, payload)
        print(json.dumps(payload["error"]), file=sys.stderr)
        return code
    body.update(config=cfg, exit_code=EXIT_OK, error=None)
    write_report(out, body)
    return EXIT_OK


def _out_flag(argv):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out")
    try:
        return p.parse_known_args(argv)[0].out
    except SystemExit:
        return None


def main(argv=None):
    try:
        cfg = resolve_config(argv)
    except ConfigError as exc:
        err = {"type": "ConfigError", "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        out = _out_flag(argv)
        if out is not None:
            write_report(Path(out), {"config": None, "exit_code": EXIT_CONFIG, "error": err})
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
