"""Command-line entry point.

Every invocation is first turned into a :class:`RunConfig`; the same config
can be saved as JSON and replayed with ``loewner-pmp run CONFIG.json``.
Outputs are written only after the whole computation succeeded.

Exit codes: 0 success, 2 invalid input, 3 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

from . import __version__
from .controls import DrivingControl, builtin_control
from .errors import NumericalGuardError, ValidationError
from .jets import koebe_jet
from .loewner import DEFAULT_ORDER, DEFAULT_STEP, integrate, limit_map
from .optimize import (
    THREADS_ENV,
    OptimizeProblem,
    optimize,
    sample_reachable,
    teichmueller_experiment,
)
from .pontryagin import default_sample_times, pmp_check
from .schiffer import schiffer_residual

SCHEMA = 1

# parameter records with defaults, per subcommand
COMMANDS = {
    "integrate": {"control": None, "builtin": None, "indices": [2, 3]},
    "limit-map": {"control": None, "builtin": None},
    "schiffer-check": {
        "koebe": False, "control": None, "builtin": None, "N": None,
        "tol": 1e-8, "positivity_tol": 1e-8,
    },
    "pmp-check": {
        "control": None, "builtin": None, "N": None, "alpha": None,
        "samples": 64, "degree": 2,
    },
    "optimize": {
        "N": None, "alpha": None, "pieces": 8, "restarts": 8,
        "constraints": None, "constraint_tol": 1e-4, "maxfev": None, "degree": 2,
    },
    "sample-reachable": {
        "dimension": 1, "targets": None, "count": 1000, "pieces": 4, "atoms": 3, "degree": 2,
    },
    "teichmueller": {
        "N": 3, "base": "koebe", "base_control": None, "perturbations": 200, "pieces": 8,
    },
}

GLOBALS = ("order", "step", "horizon", "seed", "threads", "out", "csv")


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


@dataclass
class RunConfig:
    """A fully specified CLI invocation."""

    command: str
    params: dict = field(default_factory=dict)
    order: int = None
    step: float = DEFAULT_STEP
    horizon: float = None
    seed: int = 0
    threads: int = None
    out: str = None
    csv: str = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if not isinstance(self.params, dict):
            raise ValidationError("params must be an object")
        allowed = COMMANDS[self.command]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ValidationError(f"unknown {self.command} parameters: {sorted(unknown)}")
        merged = dict(allowed)
        merged.update(self.params)
        self.params = _jsonable(merged)
        if self.order is not None and (not isinstance(self.order, int) or self.order < 1):
            raise ValidationError("order must be a positive integer")
        if not isinstance(self.step, (int, float)) or not self.step > 0:
            raise ValidationError("step must be positive")
        self.step = float(self.step)
        if self.horizon is not None:
            if not isinstance(self.horizon, (int, float)) or not self.horizon > 0:
                raise ValidationError("horizon must be positive")
            self.horizon = float(self.horizon)
        if not isinstance(self.seed, int):
            raise ValidationError("seed must be an integer")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            raise ValidationError("threads must be a positive integer")

    def to_dict(self):
        d = {"schema": SCHEMA, "command": self.command, "params": dict(self.params)}
        for k in GLOBALS:
            d[k] = getattr(self, k)
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        d = dict(d)
        schema = d.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ValidationError(f"unsupported schema {schema!r}")
        unknown = set(d) - {"command", "params", *GLOBALS}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "command" not in d:
            raise ValidationError("config needs a command")
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed config JSON: {exc}") from None
        return cls.from_dict(d)

    def resolved_threads(self):
        if self.threads is not None:
            return self.threads
        try:
            return max(1, int(os.environ.get(THREADS_ENV, "1")))
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer") from None


# --------------------------------------------------------------------------
# command bodies: each returns (result dict, csv text or None)
# --------------------------------------------------------------------------

def _load_control(p, key="control", builtin_key="builtin"):
    path, name = p.get(key), p.get(builtin_key)
    if (path is None) == (name is None):
        raise ValidationError(f"give exactly one of {key} or {builtin_key}")
    if name is not None:
        return builtin_control(name)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read control file: {exc}") from None
    try:
        return DrivingControl.from_json(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed control JSON: {exc}") from None


def _target(p):
    N, alpha = p.get("N"), p.get("alpha")
    if (N is None) == (alpha is None):
        raise ValidationError("give exactly one of N or alpha")
    if alpha is not None:
        if len(alpha) != 2:
            raise ValidationError("alpha must have two entries")
        return tuple(int(a) for a in alpha)
    return int(N)


def _cmd_integrate(cfg):
    p = cfg.params
    control = _load_control(p)
    traj = integrate(control, cfg.order, cfg.step)
    lm = limit_map(control, trajectory=traj)
    res = {
        "control_digest": control.digest(),
        "steps": len(traj.times) - 1,
        "horizon": control.horizon,
        "order": traj.order,
        "limit_map": lm.to_dict(),
    }
    text = traj.to_csv(tuple(p["indices"])) if control.dimension == 1 else None
    return res, text


def _cmd_limit_map(cfg):
    control = _load_control(cfg.params)
    lm = limit_map(control, cfg.order, cfg.step)
    return dict(lm.to_dict(), control_digest=control.digest()), None


def _cmd_schiffer(cfg):
    p = cfg.params
    if p["N"] is None:
        raise ValidationError("schiffer-check needs N")
    N = int(p["N"])
    order = max(cfg.order or DEFAULT_ORDER, 2 * N)
    if p["koebe"]:
        if p["control"] is not None or p["builtin"] is not None:
            raise ValidationError("--koebe excludes a control")
        F = koebe_jet(order)
    else:
        F = limit_map(_load_control(p), order, cfg.step).jet
    rep = schiffer_residual(F, N, tol=p["tol"], positivity_tol=p["positivity_tol"])
    return rep.to_dict(), rep.boundary_csv()


def _cmd_pmp(cfg):
    p = cfg.params
    control = _load_control(p)
    target = _target(p)
    times = default_sample_times(control, int(p["samples"]))
    rep = pmp_check(control, target, times, cfg.order, cfg.step, degree=int(p["degree"]))
    return rep.to_dict(), rep.to_csv()


def _problem(cfg):
    p = cfg.params
    target = _target(p)
    cons = p["constraints"]
    if cons is not None:
        cons = {int(k): complex(*v) if isinstance(v, list) else complex(v) for k, v in cons.items()}
    return OptimizeProblem(
        target=target,
        horizon=cfg.horizon,
        pieces=int(p["pieces"]),
        dimension=2 if isinstance(target, tuple) else 1,
        constraints=cons,
        constraint_tol=float(p["constraint_tol"]),
        seed=cfg.seed,
        restarts=int(p["restarts"]),
        maxfev=p["maxfev"],
        step=cfg.step,
        degree=int(p["degree"]),
    )


def _cmd_optimize(cfg):
    res = optimize(_problem(cfg), workers=cfg.resolved_threads())
    return res.to_dict(), None


def _cmd_sample(cfg):
    p = cfg.params
    if not p["targets"]:
        raise ValidationError("sample-reachable needs targets")
    targets = [tuple(t) if isinstance(t, list) else int(t) for t in p["targets"]]
    s = sample_reachable(
        int(p["dimension"]), targets, int(p["count"]),
        horizon=cfg.horizon if cfg.horizon is not None else 10.0,
        pieces=int(p["pieces"]), seed=cfg.seed, atoms=int(p["atoms"]),
        step=cfg.step, degree=int(p["degree"]),
    )
    mags = [max(abs(complex(v)) for v in s.points[:, j]) for j in range(len(targets))]
    res = {
        "count": len(s.controls),
        "targets": _jsonable(targets),
        "max_abs": mags,
        "finite": bool(all(math.isfinite(abs(complex(v))) for v in s.points.ravel())),
    }
    return res, s.to_csv()


def _cmd_teich(cfg):
    p = cfg.params
    base = _load_control(p, "base_control", "base") if p["base_control"] is not None \
        else builtin_control(p["base"])
    rep = teichmueller_experiment(
        int(p["N"]), base, int(p["perturbations"]), seed=cfg.seed,
        pieces=int(p["pieces"]), step=cfg.step, workers=cfg.resolved_threads(),
    )
    return rep.to_dict(), None


HANDLERS = {
    "integrate": _cmd_integrate,
    "limit-map": _cmd_limit_map,
    "schiffer-check": _cmd_schiffer,
    "pmp-check": _cmd_pmp,
    "optimize": _cmd_optimize,
    "sample-reachable": _cmd_sample,
    "teichmueller": _cmd_teich,
}


def execute(cfg):
    """Run a config; returns ``(json_text, csv_text)`` without touching disk."""
    result, text = HANDLERS[cfg.command](cfg)
    echo = cfg.to_dict()
    echo["threads"] = cfg.resolved_threads()
    doc = {"schema": SCHEMA, "version": __version__, "config": echo, "result": result}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n", text


def _write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _int_pair(s):
    parts = s.replace(",", " ").split()
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two integers, got {s!r}")
    return [int(x) for x in parts]


def _target_arg(s):
    return _int_pair(s) if "," in s else int(s)


def _constraint_arg(s):
    k, _, v = s.partition("=")
    if not v:
        raise argparse.ArgumentTypeError("constraint must look like K=RE or K=RE,IM")
    parts = [float(x) for x in v.split(",")]
    return int(k), (parts + [0.0])[:2]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--order", type=int, help="jet truncation order D")
    g.add_argument("--step", type=float, default=DEFAULT_STEP, help="RK4 step (default 1/64)")
    g.add_argument("--horizon", type=float, help="control horizon T where applicable")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=int, help=f"worker processes (default ${THREADS_ENV} or 1)")
    g.add_argument("--out", help="JSON output path (default stdout)")
    g.add_argument("--csv", help="CSV output path")

    ap = argparse.ArgumentParser(prog="loewner-pmp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def control_args(sp):
        m = sp.add_mutually_exclusive_group()
        m.add_argument("--control", help="control JSON file")
        m.add_argument("--builtin", help="koebe | koebe-rotated:THETA | rotating:OMEGA | random:SEED")

    def target_args(sp):
        sp.add_argument("--N", type=int, help="coefficient index (disk)")
        sp.add_argument("--alpha", type=_int_pair, help="multi-index I,J (ball)")

    sp = sub.add_parser("integrate", parents=[common], help="transport jets along a control")
    control_args(sp)
    sp.add_argument("--indices", type=int, nargs="+", default=[2, 3])

    sp = sub.add_parser("limit-map", parents=[common], help="normalized limit map coefficients")
    control_args(sp)

    sp = sub.add_parser("schiffer-check", parents=[common], help="Schiffer equation and positivity")
    control_args(sp)
    sp.add_argument("--koebe", action="store_true", help="use the exact Koebe jet")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--positivity-tol", type=float, default=1e-8)

    sp = sub.add_parser("pmp-check", parents=[common], help="maximum-principle gap along a control")
    control_args(sp)
    target_args(sp)
    sp.add_argument("--samples", type=int, default=64)
    sp.add_argument("--degree", type=int, default=2)

    sp = sub.add_parser("optimize", parents=[common], help="maximize Re of a coefficient")
    target_args(sp)
    sp.add_argument("--pieces", type=int, default=8)
    sp.add_argument("--restarts", type=int, default=8)
    sp.add_argument("--constraint", type=_constraint_arg, action="append",
                    help="side condition K=RE[,IM]; repeatable")
    sp.add_argument("--constraint-tol", type=float, default=1e-4)
    sp.add_argument("--maxfev", type=int)
    sp.add_argument("--degree", type=int, default=2)

    sp = sub.add_parser("sample-reachable", parents=[common], help="Monte Carlo coefficient cloud")
    sp.add_argument("--dimension", type=int, default=1)
    sp.add_argument("--targets", type=_target_arg, nargs="+", required=True,
                    help="coefficient indices (disk) or I,J multi-indices (ball)")
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--pieces", type=int, default=4)
    sp.add_argument("--atoms", type=int, default=3)
    sp.add_argument("--degree", type=int, default=2)

    sp = sub.add_parser("teichmueller", parents=[common], help="side-condition experiment")
    sp.add_argument("--N", type=int, default=3)
    m = sp.add_mutually_exclusive_group()
    m.add_argument("--base", default="koebe", help="builtin base control name")
    m.add_argument("--base-control", help="base control JSON file")
    sp.add_argument("--perturbations", type=int, default=200)
    sp.add_argument("--pieces", type=int, default=8)

    sp = sub.add_parser("run", help="replay a saved RunConfig JSON")
    sp.add_argument("config")
    return ap


def config_from_args(ns):
    if ns.command == "run":
        try:
            with open(ns.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc}") from None
        return RunConfig.from_json(text)
    d = vars(ns).copy()
    command = d.pop("command")
    glob = {k: d.pop(k) for k in GLOBALS}
    if "constraint" in d:
        c = d.pop("constraint")
        d["constraints"] = None if not c else {str(k): v for k, v in c}
    return RunConfig(command=command, params=d, **glob)


def run(argv=None):
    """Parse ``argv``, execute, write outputs; returns the exit code."""
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        text, table = execute(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 3
    if table is not None and cfg.csv:
        _write_atomic(cfg.csv, table)
    if cfg.out:
        _write_atomic(cfg.out, text)
    else:
        sys.stdout.write(text)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
