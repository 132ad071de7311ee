"""Command-line front end.

Every subcommand reads its parameters from flags and, optionally, from a JSON
file given by ``--config`` (validated against ``config_schema.json``).  Flags
win over the file.  The fully resolved configuration is echoed to standard
error as one JSON line before the run starts.

Exit codes: 0 on success, 1 on usage errors, 2 on numerical failure.
"""

import argparse
import json
import math
import sys
import time
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .constellations import constellation_from_dict
from .errors import LseLabError
from .experiments import (McConfig, monte_carlo_distortion, ofdm_equivalence,
                          power_decay_fit, replica_rs, sweep_row, tune_constellation, tune_rzf,
                          union_bound_epsilon, write_manifest, write_sweep_csv)
from .replica_core import RsConfig
from .replica_rsb import solve_rsb1
from .spectra import MarchenkoPasturIid, PathLossNumeric

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; 2 is reserved for
    # numerical failures here
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


S = argparse.SUPPRESS


def _add_system(p, need_lam=True):
    p.add_argument("--alpha", type=float, default=S,
                   help="antenna-to-user ratio N/K (load of the channel matrix)")
    p.add_argument("--gamma", type=float, default=S,
                   help="receive gain scaling the data vector in the target sqrt(gamma) u "
                        "(default 1)")
    p.add_argument("--sigma-u2", dest="sigma_u2", type=float, default=S,
                   help="variance of the user data symbols (default 1)")
    if need_lam:
        p.add_argument("--lam", type=float, default=S,
                       help="Tikhonov weight on ||v||^2 in the LSE objective; ignored for "
                            "constant-modulus sets (default 0)")


def _add_set(p):
    p.add_argument("--set", choices=["full", "disk", "circle", "mpsk"], default=S,
                   help="per-antenna transmit set: whole plane, disk |x|^2 <= P, circle "
                        "|x|^2 = P or M-PSK with power p (default full)")
    p.add_argument("--P", type=float, default=S,
                   help="peak power of the disk, or power of the circle")
    p.add_argument("--M", type=int, default=S, help="alphabet size of M-PSK")
    p.add_argument("--p", type=float, default=S, help="symbol power of M-PSK (default 1)")


def _add_spectrum(p):
    p.add_argument("--spectrum", choices=["iid", "pathloss"], default=S,
                   help="eigenvalue law of the Gramian H^H H: i.i.d. entries or i.i.d. "
                        "fading with per-user path loss (default iid)")
    p.add_argument("--nu", type=float, default=S, help="path-loss exponent (default 3)")
    p.add_argument("--kappa-dist", dest="kappa_dist", type=float, default=S,
                   help="outer-to-inner cell radius ratio; 1 gives unit path loss (default 1)")
    p.add_argument("--quad-order", dest="quad_order", type=int, default=S,
                   help="Gauss-Legendre nodes per panel of the scalar RS expectations "
                        "(default 80)")


def _add_mc(p):
    p.add_argument("--K", type=int, default=S, help="number of users (default 100)")
    p.add_argument("--trials", type=int, default=S,
                   help="Monte Carlo trials, each an independent channel and data draw")
    p.add_argument("--seed", type=int, default=S,
                   help="base seed; trial t uses a counter-based generator keyed by seed + t "
                        "(default 0)")
    p.add_argument("--restarts", type=int, default=S,
                   help="random restarts of coordinate descent (default 32)")
    p.add_argument("--sigma-n2", dest="sigma_n2", type=float, default=S,
                   help="receiver noise variance entering the rate bound (default 1)")


COMMANDS = {
    "replica-rs": ("replica-symmetric fixed point (q, chi) and asymptotic distortion",
                   ["alpha"],
                   {"gamma": 1.0, "sigma_u2": 1.0, "lam": 0.0, "set": "full", "p": 1.0,
                    "spectrum": "iid", "nu": 3.0, "kappa_dist": 1.0, "quad_order": 80}),
    "replica-rsb": ("one-step RSB fixed point and distortion for M-PSK or the circle",
                    ["alpha"],
                    {"gamma": 1.0, "sigma_u2": 1.0, "set": "mpsk", "M": 2, "p": 1.0,
                     "rsb_order": 32, "rsb_method": "auto"}),
    "simulate": ("Monte Carlo average of the empirical distortion of a precoder",
                 ["alpha"],
                 {"gamma": 1.0, "sigma_u2": 1.0, "lam": 0.0, "set": "full", "p": 1.0,
                  "K": 100, "trials": 50, "seed": 0, "solver": "auto", "restarts": 32,
                  "sigma_n2": 1.0}),
    "sweep": ("replica predictions and optional Monte Carlo over a list of loads (CSV)",
              ["alphas"],
              {"gamma": 1.0, "sigma_u2": 1.0, "lam": 0.0, "set": "full", "p": 1.0,
               "K": 100, "trials": 0, "seed": 0, "restarts": 32, "sigma_n2": 1.0,
               "rsb": False}),
    "tune-rzf": ("closed-form RZF susceptibility, regulariser and gain at a power target",
                 ["alpha", "q", "sigma_n2"], {"sigma_u2": 1.0}),
    "tune": ("regulariser and gain maximising the rate bound at a power target",
             ["alpha", "q", "sigma_n2"],
             {"sigma_u2": 1.0, "set": "full", "p": 1.0}),
    "union-bound": ("union-bound distortion floor for M-PSK transmit alphabets",
                    ["alpha", "M"], {}),
    "ofdm-eig": ("Gramian spectrum of a DFT-transformed frequency-selective channel vs "
                 "a flat i.i.d. channel", ["L", "N", "K"], {"seed": 0, "method": "auto"}),
    "power-decay": ("fitted exponent of the per-antenna power needed for a target "
                    "distortion with the disk set", ["D_target", "alphas", "P"],
                    {"gamma": 1.0, "sigma_u2": 1.0}),
}


def build_parser():
    parser = _Parser(prog="lse-lab",
                     description="Replica analysis and simulation of least-square-error "
                                 "precoders with per-antenna transmit constraints.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", default=S,
                        help="JSON file of parameters (keys are flag names with underscores); "
                             "flags override it")
    common.add_argument("--output", default=S,
                        help="write the result to this file (CSV for sweep, JSON otherwise) "
                             "and a run manifest next to it")
    common.add_argument("-v", "--verbose", action="count", default=S,
                        help="print solver diagnostics")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (desc, _, _) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=desc, description=desc)
        if name == "replica-rs":
            _add_system(p)
            _add_set(p)
            _add_spectrum(p)
        elif name == "replica-rsb":
            _add_system(p, need_lam=False)
            _add_set(p)
            p.add_argument("--rsb-order", dest="rsb_order", type=int, default=S,
                           help="quadrature order of the tilted Gaussian expectations")
            p.add_argument("--rsb-method", dest="rsb_method",
                           choices=["auto", "separable", "generic"], default=S,
                           help="separable 1-D integrals (BPSK/QPSK) or polar quadrature for any "
                                "constant-modulus set")
        elif name == "simulate":
            _add_system(p)
            _add_set(p)
            _add_mc(p)
            p.add_argument("--solver", choices=["auto", "rzf", "pgd", "cd", "exhaustive", "null"],
                           default=S, help="precoder used on each instance (default auto)")
        elif name == "sweep":
            p.add_argument("--alphas", type=_float_list, default=S,
                           help="comma-separated antenna-to-user ratios")
            _add_system(p)
            _add_set(p)
            _add_mc(p)
            p.add_argument("--rsb", action="store_true", default=S,
                           help="add the one-step RSB distortion (M-PSK and circle)")
        elif name in ("tune-rzf", "tune"):
            p.add_argument("--alpha", type=float, default=S, help="antenna-to-user ratio N/K")
            p.add_argument("--q", type=float, default=S,
                           help="target average transmit power per antenna")
            p.add_argument("--sigma-n2", dest="sigma_n2", type=float, default=S,
                           help="receiver noise variance")
            p.add_argument("--sigma-u2", dest="sigma_u2", type=float, default=S,
                           help="variance of the user data symbols (default 1)")
            if name == "tune":
                _add_set(p)
        elif name == "union-bound":
            p.add_argument("--alpha", type=float, default=S, help="antenna-to-user ratio N/K")
            p.add_argument("--M", type=int, default=S, help="alphabet size of M-PSK")
        elif name == "ofdm-eig":
            p.add_argument("--L", type=int, default=S, help="number of subcarriers")
            p.add_argument("--N", type=int, default=S, help="transmit antennas")
            p.add_argument("--K", type=int, default=S, help="users")
            p.add_argument("--seed", type=int, default=S, help="seed of the channel draw")
            p.add_argument("--method", choices=["auto", "dense", "structured"], default=S,
                           help="dense eigendecomposition or per-subcarrier blocks")
        elif name == "power-decay":
            p.add_argument("--D-target", dest="D_target", type=float, default=S,
                           help="target asymptotic distortion (linear scale)")
            p.add_argument("--alphas", type=_float_list, default=S,
                           help="comma-separated antenna-to-user ratios to fit over")
            p.add_argument("--P", type=float, default=S, help="peak power of the disk")
            p.add_argument("--gamma", type=float, default=S, help="receive gain (default 1)")
            p.add_argument("--sigma-u2", dest="sigma_u2", type=float, default=S,
                           help="variance of the user data symbols (default 1)")
    return parser


def _load_schema():
    return json.loads(resources.files("lse_lab").joinpath("config_schema.json").read_text())


def resolve_config(ns):
    """Merge defaults, the ``--config`` file and explicit flags (flags win)."""
    args = vars(ns).copy()
    command = args.pop("command")
    cfg_path = args.pop("config", None)
    output = args.pop("output", None)
    verbose = args.pop("verbose", 0)
    _, required, defaults = COMMANDS[command]
    from_file = {}
    if cfg_path is not None:
        try:
            with open(cfg_path) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}")
        try:
            jsonschema.validate(from_file, _load_schema())
        except jsonschema.ValidationError as exc:
            raise UsageError(f"invalid config {cfg_path}: {exc.message}")
    merged = {**defaults, **from_file, **args}
    missing = [k for k in required if k not in merged]
    if missing:
        raise UsageError(f"{command}: missing required parameter(s): "
                         + ", ".join("--" + k.replace("_", "-") for k in missing))
    try:
        jsonschema.validate(merged, _load_schema())
    except jsonschema.ValidationError as exc:
        raise UsageError(f"{command}: invalid parameter: {exc.message}")
    return command, merged, output, verbose


def _constellation(cfg):
    d = {k: cfg[k] for k in ("set", "P", "M", "p") if k in cfg}
    if d.get("set") == "disk" and "P" not in d:
        raise UsageError("--set disk needs --P")
    if d.get("set") == "mpsk" and "M" not in d:
        raise UsageError("--set mpsk needs --M")
    return constellation_from_dict(d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _run_replica_rs(cfg, verbose):
    c = _constellation(cfg)
    if cfg["spectrum"] == "pathloss":
        spec = PathLossNumeric(cfg["alpha"], nu=cfg["nu"], kappa_dist=cfg["kappa_dist"])
    else:
        spec = MarchenkoPasturIid(cfg["alpha"])
    sol = replica_rs(c, cfg["alpha"], cfg["gamma"], cfg["sigma_u2"], cfg["lam"], spectrum=spec,
                     quad_order=cfg["quad_order"])
    out = {"q": sol.q, "chi": sol.chi, "f": sol.f, "e": sol.e, "distortion": sol.distortion,
           "distortion_db": 10 * math.log10(sol.distortion) if sol.distortion > 0 else "-inf",
           "entropy0": sol.entropy0, "residual": sol.residual, "iterations": sol.iterations}
    if verbose:
        out["diagnostics"] = {k: v for k, v in sol.diagnostics.items()
                              if isinstance(v, (int, float, str))}
    return out


def _run_replica_rsb(cfg, verbose):
    c = _constellation(cfg)
    rcfg = RsConfig(MarchenkoPasturIid(cfg["alpha"]), gamma=cfg["gamma"],
                    sigma_u2=cfg["sigma_u2"])
    sol = solve_rsb1(c, rcfg, rsb_quad_order=cfg["rsb_order"], method=cfg["rsb_method"])
    out = {k: getattr(sol, k) for k in ("q1", "p1", "chi1", "mu1", "eta1", "e1", "f1", "g1",
                                        "distortion", "entropy0", "residual")}
    if verbose:
        out["diagnostics"] = {k: v for k, v in sol.diagnostics.items() if k != "starts"}
    return out


def _run_simulate(cfg, verbose):
    mc = McConfig(K=cfg["K"], alpha=cfg["alpha"], trials=cfg["trials"], seed=cfg["seed"],
                  constellation=_constellation(cfg), gamma=cfg["gamma"], lam=cfg["lam"],
                  sigma_u2=cfg["sigma_u2"], sigma_n2=cfg["sigma_n2"], solver=cfg["solver"],
                  restarts=cfg["restarts"])
    res = monte_carlo_distortion(mc)
    out = {"N": mc.N, "K": mc.K, "mean": res.mean, "stderr": res.stderr,
           "trials_used": res.trials_used, "excluded": res.excluded}
    if verbose:
        out["samples"] = res.samples
    return out


def _run_tune_rzf(cfg, verbose):
    r = tune_rzf(cfg["alpha"], cfg["q"], cfg["sigma_n2"], cfg["sigma_u2"])
    return {"s": r.s, "chi_opt": r.chi_opt, "lambda_opt": r.lambda_opt, "gamma": r.gamma,
            "rate_bound": r.rate_bound, "distortion": r.distortion}


def _run_tune(cfg, verbose):
    r = tune_constellation(_constellation(cfg), cfg["alpha"], cfg["q"], cfg["sigma_n2"],
                           cfg["sigma_u2"])
    return {"lam": r.lam, "gamma": r.gamma, "rate_bound": r.rate_bound,
            "distortion": r.distortion, "chi": r.chi, "q": r.q}


def _run_union_bound(cfg, verbose):
    r = union_bound_epsilon(cfg["alpha"], cfg["M"])
    return {"epsilon_star": r.epsilon_star, "alpha": r.alpha, "M": r.M}


def _run_ofdm(cfg, verbose):
    r = ofdm_equivalence(cfg["L"], cfg["N"], cfg["K"], seed=cfg["seed"], method=cfg["method"])
    out = {"ks_distance": r.ks_distance, "unitarity_error": r.unitarity_error,
           "method": r.method}
    if verbose:
        out["eig_ofdm"] = r.eig_ofdm
        out["eig_flat"] = r.eig_flat
    return out


def _run_power_decay(cfg, verbose):
    r = power_decay_fit(cfg["D_target"], np.asarray(cfg["alphas"]), cfg["P"], cfg["gamma"],
                        cfg["sigma_u2"])
    return {"kappa": r.kappa, "intercept": r.intercept, "alphas": r.alphas, "q": r.q,
            "infeasible": r.infeasible}


RUNNERS = {"replica-rs": _run_replica_rs, "replica-rsb": _run_replica_rsb,
           "simulate": _run_simulate, "tune-rzf": _run_tune_rzf, "tune": _run_tune,
           "union-bound": _run_union_bound, "ofdm-eig": _run_ofdm,
           "power-decay": _run_power_decay}


def _sweep_rows(cfg):
    c = _constellation(cfg)
    for a in cfg["alphas"]:
        yield sweep_row(a, c, gamma=cfg["gamma"], sigma_u2=cfg["sigma_u2"],
                        sigma_n2=cfg["sigma_n2"], lam=cfg["lam"], K=cfg["K"],
                        trials=cfg["trials"], seed=cfg["seed"], restarts=cfg["restarts"],
                        rsb=cfg["rsb"])


def _seeds(cfg):
    if "seed" not in cfg:
        return {}
    return {"base": cfg["seed"], "trials": cfg.get("trials", 1)}


def run(argv=None, stdout=None, stderr=None):
    """Parse ``argv`` and execute one subcommand; returns the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        command, cfg, output, verbose = resolve_config(ns)
    except UsageError as exc:
        print(exc, file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    print(json.dumps({"command": command, "config": cfg}, sort_keys=True), file=stderr)
    t0 = time.perf_counter()
    try:
        if command == "sweep":
            if output is None:
                write_sweep_csv(_sweep_rows(cfg), stdout)
            else:
                with open(output, "w", newline="") as fh:
                    write_sweep_csv(_sweep_rows(cfg), fh)
        else:
            result = _jsonable(RUNNERS[command](cfg, verbose))
            text = json.dumps(result, indent=2, sort_keys=True)
            print(text, file=stdout)
            if output is not None:
                with open(output, "w") as fh:
                    fh.write(text + "\n")
    except UsageError as exc:
        print(exc, file=stderr)
        return EXIT_USAGE
    except LseLabError as exc:
        print(f"{command}: {exc}", file=stderr)
        trace = getattr(exc, "trace", None)
        if verbose and trace:
            print(json.dumps(_jsonable(trace), default=str), file=stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"{command}: invalid input: {exc}", file=stderr)
        return EXIT_USAGE
    if output is not None:
        write_manifest(output + ".manifest.json", {"command": command, **cfg}, _seeds(cfg),
                       time.perf_counter() - t0)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
