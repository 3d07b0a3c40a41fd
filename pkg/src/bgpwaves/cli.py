"""Command-line front end: wave solves, growth paths, sweeps and verification.

Exit codes: 0 success, 1 config or I/O error, 2 infeasible or nonexistent,
3 verification failure, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import kpp, mfg, verify
from .alpha import from_config as tech_from_config
from .config import NumericsConfig, RunConfig
from .errors import BgpWavesError, ConfigError
from .kpp import Kernel
from .profiles import read_profile_csv, write_table_csv

log = logging.getLogger("bgpwaves")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_VERIFY, EXIT_NONCONV = 0, 1, 2, 3, 4


# --------------------------------------------------------------------------
# argument handling


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("-o", "--out", type=Path, default=None, help="output directory")
    p.add_argument("--kappa", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--a0", type=float, help="power technology amplitude")
    p.add_argument("--eta", type=float, help="power technology exponent")
    p.add_argument("--c", type=float, help="speed")
    p.add_argument("--theta", type=float, help="wave height w(0)")
    p.add_argument("--x0", type=float)
    p.add_argument("--ell0", type=float)
    p.add_argument("--n", type=float, help="truncation half-width of the growth model")
    p.add_argument("--grid", type=int, help="number of core grid nodes")
    p.add_argument("--mode", choices=("critical", "supercritical"))
    p.add_argument("--kernel", help="kernel CSV (x,value) or 'logistic[:top]' or 'constant:value'")
    p.add_argument("--sigma", type=Path, help="policy CSV (x,value); kernel = alpha(sigma)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bgpwaves", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "wave": "single wave with w(0) = theta",
        "critical": "critical (minimal-height) wave",
        "family": "waves at several heights",
        "bgp": "growth path (mode from config, critical by default)",
        "bgp-super": "supercritical growth path at given c, x0, ell0",
        "feasibility": "classify a speed against the admissible windows",
        "verify": "rerun property checks on a stored solution",
        "sweep": "summary rows over grids of speeds and heights",
    }
    for name, h in helps.items():
        p = sub.add_parser(name, help=h)
        _add_common(p)
        if name in ("family", "sweep"):
            p.add_argument("--thetas", help="comma-separated heights")
        if name == "sweep":
            p.add_argument("--cs", help="comma-separated speeds")
        if name == "verify":
            p.add_argument("--solution", type=Path, required=True, help="solution CSV")
            p.add_argument("--summary", type=Path, help="summary JSON (default: beside the CSV)")
    return parser


def _floats(text: Optional[str], what: str) -> list:
    if not text:
        raise ConfigError(f"--{what} is required")
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--{what}: expected comma-separated numbers") from None


def run_config(args) -> RunConfig:
    rc = RunConfig.load(args.config) if args.config else RunConfig()
    over = {}
    for k in ("kappa", "rho", "c", "theta", "x0", "ell0", "mode"):
        v = getattr(args, k, None)
        if v is not None:
            over[k] = v
    if args.kernel is not None:
        over["kernel"] = args.kernel
    if args.a0 is not None or args.eta is not None:
        alpha = dict(rc.alpha)
        if alpha.get("family", "power") != "power":
            raise ConfigError("--a0/--eta apply to the power family only")
        alpha["family"] = "power"
        if args.a0 is not None:
            alpha["a0"] = args.a0
        if args.eta is not None:
            alpha["eta"] = args.eta
        over["alpha"] = alpha
    num = {}
    if args.n is not None:
        num["n"] = args.n
    if args.grid is not None:
        num["n_core"] = args.grid
    if num:
        over["numerics"] = rc.numerics.updated(**num)
    return rc.updated(**over)


def _params(rc: RunConfig) -> mfg.ModelParams:
    return mfg.ModelParams(rc.kappa, rc.rho, tech_from_config(rc.alpha))


def load_kernel(rc: RunConfig, sigma_path: Optional[Path]) -> Kernel:
    if sigma_path is not None:
        try:
            sig = read_profile_csv(sigma_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read policy {sigma_path}: {exc}") from None
        tech = tech_from_config(rc.alpha)
        s = sig.values
        if np.any(s < 0) or np.any(s > 1):
            raise ConfigError("policy values must lie in [0, 1]")
        return mfg.policy_from_sigma(s, sig.grid, tech).kernel
    spec = rc.kernel
    if spec is None:
        raise ConfigError("a kernel is required (--kernel or --sigma)")
    if spec.startswith("logistic"):
        top = float(spec.split(":", 1)[1]) if ":" in spec else 2.0
        return Kernel.logistic(top)
    if spec.startswith("constant:"):
        try:
            return Kernel.constant(float(spec.split(":", 1)[1]))
        except ValueError:
            raise ConfigError(f"bad constant kernel {spec!r}") from None
    return Kernel.from_csv(spec)


def _out(args, default: str) -> Path:
    out = args.out or Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data: dict):
    path.write_text(json.dumps(verify._jsonable(data), indent=2, sort_keys=True) + "\n")


def _require(value, name):
    if value is None:
        raise ConfigError(f"--{name} is required")
    return value


# --------------------------------------------------------------------------
# commands


def _emit_wave(args, ws, kernel, default_dir):
    out = _out(args, default_dir)
    rec = verify.SolutionRecord.from_wave(ws, kernel)
    rec.write(out, ws.summary())
    print(json.dumps(verify._jsonable(ws.summary())))
    return EXIT_OK


def cmd_wave(args) -> int:
    rc = run_config(args)
    kernel = load_kernel(rc, args.sigma)
    ws = kpp.solve_wave(kernel, _require(rc.c, "c"), _require(rc.theta, "theta"), rc.numerics)
    return _emit_wave(args, ws, kernel, "out")


def cmd_critical(args) -> int:
    rc = run_config(args)
    kernel = load_kernel(rc, args.sigma)
    ws = kpp.critical_wave(kernel, _require(rc.c, "c"), rc.numerics)
    return _emit_wave(args, ws, kernel, "out")


def cmd_family(args) -> int:
    rc = run_config(args)
    kernel = load_kernel(rc, args.sigma)
    thetas = _floats(args.thetas, "thetas")
    fr = kpp.wave_family(kernel, _require(rc.c, "c"), thetas, rc.numerics)
    out = _out(args, "out")
    rows = {"theta": [], "i_value": [], "lambda": [], "status": []}
    profiles = {}
    for th, ws, err in zip(fr.thetas, fr.waves, fr.errors):
        rows["theta"].append(th)
        rows["i_value"].append(ws.i_value if ws else math.nan)
        rows["lambda"].append(ws.lam if ws else math.nan)
        rows["status"].append("ok" if ws else type(err).__name__)
        if ws is not None:
            profiles.setdefault("x", ws.grid.nodes)
            profiles[f"w_{th:.6g}"] = ws.w.values
    _write_rows(out / "family.csv", rows)
    if profiles:
        write_table_csv(out / "waves.csv", profiles)
    summary = {"c": fr.c, "theta_c": fr.theta_c, "thetas": fr.thetas, "i_values": fr.i_values,
               "status": rows["status"]}
    _write_json(out / "summary.json", summary)
    print(json.dumps(verify._jsonable(summary)))
    return EXIT_OK if all(s == "ok" for s in rows["status"]) else EXIT_INFEASIBLE


def _write_rows(path: Path, rows: dict):
    keys = list(rows)
    with path.open("w", newline="") as fh:
        fh.write(",".join(keys) + "\n")
        for i in range(len(rows[keys[0]])):
            vals = []
            for k in keys:
                v = rows[k][i]
                vals.append(v if isinstance(v, str) else f"{v:.17g}")
            fh.write(",".join(vals) + "\n")


def _progress(args):
    if not args.verbose:
        return None

    def cb(h):
        print(f"iteration {h['iteration']}: c={h['c']:.10g} delta={h['delta']:.3e}",
              file=sys.stderr)

    return cb


def _emit_bgp(args, rc: RunConfig, b: mfg.BgpSolution) -> int:
    out = _out(args, "out")
    config = {"kappa": rc.kappa, "rho": rc.rho, "alpha": rc.alpha,
              "numerics": rc.numerics.to_dict()}
    rec = verify.SolutionRecord.from_bgp(b, config)
    summary = {
        "c": b.c, "I": b.i_value, "lambda": b.wave.lam, "K": b.K,
        "tail_inequality": b.tail_inequality, "iterations": b.iterations,
        "residuals": {"criticality_gap": b.diagnostics["criticality_gap"],
                      "bellman_scaled": b.diagnostics["bellman_scaled"],
                      "wave": b.wave.residual,
                      "fixed_point": b.history[-1]["delta"]},
        "classification": str(mfg.feasibility(b.params, b.c)),
        "diagnostics": b.diagnostics,
    }
    rec.write(out, summary)
    hist = {k: [h[k] for h in b.history] for k in ("iteration", "c", "delta", "damping")}
    write_table_csv(out / "history.csv", hist)
    print(json.dumps(verify._jsonable({k: summary[k] for k in ("c", "I", "lambda", "K",
                                                               "tail_inequality", "iterations")})))
    return EXIT_OK


def cmd_bgp(args) -> int:
    rc = run_config(args)
    if rc.mode == "supercritical":
        return _bgp_super(args, rc)
    params = _params(rc)
    trunc = mfg.TruncationScheme(rc.numerics.n, "exp")
    b = mfg.bgp_critical(params, trunc, rc.numerics, callback=_progress(args))
    return _emit_bgp(args, rc, b)


def _bgp_super(args, rc: RunConfig) -> int:
    params = _params(rc)
    trunc = mfg.TruncationScheme(rc.numerics.n, "additive")
    b = mfg.bgp_supercritical(params, _require(rc.c, "c"), rc.x0, rc.ell0, trunc, rc.numerics,
                              callback=_progress(args))
    return _emit_bgp(args, rc, b)


def cmd_bgp_super(args) -> int:
    rc = run_config(args).updated(mode="supercritical")
    return _bgp_super(args, rc)


def cmd_feasibility(args) -> int:
    rc = run_config(args)
    params = _params(rc)
    c = _require(rc.c, "c")
    cls = mfg.feasibility(params, c)
    rep = params.validate()
    print(cls.value)
    if args.out is not None:
        _write_json(_out(args, "out") / "feasibility.json",
                    {"c": c, "kappa": rc.kappa, "rho": rc.rho, "classification": cls.value,
                     "hypotheses": rep.as_dict()})
    windows = (mfg.Classification.CriticalWindow, mfg.Classification.SupercriticalWindow)
    return EXIT_OK if cls in windows else EXIT_INFEASIBLE


def cmd_verify(args) -> int:
    rec = verify.SolutionRecord.read(args.solution, args.summary)
    meta = rec.meta
    num = NumericsConfig()
    if args.config is not None:
        rc = RunConfig.load(args.config)
        num = rc.numerics
        meta = {**meta, "config": {"kappa": rc.kappa, "rho": rc.rho, "alpha": rc.alpha},
                "kappa": rc.kappa, "rho": rc.rho}
        rec.meta = meta
    elif "config" in meta and "numerics" in meta["config"]:
        num = NumericsConfig.from_dict(meta["config"]["numerics"])
    if meta.get("kind") == "bgp":
        params = verify.params_from_meta(meta)
        reports = verify.check_bgp_record(rec, params, num.crit_tol, num.fp_tol,
                                          num.residual_tol)
    else:
        reports = verify.check_wave_record(rec, num.crit_tol, num.residual_tol)
    lines = [json.dumps(r.as_dict(), sort_keys=True) for r in reports]
    if args.out is not None:
        out = _out(args, "out")
        (out / "report.jsonl").write_text("\n".join(lines) + "\n")
    for ln in lines:
        print(ln)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def cmd_sweep(args) -> int:
    rc = run_config(args)
    kernel = load_kernel(rc, args.sigma)
    cs = _floats(args.cs, "cs") if args.cs else [_require(rc.c, "c")]
    thetas = _floats(args.thetas, "thetas") if args.thetas else (
        [rc.theta] if rc.theta is not None else [None])
    jobs = [(c, th) for c in cs for th in thetas]
    cfg = rc.numerics.updated(threads=1)  # parallel over jobs, not inside them

    def one(job):
        c, th = job
        if th is None:
            return kpp.critical_wave(kernel, c, cfg)
        return kpp.solve_wave(kernel, c, th, cfg)

    results = kpp.parallel_map(one, jobs, rc.numerics)
    rows = {"c": [], "theta": [], "i_value": [], "lambda": [], "status": []}
    for (c, th), r in zip(jobs, results):
        ok = isinstance(r, kpp.WaveSolution)
        rows["c"].append(c)
        rows["theta"].append(r.theta if ok else (math.nan if th is None else th))
        rows["i_value"].append(r.i_value if ok else math.nan)
        rows["lambda"].append(r.lam if ok else math.nan)
        rows["status"].append("ok" if ok else type(r).__name__)
    out = _out(args, "out")
    _write_rows(out / "sweeps.csv", rows)
    crit = [r for (c, th), r in zip(jobs, results)
            if th is None and isinstance(r, kpp.WaveSolution)]
    if len(crit) >= 2:
        cross = kpp.critical_crossings(crit, kernel)
        _write_rows(out / "crossings.csv",
                    {k: [row[k] for row in cross] for k in cross[0]})
    print(f"{sum(s == 'ok' for s in rows['status'])}/{len(jobs)} runs ok -> {out / 'sweeps.csv'}")
    return EXIT_OK


COMMANDS = {
    "wave": cmd_wave, "critical": cmd_critical, "family": cmd_family, "bgp": cmd_bgp,
    "bgp-super": cmd_bgp_super, "feasibility": cmd_feasibility, "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BgpWavesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
