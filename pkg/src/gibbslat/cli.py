"""Command-line entry point: ``gibbslat simulate|estimate|diagnose|experiment``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import glob
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .diagnostics import residual_report, variance_curve, write_curve, write_report
from .errors import (ConfigError, DataError, DegenerateSiteError, IdentifiabilityError,
                     InfeasibleThetaError, InsufficientDataError)
from .experiment import run_experiment
from .inference import fit_takacs_fiksel
from .io import read_observation, write_replicate
from .sampler import replicate_plan, simulate
from .variational import fit_variational

log = logging.getLogger("gibbslat")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _replicates(cfg: dict) -> int:
    return cfg.get("simulation", {}).get("replicates", 1)


def _simulate_one(cfg: dict, k: int):
    plan = replicate_plan(cfgmod.simulation_plan(cfg), k)
    _, f1, f2 = simulate(plan)
    return plan.seed, f1, f2


def cmd_simulate(cfg: dict, out: Path, jobs: int) -> int:
    cfgmod.simulation_plan(cfg)  # validate before spawning work
    out.mkdir(parents=True, exist_ok=True)
    K = _replicates(cfg)
    if jobs == 1:
        results = [_simulate_one(cfg, k) for k in range(K)]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs)(delayed(_simulate_one)(cfg, k) for k in range(K))
    gm = cfgmod.build_model(cfg)
    res = cfgmod.resolved(cfg)
    for k, (seed, f1, f2) in enumerate(results):
        write_replicate(out / f"rep_{k:04d}", f1, f2,
                        {"seed": int(seed), "replicate": k, "theta": list(cfg["theta"]),
                         "model": gm.to_dict(), "config": res})
        log.info("replicate %d: %d pairs, %d points", k, len(f1.sites), len(f2.points))
    return EXIT_OK


def _fit(cfg: dict, path: str):
    obs, meta = read_observation(path)
    gm = cfgmod.build_model(cfg)
    est = cfgmod.estimator_config(cfg)
    method = cfg.get("estimator", {}).get("method", "auto")
    if method == "variational" or (method == "auto" and obs.framework == "F2"):
        if gm.move.family not in ("uniform", "exponential"):
            raise ConfigError(f"Framework-2 data need uniform or exponential moves for the "
                              f"variational estimator; the model has {gm.move.family} moves")
        return fit_variational(obs, gm, est), obs, gm
    if obs.framework != "F1":
        raise ConfigError(f"Takacs-Fiksel estimation needs a Framework-1 file; Framework-2 "
                          f"data with {gm.move.family} moves need the variational method"
                          if gm.move.family != "gaussian" else
                          "Takacs-Fiksel estimation needs a Framework-1 file; Framework-2 data "
                          "with gaussian moves cannot be fitted")
    return fit_takacs_fiksel(obs, gm, est), obs, gm


def cmd_estimate(cfg: dict, pattern: str, out: Path | None) -> int:
    fr, _, _ = _fit(cfg, pattern)
    fr.config = {**cfgmod.resolved(cfg), "fit": fr.config, "pattern": str(pattern)}
    text = fr.to_json(indent=2, sort_keys=True)
    if out is None:
        print(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    return EXIT_OK


def cmd_diagnose(cfg: dict, patterns: str, out: Path) -> int:
    files = sorted(glob.glob(patterns))
    if not files:
        raise DataError(f"no file matches {patterns!r}")
    out.mkdir(parents=True, exist_ok=True)
    obs = [read_observation(f)[0] for f in files]
    diag = cfg.get("diagnostics", {})
    radii = diag.get("radii")
    if radii:
        curve = variance_curve(obs, radii)
        write_curve(curve, out / "variance_curve.csv", out / "variance_curve.json")
    gm = cfgmod.build_model(cfg)
    est = cfgmod.estimator_config(cfg)
    bank = diag.get("test_functions", ["one", "score"])
    want = diag.get("theta", cfg.get("theta", "fit"))
    for f, o in zip(files, obs):
        if o.framework != "F1":
            continue
        theta = fit_takacs_fiksel(o, gm, est).theta_hat if want == "fit" else want
        rep = residual_report(o, gm, theta, bank, est)
        stem = Path(f).name.split(".")[0]
        write_report(rep, out / f"{stem}.residuals.csv", out / f"{stem}.residuals.json")
    return EXIT_OK


def cmd_experiment(cfg: dict, out: Path, jobs: int) -> int:
    if "experiment" not in cfg:
        raise ConfigError("config key 'experiment': required for the experiment command")
    table = run_experiment(cfg, jobs)
    table.write(out, cfgmod.resolved(cfg))
    n_fail = sum(1 for f in table.fits if f["theta_hat"] is None)
    if n_fail:
        log.warning("%d fits failed; see fits.csv", n_fail)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gibbslat", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "estimate", "diagnose", "experiment"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--out")
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--seed", type=int)
        if name == "estimate":
            s.add_argument("--pattern", required=True)
        if name == "diagnose":
            s.add_argument("--patterns", required=True, help="glob of pattern files")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.jobs < 1:
            raise ConfigError("--jobs must be positive")
        out = Path(args.out) if args.out else None
        if args.command == "simulate":
            return cmd_simulate(cfg, out or Path("patterns"), args.jobs)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.pattern, out)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, args.patterns, out or Path("diagnostics"))
        return cmd_experiment(cfg, out or Path("experiment"), args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as exc:
        print(f"data error: {exc} (usable sites: {exc.n_sites})", file=sys.stderr)
        return EXIT_DATA
    except (DataError, InfeasibleThetaError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IdentifiabilityError, DegenerateSiteError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
