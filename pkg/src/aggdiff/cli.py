"""``aggdiff`` command line: lattice-run, pde-run, classify-n4, verify, sweep.

Exit status: 0 on success, 1 if an assertable check failed, 2 for invalid
configuration, 3 when a run aborts on an invariant, stability or overflow
error. A JSON config file (``--config``) may supply any flag by its long name
with dashes replaced by underscores; explicit flags win.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import RunManifest, to_jsonable, write_csv, write_json, write_svg_lines
from .asymptotics import classify_n4, verify_n4
from .continuum import (
    ContinuumState,
    DiagnosticsSample,
    SolverOverflowError,
    StabilityError,
    l2_decay_fit,
    min_principle_check,
    pde_simulate,
)
from .lattice import InvariantViolation, LatticeState, simulate
from .model import BoundaryCondition, DomainError
from .profiles import ProfileError, parse_profile
from .regions import check_region_monotone, forward_region
from .verification import SUITES, run_suites

logger = logging.getLogger("aggdiff")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
MODES = ("lattice-run", "pde-run", "classify-n4", "verify", "sweep")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    init: str | None = None
    n_points: int | None = None
    bc: str = "noflux"
    steps: int = 100_000
    tol: float = 1e-13
    stride: int = 1
    epsilon: float = 1e-3
    M: int = 200
    t_max: float = 5.0
    sample_every: float | None = None
    blowup_cap: float = 1e8
    out: str = "aggdiff_run"
    seed: int = 0
    simulate: bool = False
    max_steps: int = 10_000_000
    suite: tuple = ()
    scale: float = 1.0
    svg: bool = False
    kind: str = "pde"
    eps_list: tuple = ()
    M_list: tuple = ()
    n_list: tuple = ()
    bc_list: tuple = ()
    workers: int = 1

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        vals = {k: v for k, v in vars(ns).items() if k in names and v is not None}
        for k in ("suite", "eps_list", "M_list", "n_list", "bc_list"):
            if k in vals:
                vals[k] = tuple(vals[k])
        return cls(**vals)

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------- lattice-run

def _lattice_initial(cfg: RunConfig) -> LatticeState:
    if not cfg.init:
        raise ConfigError("--init is required")
    prof = parse_profile(cfg.init)
    n_int = prof.natural_size
    if n_int is None:
        if cfg.n_points is None or cfg.n_points < 2:
            raise ConfigError("--n (number of lattice points, >= 2) is required for this profile")
        n_int = cfg.n_points - 1
    elif cfg.n_points is not None and cfg.n_points != n_int + 1:
        raise ConfigError(f"--n {cfg.n_points} disagrees with {n_int} listed values")
    return LatticeState(prof.sample(n_int, cfg.seed), BoundaryCondition.parse(cfg.bc))


def run_lattice(cfg: RunConfig) -> dict:
    manifest = RunManifest(cfg.to_dict())
    st = _lattice_initial(cfg)
    if cfg.steps < 0 or cfg.stride < 1 or cfg.tol < 0:
        raise ConfigError("steps >= 0, stride >= 1 and tol >= 0 are required")
    traj = simulate(st, cfg.steps, cfg.tol, cfg.stride)
    rows = ((k, j + 1, float(v)) for k, s in zip(traj.steps, traj.states) for j, v in enumerate(s.interior))
    manifest.add(write_csv(f"{cfg.out}_series.csv", ("step", "j", "u"), rows))

    history, last = [], None
    for k, s in zip(traj.steps, traj.states):
        fwd = list(forward_region(s).forward)
        if fwd != last:
            history.append({"step": k, "forward": fwd})
            last = fwd
    verdict = check_region_monotone(traj)
    summary = {
        "converged": traj.converged,
        "steps": traj.step_count,
        "final_change": traj.final_change,
        "final_state": traj.final.interior.tolist(),
        "interior_mass": {"initial": float(np.sum(st.interior)), "final": float(np.sum(traj.final.interior))},
        "interior_mean": float(np.mean(st.interior)),
        "region_history": history,
        "forward_region_monotone": verdict.passed,
    }
    if st.interior.size == 3 and st.bc is BoundaryCondition.HOSTILE:
        rep = classify_n4(*st.interior)
        summary["n4_case"] = {"label": rep.label, "branch": rep.key,
                              "predicted": rep.predicted.to_dict() if rep.predicted else None}
    manifest.add(write_json(f"{cfg.out}_summary.json", summary))
    if cfg.svg and st.interior.size <= 12:
        vals = traj.values()
        series = {f"u{j + 1}": (traj.steps, vals[:, j]) for j in range(vals.shape[1])}
        manifest.add(write_svg_lines(f"{cfg.out}_plot.svg", series, "lattice values"))
    manifest.verdicts = {"converged": traj.converged, "forward_region_monotone": verdict.passed}
    manifest.write(cfg.out)
    return summary


# --------------------------------------------------------------------------- pde-run

def run_pde(cfg: RunConfig) -> dict:
    manifest = RunManifest(cfg.to_dict())
    if not cfg.init:
        raise ConfigError("--init is required")
    if cfg.M < 2 or cfg.t_max <= 0 or cfg.epsilon < 0:
        raise ConfigError("M >= 2, t_max > 0 and eps >= 0 are required")
    st = ContinuumState.from_profile(parse_profile(cfg.init), cfg.M, cfg.epsilon, seed=cfg.seed)
    cap = cfg.blowup_cap if cfg.blowup_cap and cfg.blowup_cap > 0 else None
    res = pde_simulate(st, cfg.t_max, cfg.sample_every, blowup_cap=cap)
    manifest.add(write_csv(f"{cfg.out}_diagnostics.csv", DiagnosticsSample.COLUMNS,
                           (s.row() for s in res.samples)))
    manifest.add(write_csv(f"{cfg.out}_final.csv", ("x", "u"), zip(res.final.x.tolist(), res.final.cells.tolist())))

    first, last = res.samples[0], res.samples[-1]
    growth = last.max_gradient / first.max_gradient if first.max_gradient > 0 else 1.0
    summary = {
        "t_final": res.t_stop,
        "steps": res.steps,
        "final_l2_to_mean": last.l2_to_mean,
        "mass_relative_drift": abs(last.mass - first.mass) / abs(first.mass) if first.mass else 0.0,
        "energy_nonincreasing": bool(np.all(np.diff(res.series("energy")) <= 1e-12)),
        "gradient_growth_factor": growth,
        "gradient_growth": bool(growth > 1.0),
        "blew_up": res.blew_up,
        "backward_regime": bool(np.any(st.model.D(st.cells) + st.epsilon < 0)),
    }
    summary["l2_decay_rate"] = summary["l2_decay_r2"] = None
    if not res.blew_up:
        try:
            summary["l2_decay_rate"], summary["l2_decay_r2"] = l2_decay_fit(res.samples)
        except ValueError:
            pass  # fewer than three decaying samples
    mp = min_principle_check(res)
    summary["min_principle"] = asdict(mp) if mp.applicable else None
    manifest.add(write_json(f"{cfg.out}_summary.json", summary))
    if cfg.svg:
        t = res.series("time")
        manifest.add(write_svg_lines(f"{cfg.out}_plot.svg", {"l2_to_mean": (t, res.series("l2_to_mean"))},
                                     "squared L2 distance to the mean", logy=True))
    manifest.verdicts = {"blew_up": res.blew_up, "gradient_growth": summary["gradient_growth"]}
    manifest.write(cfg.out)
    return summary


# --------------------------------------------------------------------------- classify-n4

def run_classify(cfg: RunConfig) -> dict:
    if not cfg.init:
        raise ConfigError("a triple such as 0.2,0.4,0.3 is required")
    try:
        vals = [float(v) for v in cfg.init.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad triple {cfg.init!r}") from exc
    if len(vals) != 3:
        raise ConfigError("exactly three values are required")
    rep = verify_n4(*vals, max_steps=cfg.max_steps) if cfg.simulate else classify_n4(*vals)
    return rep.to_dict()


# --------------------------------------------------------------------------- verify

def run_verify(cfg: RunConfig) -> tuple[list, bool]:
    names = cfg.suite or SUITES
    results = run_suites(names, seed=cfg.seed, scale=cfg.scale)
    return results, all(r.passed for r in results)


# --------------------------------------------------------------------------- sweep

def _sweep_job(cfg_dict: dict) -> tuple[str, str | None]:
    cfg = RunConfig(**cfg_dict)
    try:
        (run_pde if cfg.mode == "pde-run" else run_lattice)(cfg)
        return cfg.out, None
    except (ConfigError, ProfileError, DomainError, InvariantViolation, StabilityError,
            SolverOverflowError) as exc:
        return cfg.out, f"{type(exc).__name__}: {exc}"


def _tag(v) -> str:
    return str(v).replace(".", "p").replace("-", "m")


def sweep_configs(cfg: RunConfig) -> list[RunConfig]:
    base = {k: v for k, v in cfg.to_dict().items() if k not in ("eps_list", "M_list", "n_list", "bc_list")}
    out = []
    if cfg.kind == "pde":
        for e, m in itertools.product(cfg.eps_list or (cfg.epsilon,), cfg.M_list or (cfg.M,)):
            out.append(RunConfig(**{**base, "mode": "pde-run", "epsilon": float(e), "M": int(m),
                                    "out": f"{cfg.out}_eps{_tag(e)}_M{m}"}))
    elif cfg.kind == "lattice":
        for n, bc in itertools.product(cfg.n_list or (cfg.n_points,), cfg.bc_list or (cfg.bc,)):
            out.append(RunConfig(**{**base, "mode": "lattice-run", "n_points": n, "bc": bc,
                                    "out": f"{cfg.out}_N{n}_{bc}"}))
    else:
        raise ConfigError("--kind must be 'pde' or 'lattice'")
    return out


def run_sweep(cfg: RunConfig) -> dict:
    manifest = RunManifest(cfg.to_dict())
    jobs = [asdict(c) for c in sweep_configs(cfg)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    for prefix, err in results:
        if err is None:
            manifest.add(f"{prefix}_manifest.json")
    manifest.verdicts = {prefix: ("ok" if err is None else err) for prefix, err in results}
    manifest.write(cfg.out)
    return manifest.verdicts


# --------------------------------------------------------------------------- parser

def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output prefix (default: aggdiff_run)")
    common.add_argument("--seed", type=int, help="seed for random profiles and sampled corpora (default 0)")
    common.add_argument("--config", help="JSON file with default values for any flag")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="aggdiff", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"aggdiff {__version__}")
    sub = p.add_subparsers(dest="mode", required=True)

    lat = sub.add_parser("lattice-run", parents=[common], help="simulate the lattice update")
    lat.add_argument("--init", help="profile: list, 'constant c', 'ramp a b', cosine or 'random lo hi [seed s]'")
    lat.add_argument("--n", dest="n_points", type=int, help="number of lattice points N (interior N-1)")
    lat.add_argument("--bc", choices=("noflux", "hostile"))
    lat.add_argument("--steps", type=int)
    lat.add_argument("--tol", type=float, help="stop once the max change drops below this")
    lat.add_argument("--stride", type=int, help="record every k-th state")
    lat.add_argument("--svg", action="store_true", default=None)

    pde = sub.add_parser("pde-run", parents=[common], help="run the regularised continuum solver")
    pde.add_argument("--init")
    pde.add_argument("--M", type=int, help="number of cells")
    pde.add_argument("--eps", dest="epsilon", type=float)
    pde.add_argument("--tmax", dest="t_max", type=float)
    pde.add_argument("--sample-every", type=float)
    pde.add_argument("--blowup-cap", type=float, help="stop when the gradient grows by this factor (0 disables)")
    pde.add_argument("--svg", action="store_true", default=None)

    cls = sub.add_parser("classify-n4", parents=[common], help="classify a three-site hostile triple")
    cls.add_argument("init", nargs="?", help="triple u1,u2,u3")
    cls.add_argument("--simulate", action="store_true", default=None)
    cls.add_argument("--max-steps", type=int)

    ver = sub.add_parser("verify", parents=[common], help="run the verification suites")
    ver.add_argument("--suite", action="append", choices=SUITES)
    ver.add_argument("--scale", type=float, help="fraction of the full sample counts (default 1)")

    sw = sub.add_parser("sweep", parents=[common], help="fan out lattice or pde runs")
    sw.add_argument("--kind", choices=("pde", "lattice"))
    sw.add_argument("--init")
    sw.add_argument("--eps", dest="eps_list", type=_float_list)
    sw.add_argument("--M", dest="M_list", type=_int_list)
    sw.add_argument("--n", dest="n_list", type=_int_list)
    sw.add_argument("--bc", dest="bc_list", type=_str_list)
    sw.add_argument("--tmax", dest="t_max", type=float)
    sw.add_argument("--steps", type=int)
    sw.add_argument("--tol", type=float)
    sw.add_argument("--workers", type=int)
    return p


def parse_config(argv) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config!r}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known - {"config", "verbose"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for k, v in data.items():
            if getattr(ns, k, None) is None:
                setattr(ns, k, v)
    return RunConfig.from_namespace(ns), ns


def main(argv=None) -> int:
    try:
        cfg, ns = parse_config(argv)
    except ConfigError as exc:
        print(f"aggdiff: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if cfg.mode == "lattice-run":
            summary = run_lattice(cfg)
            print(json.dumps({"converged": summary["converged"], "steps": summary["steps"],
                              "final_state": summary["final_state"]}))
        elif cfg.mode == "pde-run":
            summary = run_pde(cfg)
            print(json.dumps({k: summary[k] for k in ("t_final", "final_l2_to_mean", "gradient_growth", "blew_up")}))
        elif cfg.mode == "classify-n4":
            print(json.dumps(to_jsonable(run_classify(cfg)), indent=2))
        elif cfg.mode == "verify":
            results, ok = run_verify(cfg)
            for r in results:
                print(f"[{r.name}] {'PASS' if r.passed else 'FAIL'} ({r.seconds:.1f}s)")
                for c in r.checks:
                    print(f"  {c.line()}")
            if ns.out:
                write_json(f"{cfg.out}_verify.json", [r.to_dict() for r in results])
            return EXIT_OK if ok else EXIT_FAILED
        else:
            verdicts = run_sweep(cfg)
            print(json.dumps(verdicts, indent=2))
            return EXIT_OK if all(v == "ok" for v in verdicts.values()) else EXIT_FAILED
    except (ConfigError, ProfileError, DomainError) as exc:
        print(f"aggdiff: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, StabilityError, SolverOverflowError) as exc:
        print(f"aggdiff: run aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
