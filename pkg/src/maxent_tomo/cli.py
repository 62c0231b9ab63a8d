"""Command-line interface: ``maxent-tomo synth | reconstruct | wigner | validate | report``."""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import formats
from .checks import run_checks
from .config import ConfigError, RunConfig
from .maxent import DataError, expectations, entropy, reconstruct
from .projectors import MOMENTUM, build_observable_set
from .synth import WavepacketOutOfGridError, build_state, evolve, sample_dataset
from .wigner import local_maxima, marginals, negative_regions, wigner_from_density

log = logging.getLogger("maxent_tomo")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_VALIDATION = 0, 1, 2, 3
THREADS_ENV = "MAXENT_TOMO_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _times(s: str) -> list[float]:
    try:
        return [float(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid time list {s!r}") from None


def _abspath(p):
    return None if p is None else str(Path(p).resolve())


def _overrides(args) -> dict:
    o: dict = {}
    if getattr(args, "n", None) is not None:
        o.setdefault("grid", {})["n_points"] = args.n
    if getattr(args, "times", None) is not None:
        o["times"] = args.times
    if getattr(args, "preset", None) is not None:
        o["preset"] = args.preset
    if getattr(args, "counts", None) is not None:
        o["counts"] = args.counts
    if getattr(args, "seed", None) is not None:
        o["seed"] = args.seed
    if getattr(args, "restarts", None) is not None:
        o.setdefault("optimizer", {})["restarts"] = args.restarts
    if getattr(args, "max_iter", None) is not None:
        o.setdefault("optimizer", {})["max_iter"] = args.max_iter
    if getattr(args, "time", None) is not None:
        o["wigner_time"] = args.time
    paths = {}
    for key in ("out_dir", "data", "rho", "truth"):
        v = getattr(args, key, None)
        if v is not None:
            paths[key] = _abspath(v)
    if paths:
        o["paths"] = paths
    return o


def _out_dir(cfg: RunConfig) -> Path:
    d = cfg.path("out_dir", ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_synth(cfg: RunConfig) -> int:
    grid, constants = cfg.grid(), cfg.constants()
    try:
        rho = build_state(cfg.recipe(), grid, constants)
    except WavepacketOutOfGridError as exc:
        raise ConfigError(str(exc)) from None
    counts = cfg.raw.get("counts") or None
    seed = int(cfg.raw.get("seed") or 0)
    ds = sample_dataset(rho, grid, constants, cfg.times, counts=counts, seed=seed)
    out = _out_dir(cfg)
    data_path = cfg.path("data") or out / "dataset.csv"
    truth_path = cfg.path("truth") or out / "truth.csv"
    recipe = cfg.recipe().to_dict()
    formats.write_dataset(data_path, ds.records, grid, constants, seed=seed, counts=counts,
                          extra={"recipe": recipe})
    formats.write_density(truth_path, rho, grid, constants,
                          extra={"times": cfg.times, "entropy": entropy(rho), "recipe": recipe})
    print(f"wrote {len(ds.records)} records to {data_path}")
    print(f"wrote truth state to {truth_path} (S = {entropy(rho):.6f} nats)")
    return EXIT_OK


def _load_dataset(cfg: RunConfig):
    path = cfg.path("data")
    if path is None:
        raise ConfigError("no dataset given (use --data or paths.data)")
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    return formats.read_dataset(path)


def cmd_reconstruct(cfg: RunConfig) -> int:
    records, grid, constants, header = _load_dataset(cfg)
    times = sorted(r.dataset_id for r in records if r.dataset_id != MOMENTUM)
    if len(set(times)) != len(times):
        raise DataError("dataset contains duplicate probe times")
    obs = build_observable_set(grid, constants, times,
                               include_momentum=any(r.dataset_id == MOMENTUM for r in records))
    opts = cfg.optimizer()
    t0 = time.perf_counter()
    lam, rho, report = reconstruct(obs, records, opts)
    elapsed = time.perf_counter() - t0
    out = _out_dir(cfg)
    formats.write_lambda(out / "lambda.csv", lam, obs.dataset_ids, grid, constants)
    formats.write_density(out / "rho.csv", rho, grid, constants,
                          extra={"times": times, "entropy": report.entropy, "delta": report.delta})
    formats.write_report(out / "fit_report.json", report,
                         extra={"n_points": grid.n_points, "n_multipliers": len(obs), "times": times,
                                "ln_n": float(np.log(grid.n_points))})
    log.info("reconstruction took %.1f s", elapsed)
    print(f"delta      = {report.delta:.6e}")
    print(f"entropy    = {report.entropy:.6f} nats (ln N = {np.log(grid.n_points):.6f})")
    print(f"iterations = {report.iterations} ({report.reason}, converged={report.converged})")
    return EXIT_OK


def cmd_wigner(cfg: RunConfig) -> int:
    path = cfg.path("rho")
    if path is None:
        raise ConfigError("no density matrix given (use --rho or paths.rho)")
    if not path.is_file():
        raise DataError(f"density matrix file not found: {path}")
    rho, grid, constants, header = formats.read_density(path)
    tau = cfg.raw.get("wigner_time")
    if tau is None:
        tau = float((header.get("times") or [0.0])[0])
    w = wigner_from_density(evolve(rho, tau, grid, constants), grid, constants)
    peaks = [{"x": float(w.x_values[i]), "v": float(w.velocities[j]), "W": float(w.values[i, j])}
             for i, j in local_maxima(w)]
    neg = negative_regions(w)
    out = _out_dir(cfg)
    formats.write_wigner(out / "wigner.csv", w, tau,
                         extra={"peaks": peaks, "negative_regions": neg[:5]})

    times = [float(t) for t in header.get("times") or []]
    measured = {}
    if cfg.path("data") is not None:
        records, *_ = _load_dataset(cfg)
        measured = {r.dataset_id: r.probabilities for r in records}
        times = sorted(set(times) | {d for d in measured if d != MOMENTUM})
    if tau not in times:
        times = sorted(set(times) | {tau})
    obs = build_observable_set(grid, constants, times)
    rec = expectations(rho, obs)
    rows = []
    for d in obs.dataset_ids:
        coord = grid.x_values if d != MOMENTUM else constants.k_to_velocity(grid.k_values)
        a = measured.get(d)
        for j, val in enumerate(rec[obs.dataset_slice(d)]):
            rows.append([formats._dataset_key(d), formats.fmt(coord[j]),
                         "" if a is None else formats.fmt(a[j]), formats.fmt(val)])
    wx, wv = marginals(w)
    formats.write_marginals(out / "marginals.csv", rows,
                            {"wigner_time": tau, "coordinate": {"position": "x", MOMENTUM: "velocity"},
                             "wigner_marginal_check": float(max(
                                 np.abs(wx - rec[obs.dataset_slice(tau)]).max(),
                                 np.abs(wv - rec[obs.dataset_slice(MOMENTUM)]).max()))})
    print(f"wigner at t = {tau} ps: min W = {w.min_value:.4e}, negative = {w.has_negativity}")
    for p in peaks:
        print(f"  peak at x = {p['x']:.3f} A, v = {p['v']:.3f} A/ps")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, n: int, broken: bool) -> int:
    t0 = time.perf_counter()
    results = run_checks(n=n, seed=int(cfg.raw.get("seed") or 0), broken_phase_sign=broken)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed in {time.perf_counter() - t0:.2f} s")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_report(cfg: RunConfig, result_dir: Path) -> int:
    rpath = result_dir / "fit_report.json"
    if not rpath.is_file():
        raise DataError(f"fit report not found: {rpath}")
    report = formats.read_report(rpath)
    rho, grid, constants, _ = formats.read_density(result_dir / "rho.csv")
    print(f"N = {grid.n_points}, dx = {grid.dx:.4f} A, dv = {constants.k_to_velocity(grid.dk):.4f} A/ps")
    print(f"delta = {report['delta']:.6e}   entropy = {report['entropy']:.6f} nats   "
          f"ln N = {np.log(grid.n_points):.6f}   purity = {rho.purity():.6f}")
    print(f"iterations = {report['iterations']}   converged = {report['converged']} ({report['reason']})")
    if cfg.path("data") is not None:
        records, *_ = _load_dataset(cfg)
        times = sorted(r.dataset_id for r in records if r.dataset_id != MOMENTUM)
        obs = build_observable_set(grid, constants, times)
        rec = expectations(rho, obs)
        print(f"{'dataset':>10} {'rms':>12} {'max':>12}")
        for r in records:
            diff = r.probabilities - rec[obs.dataset_slice(r.dataset_id)]
            print(f"{formats._dataset_key(r.dataset_id):>10} {np.sqrt(np.mean(diff**2)):12.3e} "
                  f"{np.abs(diff).max():12.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="maxent-tomo", description="Maximum-entropy phase-space tomography of free fragments.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out", dest="out_dir", help="output directory")
        sp.add_argument("--seed", type=int)

    s = sub.add_parser("synth", help="generate a synthetic dataset and its truth state")
    common(s)
    s.add_argument("--preset")
    s.add_argument("--times", type=_times)
    s.add_argument("--n", type=int)
    s.add_argument("--counts", type=int, help="events per dataset; 0 for noiseless")
    s.add_argument("--data", help="dataset output path")
    s.add_argument("--truth", help="truth-state output path")

    r = sub.add_parser("reconstruct", help="fit the maximum-entropy state to a dataset")
    common(r)
    r.add_argument("--data")
    r.add_argument("--restarts", type=int)
    r.add_argument("--max-iter", type=int)

    w = sub.add_parser("wigner", help="Wigner function and marginals of a density matrix")
    common(w)
    w.add_argument("--rho")
    w.add_argument("--data", help="dataset for measured marginal columns")
    w.add_argument("--time", type=float, help="probe delay in ps")

    v = sub.add_parser("validate", help="run the self-consistency suites")
    common(v)
    v.add_argument("--n", type=int, default=8)
    v.add_argument("--broken-phase-sign", action="store_true", help=argparse.SUPPRESS)

    rp = sub.add_parser("report", help="summarize a reconstruction result directory")
    common(rp)
    rp.add_argument("result_dir")
    rp.add_argument("--data")
    return p


def _thread_limit():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _overrides(args)
        if args.command == "validate":
            overrides.pop("grid", None)
        cfg = RunConfig.load(args.config, overrides)
        with _thread_limit():
            if args.command == "synth":
                return cmd_synth(cfg)
            if args.command == "reconstruct":
                return cmd_reconstruct(cfg)
            if args.command == "wigner":
                return cmd_wigner(cfg)
            if args.command == "validate":
                return cmd_validate(cfg, args.n, args.broken_phase_sign)
            return cmd_report(cfg, Path(args.result_dir))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
