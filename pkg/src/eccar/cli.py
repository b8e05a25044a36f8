"""Command-line interface: ``eccar fit|simulate|cv|eval|benchmark``.

Exit codes: 0 success, 2 input error, 3 degenerate solution, 4 numerical
failure. Every command writes its outputs plus a manifest that records the
resolved configuration, seeds, package version and input digests. Wall-clock
timings go to a separate ``timings.json`` so that all other outputs are
byte-identical across re-runs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cca import CcaModel, fit
from .exceptions import (DegenerateSolution, EccarError, InvalidData, NoViableModel,
                         NumericalFailure)
from .groups import partition_by_name
from .io import (SCHEMA_VERSION, file_digest, read_matrix, write_json, write_matrix,
                 write_table)
from .linalg import Dataset, empirical_covariances
from .metrics import (procrustes_distance, prediction_mse, stacked_distance, support_scores,
                      variate_correlation)
from .selection import CvConfig, cross_validate, penalty_grid
from .solver import AdmmConfig, PenaltySpec, theoretical_penalty
from .synthetic import SIGNAL_PRESETS, SyntheticSpec, build_model, sample_dataset

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("eccar")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NUMERICAL = 0, 2, 3, 4

DEFAULTS = {
    "rank": 2, "weight": None, "a": 1.0, "groups": "elementwise", "center": True,
    "step": 1.0, "max_iter": 2000, "eps_abs": 1e-6, "eps_rel": 1e-5,
    "k": 5, "grid": None, "grid_length": 10, "grid_span": 10.0, "seed": None,
    "warm_start": False, "p": 200, "q": None, "s_u": 5, "s_v": None, "signal": "0.9",
    "n": 400, "p1": None, "r_pca": 5, "threads": None,
}


class UsageError(EccarError):
    pass


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (DegenerateSolution, NoViableModel)):
        return EXIT_DEGENERATE
    if isinstance(exc, (NumericalFailure, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    return EXIT_INPUT


def _load_config(path: str | None, command: str) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    flat = {k.replace("-", "_"): v for k, v in doc.items() if not isinstance(v, dict)}
    flat.update({k.replace("-", "_"): v for k, v in doc.get(command, {}).items()})
    return flat


def _resolve(args: argparse.Namespace, keys) -> dict:
    """Flags override the TOML config, which overrides built-in defaults."""
    config = _load_config(getattr(args, "config", None), args.command)
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in config:
            out[key] = config[key]
        else:
            out[key] = DEFAULTS.get(key)
    return out


def _manifest(command: str, config: dict, inputs: dict[str, str], seeds: dict) -> dict:
    return {
        "command": command,
        "config": config,
        "seeds": seeds,
        "version": __version__,
        "inputs": {name: {"path": str(p), "sha256": file_digest(p)} for name, p in inputs.items()},
    }


def _load_data(x_path: str, y_path: str) -> Dataset:
    x, y = read_matrix(x_path), read_matrix(y_path)
    if x.shape[0] != y.shape[0]:
        raise InvalidData(f"X has {x.shape[0]} rows but Y has {y.shape[0]}")
    return Dataset(x, y)


def _admm(cfg: dict) -> AdmmConfig:
    return AdmmConfig(step=float(cfg["step"]), max_iter=int(cfg["max_iter"]),
                      eps_abs=float(cfg["eps_abs"]), eps_rel=float(cfg["eps_rel"]))


def _write_model(out: Path, model: CcaModel) -> None:
    write_matrix(out / "U.csv", model.u)
    write_matrix(out / "V.csv", model.v)
    write_matrix(out / "B.csv", model.b_hat)
    write_matrix(out / "lambda.csv", model.lambdas[:, None])
    write_matrix(out / "x_mean.csv", model.x_mean[None, :])
    write_matrix(out / "y_mean.csv", model.y_mean[None, :])


def _fit_summary(model: CcaModel, kkt: float) -> dict:
    return {
        "fit": model.fit.to_dict(),
        "kkt_violation": kkt,
        "rank": model.rank,
        "effective_rank_reduced": model.effective_rank_reduced,
        "lambda": model.lambdas,
        "weight": model.penalty_used.weight,
        "nnz": int(np.count_nonzero(model.b_hat)),
    }


FIT_KEYS = ("rank", "weight", "a", "groups", "center", "step", "max_iter", "eps_abs", "eps_rel")


def cmd_fit(args: argparse.Namespace) -> dict:
    cfg = _resolve(args, FIT_KEYS)
    data = _load_data(args.x, args.y)
    weight = cfg["weight"]
    if weight is None:
        weight = theoretical_penalty(data.n, data.p, data.q, float(cfg["a"]))
    cfg["weight_resolved"] = float(weight)
    partition = partition_by_name(cfg["groups"], data.p, data.q)
    penalty = PenaltySpec(float(weight), partition)
    manifest = _manifest("fit", cfg, {"x": args.x, "y": args.y}, {})
    model = fit(data, int(cfg["rank"]), penalty, _admm(cfg), center=bool(cfg["center"]))
    _write_model(Path(args.out), model)
    return {"status": "ok", **_fit_summary(model, model.fit.kkt_violation), "manifest": manifest}


def cmd_cv(args: argparse.Namespace) -> dict:
    cfg = _resolve(args, FIT_KEYS + ("k", "grid", "grid_length", "grid_span", "seed",
                                     "warm_start", "threads"))
    if cfg["seed"] is None:
        cfg["seed"] = 0
    data = _load_data(args.x, args.y)
    if cfg["grid"] is not None:
        grid = cfg["grid"]
        if isinstance(grid, str):
            grid = [float(v) for v in grid.split(",") if v.strip()]
        grid = sorted(float(v) for v in grid)
    else:
        grid = penalty_grid(data.n, data.p, data.q, int(cfg["grid_length"]),
                            float(cfg["grid_span"])).tolist()
    cfg["grid_resolved"] = grid
    partition = partition_by_name(cfg["groups"], data.p, data.q)
    cv_cfg = CvConfig(grid=tuple(grid), k=int(cfg["k"]), r=int(cfg["rank"]),
                      seed=int(cfg["seed"]), admm=_admm(cfg),
                      warm_start=bool(cfg["warm_start"]), center=bool(cfg["center"]))
    manifest = _manifest("cv", cfg, {"x": args.x, "y": args.y}, {"fold_seed": cv_cfg.seed})
    res = cross_validate(data, cv_cfg, partition, n_jobs=cfg["threads"])
    out = Path(args.out)
    rows = [{"weight": float(w), "mean_mse": float(m), "se_mse": float(s)}
            for w, m, s in zip(res.grid, res.mean_val_mse, res.se_val_mse)]
    write_table(out / "cv_path.csv", rows, ("weight", "mean_mse", "se_mse"))
    _write_model(out, res.chosen_model)
    return {"status": "ok", "chosen_weight": res.chosen_weight,
            "chosen_index": res.chosen_index,
            **_fit_summary(res.chosen_model, res.chosen_model.fit.kkt_violation),
            "manifest": manifest}


def _signal(value) -> float:
    if isinstance(value, str) and value in SIGNAL_PRESETS:
        return SIGNAL_PRESETS[value]
    try:
        return float(value)
    except (TypeError, ValueError):
        raise UsageError(f"signal must be a number or one of {sorted(SIGNAL_PRESETS)}") from None


def cmd_simulate(args: argparse.Namespace) -> dict:
    cfg = _resolve(args, ("p", "q", "rank", "s_u", "s_v", "signal", "n", "seed", "p1", "r_pca"))
    if cfg["seed"] is None:
        raise UsageError("simulate requires an explicit --seed")
    seed = int(cfg["seed"])
    q = cfg["q"] if cfg["q"] is not None else cfg["p"]
    s_v = cfg["s_v"] if cfg["s_v"] is not None else cfg["s_u"]
    p1 = None if cfg["p1"] is None else int(cfg["p1"])
    spec = SyntheticSpec(p=int(cfg["p"]), q=int(q), r=int(cfg["rank"]), s_u=int(cfg["s_u"]),
                         s_v=int(s_v), signal=_signal(cfg["signal"]), seed=seed, n=int(cfg["n"]),
                         p1=p1, q1=p1 if p1 is None else min(p1, int(q)),
                         r_pca=int(cfg["r_pca"]))
    sample_seed = int(np.random.SeedSequence(seed).spawn(1)[0].generate_state(1, np.uint64)[0])
    truth = build_model(spec)
    data = sample_dataset(truth, spec.n, sample_seed)
    out = Path(args.out)
    write_matrix(out / "X.csv", data.x)
    write_matrix(out / "Y.csv", data.y)
    write_matrix(out / "U_star.csv", truth.u_star)
    write_matrix(out / "V_star.csv", truth.v_star)
    write_matrix(out / "B_star.csv", truth.b_star)
    write_json(out / "supports.json", {
        "schema_version": SCHEMA_VERSION,
        "support_u": truth.support_u, "support_v": truth.support_v,
        "lambda_star": truth.lambda_star, "spec": spec.to_dict(),
    })
    manifest = _manifest("simulate", {**cfg, "spec": spec.to_dict()}, {},
                         {"build_seed": seed, "sample_seed": sample_seed})
    write_json(out / "manifest.json", {"schema_version": SCHEMA_VERSION, **manifest})
    return {"status": "ok", "manifest": manifest}


def cmd_eval(args: argparse.Namespace) -> dict:
    model_dir = Path(args.model)
    u, v = read_matrix(model_dir / "U.csv"), read_matrix(model_dir / "V.csv")
    metrics: dict = {"rank": u.shape[1]}
    inputs = {"U": model_dir / "U.csv", "V": model_dir / "V.csv"}
    if args.truth:
        tdir = Path(args.truth)
        u_star, v_star = read_matrix(tdir / "U_star.csv"), read_matrix(tdir / "V_star.csv")
        inputs.update(U_star=tdir / "U_star.csv", V_star=tdir / "V_star.csv")
        if u_star.shape[0] != u.shape[0] or v_star.shape[0] != v.shape[0]:
            raise InvalidData("model and truth dimensions differ")
        if u_star.shape[1] == u.shape[1]:
            metrics["stacked_sin_theta"] = stacked_distance(u, v, u_star, v_star)
            metrics["procrustes_u"] = procrustes_distance(u, u_star)
            metrics["procrustes_v"] = procrustes_distance(v, v_star)
        else:
            metrics["rank_mismatch"] = [u.shape[1], u_star.shape[1]]
        supports_path = tdir / "supports.json"
        b_path = model_dir / "B.csv"
        if supports_path.exists() and b_path.exists():
            sup = json.loads(supports_path.read_text())
            inputs.update(supports=supports_path, B=b_path)
            metrics["support"] = support_scores(read_matrix(b_path), sup["support_u"],
                                                sup["support_v"]).to_dict()
    if args.x or args.y:
        if not (args.x and args.y):
            raise UsageError("--x and --y must be given together")
        data = _load_data(args.x, args.y)
        inputs.update(x=args.x, y=args.y)
        xm = model_dir / "x_mean.csv"
        ym = model_dir / "y_mean.csv"
        if xm.exists() and ym.exists():
            data = Dataset(data.x - read_matrix(xm)[0], data.y - read_matrix(ym)[0])
        if data.p != u.shape[0] or data.q != v.shape[0]:
            raise InvalidData("data dimensions do not match the model")
        metrics["prediction_mse"] = prediction_mse(u, v, data)
        corr, degenerate = variate_correlation(u, v, data)
        metrics["variate_correlation"] = corr
        metrics["variate_degenerate"] = degenerate
        cov = empirical_covariances(data, center=False)
        r = u.shape[1]
        metrics["normalization_gap_u"] = float(np.linalg.norm(u.T @ cov.sigma_x @ u - np.eye(r)))
        metrics["normalization_gap_v"] = float(np.linalg.norm(v.T @ cov.sigma_y @ v - np.eye(r)))
    manifest = _manifest("eval", {"model": str(model_dir), "truth": args.truth}, inputs, {})
    write_json(Path(args.out or model_dir) / "metrics.json",
               {"schema_version": SCHEMA_VERSION, "metrics": metrics, "manifest": manifest})
    return {"status": "ok", "manifest": manifest}


def cmd_benchmark(args: argparse.Namespace) -> dict:
    from .benchmark import SweepSpec, run_sweep

    path = Path(args.spec)
    try:
        raw = path.read_bytes()
        doc = tomllib.loads(raw.decode()) if path.suffix == ".toml" else json.loads(raw)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read sweep spec {path}: {exc}") from None
    if "master_seed" not in doc:
        raise UsageError("sweep spec must set master_seed")
    spec = SweepSpec.from_dict(doc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(spec, n_jobs=args.threads, flush_path=out / "results.partial.csv")
    result.write(out)
    (out / "results.partial.csv").unlink(missing_ok=True)
    manifest = _manifest("benchmark", spec.to_dict(), {"spec": path},
                         {"master_seed": spec.master_seed})
    write_json(out / "manifest.json", {"schema_version": SCHEMA_VERSION, **manifest})
    failed = sum(r["status"] != "ok" for r in result.records)
    return {"status": "ok", "records": len(result.records), "failed": failed,
            "manifest": manifest}


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--x", required=True, help="CSV of X (rows = samples)")
    p.add_argument("--y", required=True, help="CSV of Y (rows = samples)")
    p.add_argument("-r", "--rank", type=int)
    p.add_argument("--weight", type=float, help="penalty weight (overrides --a)")
    p.add_argument("--a", type=float, help="scale of the rate sqrt(log(p+q)/n)")
    p.add_argument("--groups", help="elementwise | rows | blocks:BPxBQ | file:PATH")
    p.add_argument("--no-center", dest="center", action="store_const", const=False)
    p.add_argument("--step", type=float, help="ADMM augmentation parameter")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--eps-abs", type=float)
    p.add_argument("--eps-rel", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eccar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"eccar {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="sparse CCA on CSV matrices")
    _add_fit_flags(p)
    p.add_argument("--config", help="TOML config; flags take precedence")
    p.add_argument("--out", required=True)

    p = sub.add_parser("cv", help="cross-validate the penalty weight")
    _add_fit_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--grid", help="comma-separated penalty weights")
    p.add_argument("--grid-length", type=int)
    p.add_argument("--grid-span", type=float)
    p.add_argument("--seed", type=int, help="fold shuffling seed (default 0)")
    p.add_argument("--warm-start", action="store_const", const=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="draw data from the synthetic canonical pair model")
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("-r", "--rank", type=int)
    p.add_argument("--s-u", type=int)
    p.add_argument("--s-v", type=int)
    p.add_argument("--signal", help="canonical correlation or high|medium|weak")
    p.add_argument("--n", type=int)
    p.add_argument("--p1", type=int)
    p.add_argument("--r-pca", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score a fitted model")
    p.add_argument("--model", required=True, help="directory written by fit or cv")
    p.add_argument("--truth", help="directory written by simulate")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--out", help="defaults to the model directory")

    p = sub.add_parser("benchmark", help="run a simulation sweep")
    p.add_argument("--spec", required=True, help="sweep spec (JSON or TOML)")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    return parser


COMMANDS = {"fit": cmd_fit, "cv": cmd_cv, "simulate": cmd_simulate, "eval": cmd_eval,
            "benchmark": cmd_benchmark}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out) if getattr(args, "out", None) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        doc = COMMANDS[args.command](args)
        code = EXIT_OK
    except (EccarError, np.linalg.LinAlgError) as exc:
        code = _exit_code(exc)
        doc = {"status": "error", "error": {"type": type(exc).__name__, "message": str(exc)}}
        print(f"eccar {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
    if out is not None:
        if args.command in ("fit", "cv") or code != EXIT_OK:
            write_json(out / "report.json", {"schema_version": SCHEMA_VERSION,
                                             "exit_code": code, **doc})
        write_json(out / "timings.json", {"command": args.command,
                                          "wall_seconds": time.perf_counter() - t0})
    return code


if __name__ == "__main__":
    sys.exit(main())
