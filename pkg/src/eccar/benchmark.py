"""Simulation sweeps over the synthetic canonical pair model.

A sweep is the product of its axes; every cell is replicated under seeds
derived from a single master seed, and each replication is scored for every
method variant. Records come back in canonical (cell, replication, variant)
order whatever the thread count, so re-running a sweep reproduces every
deterministic field exactly. Wall-clock times are kept apart from the
deterministic fields for that reason.
"""

from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .cca import fit_covariance, fit_low_dim_covariance
from .exceptions import EccarError, InvalidConfig
from .groups import block_partition, row_partition
from .io import write_table
from .linalg import CovarianceModel, empirical_covariances
from .metrics import stacked_distance, support_metrics
from .selection import CvConfig, cross_validate, penalty_grid, worker_count
from .solver import AdmmConfig, PenaltySpec, admm_fit, theoretical_penalty
from .synthetic import SyntheticSpec, build_model, sample_dataset

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ("cell", "p", "q", "n", "s", "r", "signal", "replication", "variant",
                  "weight", "status", "distance", "converged", "iterations",
                  "precision", "recall", "exact_subset", "nnz")
SUMMARY_COLUMNS = ("cell", "p", "q", "n", "s", "r", "signal", "variant", "n_ok", "n_failed",
                   "median_distance", "q25_distance", "q75_distance", "mean_distance",
                   "convergence_rate", "mean_recall", "exact_subset_rate")


def _parse_variant(name: str) -> tuple[str, int, int]:
    if name in ("eccar-l1", "eccar-row", "lowdim"):
        return name, 0, 0
    if name.startswith("eccar-group"):
        _, _, dims = name.partition(":")
        try:
            bp, bq = (int(v) for v in (dims or "5x5").lower().split("x"))
        except ValueError:
            raise InvalidConfig(f"bad group variant {name!r}; use eccar-group:BPxBQ") from None
        return "eccar-group", bp, bq
    raise InvalidConfig(f"unknown variant {name!r}")


@dataclass(frozen=True)
class SweepSpec:
    """Experimental grid. ``q`` follows ``p`` unless ``q_values`` is given.

    ``penalty`` is ``{"rule": "theoretical", "a": float}`` or
    ``{"rule": "cv", "k": int, "length": int, "span": float}``.
    """

    p_values: tuple[int, ...]
    s_values: tuple[int, ...]
    signal_values: tuple[float, ...]
    n_values: tuple[int, ...]
    r_values: tuple[int, ...] = (2,)
    q_values: tuple[int, ...] | None = None
    replications: int = 25
    master_seed: int = 0
    variants: tuple[str, ...] = ("eccar-l1", "eccar-group:5x5", "eccar-row", "lowdim")
    penalty: dict = field(default_factory=lambda: {"rule": "theoretical", "a": 1.0})
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    p1: int | None = None
    r_pca: int = 5

    def __post_init__(self):
        for name in ("p_values", "s_values", "signal_values", "n_values", "r_values"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "variants", tuple(self.variants))
        if self.q_values is not None:
            object.__setattr__(self, "q_values", tuple(self.q_values))
        for v in self.variants:
            _parse_variant(v)
        rule = self.penalty.get("rule")
        if rule not in ("theoretical", "cv"):
            raise InvalidConfig(f"penalty rule must be 'theoretical' or 'cv', got {rule!r}")
        if self.replications < 1:
            raise InvalidConfig("replications must be >= 1")
        for cell in self.cells():
            self.synthetic_spec(cell, 0)

    def cells(self) -> list[dict]:
        qs = self.q_values
        out = []
        axes = itertools.product(self.p_values, self.s_values, self.signal_values,
                                 self.r_values, self.n_values)
        for p, s, signal, r, n in axes:
            for q in ((p,) if qs is None else qs):
                out.append({"cell": len(out), "p": p, "q": q, "n": n, "s": s, "r": r,
                            "signal": float(signal)})
        return out

    def seeds(self, cell: dict, replication: int) -> tuple[int, int]:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(cell["cell"], replication))
        build, sample = ss.generate_state(2, dtype=np.uint64)
        return int(build), int(sample)

    def synthetic_spec(self, cell: dict, replication: int) -> SyntheticSpec:
        build_seed, _ = self.seeds(cell, replication)
        kw = {} if self.p1 is None else {"p1": min(self.p1, cell["p"]), "q1": min(self.p1, cell["q"])}
        return SyntheticSpec(p=cell["p"], q=cell["q"], r=cell["r"], s_u=cell["s"], s_v=cell["s"],
                             signal=cell["signal"], seed=build_seed, n=cell["n"],
                             r_pca=self.r_pca, **kw)

    def to_dict(self) -> dict:
        return {
            "p_values": list(self.p_values), "q_values": None if self.q_values is None else list(self.q_values),
            "s_values": list(self.s_values), "signal_values": list(self.signal_values),
            "n_values": list(self.n_values), "r_values": list(self.r_values),
            "replications": self.replications, "master_seed": self.master_seed,
            "variants": list(self.variants), "penalty": dict(self.penalty),
            "admm": {"step": self.admm.step, "max_iter": self.admm.max_iter,
                     "eps_abs": self.admm.eps_abs, "eps_rel": self.admm.eps_rel},
            "p1": self.p1, "r_pca": self.r_pca,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        if "admm" in d and isinstance(d["admm"], dict):
            d["admm"] = AdmmConfig(**d["admm"])
        return cls(**d)


@dataclass(frozen=True)
class SweepResult:
    records: list[dict]
    summary: list[dict]
    timings: list[dict]

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table(out / "results.csv", self.records, RECORD_COLUMNS)
        write_table(out / "summary.csv", self.summary, SUMMARY_COLUMNS)
        write_table(out / "timings.csv", self.timings,
                    ("cell", "replication", "variant", "seconds"))


def _weight_for(spec: SweepSpec, cov: CovarianceModel, cell: dict, data, partition,
                seed: int) -> float:
    rule = spec.penalty
    if rule["rule"] == "theoretical":
        return theoretical_penalty(cell["n"], cell["p"], cell["q"], float(rule.get("a", 1.0)))
    grid = penalty_grid(cell["n"], cell["p"], cell["q"], int(rule.get("length", 10)),
                        float(rule.get("span", 10.0)))
    cfg = CvConfig(grid=tuple(grid), k=int(rule.get("k", 5)), r=cell["r"], seed=seed,
                   admm=spec.admm)
    return cross_validate(data, cfg, partition, n_jobs=1).chosen_weight


def _run_replication(spec: SweepSpec, cell: dict, rep: int) -> list[tuple[dict, float]]:
    base = {k: cell[k] for k in ("cell", "p", "q", "n", "s", "r", "signal")}
    base["replication"] = rep
    try:
        truth = build_model(spec.synthetic_spec(cell, rep))
        _, sample_seed = spec.seeds(cell, rep)
        data = sample_dataset(truth, cell["n"], sample_seed)
        cov = empirical_covariances(data, center=True)
    except EccarError as exc:
        return [({**base, "variant": v, "status": type(exc).__name__}, 0.0)
                for v in spec.variants]
    out = []
    for name in spec.variants:
        kind, bp, bq = _parse_variant(name)
        rec = {**base, "variant": name}
        t0 = time.perf_counter()
        try:
            if kind == "lowdim":
                model = fit_low_dim_covariance(cov, cell["r"])
                rec["weight"] = 0.0
            else:
                if kind == "eccar-row":
                    partition = row_partition(cell["p"], cell["q"])
                elif kind == "eccar-group":
                    partition = block_partition(cell["p"], cell["q"], bp, bq)
                else:
                    partition = None
                weight = _weight_for(spec, cov, cell, data, partition, sample_seed)
                rec["weight"] = weight
                model = fit_covariance(cov, cell["r"], PenaltySpec(weight, partition), spec.admm)
            seconds = time.perf_counter() - t0
            sm = support_metrics(model.coef, truth)
            rec.update(status="ok",
                       distance=stacked_distance(model.u, model.v, truth.u_star, truth.v_star),
                       converged=model.fit.converged, iterations=model.fit.iterations,
                       precision=sm.precision, recall=sm.recall,
                       exact_subset=sm.exact_subset, nnz=sm.n_predicted)
        except EccarError as exc:
            seconds = time.perf_counter() - t0
            rec["status"] = type(exc).__name__
        except np.linalg.LinAlgError:
            seconds = time.perf_counter() - t0
            rec["status"] = "LinAlgError"
        out.append((rec, seconds))
    return out


def _summarize(spec: SweepSpec, records: list[dict]) -> list[dict]:
    summary = []
    for cell in spec.cells():
        for variant in spec.variants:
            rows = [r for r in records if r["cell"] == cell["cell"] and r["variant"] == variant]
            ok = [r for r in rows if r["status"] == "ok"]
            entry = {**cell, "variant": variant, "n_ok": len(ok), "n_failed": len(rows) - len(ok)}
            if ok:
                d = np.array([r["distance"] for r in ok])
                q25, med, q75 = np.percentile(d, [25, 50, 75])
                entry.update(median_distance=float(med), q25_distance=float(q25),
                             q75_distance=float(q75), mean_distance=float(d.mean()),
                             convergence_rate=float(np.mean([r["converged"] for r in ok])),
                             mean_recall=float(np.mean([r["recall"] for r in ok])),
                             exact_subset_rate=float(np.mean([r["exact_subset"] for r in ok])))
            summary.append(entry)
    return summary


def run_sweep(spec: SweepSpec, n_jobs: int | None = None,
              progress: Callable[[list[dict]], None] | None = None,
              flush_path: str | Path | None = None) -> SweepResult:
    """Run every (cell, replication, variant) combination.

    Failures are recorded in the ``status`` column and never abort the sweep.
    If ``flush_path`` is given, the deterministic records completed so far
    are rewritten there after every replication.
    """
    jobs = [(cell, rep) for cell in spec.cells() for rep in range(spec.replications)]
    done: dict[int, list[tuple[dict, float]]] = {}

    def finish(idx: int, res: list[tuple[dict, float]]) -> None:
        done[idx] = res
        partial = [rec for i in sorted(done) for rec, _ in done[i]]
        if flush_path is not None:
            write_table(flush_path, partial, RECORD_COLUMNS)
        if progress is not None:
            progress(partial)

    workers = worker_count(n_jobs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_replication, spec, c, r) for c, r in jobs]
            for idx, fut in enumerate(futures):
                finish(idx, fut.result())
    else:
        for idx, (cell, rep) in enumerate(jobs):
            finish(idx, _run_replication(spec, cell, rep))
    ordered = [done[i] for i in range(len(jobs))]
    records = [rec for res in ordered for rec, _ in res]
    timings = [{"cell": rec["cell"], "replication": rec["replication"],
                "variant": rec["variant"], "seconds": sec}
               for res in ordered for rec, sec in res]
    return SweepResult(records, _summarize(spec, records), timings)


def seconds_per_iteration(cov: CovarianceModel, penalty: PenaltySpec, iterations: int = 20,
                          repeats: int = 5, step: float = 1.0) -> float:
    """Median wall-clock seconds of one ADMM iteration over ``repeats`` runs.

    Tolerances are set unreachably small so every run performs exactly
    ``iterations`` steps.
    """
    cfg = AdmmConfig(step=step, max_iter=iterations, eps_abs=1e-300, eps_rel=1e-300)
    times = []
    solver_log = logging.getLogger("eccar.solver")
    level = solver_log.level
    solver_log.setLevel(logging.ERROR)  # hitting max_iter is the point here
    try:
        for _ in range(repeats):
            t0 = time.perf_counter()
            _, report = admm_fit(cov, penalty, cfg)
            times.append((time.perf_counter() - t0) / report.iterations)
    finally:
        solver_log.setLevel(level)
    return float(np.median(times))
