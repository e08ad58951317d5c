"""Synthetic scenario generation, evaluation metrics, and the benchmark loop.

Scenarios follow the benchmark design: a 128x128 lattice with two
overlapping disk-shaped signal regions (radii 15 and 20, union 1686
voxels), signal intensities drawn from a bimodal or a heavy spread law,
and an optionally contaminated background.
"""
from __future__ import annotations

import dataclasses
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import baselines, densities, fused, posterior, screening
from .errors import SmdrError
from .grid import build_grid

# disk centers calibrated so the union of the two discrete disks is exactly
# 1686 voxels (offset (18, 10) between centers; overlap 280)
DEFAULT_CIRCLES = (((46, 52), 15), ((64, 62), 20))

THETA_LAWS = ("well_separated", "poorly_separated")
SCENARIO_TAGS = ("well_pure", "well_noisy", "poor_pure", "poor_noisy")


@dataclass
class SimScenario:
    width: int = 128
    height: int = 128
    circles: tuple = DEFAULT_CIRCLES
    theta_law: str = "well_separated"
    background_c: float = 0.0
    replications: int = 20
    seed: int = 0
    tag: str = ""

    def __post_init__(self):
        if self.theta_law not in THETA_LAWS:
            raise ValueError(f"unknown theta law {self.theta_law!r}")
        if not 0.0 <= self.background_c < 0.5:
            raise ValueError("background fraction must be in [0, 0.5)")
        if not self.tag:
            self.tag = self.theta_law


@dataclass
class ZGrid:
    values: np.ndarray
    width: int
    height: int
    truth: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(self.height, self.width)
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=bool).reshape(self.height, self.width)


@dataclass
class MetricsRecord:
    scenario_tag: str
    method_tag: str
    n_reps: int
    n_failed: int
    mdr_mean: float = math.nan
    mdr_sd: float = math.nan
    fdr_mean: float = math.nan
    fdr_sd: float = math.nan
    fm_mean: float = math.nan
    fm_sd: float = math.nan
    s_hat_ratio_mean: float = math.nan
    s_hat_ratio_sd: float = math.nan
    aborted: bool = False


def paper_scenario(tag: str, replications: int = 20, seed: int = 0) -> SimScenario:
    """One of the four benchmark scenarios by tag."""
    if tag not in SCENARIO_TAGS:
        raise ValueError(f"unknown scenario {tag!r}; valid tags: {', '.join(SCENARIO_TAGS)}")
    law = "well_separated" if tag.startswith("well") else "poorly_separated"
    bg = 0.05 if tag.endswith("noisy") else 0.0
    return SimScenario(theta_law=law, background_c=bg, replications=replications,
                       seed=seed, tag=tag)


def make_signal_region(scenario: SimScenario) -> np.ndarray:
    """Boolean union of the scenario's discrete disks (height x width)."""
    mask = np.zeros((scenario.height, scenario.width), dtype=bool)
    cols = np.arange(scenario.width)
    rows = np.arange(scenario.height)
    cc, rr = np.meshgrid(cols, rows)
    for (cx, cy), radius in scenario.circles:
        if cx - radius < 0 or cx + radius >= scenario.width \
                or cy - radius < 0 or cy + radius >= scenario.height:
            raise ValueError(f"circle at ({cx},{cy}) r={radius} extends outside the grid")
        mask |= (cc - cx) ** 2 + (rr - cy) ** 2 <= radius ** 2
    return mask


def _sample_theta(rng: np.random.Generator, law: str, size: int) -> np.ndarray:
    if law == "well_separated":
        sign = np.where(rng.random(size) < 0.5, -2.0, 2.0)
        return sign + rng.standard_normal(size)
    return rng.normal(0.0, 3.0, size)


def _rep_rng(scenario: SimScenario, replication_index: int,
             stream: int = 0) -> np.random.Generator:
    entropy = [int(scenario.seed), int(replication_index), stream, *scenario.tag.encode()]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def simulate(scenario: SimScenario, replication_index: int = 0) -> ZGrid:
    """Draw one replication of the scenario, recording realized truth."""
    region = make_signal_region(scenario).ravel()
    n = region.size
    rng = _rep_rng(scenario, replication_index)

    h = region.copy()
    if scenario.background_c > 0:
        bg = ~region
        h[bg] = rng.random(int(bg.sum())) < scenario.background_c
    theta = np.zeros(n)
    theta[h] = _sample_theta(rng, scenario.theta_law, int(h.sum()))
    values = theta + rng.standard_normal(n)
    return ZGrid(values=values, width=scenario.width, height=scenario.height, truth=h)


def evaluate(selection, truth) -> tuple[float, float, float]:
    """(FNP, FDP, FM) of a selection against a truth mask.

    The FDP of an empty selection is 0 by convention.
    """
    mask = np.asarray(getattr(selection, "mask", selection), dtype=bool).ravel()
    t = np.asarray(truth, dtype=bool).ravel()
    if mask.size != t.size:
        raise ValueError("selection and truth sizes disagree")
    s = int(t.sum())
    if s == 0:
        raise ValueError("truth mask contains no signals")
    fn = int(np.sum(t & ~mask))
    fp = int(np.sum(mask & ~t))
    fnp = fn / s
    fdp = fp / max(1, int(mask.sum()))
    fm = math.sqrt((1.0 - fnp) * (1.0 - fdp))
    return fnp, fdp, fm


@dataclass
class PipelineConfig:
    """Estimation settings shared by the screen and the benchmark."""

    sweeps: int = densities.PR_SWEEPS
    lambda_grid: np.ndarray | None = None
    lam: float | None = None  # fixed penalty; None selects by BIC
    tol: float = 1e-5
    max_iter: int = 60


_METHOD_KINDS = ("smdr", "fdrs", "bh", "mdr", "jc")


def parse_method(tag: str) -> tuple[str, float | None]:
    """Parse 'kind:level' method tags; 'jc' carries no level."""
    kind, sep, level = tag.partition(":")
    if kind not in _METHOD_KINDS:
        raise ValueError(f"unknown method {tag!r}; valid kinds: {', '.join(_METHOD_KINDS)}")
    if kind == "jc":
        if sep:
            raise ValueError("method 'jc' takes no level")
        return kind, None
    if not sep:
        raise ValueError(f"method {tag!r} needs a level, e.g. '{kind}:0.1'")
    value = float(level)
    if not 0.0 < value < 1.0:
        raise ValueError(f"level of {tag!r} must be in (0, 1)")
    return kind, value


def run_replication(scenario: SimScenario, replication_index: int, methods,
                    config: PipelineConfig) -> dict:
    """Run every requested method on one simulated field; returns metric rows."""
    parsed = [parse_method(m) for m in methods]
    zg = simulate(scenario, replication_index)
    zv = zg.values.ravel()
    truth = zg.truth.ravel()
    s_true = int(truth.sum())
    out: dict = {"scenario": scenario.tag, "rep": replication_index, "s_true": s_true,
                 "metrics": {}, "s_hat_ratio": {}}

    post = None
    if any(kind in ("smdr", "fdrs") for kind, _ in parsed):
        t_start = time.perf_counter()
        pr_seed = int(_rep_rng(scenario, replication_index, stream=1).integers(2 ** 31))
        model = densities.estimate_alt_density(zv, densities.theoretical_null(),
                                               sweeps=config.sweeps, seed=pr_seed)
        graph = build_grid(zg.width, zg.height)
        if config.lam is not None:
            prior = fused.fit_prior(zv, graph, model, config.lam,
                                    tol=config.tol, max_iter=config.max_iter)
            out["lambda"] = config.lam
        else:
            lam, fits = fused.select_lambda(zv, graph, model, grid=config.lambda_grid,
                                            tol=config.tol, max_iter=config.max_iter)
            prior = next(f for f in fits if f.lam == lam)
            out["lambda"] = lam
        post = posterior.compute_posterior(zv, prior, model)
        out["pipeline_seconds"] = time.perf_counter() - t_start

    pvals = None
    pi0 = None
    if any(kind in ("mdr", "jc") for kind, _ in parsed):
        pi0 = densities.estimate_null_proportion(zv)
    selections: dict[str, screening.Selection] = {}
    for tag, (kind, level) in zip(methods, parsed):
        if kind == "smdr":
            sel = screening.screen_smdr(post, level, method_tag=tag)
            out["s_hat_ratio"][tag] = post.s_hat / s_true
        elif kind == "fdrs":
            sel = baselines.fdr_smoothing_select(post, level, method_tag=tag)
        elif kind == "bh":
            if pvals is None:
                pvals = baselines.z_to_pvalues(zv)
            sel = baselines.bh_fdr(pvals, level, method_tag=tag)
        elif kind == "mdr":
            sel = baselines.mdr_independent(zv, level, method_tag=tag, pi0=pi0)
        else:  # jc: signal-count estimate only
            out["s_hat_ratio"][tag] = zv.size * (1.0 - pi0) / s_true
            continue
        selections[tag] = sel
        out["metrics"][tag] = evaluate(sel, truth)

    for stag, sel_s in selections.items():
        if not stag.startswith("smdr"):
            continue
        for ftag, sel_f in selections.items():
            if ftag.startswith("fdrs"):
                superset = bool(np.all(sel_s.mask[sel_f.mask]))
                out[f"superset|{stag}|{ftag}"] = superset
    return out


def _worker(args):
    scenario_dict, rep, methods, config_dict = args
    scenario = SimScenario(**scenario_dict)
    grid = config_dict.pop("lambda_grid")
    config = PipelineConfig(lambda_grid=None if grid is None else np.asarray(grid),
                            **config_dict)
    try:
        return run_replication(scenario, rep, methods, config)
    except SmdrError as exc:
        return {"scenario": scenario.tag, "rep": rep, "error": repr(exc)}


def _aggregate(rows, scenario: SimScenario, methods) -> list[MetricsRecord]:
    n_total = scenario.replications
    good = [r for r in rows if "error" not in r]
    n_failed = n_total - len(good)
    aborted = n_failed > 0.1 * n_total
    records = []

    def stats(values):
        if not values:
            return math.nan, math.nan
        if len(values) == 1:
            warnings.warn("single replication: standard deviations reported as 0",
                          RuntimeWarning, stacklevel=3)
            return float(values[0]), 0.0
        arr = np.asarray(values, dtype=np.float64)
        return float(arr.mean()), float(arr.std(ddof=1))

    for tag in methods:
        rec = MetricsRecord(scenario_tag=scenario.tag, method_tag=tag,
                            n_reps=len(good), n_failed=n_failed, aborted=aborted)
        if not aborted:
            trips = [r["metrics"][tag] for r in good if tag in r["metrics"]]
            if trips:
                rec.mdr_mean, rec.mdr_sd = stats([t[0] for t in trips])
                rec.fdr_mean, rec.fdr_sd = stats([t[1] for t in trips])
                rec.fm_mean, rec.fm_sd = stats([t[2] for t in trips])
            ratios = [r["s_hat_ratio"][tag] for r in good if tag in r["s_hat_ratio"]]
            if ratios:
                rec.s_hat_ratio_mean, rec.s_hat_ratio_sd = stats(ratios)
        records.append(rec)
    return records


def run_benchmark(scenarios, methods, out=None, threads: int = 1,
                  config: PipelineConfig | None = None, collect=None) -> list[MetricsRecord]:
    """Replicated benchmark over scenarios x methods.

    Failing replications are recorded and excluded; more than 10% failures
    aborts the affected scenario's cells.  ``collect``, when given, receives
    each per-replication row.  Writes one JSON record per cell plus an
    aligned text table under ``out`` when provided.
    """
    config = config or PipelineConfig()
    for m in methods:
        parse_method(m)
    records: list[MetricsRecord] = []
    for scenario in scenarios:
        jobs = [(dataclasses.asdict(scenario), rep, list(methods),
                 {**dataclasses.asdict(config),
                  "lambda_grid": None if config.lambda_grid is None
                  else np.asarray(config.lambda_grid).tolist()})
                for rep in range(scenario.replications)]
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(_worker, jobs))
        else:
            rows = [_worker(job) for job in jobs]
        if collect is not None:
            for row in rows:
                collect(row)
        records.extend(_aggregate(rows, scenario, methods))

    if out is not None:
        write_report(records, out)
    return records


def _nan_to_none(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def write_report(records, out_dir) -> None:
    """Write records.jsonl and an aligned table.txt into out_dir."""
    from .gridio import atomic_write_bytes  # late import to avoid a cycle
    import os

    os.makedirs(out_dir, exist_ok=True)
    lines = [json.dumps({k: _nan_to_none(v) for k, v in dataclasses.asdict(r).items()},
                        sort_keys=True)
             for r in records]
    atomic_write_bytes(os.path.join(out_dir, "records.jsonl"),
                       ("\n".join(lines) + "\n").encode())
    atomic_write_bytes(os.path.join(out_dir, "table.txt"),
                       format_table(records).encode())


def format_table(records) -> str:
    """Human-readable aligned summary table."""
    header = ["scenario", "method", "MDR", "FDR", "FM", "s_hat/s", "reps", "failed"]
    rows = [header]
    for r in records:
        def cell(mean, sd):
            if math.isnan(mean):
                return "-"
            return f"{mean:.3f} ({sd:.3f})"
        rows.append([
            r.scenario_tag, r.method_tag,
            cell(r.mdr_mean, r.mdr_sd), cell(r.fdr_mean, r.fdr_sd),
            cell(r.fm_mean, r.fm_sd), cell(r.s_hat_ratio_mean, r.s_hat_ratio_sd),
            str(r.n_reps), str(r.n_failed) + (" ABORTED" if r.aborted else ""),
        ])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
                     for row in rows) + "\n"
