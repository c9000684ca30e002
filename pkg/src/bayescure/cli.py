"""Command line entry point and the on-disk run pipeline.

Commands
--------
simulate   draw a synthetic dataset from a named scenario
fit        run independent tempered-ensemble fits and persist traces
summarize  recompute the multi-run posterior summary for a run directory
fdr        FDR-controlled cured/susceptible classification report
curves     conditional cure-probability curves for covariate profiles

File formats: datasets and traces are CSV; manifests, summaries and reports
are JSON; latent indicator draws are bit-packed npy companions.  Exit codes:
0 success, 2 validation error, 3 numerical failure.
"""

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .analysis import TraceStore
from .model import Dataset
from .priors import PRESET_NAMES, PriorHyperparams, preset_hyperparams
from .sampler import Mc3Config, run_mc3
from .simulate import (SCENARIOS, generate, read_sidecar_json,
                       write_dataset_csv, write_sidecar_json)

__all__ = ["RunConfig", "IngestResult", "IngestError", "ingest_csv",
           "run_fit", "summarize_run", "fdr_report", "curves_report", "main"]

DEFAULT_ALPHA_GRID = (0.01, 0.025, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10, 0.15)

QUANTILES = (0.025, 0.25, 0.50, 0.75, 0.975)


class IngestError(ValueError):
    """Input CSV failed validation; message lists offending rows."""


@dataclass
class RunConfig:
    """Sampler and prior settings for one fit, with CLI-facing defaults."""

    prior: object = "vague"
    chains: int = 16
    cycles: int = 20000
    iters_per_cycle: int = 10
    warmup_iters: int = 10000
    p_single_site: float = 0.5
    ladder_epsilon: float = 0.001
    ladder_decay: float = 2.5
    burnin_frac: float = 0.3
    thin: int = 10
    seed: int = 0
    workers: int = 1
    standardize: bool = False
    runs: int = 4

    def validate(self):
        for name in ("chains", "cycles", "iters_per_cycle", "thin", "seed",
                     "workers", "runs"):
            if int(getattr(self, name)) < (0 if name == "seed" else 1):
                raise ValueError(f"config field {name} must be positive")
        if self.warmup_iters < 0:
            raise ValueError("warmup_iters must be nonnegative")
        if not 0.0 < self.burnin_frac < 1.0:
            raise ValueError("burnin_frac must lie in (0, 1)")
        if not 0.0 <= self.p_single_site <= 1.0:
            raise ValueError("p_single_site must lie in [0, 1]")
        if self.ladder_epsilon <= 0 or self.ladder_decay <= 0:
            raise ValueError("ladder parameters must be positive")
        return self

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        cfg = cls()
        for key, value in doc.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
        return cfg.validate()

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        doc = dict(self.__dict__)
        if isinstance(doc["prior"], PriorHyperparams):
            hp = doc["prior"]
            doc["prior"] = {k: getattr(hp, k) for k in
                            ("a_gamma", "b_gamma", "a_lam", "b_lam",
                             "a1", "b1", "a2", "b2")}
            doc["prior"]["mu"] = hp.mu.tolist()
            doc["prior"]["sigma"] = hp.sigma.tolist()
        return doc

    def hyperparams(self, k: int) -> PriorHyperparams:
        if isinstance(self.prior, PriorHyperparams):
            return self.prior
        if isinstance(self.prior, str):
            if self.prior not in PRESET_NAMES:
                raise ValueError(f"unknown prior preset {self.prior!r}")
            return preset_hyperparams(self.prior, k)
        doc = dict(self.prior)
        mu = np.asarray(doc.pop("mu", np.zeros(k + 1)), dtype=float)
        sigma = np.asarray(doc.pop("sigma", 100.0 * np.eye(k + 1)), dtype=float)
        return PriorHyperparams(mu=mu, sigma=sigma, **doc)


# ---------------------------------------------------------------------------
# Data ingestion
# ---------------------------------------------------------------------------

@dataclass
class IngestResult:
    data: Dataset
    covariate_names: list
    # per standardized column: name -> {"mean": m, "sd": s}
    standardization: dict = field(default_factory=dict)


def ingest_csv(path, standardize: bool = False) -> IngestResult:
    """Load and validate a dataset CSV with columns y, delta, covariates...

    Every numeric column other than y and delta is taken as a covariate.
    With ``standardize`` set, columns that are not 0/1-valued are centered
    and scaled to sample mean 0 and variance 1; the transform parameters are
    returned for the run manifest so coefficient summaries can be mapped back.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        missing = [c for c in ("y", "delta") if c not in header]
        if missing:
            raise IngestError(f"{path}: missing required column(s) {missing}")
        cov_names = [h for h in header if h not in ("y", "delta")]
        col = {name: header.index(name) for name in header}
        rows = []
        problems = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                problems.append(f"row {lineno}: expected {len(header)} cells, got {len(cells)}")
                continue
            try:
                rows.append([float(cells[col[name]]) for name in ["y", "delta", *cov_names]])
            except ValueError:
                problems.append(f"row {lineno}: non-numeric cell")
        if not rows and not problems:
            raise IngestError(f"{path}: no data rows")
        arr = np.asarray(rows, dtype=float) if rows else np.empty((0, 2 + len(cov_names)))
        y, delta, x = arr[:, 0], arr[:, 1], arr[:, 2:]
        bad_y = np.flatnonzero(~(y > 0))
        bad_d = np.flatnonzero(~((delta == 0) | (delta == 1)))
        for i in bad_y[:20]:
            problems.append(f"row {i + 2}: y must be positive")
        for i in bad_d[:20]:
            problems.append(f"row {i + 2}: delta must be 0 or 1")
        if problems:
            shown = "; ".join(problems[:20])
            more = "" if len(problems) <= 20 else f" (+{len(problems) - 20} more)"
            raise IngestError(f"{path}: {shown}{more}")

    standardization = {}
    if standardize:
        for j, name in enumerate(cov_names):
            colv = x[:, j]
            if np.all((colv == 0) | (colv == 1)):
                continue
            m = float(colv.mean())
            s = float(np.sqrt(colv.var(ddof=1)))
            if s == 0.0:
                continue
            x[:, j] = (colv - m) / s
            standardization[name] = {"mean": m, "sd": s}
    return IngestResult(Dataset(y=y, delta=delta, x=x), cov_names, standardization)


# ---------------------------------------------------------------------------
# Trace persistence
# ---------------------------------------------------------------------------

def _write_trace_csv(path, trace: TraceStore, k: int):
    names = analysis.param_names(k)
    with open(path, "w") as fh:
        fh.write(",".join(["cycle", "log_post", "log_lik", *names]) + "\n")
        for i in range(trace.cycles.size):
            cells = [str(int(trace.cycles[i])),
                     repr(float(trace.log_post[i])),
                     repr(float(trace.log_lik[i]))]
            cells += [repr(float(v)) for v in trace.theta[i]]
            fh.write(",".join(cells) + "\n")


def _read_trace_csv(path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(c) for c in cells] for cells in reader if cells]
    arr = np.asarray(rows, dtype=float)
    dim = len(header) - 3
    return (arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2], arr[:, 3:3 + dim])


def _write_latent_npy(path, ind_c: np.ndarray):
    packed = np.packbits(ind_c.astype(np.uint8), axis=1) if ind_c.shape[1] else \
        np.empty((ind_c.shape[0], 0), dtype=np.uint8)
    np.save(path, packed)


def _read_latent_npy(path, n_c: int) -> np.ndarray:
    packed = np.load(path)
    if n_c == 0:
        return np.empty((packed.shape[0], 0), dtype=np.int8)
    return np.unpackbits(packed, axis=1, count=n_c).astype(np.int8)


def _trace_from_result(result, burnin_frac: float) -> TraceStore:
    return TraceStore.from_mc3(result, burnin_frac=burnin_frac)


def load_run(run_dir):
    """Reload every run's TraceStore plus the manifest from a fit directory."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{manifest_path} not found; is this a fit output directory?")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    ingest = ingest_csv(manifest["data_path"], standardize=manifest["config"]["standardize"])
    data = ingest.data
    cen_idx = data.censored_index
    traces = []
    for r in range(manifest["config"]["runs"]):
        cycles, log_post, log_lik, theta = _read_trace_csv(run_dir / f"trace_run{r}.csv")
        ind = _read_latent_npy(run_dir / f"latent_run{r}.npy", cen_idx.size)
        traces.append(TraceStore(
            theta=theta, log_post=log_post, log_lik=log_lik, ind_c=ind,
            cycles=cycles, total_cycles=manifest["config"]["cycles"],
            thin=manifest["config"]["thin"],
            burnin_cycles=int(manifest["config"]["burnin_frac"] * manifest["config"]["cycles"]),
            censored_index=cen_idx, n=data.n))
    return traces, manifest, ingest


# ---------------------------------------------------------------------------
# Fit pipeline
# ---------------------------------------------------------------------------

def run_fit(data_path, out_dir, config: RunConfig) -> dict:
    """Run ``config.runs`` independent ensembles and persist all artifacts.

    Per run: a thinned cold-chain trace CSV, a bit-packed latent companion,
    and entries in the manifest (tuned scales, acceptance and swap rates,
    wall time).  A multi-run summary is written at the end.  Identical
    (seed, config) reproduce the trace files byte for byte, for any worker
    count.
    """
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ingest = ingest_csv(data_path, standardize=config.standardize)
    data = ingest.data
    hp = config.hyperparams(data.k)

    run_entries = []
    traces = []
    for r in range(config.runs):
        mc3 = Mc3Config(chains=config.chains, cycles=config.cycles,
                        iters_per_cycle=config.iters_per_cycle,
                        warmup_iters=config.warmup_iters,
                        p_single_site=config.p_single_site,
                        ladder_epsilon=config.ladder_epsilon,
                        ladder_decay=config.ladder_decay,
                        seed=(config.seed, r) if config.runs > 1 else config.seed,
                        workers=config.workers, thin=config.thin)
        t0 = time.perf_counter()
        result = run_mc3(data, hp, mc3)
        wall = time.perf_counter() - t0
        trace = _trace_from_result(result, config.burnin_frac)
        traces.append(trace)
        _write_trace_csv(out_dir / f"trace_run{r}.csv", trace, data.k)
        _write_latent_npy(out_dir / f"latent_run{r}.npy", trace.ind_c)
        run_entries.append({
            "run": r,
            "seed_entropy": [config.seed, r] if config.runs > 1 else [config.seed],
            "wall_seconds": wall,
            "tuned_scales": [_scales_doc(s) for s in result.scales],
            "acceptance": [{k: _nan_none(v) for k, v in a.items()}
                           for a in result.acceptance],
            "swap_attempts": result.swap_attempts.tolist(),
            "swap_accepts": result.swap_accepts.tolist(),
            "heats": result.heats.tolist(),
        })

    manifest = {
        "data_path": str(Path(data_path).resolve()),
        "config": config.to_dict(),
        "covariates": ingest.covariate_names,
        "standardization": ingest.standardization,
        "n": data.n,
        "n_censored": int(data.censored_index.size),
        "runs": run_entries,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    summary = _summarize(traces, ingest)
    _write_summary(out_dir, summary)
    return manifest


def _nan_none(v):
    return None if v is None or (isinstance(v, float) and np.isnan(v)) else float(v)


def _scales_doc(s):
    return {"s2_gamma": s.s2_gamma, "s2_lam": s.s2_lam, "s2_alpha1": s.s2_alpha1,
            "s2_alpha2": s.s2_alpha2, "nu": np.asarray(s.nu).tolist(), "tau": s.tau}


def _summarize(traces, ingest: IngestResult) -> dict:
    """MAP, quantiles, HDIs per parameter (pooled) and PSRF across runs."""
    k = traces[0].k
    names = analysis.param_names(k)
    pooled = np.vstack([t.retained_theta() for t in traces])
    pooled_lp = np.concatenate([t.retained_log_post() for t in traces])
    map_vec = pooled[int(np.argmax(pooled_lp))]

    per_run = [t.retained_theta() for t in traces]
    min_len = min(a.shape[0] for a in per_run)
    rows = {}
    for j, name in enumerate(names):
        draws = pooled[:, j]
        qs = np.quantile(draws, QUANTILES)
        intervals = analysis.hdi(draws, 0.95) if draws.min() < draws.max() else \
            [(float(draws[0]), float(draws[0]))]
        row = {"map": float(map_vec[j])}
        for q, v in zip(QUANTILES, qs):
            row[f"q{100 * q:g}"] = float(v)
        row["hdi95"] = [[float(a), float(b)] for a, b in intervals]
        if len(traces) >= 2 and min_len >= 10:
            chains = np.vstack([a[:min_len, j] for a in per_run])
            try:
                row["psrf"] = analysis.psrf(chains)
            except ValueError:
                row["psrf"] = None
        else:
            row["psrf"] = None
        rows[name] = row

    out = {"parameters": rows, "draws_retained": int(pooled.shape[0])}
    if ingest.standardization:
        out["parameters_original_scale"] = _destandardized_rows(
            pooled, pooled_lp, ingest, k)
    return out


def _destandardized_rows(pooled, pooled_lp, ingest: IngestResult, k: int) -> dict:
    """Beta summaries mapped back to the original covariate scale."""
    betas = pooled[:, 4:].copy()
    for j, name in enumerate(ingest.covariate_names):
        tr = ingest.standardization.get(name)
        if tr is None:
            continue
        betas[:, 0] -= betas[:, j + 1] * tr["mean"] / tr["sd"]
        betas[:, j + 1] = betas[:, j + 1] / tr["sd"]
    map_row = betas[int(np.argmax(pooled_lp))]
    rows = {}
    for j in range(k + 1):
        draws = betas[:, j]
        qs = np.quantile(draws, QUANTILES)
        row = {"map": float(map_row[j])}
        for q, v in zip(QUANTILES, qs):
            row[f"q{100 * q:g}"] = float(v)
        intervals = analysis.hdi(draws, 0.95) if draws.min() < draws.max() else \
            [(float(draws[0]), float(draws[0]))]
        row["hdi95"] = [[float(a), float(b)] for a, b in intervals]
        rows[f"beta{j}"] = row
    return rows


def _write_summary(out_dir, summary: dict):
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    with open(out_dir / "summary.csv", "w") as fh:
        cols = ["parameter", "map"] + [f"q{100 * q:g}" for q in QUANTILES] + \
            ["hdi95", "psrf"]
        fh.write(",".join(cols) + "\n")
        for scale_key in ("parameters", "parameters_original_scale"):
            rows = summary.get(scale_key)
            if not rows:
                continue
            suffix = "" if scale_key == "parameters" else "_orig"
            for name, row in rows.items():
                hdi_txt = "|".join(f"{a}:{b}" for a, b in row["hdi95"])
                cells = [name + suffix, repr(row["map"])]
                cells += [repr(row[f"q{100 * q:g}"]) for q in QUANTILES]
                cells += [hdi_txt, "" if row.get("psrf") is None else repr(row["psrf"])]
                fh.write(",".join(cells) + "\n")


def summarize_run(run_dir) -> dict:
    """Recompute and rewrite the multi-run summary from persisted traces."""
    traces, manifest, ingest = load_run(run_dir)
    summary = _summarize(traces, ingest)
    _write_summary(Path(run_dir), summary)
    return summary


# ---------------------------------------------------------------------------
# FDR and curve reports
# ---------------------------------------------------------------------------

def fdr_report(run_dir, alphas=DEFAULT_ALPHA_GRID) -> dict:
    """Cured-subject classification at each tolerance in the alpha grid.

    Susceptible probabilities are pooled over all runs' retained draws.  When
    the fitted dataset has a simulation sidecar with ground-truth latent
    status, the achieved FDR and the true positive rate are reported too.
    """
    traces, manifest, ingest = load_run(run_dir)
    if not traces or traces[0].ind_c.shape[1] == 0:
        raise ValueError("no censored subjects (or no latent draws) in this run")
    pooled = np.vstack([t.retained_ind() for t in traces])
    sus_prob = pooled.mean(axis=0)
    q = 1.0 - sus_prob
    cen_idx = traces[0].censored_index

    truth = None
    sidecar = Path(manifest["data_path"]).with_suffix(".json")
    if sidecar.exists():
        doc = read_sidecar_json(sidecar)
        if "true_latent" in doc:
            truth = np.asarray(doc["true_latent"], dtype=int)[cen_idx]

    entries = []
    for alpha in alphas:
        dec = analysis.fdr_control(q, alpha)
        entry = {"alpha": float(alpha), "k_alpha": dec.k_alpha,
                 "expected_fdr": dec.expected_fdr,
                 "declared_rows": [int(cen_idx[i]) for i in np.flatnonzero(dec.decisions)]}
        if truth is not None:
            sel = dec.decisions == 1
            n_sel = int(sel.sum())
            false_pos = int((truth[sel] == 1).sum())
            true_pos = n_sel - false_pos
            n_cured = int((truth == 0).sum())
            entry["achieved_fdr"] = false_pos / n_sel if n_sel else 0.0
            entry["tpr"] = true_pos / n_cured if n_cured else 0.0
        entries.append(entry)
    report = {"alphas": list(map(float, alphas)), "n_censored": int(q.size),
              "results": entries}
    with open(Path(run_dir) / "fdr.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def curves_report(run_dir, profiles, t_max=None, t_points=101, level=0.95) -> dict:
    """Posterior cure-probability curves for one or more covariate profiles.

    ``profiles`` is a list of dicts mapping covariate names to values on the
    original data scale; stored standardization transforms are applied before
    evaluation.  Emits curves.csv (profile, t, mean, lo, hi) and curves.json.
    """
    traces, manifest, ingest = load_run(run_dir)
    pooled = np.vstack([t.retained_theta() for t in traces])
    data = ingest.data
    if t_max is None:
        t_max = float(data.y.max())
    t_grid = np.linspace(0.0, t_max, t_points)

    out = {"t": t_grid.tolist(), "profiles": []}
    rows = []
    for prof in profiles:
        x_row = np.empty(len(ingest.covariate_names))
        for j, name in enumerate(ingest.covariate_names):
            if name not in prof:
                raise ValueError(f"profile is missing covariate {name!r}")
            val = float(prof[name])
            tr = ingest.standardization.get(name)
            x_row[j] = (val - tr["mean"]) / tr["sd"] if tr else val
        curve = analysis.cure_curve(pooled, x_row, t_grid, level=level)
        label = ",".join(f"{k}={prof[k]:g}" for k in ingest.covariate_names)
        out["profiles"].append({"profile": {k: float(v) for k, v in prof.items()},
                                "label": label,
                                "mean": curve.mean.tolist(),
                                "lo": curve.lo.tolist(),
                                "hi": curve.hi.tolist(),
                                "skipped_draws": curve.skipped})
        for t, m, lo, hi in zip(t_grid, curve.mean, curve.lo, curve.hi):
            rows.append((label, t, m, lo, hi))

    run_dir = Path(run_dir)
    with open(run_dir / "curves.json", "w") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    with open(run_dir / "curves.csv", "w") as fh:
        fh.write("profile,t,mean,lo,hi\n")
        for label, t, m, lo, hi in rows:
            fh.write(f"\"{label}\",{t!r},{m!r},{lo!r},{hi!r}\n")
    return out


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(prog="bayescure",
                                     description="Bayesian cure rate model fitting")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--name", default=None, help="basename for the CSV/sidecar pair")
    p_sim.add_argument("--calibration-draws", type=int, default=100000)

    p_fit = sub.add_parser("fit", help="fit the model with tempered MCMC")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--config", default=None, help="JSON config file")
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--runs", type=int, default=None)
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--workers", type=int, default=None)
    p_fit.add_argument("--standardize", action="store_true", default=None)
    p_fit.add_argument("--full-trace", action="store_true",
                       help="store every cycle (thin = 1)")

    p_sum = sub.add_parser("summarize", help="recompute a run summary")
    p_sum.add_argument("--run", required=True)

    p_fdr = sub.add_parser("fdr", help="FDR-controlled cured classification")
    p_fdr.add_argument("--run", required=True)
    p_fdr.add_argument("--alpha-grid", default=None,
                       help="comma separated tolerances, e.g. 0.01,0.05,0.1")

    p_cur = sub.add_parser("curves", help="conditional cure-probability curves")
    p_cur.add_argument("--run", required=True)
    p_cur.add_argument("--x", action="append", required=True,
                       help='covariate profile, e.g. "age=40,sex=1" (repeatable)')
    p_cur.add_argument("--t-max", type=float, default=None)
    p_cur.add_argument("--t-points", type=int, default=101)
    p_cur.add_argument("--level", type=float, default=0.95)
    return parser


def _parse_profile(text):
    prof = {}
    for item in text.split(","):
        if "=" not in item:
            raise ValueError(f"bad covariate assignment {item!r}; use name=value")
        name, value = item.split("=", 1)
        prof[name.strip()] = float(value)
    return prof


def _cmd_simulate(args):
    scenario = SCENARIOS[args.scenario]
    data, latent, meta = generate(scenario, args.n, args.seed,
                                  mc_n=args.calibration_draws)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.name or f"{args.scenario.lower()}_n{args.n}_seed{args.seed}"
    write_dataset_csv(out / f"{name}.csv", data)
    write_sidecar_json(out / f"{name}.json", meta, latent)
    print(f"wrote {out / (name + '.csv')} "
          f"(n={data.n}, events={int(data.delta.sum())}, "
          f"censoring rate={meta['censoring_rate']:.6g})")
    return 0


def _cmd_fit(args):
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    for attr, val in (("runs", args.runs), ("seed", args.seed),
                      ("workers", args.workers)):
        if val is not None:
            setattr(config, attr, val)
    if args.standardize:
        config.standardize = True
    if args.full_trace:
        config.thin = 1
    config.validate()
    manifest = run_fit(args.data, args.out, config)
    print(f"fit complete: {config.runs} run(s) in {args.out} "
          f"(n={manifest['n']}, censored={manifest['n_censored']})")
    return 0


def _cmd_summarize(args):
    summary = summarize_run(args.run)
    print(json.dumps(summary["parameters"], indent=2))
    return 0


def _cmd_fdr(args):
    alphas = DEFAULT_ALPHA_GRID
    if args.alpha_grid:
        alphas = tuple(float(a) for a in args.alpha_grid.split(","))
    report = fdr_report(args.run, alphas)
    for entry in report["results"]:
        line = (f"alpha={entry['alpha']:g}: declared={entry['k_alpha']} "
                f"expected_fdr={entry['expected_fdr']:.4f}")
        if "achieved_fdr" in entry:
            line += f" achieved_fdr={entry['achieved_fdr']:.4f} tpr={entry['tpr']:.4f}"
        print(line)
    return 0


def _cmd_curves(args):
    profiles = [_parse_profile(text) for text in args.x]
    curves_report(args.run, profiles, t_max=args.t_max,
                  t_points=args.t_points, level=args.level)
    print(f"wrote curves.csv and curves.json in {args.run}")
    return 0


_DISPATCH = {"simulate": _cmd_simulate, "fit": _cmd_fit,
             "summarize": _cmd_summarize, "fdr": _cmd_fdr,
             "curves": _cmd_curves}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (IngestError, ValueError, FileNotFoundError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
