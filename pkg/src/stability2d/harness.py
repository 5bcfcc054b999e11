"""Simulation campaigns, stability-path dumps, CSV analysis and probe
filtering, with deterministic seeding and a manifest for every run."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import metadata

import numpy as np
import pandas as pd

from . import seeding
from ._validation import check_design
from .baselines import StabilitySelectionSpec, single_fit_select, stability_selection
from .config import config_hash
from .datagen import (
    CovarianceSpec,
    GroundTruth,
    add_observation_noise,
    generate_response,
    projected_covariance,
    sample_mvn,
    standardize,
)
from .jitter import delta_average, largest_gap_select, parse_grid, stability_path, top_k_select
from .metrics import f1_score, nogueira_stability, selection_matrix
from .selectors import SelectorSpec, cv_lambda_1se, default_lambda

__all__ = [
    "DataError",
    "OutputExistsError",
    "RunManifest",
    "fmt",
    "replication_data",
    "replicate",
    "run_table1",
    "run_path",
    "jitter_select",
    "analyze",
    "read_numeric_csv",
    "filter_probes",
    "filter_probe_matrix",
    "theory_battery",
    "verify_theory",
]

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class DataError(ValueError):
    """Input data that cannot be used (non-numeric, missing, empty)."""


class OutputExistsError(RuntimeError):
    """The output directory already holds a run and ``force`` was not given."""


def fmt(v):
    """Six significant digits, independent of locale."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if np.isnan(v):
        return "nan"
    out = f"{v:.6g}"
    return "0" if out == "-0" else out


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else fmt(c) for c in row) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunManifest:
    """Provenance of one run: what was asked, which files it wrote."""

    command: str
    config_hash: str
    seed: int
    version: str = field(default_factory=_version)
    files: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def add(self, out_dir, name):
        self.files[name] = _sha256(os.path.join(out_dir, name))

    def write(self, out_dir):
        path = os.path.join(out_dir, MANIFEST)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        return path

    @classmethod
    def read(cls, out_dir):
        with open(os.path.join(out_dir, MANIFEST), encoding="utf-8") as fh:
            return cls(**json.load(fh))


def prepare_output(out_dir, digest, force):
    """Create ``out_dir``; refuse to overwrite an earlier run unless forced."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from None
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir} is not writable")
    path = os.path.join(out_dir, MANIFEST)
    if os.path.exists(path) and not force:
        try:
            old = RunManifest.read(out_dir).config_hash
        except (OSError, ValueError, TypeError):
            old = "unreadable"
        same = "the same configuration" if old == digest else f"configuration {old[:12]}"
        raise OutputExistsError(f"{out_dir} already holds a run of {same}; pass --force to overwrite")


# --- simulation -------------------------------------------------------------


@lru_cache(maxsize=4)
def _cholesky(p, active, rho_rel, rho_irr, rho_mix, pd_floor):
    spec = CovarianceSpec(p, active, rho_rel, rho_irr, rho_mix)
    return projected_covariance(spec, pd_floor)


def _covariance(cfg):
    return _cholesky(cfg.p, cfg.active_set0, cfg.rho_rel, cfg.rho_irr, cfg.rho_mix, cfg.pd_floor)


def _truth(cfg):
    return GroundTruth.from_support(cfg.p, cfg.active_set0, cfg.coefficients, cfg.sigma_eps)


def replication_data(cfg, rep, k):
    """Observed design and response of replication ``rep`` at noise index ``k``.

    The latent design and the response depend on ``rep`` only, so every
    observation-noise level of one replication shares them.
    """
    base = cfg.base_seed
    X0 = standardize(sample_mvn(cfg.n, _covariance(cfg), seeding.child(base, rep, seeding.DESIGN)))
    y = generate_response(X0, _truth(cfg), seeding.child(base, rep, seeding.RESPONSE))
    Xobs = add_observation_noise(X0, cfg.delta_obs[k], seeding.child(base, rep, seeding.OBSERVATION, k))
    return np.ascontiguousarray(Xobs.values), y


def _lambda(cfg, X, y, alpha, seed):
    if cfg.lam == "auto":
        return default_lambda(*X.shape)
    if cfg.lam == "auto-1se":
        return cv_lambda_1se(X, y, alpha=alpha, seed=seed)
    return float(cfg.lam)


def jitter_select(X, y, selector, grid, k=None, workers=1):
    """Stability path, delta averages and both selection rules.

    Returns ``(path, avg_freqs, top_k_result_or_None, largest_gap_result)``.
    """
    path = stability_path(X, y, selector, grid, workers)
    avg = delta_average(path)
    top = None if k is None else top_k_select(avg, k)
    return path, avg, top, largest_gap_select(avg)


def replicate(cfg, rep, k):
    """Run every configured method on one replication.

    Returns ``(selections, margin)``: method label to selected 0-based
    indices, and the empirical gap between the smallest averaged jitter
    frequency on the true support and the largest one off it (NaN when no
    jitter method runs).
    """
    X, y = replication_data(cfg, rep, k)
    base = cfg.base_seed
    lam_seed = (base, rep, seeding.CV, k)
    out = {}
    lam_l = lam_e = None
    if {"lasso", "stabl", "jitter_oracle", "jitter_dd"} & set(cfg.methods):
        lam_l = _lambda(cfg, X, y, 1.0, lam_seed)
    if {"enet", "staben"} & set(cfg.methods):
        lam_e = _lambda(cfg, X, y, cfg.enet_alpha, lam_seed)
    if "lasso" in cfg.methods:
        out["Lasso"] = single_fit_select(X, y, SelectorSpec.lasso(lam_l)).selected
    if "enet" in cfg.methods:
        out["ENet"] = single_fit_select(X, y, SelectorSpec.enet(lam_e, cfg.enet_alpha)).selected
    for name, label, spec, tag in (("stabl", "StabL", SelectorSpec.lasso, 0), ("staben", "StabEN", SelectorSpec.enet, 1)):
        if name not in cfg.methods:
            continue
        sel = spec(lam_l) if tag == 0 else spec(lam_e, cfg.enet_alpha)
        ss = StabilitySelectionSpec(cfg.stab_bags, cfg.stab_taus[0], sel, (base, rep, seeding.SUBSAMPLE, k, tag))
        freqs, _ = stability_selection(X, y, ss)
        for tau in cfg.stab_taus:
            out[f"{label}_{fmt(tau)}"] = np.flatnonzero(freqs >= tau)
    if {"jitter_oracle", "jitter_dd"} & set(cfg.methods):
        grid = parse_grid(cfg.grid, cfg.bags, (base, rep, seeding.JITTER, k))
        _, avg, top, gap = jitter_select(X, y, SelectorSpec.lasso(lam_l), grid, len(cfg.active_set))
        if "jitter_oracle" in cfg.methods:
            out["Jitter_oracle"] = top.selected
        if "jitter_dd" in cfg.methods:
            out["Jitter_dd"] = gap.selected
        # known support: report how far the relevant features sit above the rest
        rel = np.zeros(cfg.p, dtype=bool)
        rel[list(cfg.active_set0)] = True
        margin = float(avg[rel].min() - avg[~rel].max())
    else:
        margin = float("nan")
    return {m: tuple(int(j) for j in s) for m, s in out.items()}, margin


def _replicate_task(args):
    cfg, rep, k = args
    return replicate(cfg, rep, k)


def _run_tasks(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def run_table1(cfg, out_dir=None, force=False, workers=None):
    """Monte Carlo campaign over ``delta_obs`` levels and methods.

    Writes ``table1.csv`` (``delta_obs,method,stability,f1``),
    ``selections.csv`` (per replication, 1-based features separated by
    spaces), ``jitter_margins.csv`` (empirical frequency gap around the
    true support) and the manifest. Returns the summary rows.
    """
    out_dir = out_dir or cfg.output_dir
    workers = cfg.workers if workers is None else int(workers)
    digest = config_hash(cfg)
    prepare_output(out_dir, digest, force)
    t0 = time.perf_counter()
    tasks = [(cfg, rep, k) for k in range(len(cfg.delta_obs)) for rep in range(cfg.n_rep)]
    results = _run_tasks(_replicate_task, tasks, workers)
    truth = cfg.active_set0
    rows, sel_rows = [], []
    margin_rows = []
    for k, dobs in enumerate(cfg.delta_obs):
        cell = [r[0] for r in results[k * cfg.n_rep:(k + 1) * cfg.n_rep]]
        margin_rows += [(dobs, rep, r[1]) for rep, r in enumerate(results[k * cfg.n_rep:(k + 1) * cfg.n_rep])]
        for method in cell[0]:
            sels = [r[method] for r in cell]
            f1 = float(np.mean([f1_score(s, truth) for s in sels]))
            phi = nogueira_stability(selection_matrix(sels, cfg.p)) if len(sels) > 1 else float("nan")
            rows.append((dobs, method, phi, f1))
            for rep, s in enumerate(sels):
                sel_rows.append((dobs, method, rep, " ".join(str(j + 1) for j in s)))
    manifest = RunManifest("simulate", digest, cfg.base_seed, workers=workers)
    _write_csv(os.path.join(out_dir, "table1.csv"), ("delta_obs", "method", "stability", "f1"), rows)
    _write_csv(os.path.join(out_dir, "selections.csv"), ("delta_obs", "method", "replication", "selected"),
               sel_rows)
    _write_csv(os.path.join(out_dir, "jitter_margins.csv"), ("delta_obs", "replication", "margin"), margin_rows)
    for name in ("table1.csv", "selections.csv", "jitter_margins.csv"):
        manifest.add(out_dir, name)
    manifest.wall_clock_s = time.perf_counter() - t0
    manifest.extra = {"config": cfg.as_dict()}
    manifest.write(out_dir)
    return rows


def run_path(cfg, out_dir=None, force=False, workers=None, delta_obs=0.0):
    """Selection frequencies along the ``path_grid`` for replication 0.

    Writes ``path.csv`` with ``delta,feature,frequency,is_relevant``.
    """
    out_dir = out_dir or cfg.output_dir
    workers = cfg.workers if workers is None else int(workers)
    digest = config_hash(cfg)
    prepare_output(out_dir, digest, force)
    t0 = time.perf_counter()
    base = cfg.base_seed
    X0 = standardize(sample_mvn(cfg.n, _covariance(cfg), seeding.child(base, 0, seeding.DESIGN)))
    y = generate_response(X0, _truth(cfg), seeding.child(base, 0, seeding.RESPONSE))
    X = np.ascontiguousarray(add_observation_noise(X0, delta_obs, seeding.child(base, 0, seeding.OBSERVATION)).values)
    alpha = cfg.path_alpha
    lam = _lambda(cfg, X, y, alpha, (base, 0, seeding.CV))
    selector = SelectorSpec.lasso(lam) if alpha == 1.0 else SelectorSpec.enet(lam, alpha)
    grid = parse_grid(cfg.path_grid, cfg.bags, (base, 0, seeding.JITTER))
    path = stability_path(X, y, selector, grid, workers)
    relevant = set(cfg.active_set0)
    rows = [(d, j, f, (j - 1) in relevant) for d, j, f in path.to_rows()]
    _write_csv(os.path.join(out_dir, "path.csv"), ("delta", "feature", "frequency", "is_relevant"), rows)
    manifest = RunManifest("path", digest, base, workers=workers)
    manifest.add(out_dir, "path.csv")
    manifest.wall_clock_s = time.perf_counter() - t0
    manifest.extra = {"config": cfg.as_dict(), "lambda": lam, "selector": selector.kind,
                      "n_unconverged": path.n_unconverged}
    manifest.write(out_dir)
    return path


# --- real data ----------------------------------------------------------------


def read_numeric_csv(path, index_col=None):
    """Read a CSV of numbers; reject empty, missing or non-numeric cells.

    Error messages give 1-based data row and the column name.
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, index_col=index_col)
    except (pd.errors.EmptyDataError, FileNotFoundError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if df.shape[0] == 0 or df.shape[1] == 0:
        raise DataError(f"{path} has no data")
    out = np.empty(df.shape, dtype=np.float64)
    for c, name in enumerate(df.columns):
        col = df.iloc[:, c].str.strip()
        missing = np.flatnonzero((col == "").to_numpy() | col.str.upper().isin(["NA", "NAN", "NULL"]).to_numpy())
        if missing.size:
            raise DataError(f"missing value at row {missing[0] + 1}, column {name!r}")
        vals = pd.to_numeric(col, errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            r = bad[0]
            raise DataError(f"non-numeric value {col.iloc[r]!r} at row {r + 1}, column {name!r}")
        out[:, c] = vals
    return list(map(str, df.columns)), out, (list(map(str, df.index)) if index_col is not None else None)


def analyze(data_csv, response, out_dir, lam="auto-1se", alpha=1.0, grid="0.05:2.5:10", bags=100,
            taus=(0.6, 0.7, 0.8, 0.9), stab_bags=100, seed=0, workers=1, standardize_X=True, force=False):
    """Jitter and Stability Selection on a user CSV.

    Writes ``jitter_selection.csv`` (``feature,avg_freq,selected``),
    ``jitter_path.csv``, ``stability_selection.csv`` (one ``selected_<tau>``
    column per threshold), ``summary.json`` and the manifest. Returns the
    jitter :class:`~stability2d.jitter.SelectionResult`.
    """
    names, values, _ = read_numeric_csv(data_csv)
    if response not in names:
        raise DataError(f"response column {response!r} not found in {data_csv}")
    r = names.index(response)
    y = np.ascontiguousarray(values[:, r])
    feats = names[:r] + names[r + 1:]
    X = np.ascontiguousarray(np.delete(values, r, axis=1))
    if X.shape[1] < 2:
        raise DataError("need at least two predictor columns")
    if standardize_X:
        X = standardize(X).values
    X = check_design(X)
    digest = hashlib.sha256(json.dumps(
        {"data": _sha256(data_csv), "response": response, "lam": str(lam), "alpha": alpha, "grid": grid,
         "bags": bags, "taus": list(taus), "stab_bags": stab_bags, "seed": seed, "standardize": standardize_X},
        sort_keys=True).encode()).hexdigest()
    prepare_output(out_dir, digest, force)
    t0 = time.perf_counter()
    if lam == "auto":
        lam_v = default_lambda(*X.shape)
    elif lam == "auto-1se":
        lam_v = cv_lambda_1se(X, y, alpha=alpha, seed=(seed, seeding.CV))
    else:
        lam_v = float(lam)
    selector = SelectorSpec.lasso(lam_v) if alpha == 1.0 else SelectorSpec.enet(lam_v, alpha)
    g = parse_grid(grid, bags, (seed, seeding.JITTER)) if isinstance(grid, str) else grid
    path, avg, _, res = jitter_select(X, y, selector, g, None, workers)
    mask = res.mask(X.shape[1])
    _write_csv(os.path.join(out_dir, "jitter_selection.csv"), ("feature", "avg_freq", "selected"),
               [(feats[j], avg[j], bool(mask[j])) for j in range(len(feats))])
    _write_csv(os.path.join(out_dir, "jitter_path.csv"), ("delta", "feature", "frequency"),
               [(d, feats[j - 1], f) for d, j, f in path.to_rows()])
    ss = StabilitySelectionSpec(stab_bags, taus[0], selector, (seed, seeding.SUBSAMPLE))
    freqs, _ = stability_selection(X, y, ss, workers)
    _write_csv(os.path.join(out_dir, "stability_selection.csv"),
               ("feature", "frequency", *[f"selected_{fmt(t)}" for t in taus]),
               [(feats[j], freqs[j], *[bool(freqs[j] >= t) for t in taus]) for j in range(len(feats))])
    summary = {
        "n": int(X.shape[0]), "p": int(X.shape[1]), "lambda": lam_v, "lambda_rule": str(lam),
        "tau_hat": res.tau_hat, "s_hat": res.s_hat, "selected": [feats[j] for j in res.selected],
        "diagnostics": res.diagnostics, "n_unconverged": path.n_unconverged,
        "stability_selection": {fmt(t): [feats[j] for j in np.flatnonzero(freqs >= t)] for t in taus},
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, default=str)
        fh.write("\n")
    manifest = RunManifest("analyze", digest, int(seed), workers=workers)
    for name in ("jitter_selection.csv", "jitter_path.csv", "stability_selection.csv", "summary.json"):
        manifest.add(out_dir, name)
    manifest.wall_clock_s = time.perf_counter() - t0
    manifest.write(out_dir)
    return res


# --- probe filtering ------------------------------------------------------------


def filter_probe_matrix(values, min_range=2.0, quantile=25.0):
    """Keep-mask for probes (columns) that are expressed and variable.

    A probe is dropped if its maximum is below the ``quantile`` percentile
    (linear interpolation) of all probe maxima, or if its range is below
    ``min_range``. Returns ``(keep, cutoff)``.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.size == 0:
        raise DataError("expression matrix is empty")
    cmax = values.max(axis=0)
    crange = cmax - values.min(axis=0)
    cutoff = float(np.percentile(cmax, quantile, method="linear"))
    keep = (cmax >= cutoff) & (crange >= min_range)
    return keep, cutoff


def filter_probes(expr_csv, out_dir, min_range=2.0, quantile=25.0, force=False):
    """Filter a samples x probes CSV; writes ``filtered.csv`` and ``filter_report.json``.

    A non-numeric first column is taken as sample labels.
    """
    try:
        head = pd.read_csv(expr_csv, nrows=5, dtype=str)
    except (pd.errors.EmptyDataError, FileNotFoundError) as exc:
        raise DataError(f"cannot read {expr_csv}: {exc}") from None
    index_col = None
    if head.shape[1] and pd.to_numeric(head.iloc[:, 0], errors="coerce").isna().any():
        index_col = 0
    names, values, labels = read_numeric_csv(expr_csv, index_col=index_col)
    digest = hashlib.sha256(json.dumps({"data": _sha256(expr_csv), "min_range": min_range,
                                        "quantile": quantile}).encode()).hexdigest()
    prepare_output(out_dir, digest, force)
    keep, cutoff = filter_probe_matrix(values, min_range, quantile)
    kept = [nm for nm, k in zip(names, keep) if k]
    df = pd.DataFrame(values[:, keep], columns=kept, index=labels)
    df.to_csv(os.path.join(out_dir, "filtered.csv"), index=labels is not None, float_format="%.17g")
    cmax = values.max(axis=0)
    report = {
        "n_samples": int(values.shape[0]), "n_probes": int(values.shape[1]), "n_kept": int(keep.sum()),
        "dropped_low_max": int((cmax < cutoff).sum()),
        "dropped_low_range": int(((cmax - values.min(axis=0)) < min_range).sum()),
        "max_cutoff": cutoff, "quantile": quantile, "quantile_method": "linear interpolation (type 7)",
        "min_range": min_range,
    }
    with open(os.path.join(out_dir, "filter_report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    manifest = RunManifest("filter-probes", digest, 0)
    manifest.add(out_dir, "filtered.csv")
    manifest.add(out_dir, "filter_report.json")
    manifest.write(out_dir)
    return report


# --- theory battery ---------------------------------------------------------------


def theory_battery(seed=0, alpha=0.05, C_t=4.0, quick=False):
    """Monte Carlo and falsification checks of the perturbation bounds.

    Uses a small standardized Gaussian design (n=200, p=20, three active
    columns) whose clean IC margin is well above 0.3. Returns a list of
    :class:`~stability2d.theory.CheckReport`.
    """
    from . import theory

    g = seeding.rng(seed, seeding.THEORY, 0)
    X = standardize(g.standard_normal((200, 20))).values
    S = (0, 1, 2)
    G = theory.gram(X)
    eta = theory.ic_margin(G, S).eta
    delta_max, eps0, _ = theory.theorem1_gate(X, S, alpha, C_t, eta)
    reports = []
    freqs = seeding.rng(seed, seeding.THEORY, 1).uniform(0.0, 1.0, size=(10, 1000))
    reports.append(theory.verify_theorem2_mc(freqs, 100, alpha, reps=200, seed=(seed, seeding.THEORY, 2)))
    r = theory.verify_theorem1_mc(X, S, delta_max, alpha, reps=100 if quick else 500, C_t=C_t,
                                  seed=(seed, seeding.THEORY, 3))
    r.details["gate_delta"] = delta_max
    reports.append(r)
    r = theory.verify_theorem1_mc(X, S, 1.0, alpha, reps=10, C_t=C_t, seed=(seed, seeding.THEORY, 4))
    r.name = "theorem1_coverage_ungated"
    reports.append(r)
    reports.append(theory.lemma1_falsify(G, S, 0.5, 0.5, eta, n_random=1000 if quick else 10_000,
                                         n_refine=10 if quick else 100, seed=(seed, seeding.THEORY, 5)))
    beta = np.array([5.0, 4.0, 3.0, 2.0, 1.0])
    for i, (sig, d) in enumerate(((1.0, 0.0), (1.0, 1.0), (1.0, 2.0))):
        r = theory.remark2_variance_check(beta, sig, d, n=1000, reps=100, seed=(seed, seeding.THEORY, 6 + i))
        r.name = f"remark2_variance_sigma{fmt(sig)}_delta{fmt(d)}"
        reports.append(r)
    return reports


def verify_theory(out_dir, seed=0, alpha=0.05, C_t=4.0, force=False, quick=False):
    """Run :func:`theory_battery`; write the reports as CSV, JSON and text."""
    digest = hashlib.sha256(json.dumps({"seed": seed, "alpha": alpha, "C_t": C_t, "quick": quick}).encode()).hexdigest()
    prepare_output(out_dir, digest, force)
    t0 = time.perf_counter()
    reports = theory_battery(seed, alpha, C_t, quick)
    _write_csv(os.path.join(out_dir, "theory_checks.csv"), ("check", "status", "statistic", "threshold"),
               [(r.name, r.status, r.statistic, r.threshold) for r in reports])
    with open(os.path.join(out_dir, "theory_checks.json"), "w", encoding="utf-8") as fh:
        json.dump([{"name": r.name, "status": r.status, "statistic": r.statistic, "threshold": r.threshold,
                    "details": r.details} for r in reports], fh, indent=2, default=float)
        fh.write("\n")
    with open(os.path.join(out_dir, "theory_checks.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"C_t={fmt(C_t)} alpha={fmt(alpha)} seed={seed}\n")
        fh.writelines(r.summary() + "\n" for r in reports)
    manifest = RunManifest("verify-theory", digest, int(seed))
    for name in ("theory_checks.csv", "theory_checks.json", "theory_checks.txt"):
        manifest.add(out_dir, name)
    manifest.wall_clock_s = time.perf_counter() - t0
    manifest.write(out_dir)
    return reports
