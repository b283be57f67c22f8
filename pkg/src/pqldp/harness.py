"""Experiment harness: node-count, budget, (p,q) and sampling sweeps to CSV."""

from __future__ import annotations

import csv
import io
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .graph import BipartiteGraph, complete_bipartite, induced_random_subgraph, load_edge_list, random_bipartite
from .mechanism import PrivacyParams, derive_seed, flip_prob
from .metrics import l2_loss, relative_error, trial_stats
from .oracle import clique_counts, count_pq_cliques
from .protocol import EDGE, KSTARS, run
from .stars import edge_budget_equivalent

logger = logging.getLogger(__name__)

CSV_HEADER = "dataset,n,p,q,k,algorithm,epsilon,rho,trial,true_count,estimate,l2,rel_err,seed".split(",")
COUNT_HEADER = "n,f_pq,n_1q,n_2q,s_coeff".split(",")
SUMMARY_HEADER = (
    "dataset,n,p,q,k,algorithm,epsilon,rho,trials,true_count,mean_estimate,variance,"
    "l2_mean,rel_err_mean,bound_edge,bound_kstars"
).split(",")

WORKERS_ENV = "PQLDP_WORKERS"
DEFAULT_MAX_RUNS = 10**6


class ConfigError(ValueError):
    pass


class SafetyCapExceeded(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    layers: str = "first-column"
    lenient: bool = False
    n_values: list[int] | None = None
    pq: list[tuple[int, int]] = field(default_factory=lambda: [(2, 2)])
    k: int | None = None
    epsilons: list[float] = field(default_factory=lambda: [0.1])
    epsilon_edge: list[float] | str | None = None
    rhos: list[float] = field(default_factory=lambda: [1.0])
    trials: int = 1
    seed: int = 0
    algorithms: list[str] = field(default_factory=lambda: [EDGE, KSTARS])
    abs_correction: bool = False
    sampling_rescale: bool = True
    literal_rr: bool = False
    correction: str = "exact"
    alpha: float = 1.0
    out: str | None = None
    summary: str | None = None
    max_runs: int = DEFAULT_MAX_RUNS

    def validate(self, graph_size: int | None = None) -> None:
        if self.dataset is None:
            raise ConfigError("no dataset given")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if any(not e > 0 for e in self.epsilons):
            raise ConfigError("every epsilon must be positive")
        if isinstance(self.epsilon_edge, list):
            if len(self.epsilon_edge) not in (1, len(self.epsilons)):
                raise ConfigError("epsilon-edge must give one value or one per epsilon")
            if any(not e > 0 for e in self.epsilon_edge):
                raise ConfigError("every edge epsilon must be positive")
        elif self.epsilon_edge not in (None, "auto"):
            raise ConfigError(f"epsilon-edge must be a list or 'auto', got {self.epsilon_edge!r}")
        if any(not 0 < r <= 1 for r in self.rhos):
            raise ConfigError("rho values must lie in (0, 1]")
        unknown = set(self.algorithms) - {EDGE, KSTARS}
        if unknown or not self.algorithms:
            raise ConfigError(f"algorithms must be drawn from edge/kstars, got {self.algorithms}")
        for p, q in self.pq:
            if p < 2 or q < 1:
                raise ConfigError(f"(p,q)=({p},{q}) unsupported: need p >= 2, q >= 1")
            if KSTARS in self.algorithms and self.k is not None and self.k != q:
                raise ConfigError(f"k-stars requires k = q (k={self.k}, q={q})")
        if self.correction not in ("exact", "first_order"):
            raise ConfigError(f"unknown correction {self.correction!r}")
        if graph_size is not None and self.n_values and max(self.n_values) > graph_size:
            raise ConfigError(f"n={max(self.n_values)} exceeds dataset size {graph_size}")
        if self.n_values and min(self.n_values) < 1:
            raise ConfigError("n values must be positive")

    def dataset_name(self) -> str:
        if self.dataset and (self.dataset.startswith("random:") or self.dataset.startswith("complete:")):
            return self.dataset.replace(":", "_")
        return Path(self.dataset).stem if self.dataset else ""

    def edge_epsilon(self, index: int, k: int) -> float:
        eps = self.epsilons[index]
        if self.epsilon_edge is None:
            return eps
        if self.epsilon_edge == "auto":
            return edge_budget_equivalent(k, float(eps))
        return self.epsilon_edge[index] if len(self.epsilon_edge) > 1 else self.epsilon_edge[0]


def load_dataset(cfg: ExperimentConfig) -> BipartiteGraph:
    """Load the configured dataset; ``random:NU:NL:PROB:SEED`` and ``complete:A:B`` are synthetic."""
    if not cfg.dataset:
        raise ConfigError("no dataset given")
    source = cfg.dataset
    m = re.fullmatch(r"random:(\d+):(\d+):([0-9.]+):(\d+)", source)
    if m:
        return random_bipartite(int(m[1]), int(m[2]), float(m[3]), int(m[4]))
    m = re.fullmatch(r"complete:(\d+):(\d+)", source)
    if m:
        return complete_bipartite(int(m[1]), int(m[2]))
    return load_edge_list(source, cfg.layers, strict=not cfg.lenient)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _samples(cfg: ExperimentConfig, g: BipartiteGraph):
    ns = cfg.n_values if cfg.n_values is not None else [g.n_nodes]
    for n in ns:
        yield n, g if n == g.n_nodes else induced_random_subgraph(g, n, derive_seed(cfg.seed, 0, n))


def _params(cfg: ExperimentConfig, eps: float, q: int, rho: float) -> PrivacyParams:
    return PrivacyParams(
        epsilon=eps,
        k=q if cfg.k is None else cfg.k,
        rho=rho,
        abs_correction=cfg.abs_correction,
        sampling_rescale=cfg.sampling_rescale,
        literal_rr=cfg.literal_rr,
        correction=cfg.correction,
    )


@dataclass(frozen=True)
class Cell:
    """One (sample, p, q, algorithm, epsilon, rho) combination; runs all its trials."""

    index: tuple
    n: int
    p: int
    q: int
    algorithm: str
    params: PrivacyParams
    true_count: int


def _cells(cfg: ExperimentConfig, g: BipartiteGraph, rhos: list[float]):
    for ni, (n, sub) in enumerate(_samples(cfg, g)):
        for pi, (p, q) in enumerate(cfg.pq):
            truth = count_pq_cliques(sub, p, q)
            for ei in range(len(cfg.epsilons)):
                for ai, alg in enumerate(cfg.algorithms):
                    # sampling only applies to k-stars; edge runs once per budget
                    alg_rhos = rhos if alg == KSTARS else [1.0]
                    for ri, rho in enumerate(alg_rhos):
                        eps = cfg.epsilons[ei] if alg == KSTARS else cfg.edge_epsilon(ei, q)
                        yield sub, Cell((ni, pi, ei, ai, ri), n, p, q, alg, _params(cfg, eps, q, rho), truth)


def _run_cell(args):
    g, cell, trials, seed, alpha = args
    rows = []
    for t in range(trials):
        run_seed = derive_seed(seed, *cell.index, t)
        est = run(cell.algorithm, g, cell.p, cell.q, cell.params, run_seed).aggregate
        rows.append((t, est, run_seed))
    return rows


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer")


def _execute(cfg: ExperimentConfig, rhos: list[float]):
    g = load_dataset(cfg)
    cfg.validate(g.n_nodes)
    cells = list(_cells(cfg, g, rhos))
    total = len(cells) * cfg.trials
    if total > cfg.max_runs:
        raise SafetyCapExceeded(f"{total} protocol runs exceed the safety cap of {cfg.max_runs}")
    logger.info("running %d cells x %d trials", len(cells), cfg.trials)
    jobs = [(sub, cell, cfg.trials, cfg.seed, cfg.alpha) for sub, cell in cells]
    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    return [(sub, cell, res) for (sub, cell), res in zip(cells, results)]


def _k_column(cell: Cell) -> int:
    return 1 if cell.algorithm == EDGE else cell.params.k


def _trial_rows(cfg: ExperimentConfig, executed) -> list[list[str]]:
    name = cfg.dataset_name()
    rows = []
    for _, cell, results in executed:
        for t, est, run_seed in results:
            rows.append(
                [
                    name,
                    str(cell.n),
                    str(cell.p),
                    str(cell.q),
                    str(_k_column(cell)),
                    cell.algorithm,
                    _fmt(cell.params.epsilon),
                    _fmt(cell.params.rho),
                    str(t),
                    str(cell.true_count),
                    _fmt(est),
                    _fmt(l2_loss(cell.true_count, est)),
                    _fmt(relative_error(cell.true_count, est, cfg.alpha)),
                    str(run_seed),
                ]
            )
    return rows


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_count_exact(cfg: ExperimentConfig) -> str:
    """Exact counts per sampled n: ``n, f_pq, N_1q, N_2q, S``."""
    g = load_dataset(cfg)
    cfg.validate(g.n_nodes)
    if len(cfg.pq) != 1:
        raise ConfigError("count-exact takes a single (p,q)")
    p, q = cfg.pq[0]
    rows = []
    for n, sub in _samples(cfg, g):
        c = clique_counts(sub, p, q)
        rows.append([n, c.f_pq, c.n_1q, c.n_2q, c.s_coeff])
    return _csv(COUNT_HEADER, rows)


def cmd_sweep(cfg: ExperimentConfig) -> str:
    """One row per (n, (p,q), epsilon, rho, algorithm, trial), in config order."""
    return _csv(CSV_HEADER, _trial_rows(cfg, _execute(cfg, cfg.rhos)))


def summarize(cfg: ExperimentConfig, executed) -> str:
    name = cfg.dataset_name()
    rows = []
    for sub, cell, results in executed:
        s_coeff = clique_counts(sub, 2, cell.q).s_coeff
        mu = flip_prob(cell.params.epsilon)
        ts = trial_stats(cell.true_count, [r[1] for r in results], cell.p, cell.q, mu, s_coeff, cfg.alpha)
        rows.append(
            [
                name,
                cell.n,
                cell.p,
                cell.q,
                _k_column(cell),
                cell.algorithm,
                _fmt(cell.params.epsilon),
                _fmt(cell.params.rho),
                ts.trials,
                cell.true_count,
                _fmt(ts.mean_estimate),
                _fmt(ts.variance),
                _fmt(ts.l2_mean),
                _fmt(ts.rel_err_mean),
                _fmt(ts.bound_edge),
                _fmt(ts.bound_kstars),
            ]
        )
    return _csv(SUMMARY_HEADER, rows)


def cmd_compare(cfg: ExperimentConfig) -> tuple[str, str]:
    """Edge LDP vs k-stars LDP at a single sampling ratio: per-trial CSV and summary CSV."""
    executed = _execute(replace(cfg, algorithms=cfg.algorithms or [EDGE, KSTARS]), cfg.rhos[:1])
    return _csv(CSV_HEADER, _trial_rows(cfg, executed)), summarize(cfg, executed)


def parse_csv(text: str) -> list[dict]:
    """Read trial rows back into typed values."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(
            {
                "dataset": row["dataset"],
                "n": int(row["n"]),
                "p": int(row["p"]),
                "q": int(row["q"]),
                "k": int(row["k"]),
                "algorithm": row["algorithm"],
                "epsilon": float(row["epsilon"]),
                "rho": float(row["rho"]),
                "trial": int(row["trial"]),
                "true_count": int(row["true_count"]),
                "estimate": float(row["estimate"]),
                "l2": float(row["l2"]),
                "rel_err": float(row["rel_err"]),
                "seed": int(row["seed"]),
            }
        )
    return out
