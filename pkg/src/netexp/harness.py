"""Monte Carlo error-probability estimation, exponent fitting, bound
comparison reports, and the four-node counterexample experiment."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import (
    Dmc,
    bhattacharyya,
    bsc,
    identity_channel,
    is_pairwise_reversible,
    ksym,
    make_dmc,
)
from .errors import (
    AlphabetTooLarge,
    DistributionUnavailable,
    InsufficientData,
    ParameterOutOfRange,
    StateSpaceTooLarge,
)
from .exponents import berlekamp_codebook, bsc_feedback_exponent_m3, exponent_two, tilde_exponent, zero_rate_exponent
from .flow import ChannelGraph, NetEdge, Network, make_channel_graph, maxflow, mincut_without_backedges, weighted_network
from .protocol import (
    NetworkPlan,
    block_scores_heuristic,
    block_scores_ml,
    build_network_plan,
    exact_block_distribution,
    run_series_blocks_batch,
)

WILSON_Z = 1.959963984540054  # 95%


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z):
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ParameterOutOfRange("trials must be >= 1")
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = center - half
    hi = center + half
    if abs(lo) < 1e-15:
        lo = 0.0
    return max(0.0, lo), min(1.0, hi)


@dataclass(frozen=True)
class EdgeBounds:
    edge_id: int
    tail: int
    head: int
    label: str | None
    exp_two: float
    exp_tilde: float
    exp_zero: float
    reversible: bool


@dataclass(frozen=True)
class BoundsReport:
    """Achievability/converse summary for one graph and message count."""

    M: int
    edges: tuple
    maxflow_tilde: float
    maxflow_two: float
    maxflow_zero: float
    ratio_two_over_tilde: float
    all_reversible: bool
    backedge_free_mincut_exists: bool | None

    def to_json_obj(self) -> dict:
        def num(v):
            if v is None:
                return None
            if math.isinf(v):
                return "inf"
            return float(f"{v:.12g}")

        return {
            "messages": self.M,
            "edges": [
                {
                    "id": e.edge_id,
                    "tail": e.tail,
                    "head": e.head,
                    "label": e.label,
                    "exponent_two": num(e.exp_two),
                    "exponent_tilde": num(e.exp_tilde),
                    "exponent_zero_rate": num(e.exp_zero),
                    "pairwise_reversible": e.reversible,
                }
                for e in self.edges
            ],
            "maxflow_tilde": num(self.maxflow_tilde),
            "maxflow_two": num(self.maxflow_two),
            "maxflow_zero_rate": num(self.maxflow_zero),
            "ratio_two_over_tilde": num(self.ratio_two_over_tilde),
            "all_reversible": self.all_reversible,
            "backedge_free_mincut_exists": self.backedge_free_mincut_exists,
        }


def _effective_total(net: Network, total: float) -> float:
    return math.inf if total >= net.sentinel() - 1e-9 else total


def analyze(G: ChannelGraph, M: int) -> BoundsReport:
    """Per-edge exponents, the three maxflow bounds, and structural flags.

    The sandwich maxflow_tilde <= maxflow_two and the 4x (2x under M=2 or
    all-reversible) approximation are asserted before returning.
    """
    cache: dict[int, tuple] = {}
    edges = []
    for e in G.edges:
        key = id(e.channel)
        if key not in cache:
            cache[key] = (
                exponent_two(e.channel).value,
                tilde_exponent(e.channel, M).value,
                zero_rate_exponent(e.channel).value,
                is_pairwise_reversible(e.channel)[0],
            )
        two, til, zero, rev = cache[key]
        edges.append(
            EdgeBounds(
                edge_id=e.id, tail=e.tail, head=e.head, label=e.channel.label,
                exp_two=two, exp_tilde=til, exp_zero=zero, reversible=rev,
            )
        )
    net_tilde = weighted_network(G, "tilde", M)
    net_two = weighted_network(G, "two")
    net_zero = weighted_network(G, "zero")
    f_tilde = _effective_total(net_tilde, maxflow(net_tilde).total)
    f_two = _effective_total(net_two, maxflow(net_two).total)
    f_zero = _effective_total(net_zero, maxflow(net_zero).total)

    if f_tilde == 0 and f_two == 0:
        ratio = 1.0
    elif math.isinf(f_tilde) and math.isinf(f_two):
        ratio = 1.0
    else:
        ratio = f_two / f_tilde

    all_rev = all(e.reversible for e in edges)
    backedge_free = None
    if G.node_count <= 20:
        backedge_free = mincut_without_backedges(net_tilde) is not None

    assert f_tilde <= f_two + 1e-9, "tilde-weighted maxflow exceeded two-message maxflow"
    assert ratio <= 4 + 1e-9, "approximation ratio above 4"
    if M == 2 or all_rev:
        assert ratio <= 2 + 1e-9, "approximation ratio above 2 in the reversible/M=2 regime"

    return BoundsReport(
        M=M,
        edges=tuple(edges),
        maxflow_tilde=f_tilde,
        maxflow_two=f_two,
        maxflow_zero=f_zero,
        ratio_two_over_tilde=ratio,
        all_reversible=all_rev,
        backedge_free_mincut_exists=backedge_free,
    )


@dataclass(frozen=True)
class SimConfig:
    seed: int
    trials: int
    horizons: tuple
    B: int
    M: int
    decoder: str = "exact"
    messages: str = "worst_case"

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterOutOfRange("trials must be >= 1")
        hs = tuple(self.horizons)
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ParameterOutOfRange("horizons must be strictly increasing")
        if self.decoder not in ("exact", "heuristic"):
            raise ParameterOutOfRange(f"unknown decoder {self.decoder!r}")
        if self.messages not in ("worst_case", "uniform"):
            raise ParameterOutOfRange(f"unknown message aggregation {self.messages!r}")
        if self.B % 2 != 0 or self.B < 2:
            raise ParameterOutOfRange("block size must be even and at least 2")


@dataclass(frozen=True)
class SimRow:
    n: int
    message: int
    errors: int
    trials: int
    p_hat: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    rows: tuple
    aggregate: tuple  # (n, p_hat) per horizon, per config.messages
    fitted: tuple | None  # (slope, stderr) when >= 3 horizons have errors
    skipped_horizons: tuple


_TRIAL_CHUNK = 1 << 14


def _cell_errors(plan: NetworkPlan, dists, decoder: str, n: int, m: int, trials: int,
                 seed: int, h_idx: int) -> int:
    """Error count for one (horizon, message) cell; deterministic in its key.

    Each (path, block) slot gets a substream keyed by (h_idx, m, path, block);
    all trials of the slot are sampled from it in a fixed chunk layout, so
    results do not depend on worker scheduling.
    """
    counts = plan.blocks_per_path(n)
    scores = np.zeros((trials, plan.M))
    for p, t in zip(plan.paths, counts):
        spec = p.spec
        for b_idx in range(t):
            ss = np.random.SeedSequence(entropy=seed, spawn_key=(h_idx, m, p.index, b_idx))
            rng = np.random.Generator(np.random.PCG64(ss))
            done = 0
            while done < trials:
                chunk = min(_TRIAL_CHUNK, trials - done)
                blocks = run_series_blocks_batch(spec, m, chunk, rng)
                if decoder == "exact":
                    scores[done : done + chunk] += block_scores_ml(blocks, dists[p.index])
                else:
                    scores[done : done + chunk] += block_scores_heuristic(
                        blocks, spec.channels[-1], spec.M, spec.B
                    )
                done += chunk
    decided = np.argmax(scores, axis=1) + 1
    return int(np.count_nonzero(decided != m))


def simulate(G: ChannelGraph, config: SimConfig) -> SimResult:
    """Estimate message error probabilities of the multipath protocol.

    Every (horizon, message) pair is simulated with `config.trials` trials on
    deterministically derived substreams; NETEXP_THREADS > 1 parallelizes over
    those pairs without changing any count.
    """
    plan = build_network_plan(G, config.M, config.B)
    dists = None
    if config.decoder == "exact":
        try:
            dists = [exact_block_distribution(p.spec, update_mode="uniform") for p in plan.paths]
        except StateSpaceTooLarge as exc:
            raise DistributionUnavailable(str(exc)) from exc

    cells = [
        (h_idx, n, m)
        for h_idx, n in enumerate(config.horizons)
        for m in range(1, config.M + 1)
    ]
    workers = max(1, int(os.environ.get("NETEXP_THREADS", "1")))

    def run_cell(cell):
        h_idx, n, m = cell
        return _cell_errors(plan, dists, config.decoder, n, m, config.trials, config.seed, h_idx)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errs = list(pool.map(run_cell, cells))
    else:
        errs = [run_cell(c) for c in cells]

    rows = []
    for (h_idx, n, m), e in zip(cells, errs):
        lo, hi = wilson_interval(e, config.trials)
        rows.append(SimRow(n=n, message=m, errors=e, trials=config.trials,
                           p_hat=e / config.trials, ci_lo=lo, ci_hi=hi))

    aggregate = []
    for n in config.horizons:
        ps = [r.p_hat for r in rows if r.n == n]
        agg = max(ps) if config.messages == "worst_case" else sum(ps) / len(ps)
        aggregate.append((n, agg))

    fitted = None
    skipped = tuple(n for n, p in aggregate if p == 0.0)
    usable = [(n, p) for n, p in aggregate if p > 0.0]
    if len(usable) >= 3:
        fitted = _ols_exponent(usable)

    return SimResult(config=config, rows=tuple(rows), aggregate=tuple(aggregate),
                     fitted=fitted, skipped_horizons=skipped)


def _ols_exponent(points):
    xs = np.array([n for n, _ in points], dtype=float)
    ys = np.array([-math.log(p) for _, p in points])
    xbar, ybar = xs.mean(), ys.mean()
    sxx = float(((xs - xbar) ** 2).sum())
    slope = float(((xs - xbar) * (ys - ybar)).sum() / sxx)
    resid = ys - (ybar + slope * (xs - xbar))
    dof = len(xs) - 2
    sigma2 = float((resid**2).sum() / dof) if dof > 0 else 0.0
    stderr = math.sqrt(sigma2 / sxx)
    return slope, stderr


def fit_exponent(result: SimResult):
    """OLS slope of -ln(p_hat) against n over horizons with nonzero errors.

    Zero-error horizons are excluded (they are listed in
    result.skipped_horizons); fewer than 3 usable horizons raises.
    """
    usable = [(n, p) for n, p in result.aggregate if p > 0.0]
    if len(usable) < 3:
        raise InsufficientData(
            f"need at least 3 horizons with errors, have {len(usable)}"
        )
    return _ols_exponent(usable)


def counterexample_channel(p: float) -> Dmc:
    """Composite per-transmission channel of the four-node counterexample.

    Inputs {0,1,2}; outputs (a, b) with a in {0,1,2} the relayed symbol and
    b the comparison bit, ordered [(0,0),(1,0),(2,0),(0,1),(1,1),(2,1)].
    """
    if not 0 < p < 1 / 3:
        raise ParameterOutOfRange(f"need p in (0, 1/3), got {p}")
    rows = []
    for m in range(3):
        agree = [(1 - 2 * p) * (1 - p) if a == m else p * p for a in range(3)]
        flag = [(1 - 2 * p) * p if a == m else p * (1 - p) for a in range(3)]
        rows.append(agree + flag)
    return make_dmc(rows, label=f"counterexample({p:g})")


def counterexample_graph(p: float) -> ChannelGraph:
    """Four-node graph: finite ternary and binary symmetric edges bridged by
    noiseless edges, whose unique minimum cut has a back-edge."""
    if not 0 < p < 1 / 3:
        raise ParameterOutOfRange(f"need p in (0, 1/3), got {p}")
    ident = identity_channel(3)
    # nodes 0..3 = 1..4; source 0, destination 3
    edges = [
        (0, 1, ksym(3, p)),
        (0, 2, ident),
        (1, 2, ident),
        (1, 3, ident),
        (2, 3, bsc(p)),
    ]
    return make_channel_graph(4, 0, 3, edges, node_names=("1", "2", "3", "4"))


@dataclass(frozen=True)
class CounterexampleRow:
    p: float
    min_db_q: float
    maxflow_bound: float
    maxflow_feedback_bound: float


def counterexample_experiment(p_grid) -> list:
    """For each noise level: the composite channel's worst pairwise distance
    against the plain and feedback-weighted maxflow bounds (M=3)."""
    ps = [float(p) for p in p_grid]
    if not ps:
        raise ParameterOutOfRange("p grid must be non-empty")
    rows = []
    for p in ps:
        if not 0 < p < 1 / 3:
            raise ParameterOutOfRange(f"need p in (0, 1/3), got {p}")
        Q = counterexample_channel(p)
        min_db = min(
            bhattacharyya(Q, a, b) for a in range(3) for b in range(a + 1, 3)
        )
        G = counterexample_graph(p)
        net = weighted_network(G, "tilde", 3)
        bound = maxflow(net).total

        tern_fb = tilde_exponent(ksym(3, p), 3).value  # feedback gains nothing here
        bsc_fb = bsc_feedback_exponent_m3(p)
        fb_caps = {0: tern_fb, 4: bsc_fb}
        fb_edges = tuple(
            NetEdge(e.tail, e.head, fb_caps.get(e.id, math.inf), e.id) for e in net.edges
        )
        fb_net = Network(net.node_count, net.source, net.destination, fb_edges)
        fb_bound = maxflow(fb_net).total

        rows.append(
            CounterexampleRow(
                p=p, min_db_q=min_db, maxflow_bound=bound, maxflow_feedback_bound=fb_bound
            )
        )
    return rows


def oracle_exponent_1hop(P: Dmc, M: int, n: int) -> float:
    """Exact worst-case ML error probability of the permutation codebook
    repeated cyclically to length n, by full output enumeration."""
    if P.output_size**n > 10**7:
        raise AlphabetTooLarge(f"{P.output_size}^{n} outputs exceed the 1e7 guard")
    cb = berlekamp_codebook(P, M)
    words = [[cb.words[m][j % cb.ell] for j in range(n)] for m in range(M)]
    L = np.zeros((M, 1))
    for j in range(n):
        cols = np.array([words[m][j] for m in range(M)])
        L = (L[:, :, None] + P.log_probs[cols][:, None, :]).reshape(M, -1)
    decisions = np.argmax(L, axis=0)
    worst = 0.0
    for m_idx in range(M):
        wrong = decisions != m_idx
        p_err = float(np.exp(L[m_idx][wrong]).sum()) if wrong.any() else 0.0
        worst = max(worst, p_err)
    return worst
