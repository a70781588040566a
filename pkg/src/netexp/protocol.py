"""Sequential-block forwarding over chains of channels, and its multipath
extension to general graphs.

A relay's belief is a state (m, ell): most likely message plus a quantized
confidence level.  Each node re-encodes its state as a sorted block -- B/2+ell
copies of m followed by B/2-ell copies of m's successor -- and the next node
updates its state from block likelihoods.  Exact small-instance distribution
oracles run the same dynamics by enumeration instead of sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import Dmc, restrict
from .errors import (
    BoundsViolation,
    BTooSmall,
    DistributionUnavailable,
    HorizonTooShort,
    MTooLarge,
    ParameterOutOfRange,
    StateSpaceTooLarge,
)
from .exponents import berlekamp_codebook, tilde_exponent
from .flow import ChannelGraph, decompose, maxflow, path_edge_budgets, weighted_network

EXACT_BLOCK_GUARD = 10**6


@dataclass(frozen=True)
class NodeState:
    """Belief state: message index m in 1..M, confidence ell in 0..B/2."""

    m: int
    ell: int


@dataclass(frozen=True)
class ReducedChannel:
    """Lazy restriction of base^ell to M codewords (one per message).

    Kept unmaterialized so the Monte Carlo path never enumerates the
    output alphabet; ``to_dmc`` materializes the restriction for exact ops.
    """

    base: Dmc
    words: tuple
    ell: int
    pair_db: float

    @property
    def input_size(self) -> int:
        return len(self.words)

    @property
    def output_size(self) -> int:
        return self.base.output_size**self.ell

    def to_dmc(self) -> Dmc:
        return restrict(self.base, self.words)


@dataclass(frozen=True)
class SeriesSpec:
    """A chain of hop channels plus the protocol parameters.

    ``B`` counts hop-channel uses per block and must be even; ``flow_value``
    is the divergence scale |f| used in the confidence update (for reduced
    chains: the bottleneck pairwise Bhattacharyya distance per use).
    """

    channels: tuple
    M: int
    B: int
    flow_value: float

    def __post_init__(self):
        if self.B % 2 != 0 or self.B < 2:
            raise ParameterOutOfRange("block size must be even and at least 2")
        if self.M < 2:
            raise ParameterOutOfRange(f"need M >= 2, got {self.M}")
        for ch in self.channels:
            if ch.input_size < self.M:
                raise ParameterOutOfRange(
                    f"hop channel has {ch.input_size} inputs, needs at least M={self.M}"
                )


@dataclass(frozen=True)
class HopRecord:
    sent: tuple
    received: tuple
    state: NodeState


@dataclass(frozen=True)
class Transcript:
    """Per-hop sent/received blocks and resulting states for one block run.

    ``sent`` holds protocol symbols (1..M, one per hop-channel use);
    ``received`` holds raw base-channel output indices.
    """

    hops: tuple
    final_block: tuple

    def dump(self) -> str:
        lines = []
        for j, hop in enumerate(self.hops, start=1):
            sent = "".join(str(s) for s in hop.sent)
            recv = "".join(str(s) for s in hop.received)
            lines.append(f"hop={j} state=({hop.state.m},{hop.state.ell}) sent={sent} recv={recv}")
        return "\n".join(lines)


@dataclass(frozen=True)
class CompositeDistribution:
    """Exact per-message log distributions over the destination block alphabet.

    Blocks are indexed in row-major base-output digit order, so a received
    base block maps to its index by Horner evaluation.
    """

    log_dists: np.ndarray
    base_output_size: int
    block_symbols: int


def codeword(m: int, ell: int, B: int, M: int) -> tuple:
    """Sorted state block: B/2+ell copies of m, then B/2-ell copies of m's
    successor (wrapping M back to 1)."""
    if B % 2 != 0 or B < 2:
        raise BoundsViolation("block size must be even and at least 2")
    if not 1 <= m <= M:
        raise BoundsViolation(f"message {m} outside 1..{M}")
    if not 0 <= ell <= B // 2:
        raise BoundsViolation(f"confidence {ell} outside 0..{B // 2}")
    nxt = m % M + 1
    return (m,) * (B // 2 + ell) + (nxt,) * (B // 2 - ell)


def state_pseudometric(a: NodeState, b: NodeState, flow_value: float) -> float:
    """Belief distance: |f|*|ell1-ell2| on equal messages, else |f|*(ell1+ell2)."""
    steps = abs(a.ell - b.ell) if a.m == b.m else a.ell + b.ell
    if steps == 0:
        return 0.0  # even when flow_value is infinite
    return flow_value * steps


def _hop_view(chan, M: int):
    """Uniform (base channel, codeword table) view of a hop channel.

    words[a] lists the base symbols transmitted for protocol symbol a+1.
    """
    if isinstance(chan, ReducedChannel):
        if chan.input_size < M:
            raise ParameterOutOfRange("reduced channel has fewer inputs than messages")
        return chan.base, np.asarray(chan.words[:M], dtype=np.int64)
    if chan.input_size < M:
        raise ParameterOutOfRange(f"channel has {chan.input_size} inputs, needs {M}")
    return chan, np.arange(M, dtype=np.int64)[:, None]


def _as_dmc(chan) -> Dmc:
    return chan.to_dmc() if isinstance(chan, ReducedChannel) else chan


def _codeword_table(M: int, B: int) -> np.ndarray:
    half = B // 2
    tab = np.empty((M, half + 1, B), dtype=np.int64)
    for m_idx in range(M):
        nxt = (m_idx + 1) % M
        for ell in range(half + 1):
            tab[m_idx, ell, : half + ell] = m_idx
            tab[m_idx, ell, half + ell :] = nxt
    return tab


def _symbol_logliks(base_logp: np.ndarray, words: np.ndarray, y: np.ndarray, B: int) -> np.ndarray:
    """Per-use log-likelihoods la[a, n, r] = log P(chunk r of y_n | symbol a+1)."""
    M, ell = words.shape
    N = y.shape[0]
    yr = y.reshape(N, B, ell)
    la = np.zeros((M, N, B))
    for a in range(M):
        for j in range(ell):
            la[a] += base_logp[words[a, j]][yr[:, :, j]]
    return la


def _state_logliks(la: np.ndarray, B: int) -> np.ndarray:
    """Codeword log-likelihoods ll[n, m, ell] from per-use symbol likelihoods.

    Codewords are two homogeneous segments, so a prefix sum for the leading
    symbol plus a suffix sum for the trailing one covers every ell at once.
    Sums never mix +inf and -inf, so zeros in the channel stay -inf.
    """
    M, N, _ = la.shape
    half = B // 2
    cols = half + np.arange(half + 1)
    prefix = np.empty((M, N, B + 1))
    suffix = np.empty((M, N, B + 1))
    for a in range(M):
        prefix[a, :, 0] = 0.0
        np.cumsum(la[a], axis=1, out=prefix[a, :, 1:])
        suffix[a, :, B] = 0.0
        suffix[a, :, :B] = np.cumsum(la[a][:, ::-1], axis=1)[:, ::-1]
    ll = np.empty((N, M, half + 1))
    for m_idx in range(M):
        nxt = (m_idx + 1) % M
        ll[:, m_idx, :] = prefix[m_idx][:, cols] + suffix[nxt][:, cols]
    return ll


def _uniform_message_loglik(ll: np.ndarray) -> np.ndarray:
    """Mixture likelihood per message: uniform prior over the sender's ell."""
    half_plus_1 = ll.shape[2]
    with np.errstate(divide="ignore"):
        return logsumexp(ll, axis=2) - math.log(half_plus_1)


def _states_from_loglik(msg_ll: np.ndarray, flow_value: float, half: int):
    """Most likely message plus quantized log-likelihood-ratio confidence.

    Ties break to the lowest message index; an infinite ratio clamps to B/2.
    """
    N = msg_ll.shape[0]
    rows = np.arange(N)
    m_idx = np.argmax(msg_ll, axis=1)
    val1 = msg_ll[rows, m_idx]
    tmp = msg_ll.copy()
    tmp[rows, m_idx] = -np.inf
    val2 = tmp.max(axis=1)
    with np.errstate(invalid="ignore"):
        llr = val1 - val2
        raw = np.floor(llr / (4.0 * flow_value))
    ell = np.where(np.isposinf(raw), half, raw)
    ell = np.where(np.isnan(ell), np.where(np.isposinf(llr), half, 0), ell)
    ell = np.clip(ell, 0, half).astype(np.int64)
    return m_idx, ell


def state_update(y, channel, B: int, M: int, flow_value: float, state_priors=None) -> NodeState:
    """Receiving node's state from one block.

    With ``state_priors`` omitted, hypothesis likelihoods marginalize the
    sender's confidence uniformly: P(y|m) = mean over ell of P(y|codeword).
    ``state_priors`` (shape (M, M*(B/2+1))) supplies exact predecessor state
    occupancies per source hypothesis instead.
    """
    base, words = _hop_view(channel, M)
    y_arr = np.asarray(y, dtype=np.int64)[None, :]
    if y_arr.shape[1] != B * words.shape[1]:
        raise BoundsViolation(f"block length {y_arr.shape[1]} != B*ell = {B * words.shape[1]}")
    la = _symbol_logliks(base.log_probs, words, y_arr, B)
    ll = _state_logliks(la, B)
    if state_priors is None:
        msg_ll = _uniform_message_loglik(ll)
    else:
        pri = np.asarray(state_priors)
        with np.errstate(divide="ignore"):
            logpri = np.log(pri)
        flat = ll.reshape(1, -1)
        msg_ll = np.stack([logsumexp(flat[0] + logpri[m]) for m in range(M)])[None, :]
    m_idx, ell = _states_from_loglik(msg_ll, flow_value, B // 2)
    return NodeState(m=int(m_idx[0]) + 1, ell=int(ell[0]))


def _sample_symbols(probs: np.ndarray, x_idx: np.ndarray, rng) -> np.ndarray:
    """Inverse-CDF sampling of channel outputs for a matrix of inputs."""
    u = rng.random(x_idx.shape)
    y = np.empty(x_idx.shape, dtype=np.int64)
    cums = np.cumsum(probs, axis=1)
    for a in np.unique(x_idx):
        mask = x_idx == a
        y[mask] = np.searchsorted(cums[a], u[mask], side="right")
    np.minimum(y, probs.shape[1] - 1, out=y)
    return y


def reduce_inputs(channels, M: int):
    """Replace each hop channel by the permutation-codebook restriction of its
    M!-fold power, giving M-input channels with equal pairwise distances.

    Returns (reduced channels, flow_value, ell_factor) where flow_value is
    the bottleneck pairwise Bhattacharyya distance per reduced use (M! times
    the weakest hop's M-message exponent) and ell_factor = M!.
    """
    if M < 2 or M > 4:
        raise MTooLarge(f"input reduction supports 2 <= M <= 4, got {M}")
    ell = math.factorial(M)
    reduced = []
    flow_value = math.inf
    for P in channels:
        cb = berlekamp_codebook(P, M)
        tval = tilde_exponent(P, M).value
        pair_db = ell * tval
        reduced.append(ReducedChannel(base=P, words=cb.words, ell=ell, pair_db=pair_db))
        flow_value = min(flow_value, pair_db)
    return tuple(reduced), float(flow_value), ell


def make_series_spec(channels, M: int, B: int) -> SeriesSpec:
    """Reduce raw hop channels and wrap them in a SeriesSpec.

    ``B`` here counts reduced uses per block (each reduced use spends M!
    raw channel uses).
    """
    reduced, flow_value, _ = reduce_inputs(channels, M)
    return SeriesSpec(channels=reduced, M=M, B=B, flow_value=flow_value)


def run_series_blocks_batch(spec: SeriesSpec, m: int, n_blocks: int, rng) -> np.ndarray:
    """Vectorized sequential block transmissions: n_blocks independent runs.

    Returns the destination's raw base-symbol blocks, shape
    (n_blocks, B * ell_of_final_hop).  Nodes hold no state across blocks.
    """
    if not 1 <= m <= spec.M:
        raise BoundsViolation(f"message {m} outside 1..{spec.M}")
    table = _codeword_table(spec.M, spec.B)
    half = spec.B // 2
    m_idx = np.full(n_blocks, m - 1, dtype=np.int64)
    ell = np.full(n_blocks, half, dtype=np.int64)
    y = None
    for hop, chan in enumerate(spec.channels):
        base, words = _hop_view(chan, spec.M)
        sent = table[m_idx, ell]
        sent_base = words[sent].reshape(n_blocks, -1)
        y = _sample_symbols(base.probs, sent_base, rng)
        if hop < len(spec.channels) - 1:
            la = _symbol_logliks(base.log_probs, words, y, spec.B)
            ll = _state_logliks(la, spec.B)
            msg_ll = _uniform_message_loglik(ll)
            m_idx, ell = _states_from_loglik(msg_ll, spec.flow_value, half)
    return y


def run_series_block(spec: SeriesSpec, m: int, rng) -> Transcript:
    """One sequential block transmission with a full per-hop transcript.

    The source starts at full confidence (m, B/2); each relay applies the
    uniform-prior state update.  Deterministic given the rng state.
    """
    if not 1 <= m <= spec.M:
        raise BoundsViolation(f"message {m} outside 1..{spec.M}")
    table = _codeword_table(spec.M, spec.B)
    half = spec.B // 2
    state = NodeState(m=m, ell=half)
    hops = []
    y = None
    for chan in spec.channels:
        base, words = _hop_view(chan, spec.M)
        sent = table[state.m - 1, state.ell][None, :]
        sent_base = words[sent].reshape(1, -1)
        y = _sample_symbols(base.probs, sent_base, rng)
        la = _symbol_logliks(base.log_probs, words, y, spec.B)
        ll = _state_logliks(la, spec.B)
        msg_ll = _uniform_message_loglik(ll)
        m_idx, ell_arr = _states_from_loglik(msg_ll, spec.flow_value, half)
        state = NodeState(m=int(m_idx[0]) + 1, ell=int(ell_arr[0]))
        hops.append(
            HopRecord(
                sent=tuple(int(s) + 1 for s in sent[0]),
                received=tuple(int(v) for v in y[0]),
                state=state,
            )
        )
    return Transcript(hops=tuple(hops), final_block=tuple(int(v) for v in y[0]))


@dataclass(frozen=True)
class ForwardTrace:
    """Exact protocol law on a chain: per-node state occupancies given each
    source message, and per-hop block log distributions."""

    occupancies: tuple
    block_logdists: tuple
    out_sizes: tuple
    spec: SeriesSpec
    update_mode: str


def _enumerate_blocks(out_size: int, B: int) -> np.ndarray:
    count = out_size**B
    digits = np.stack(np.unravel_index(np.arange(count), (out_size,) * B), axis=1)
    return digits.astype(np.int64)


def series_forward_trace(spec: SeriesSpec, update_mode: str = "uniform") -> ForwardTrace:
    """Exact forward pass: enumerate every hop's block alphabet, map blocks to
    states deterministically, and propagate state occupancies.

    ``update_mode='uniform'`` mirrors the sampled protocol; ``'exact'`` lets
    each node weight hypothesis likelihoods by the true predecessor state
    occupancies (computable without data since the protocol is known).
    """
    if update_mode not in ("uniform", "exact"):
        raise ParameterOutOfRange(f"unknown update mode {update_mode!r}")
    M, B = spec.M, spec.B
    half = B // 2
    n_states = M * (half + 1)
    table = _codeword_table(M, B)

    occ = np.zeros((M, n_states))
    for m_idx in range(M):
        occ[m_idx, m_idx * (half + 1) + half] = 1.0
    occupancies = [occ]
    block_logdists = []
    out_sizes = []

    for chan in spec.channels:
        Q = _as_dmc(chan)
        if Q.output_size**B > EXACT_BLOCK_GUARD:
            raise StateSpaceTooLarge(
                f"{Q.output_size}^{B} block outcomes exceed the exact-enumeration guard"
            )
        blocks = _enumerate_blocks(Q.output_size, B)
        la = _symbol_logliks(Q.log_probs, np.arange(M, dtype=np.int64)[:, None], blocks, B)
        ll = _state_logliks(la, B)  # (K, M, half+1)
        flat = ll.reshape(ll.shape[0], n_states)
        prev = occupancies[-1]
        with np.errstate(divide="ignore"):
            logocc = np.log(prev)
        ld = np.empty((M, flat.shape[0]))
        for m_idx in range(M):
            ld[m_idx] = logsumexp(flat + logocc[m_idx][None, :], axis=1)
        if update_mode == "uniform":
            msg_ll = _uniform_message_loglik(ll)
        else:
            msg_ll = ld.T
        midx, ell = _states_from_loglik(msg_ll, spec.flow_value, half)
        sidx = midx * (half + 1) + ell
        nxt = np.zeros((M, n_states))
        for m_idx in range(M):
            nxt[m_idx] = np.bincount(sidx, weights=np.exp(ld[m_idx]), minlength=n_states)
        occupancies.append(nxt)
        block_logdists.append(ld)
        out_sizes.append(Q.output_size)

    return ForwardTrace(
        occupancies=tuple(occupancies),
        block_logdists=tuple(block_logdists),
        out_sizes=tuple(out_sizes),
        spec=spec,
        update_mode=update_mode,
    )


def exact_block_distribution(spec: SeriesSpec, update_mode: str = "uniform") -> CompositeDistribution:
    """Exact per-message distribution of the destination's block."""
    trace = series_forward_trace(spec, update_mode=update_mode)
    final = spec.channels[-1]
    base = final.base if isinstance(final, ReducedChannel) else final
    ell = final.ell if isinstance(final, ReducedChannel) else 1
    return CompositeDistribution(
        log_dists=trace.block_logdists[-1],
        base_output_size=base.output_size,
        block_symbols=spec.B * ell,
    )


def composite_db(cd: CompositeDistribution, m1: int, m2: int) -> float:
    """Bhattacharyya distance between two messages' exact block distributions."""
    l1 = cd.log_dists[m1 - 1]
    l2 = cd.log_dists[m2 - 1]
    mask = np.isfinite(l1) & np.isfinite(l2)
    if not mask.any():
        return math.inf
    return max(-float(logsumexp(0.5 * (l1[mask] + l2[mask]))), 0.0)


def min_pairwise_composite_db(cd: CompositeDistribution) -> float:
    M = cd.log_dists.shape[0]
    return min(composite_db(cd, a + 1, b + 1) for a in range(M) for b in range(a + 1, M))


def ml_error_probs(cd: CompositeDistribution) -> np.ndarray:
    """Exact maximum-likelihood error probability per message (ties to the
    lowest index), decoding a single block."""
    ld = cd.log_dists
    M = ld.shape[0]
    decisions = np.argmax(ld, axis=0)
    errs = np.empty(M)
    for m_idx in range(M):
        wrong = decisions != m_idx
        errs[m_idx] = float(np.exp(ld[m_idx][wrong]).sum()) if wrong.any() else 0.0
    return errs


@dataclass(frozen=True)
class TransitionReport:
    """Slack audit of the state-occupancy and block-divergence inequalities."""

    all_hold: bool
    min_slack_occupancy: float
    min_slack_divergence: float
    details: tuple


def verify_transition_bound(spec: SeriesSpec) -> TransitionReport:
    """Check, by exact enumeration, that every reachable state's probability
    decays with its distance from the source state, and that per-hop block
    divergences stay above the chained lower bound.

    Both checks use the exact-occupancy update variant.
    """
    trace = series_forward_trace(spec, update_mode="exact")
    M, B = spec.M, spec.B
    half = B // 2
    f = spec.flow_value
    logmb = math.log(M * (B + 1))
    logm1 = math.log(M - 1) if M > 1 else 0.0

    details = []
    min_occ = math.inf
    for j, occ in enumerate(trace.occupancies):
        for m1 in range(1, M + 1):
            for mp in range(1, M + 1):
                for ellp in range(half + 1):
                    p = occ[m1 - 1, (mp - 1) * (half + 1) + ellp]
                    lhs = -math.log(p) if p > 0 else math.inf
                    dist = state_pseudometric(NodeState(m1, half), NodeState(mp, ellp), f)
                    rhs = 2 * dist - 2 * j * logmb - 2 * j * f - j * logm1
                    slack = lhs - rhs
                    details.append(("occupancy", j, m1, (mp, ellp), slack))
                    if math.isfinite(slack):
                        min_occ = min(min_occ, slack)

    min_div = math.inf
    for j, ld in enumerate(trace.block_logdists):
        rhs = B * f - 2 * (j + 1) * logmb - 2 * j * f - j * logm1
        for m1 in range(1, M + 1):
            for m2 in range(m1 + 1, M + 1):
                l1, l2 = ld[m1 - 1], ld[m2 - 1]
                mask = np.isfinite(l1) & np.isfinite(l2)
                lhs = math.inf if not mask.any() else max(
                    -float(logsumexp(0.5 * (l1[mask] + l2[mask]))), 0.0
                )
                slack = lhs - rhs
                details.append(("divergence", j, m1, m2, slack))
                if math.isfinite(slack):
                    min_div = min(min_div, slack)

    all_hold = (min_occ >= -1e-9 or math.isinf(min_occ)) and (
        min_div >= -1e-9 or math.isinf(min_div)
    )
    return TransitionReport(
        all_hold=all_hold,
        min_slack_occupancy=min_occ,
        min_slack_divergence=min_div,
        details=tuple(details),
    )


@dataclass(frozen=True)
class PathPlan:
    """Schedule for one decomposition path: its reduced chain and budgets."""

    index: int
    nodes: tuple
    edge_ids: tuple
    edge_budgets: tuple
    spec: SeriesSpec
    ell_factor: int
    flow_share: float


@dataclass(frozen=True)
class NetworkPlan:
    """Per-path schedules derived from the tilde-weighted flow decomposition.

    ``window`` is the number of time steps one block round occupies; path i
    uses at most its per-edge budget of raw channel uses inside each window.
    """

    M: int
    B: int
    window: int
    paths: tuple

    def blocks_per_path(self, n: int):
        counts = []
        for p in self.paths:
            t = n // self.window - len(p.edge_ids)
            if t < 1:
                raise HorizonTooShort(
                    f"horizon {n} too short: path {p.index} needs at least "
                    f"{(len(p.edge_ids) + 1) * self.window} steps"
                )
            counts.append(t)
        return counts


def build_network_plan(G: ChannelGraph, M: int, B: int) -> NetworkPlan:
    """Decompose the tilde-weighted maxflow into paths and allocate each path
    its per-edge sub-blocks.

    Every path runs the chain protocol over its reduced channels with an even
    per-path block size floor(min edge budget / M!); a window stretches past B
    only when shared edges make the ceilinged budgets overflow it.
    """
    if B % 2 != 0 or B < 2:
        raise ParameterOutOfRange("block size must be even and at least 2")
    net = weighted_network(G, "tilde", M)
    fl = maxflow(net)
    if fl.total <= 0:
        raise ParameterOutOfRange("graph maxflow is zero; no information can cross")
    dec = decompose(net, fl)
    k = len(dec.paths)
    if B < k:
        raise BTooSmall(f"need B >= number of paths ({k}), got {B}")
    budgets, users = path_edge_budgets(dec, B)
    window = B
    for eid, idxs in users.items():
        window = max(window, sum(budgets[(i, eid)] for i in idxs))

    chan_by_id = {}
    for g_edge in G.edges:
        chan_by_id[g_edge.id] = g_edge.channel

    paths = []
    for i, p in enumerate(dec.paths):
        raw_budget = min(budgets[(i, eid)] for eid in p.edge_ids)
        channels = [chan_by_id[eid] for eid in p.edge_ids]
        reduced, flow_value, ell = reduce_inputs(channels, M)
        b_red = (raw_budget // ell) // 2 * 2
        if b_red < 2:
            raise BTooSmall(
                f"path {i} gets only {raw_budget} uses per window; needs at least {2 * ell}"
            )
        spec = SeriesSpec(channels=reduced, M=M, B=b_red, flow_value=flow_value)
        paths.append(
            PathPlan(
                index=i,
                nodes=p.nodes,
                edge_ids=p.edge_ids,
                edge_budgets=tuple(budgets[(i, eid)] for eid in p.edge_ids),
                spec=spec,
                ell_factor=ell,
                flow_share=p.value,
            )
        )
    return NetworkPlan(M=M, B=B, window=window, paths=tuple(paths))


@dataclass(frozen=True)
class NetworkRun:
    """Destination observations from one protocol run: per path, the raw
    base-symbol blocks in transmission order."""

    plan: NetworkPlan
    horizon: int
    message: int
    path_blocks: tuple


def run_network_protocol(G: ChannelGraph, M: int, B: int, n: int, m: int, rng) -> NetworkRun:
    """Run the multipath protocol for one trial.

    Information flows along each decomposition path independently (fresh
    state every block, disjoint rng substreams per path and block) and is
    aggregated only by the destination's decoder.
    """
    plan = build_network_plan(G, M, B)
    return run_planned_protocol(plan, n, m, rng)


def run_planned_protocol(plan: NetworkPlan, n: int, m: int, rng) -> NetworkRun:
    counts = plan.blocks_per_path(n)
    streams = rng.spawn(sum(counts))
    pos = 0
    path_blocks = []
    for p, t in zip(plan.paths, counts):
        blocks = []
        for _ in range(t):
            blocks.append(run_series_blocks_batch(p.spec, m, 1, streams[pos])[0])
            pos += 1
        path_blocks.append(np.stack(blocks))
    return NetworkRun(plan=plan, horizon=n, message=m, path_blocks=tuple(path_blocks))


def _encode_blocks(blocks: np.ndarray, base_out: int) -> np.ndarray:
    """Row-major digit index of each base-symbol block."""
    idx = np.zeros(blocks.shape[0], dtype=np.int64)
    for t in range(blocks.shape[1]):
        idx = idx * base_out + blocks[:, t]
    return idx


def block_scores_ml(blocks: np.ndarray, cd: CompositeDistribution) -> np.ndarray:
    """Per-block exact log-likelihood scores, shape (n_blocks, M)."""
    if blocks.shape[1] != cd.block_symbols:
        raise DistributionUnavailable(
            f"block length {blocks.shape[1]} does not match the distribution ({cd.block_symbols})"
        )
    idx = _encode_blocks(blocks, cd.base_output_size)
    return cd.log_dists[:, idx].T


def block_scores_heuristic(blocks: np.ndarray, final_channel, M: int, B: int) -> np.ndarray:
    """Per-block scores under the final hop's codeword family: for each
    message, the best log-likelihood over the sender's confidence levels."""
    base, words = _hop_view(final_channel, M)
    la = _symbol_logliks(base.log_probs, words, blocks, B)
    ll = _state_logliks(la, B)
    return ll.max(axis=2)


def decode_ml_exact(run: NetworkRun, dists) -> int:
    """Exact ML message estimate: sum per-path, per-block log-likelihoods."""
    total = np.zeros(run.plan.M)
    for blocks, cd in zip(run.path_blocks, dists):
        if cd is None:
            raise DistributionUnavailable("missing exact distribution for a path")
        total += block_scores_ml(blocks, cd).sum(axis=0)
    return int(np.argmax(total)) + 1


def decode_heuristic(run: NetworkRun, specs=None) -> int:
    """Scalable surrogate decoder scoring blocks against the final hop's
    codeword family (no exponent guarantee)."""
    total = np.zeros(run.plan.M)
    for p, blocks in zip(run.plan.paths, run.path_blocks):
        spec = p.spec
        total += block_scores_heuristic(blocks, spec.channels[-1], spec.M, spec.B).sum(axis=0)
    return int(np.argmax(total)) + 1
