"""Discrete memoryless channels and their divergence calculus.

A channel is a row-stochastic matrix P(y|x) stored alongside its natural
logs (with ln 0 = -inf), so that every divergence can be accumulated in the
log domain.  All values are in nats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlphabetTooLarge,
    DimensionMismatch,
    IndexOutOfRange,
    LengthMismatch,
    NegativeEntry,
    NonStochasticRow,
    ParameterOutOfRange,
    SOutOfRange,
)

ROW_SUM_TOL = 1e-9
NEG_CLAMP = -1e-15
PRODUCT_GUARD = 10**7

# Invariant: golden-section bracket shrinks to this width; d_C is concave in s
# so the bracket always contains the maximizer.
GOLDEN_TOL = 1e-10


def _lse(v: np.ndarray) -> float:
    """log(sum(exp(v))) for small 1-d arrays; much cheaper than scipy here."""
    mx = v.max()
    if not np.isfinite(mx):
        return float(mx)
    return float(mx + math.log(np.exp(v - mx).sum()))


@dataclass(frozen=True)
class Dmc:
    """Finite channel: ``probs[x, y] = P(y | x)``, rows sum to one.

    ``log_probs`` caches entrywise natural logs, -inf where the entry is 0.
    Instances are immutable; build them through :func:`make_dmc` or the
    named constructors below.
    """

    probs: np.ndarray
    log_probs: np.ndarray
    label: str | None = None

    @property
    def input_size(self) -> int:
        return self.probs.shape[0]

    @property
    def output_size(self) -> int:
        return self.probs.shape[1]

    def row(self, x: int) -> np.ndarray:
        self.check_input(x)
        return self.probs[x]

    def check_input(self, x: int) -> None:
        if not 0 <= x < self.input_size:
            raise IndexOutOfRange(f"input index {x} outside [0, {self.input_size})")

    def __repr__(self) -> str:
        name = self.label or "dmc"
        return f"<Dmc {name} {self.input_size}x{self.output_size}>"


@dataclass(frozen=True)
class DivergenceResult:
    """Optimized Chernoff divergence: value in nats plus the maximizing s."""

    value: float
    argmax_s: float = 0.5


def make_dmc(probs, label: str | None = None) -> Dmc:
    """Validate and normalize a transition matrix into a `Dmc`.

    Entries in [-1e-15, 0) are clamped to 0 (serialization round-trip noise);
    anything more negative raises NegativeEntry.  Row sums must be within
    1e-9 of 1; rows are then renormalized exactly.
    """
    arr = np.array(probs, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {arr.shape}")
    if np.any(arr < NEG_CLAMP):
        bad = np.argwhere(arr < NEG_CLAMP)[0]
        raise NegativeEntry(f"entry at {tuple(bad)} is negative: {arr[tuple(bad)]}")
    arr = np.where(arr < 0, 0.0, arr)
    sums = arr.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > ROW_SUM_TOL):
        r = int(np.argmax(off))
        raise NonStochasticRow(f"row {r} sums to {sums[r]!r}, expected 1")
    arr = arr / sums[:, None]
    with np.errstate(divide="ignore"):
        logs = np.log(arr)
    arr.flags.writeable = False
    logs.flags.writeable = False
    return Dmc(probs=arr, log_probs=logs, label=label)


def bsc(p: float) -> Dmc:
    """Binary symmetric channel with crossover probability p in (0, 1/2)."""
    if not 0 < p < 0.5:
        raise ParameterOutOfRange(f"bsc requires p in (0, 1/2), got {p}")
    return make_dmc([[1 - p, p], [p, 1 - p]], label=f"bsc({p:g})")


def bec(p: float) -> Dmc:
    """Binary erasure channel; outputs are (0, 1, erasure)."""
    if not 0 < p < 1:
        raise ParameterOutOfRange(f"bec requires p in (0, 1), got {p}")
    return make_dmc([[1 - p, 0.0, p], [0.0, 1 - p, p]], label=f"bec({p:g})")


def ksym(K: int, p: float) -> Dmc:
    """K-ary symmetric channel: P(y|x) = 1-(K-1)p if y=x, else p."""
    if K < 2:
        raise ParameterOutOfRange(f"ksym requires K >= 2, got {K}")
    if not 0 < p < 1 / (K - 1):
        raise ParameterOutOfRange(f"ksym requires p in (0, 1/{K - 1}), got {p}")
    mat = np.full((K, K), p)
    np.fill_diagonal(mat, 1 - (K - 1) * p)
    return make_dmc(mat, label=f"ksym({K},{p:g})")


def identity_channel(K: int) -> Dmc:
    """Noiseless K-ary channel (identity matrix)."""
    if K < 1:
        raise ParameterOutOfRange(f"identity requires K >= 1, got {K}")
    return make_dmc(np.eye(K), label=f"identity({K})")


def bhattacharyya(P: Dmc, x: int, xp: int) -> float:
    """Bhattacharyya distance between input rows: -log sum_y sqrt(P(y|x)P(y|x')).

    Returns +inf when the rows have disjoint support.  Accumulated via
    log-sum-exp over the common support.
    """
    P.check_input(x)
    P.check_input(xp)
    lx, ly = P.log_probs[x], P.log_probs[xp]
    mask = np.isfinite(lx) & np.isfinite(ly)
    if not mask.any():
        return math.inf
    val = -_lse(0.5 * (lx[mask] + ly[mask]))
    return val if val > 1e-12 else 0.0


def chernoff_at(P: Dmc, x: int, xp: int, s: float) -> float:
    """Chernoff divergence at parameter s: -log sum_y P(y|x)^(1-s) P(y|x')^s.

    Uses the convention 0^0 = 0 inside the sum, so the endpoint values are
    the one-sided limits (at s=0 the sum runs over supp(P_x') of P(y|x)).
    """
    P.check_input(x)
    P.check_input(xp)
    if not 0.0 <= s <= 1.0:
        raise SOutOfRange(f"s must lie in [0, 1], got {s}")
    lx, ly = P.log_probs[x], P.log_probs[xp]
    mask = np.isfinite(lx) & np.isfinite(ly)
    if not mask.any():
        return math.inf
    val = -_lse((1.0 - s) * lx[mask] + s * ly[mask])
    return val if val > 1e-12 else 0.0


def chernoff(P: Dmc, x: int, xp: int) -> DivergenceResult:
    """Chernoff divergence with optimized s, via golden-section search.

    d_C(s) is concave in s, so a golden-section search on [0, 1] converges;
    the midpoint and both endpoints are probed as well so pairwise-reversible
    channels return value equal to the Bhattacharyya distance exactly.
    """
    P.check_input(x)
    P.check_input(xp)
    lx, ly = P.log_probs[x], P.log_probs[xp]
    mask = np.isfinite(lx) & np.isfinite(ly)
    if not mask.any():
        return DivergenceResult(value=math.inf, argmax_s=0.5)

    la = lx[mask]
    lb = ly[mask]

    def f(s: float) -> float:
        val = -_lse((1.0 - s) * la + s * lb)
        return val if val > 1e-12 else 0.0

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, 1.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > GOLDEN_TOL:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    s_star = 0.5 * (a + b)

    # Probe order fixes tie-breaking: prefer s=1/2, then the interior optimum.
    candidates = [(f(0.5), 0.5), (f(s_star), s_star), (f(0.0), 0.0), (f(1.0), 1.0)]
    best_val, best_s = candidates[0]
    for val, s in candidates[1:]:
        if val > best_val + 1e-13:
            best_val, best_s = val, s
    return DivergenceResult(value=best_val, argmax_s=best_s)


def is_pairwise_reversible(P: Dmc, tol: float = 1e-7):
    """Check whether every input pair's Chernoff optimum is attained at s=1/2.

    Returns ``(flag, witness)``; witness is ``(x, x', s*)`` for the first
    violating pair when the flag is False, else None.
    """
    if tol <= 0:
        raise ParameterOutOfRange(f"tol must be positive, got {tol}")
    for x in range(P.input_size):
        for xp in range(x + 1, P.input_size):
            mid = chernoff_at(P, x, xp, 0.5)
            opt = chernoff(P, x, xp)
            if math.isinf(opt.value) and math.isinf(mid):
                continue
            if opt.value > mid + tol:
                return False, (x, xp, opt.argmax_s)
    return True, None


def product(P: Dmc, Q: Dmc) -> Dmc:
    """Product channel on the Cartesian alphabets, first factor varying slowest."""
    if P.input_size * Q.input_size > PRODUCT_GUARD or P.output_size * Q.output_size > PRODUCT_GUARD:
        raise AlphabetTooLarge("product alphabet exceeds the 1e7 guard")
    return make_dmc(np.kron(P.probs, Q.probs))


def power(P: Dmc, k: int) -> Dmc:
    """k-fold product of P with itself."""
    if k < 1:
        raise ParameterOutOfRange(f"power requires k >= 1, got {k}")
    if P.output_size**k > PRODUCT_GUARD or P.input_size**k > PRODUCT_GUARD:
        raise AlphabetTooLarge(f"alphabet size {P.output_size}^{k} exceeds the 1e7 guard")
    out = P
    for _ in range(k - 1):
        out = product(out, P)
    return out


def product_row(P: Dmc, word) -> np.ndarray:
    """Row of the len(word)-fold power of P at the given input sequence."""
    row = np.ones(1)
    for sym in word:
        P.check_input(int(sym))
        row = np.kron(row, P.probs[int(sym)])
    return row


def restrict(P: Dmc, codewords) -> Dmc:
    """Restriction of P^ell to a list of equal-length input sequences.

    The result has one input per codeword; its rows are the product-channel
    rows of the codewords, so divergences between codewords are preserved.
    """
    words = [tuple(int(s) for s in w) for w in codewords]
    if not words:
        raise LengthMismatch("need at least one codeword")
    ell = len(words[0])
    if any(len(w) != ell for w in words):
        raise LengthMismatch("codewords must all have the same length")
    if ell < 1:
        raise LengthMismatch("codewords must be non-empty")
    if P.output_size**ell > PRODUCT_GUARD:
        raise AlphabetTooLarge(f"output alphabet {P.output_size}^{ell} exceeds the 1e7 guard")
    rows = np.stack([product_row(P, w) for w in words])
    return Dmc_from_rows(rows)


def Dmc_from_rows(rows: np.ndarray, label: str | None = None) -> Dmc:
    return make_dmc(rows, label=label)


def compose(P1: Dmc, P2: Dmc) -> Dmc:
    """Composite channel feeding P1's output into P2: matrix product."""
    if P1.output_size != P2.input_size:
        raise DimensionMismatch(
            f"compose needs P1.output_size == P2.input_size, got {P1.output_size} vs {P2.input_size}"
        )
    return make_dmc(P1.probs @ P2.probs)


def channel_from_obj(obj) -> Dmc:
    """Build a channel from its serialized form.

    Accepted objects: {"kind":"bsc","p":r}, {"kind":"bec","p":r},
    {"kind":"ksym","k":int,"p":r}, {"kind":"matrix","rows":[[...],...]}.
    """
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParameterOutOfRange(f"channel object must be a dict with a 'kind': {obj!r}")
    kind = obj["kind"]
    if kind == "bsc":
        return bsc(float(obj["p"]))
    if kind == "bec":
        return bec(float(obj["p"]))
    if kind == "ksym":
        return ksym(int(obj["k"]), float(obj["p"]))
    if kind == "matrix":
        return make_dmc(obj["rows"])
    raise ParameterOutOfRange(f"unknown channel kind {kind!r}")


def channel_to_obj(P: Dmc) -> dict:
    """Serialize a channel; named constructors keep their compact form."""
    label = P.label or ""
    if label.startswith("bsc("):
        return {"kind": "bsc", "p": float(label[4:-1])}
    if label.startswith("bec("):
        return {"kind": "bec", "p": float(label[4:-1])}
    if label.startswith("ksym("):
        k_str, p_str = label[5:-1].split(",")
        return {"kind": "ksym", "k": int(k_str), "p": float(p_str)}
    return {"kind": "matrix", "rows": [[float(v) for v in row] for row in P.probs]}
