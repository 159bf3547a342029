"""Finite-n microcanonical ensemble: counting, Wang-Landau and sampling.

Graphs are labelled (no isomorphism reduction).  The density of states is
the table of counts of graphs on n labelled vertices with E edges and T
triangles.  Windows are open intervals in the normalized densities
E / C(n, 2) and T / C(n, 3).
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numba as nb
import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, EmptyWindowError, ResourceError
from .graphon import StepGraphon
from .graphs import SimpleGraph

__all__ = [
    "DensityOfStates",
    "WLConfig",
    "exact_enumerate",
    "wang_landau",
    "entropy_finite",
    "window_bounds",
    "sample_constrained",
    "write_dos_csv",
    "read_dos_csv",
    "EXACT_MAX_N",
    "WL_MAX_N",
]

EXACT_MAX_N = 7
WL_MAX_N = 64
# dense (E, T) lattices larger than this are refused
WL_MAX_BINS = 20_000_000


@dataclass
class DensityOfStates:
    """ln-counts of labelled graphs on ``n`` vertices by (edges, triangles).

    ``table`` maps ``(E, T)`` to ``ln_count`` for occupied bins only.
    ``counts`` holds the exact integer counts when ``exact`` is true.
    ``meta`` carries provenance (seed, schedule, partial flag, ...).
    """

    n: int
    table: dict
    exact: bool
    counts: dict | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ne, nt = comb(self.n, 2), comb(self.n, 3)
        for (E, T) in self.table:
            if not (0 <= E <= ne and 0 <= T <= nt):
                raise DomainError(f"bin ({E}, {T}) outside the lattice for n={self.n}")

    @property
    def partial(self) -> bool:
        return bool(self.meta.get("partial", False))

    def ln_total(self) -> float:
        return float(logsumexp(list(self.table.values())))

    def edge_marginal(self) -> dict:
        """Counts by edge number (integers when exact, else exp of ln-counts)."""
        out: dict = {}
        if self.exact and self.counts is not None:
            for (E, _), c in self.counts.items():
                out[E] = out.get(E, 0) + c
            return out
        for (E, _), v in self.table.items():
            out[E] = out.get(E, 0.0) + math.exp(v)
        return out

    def as_arrays(self):
        keys = sorted(self.table)
        E = np.array([k[0] for k in keys], dtype=np.int64)
        T = np.array([k[1] for k in keys], dtype=np.int64)
        v = np.array([self.table[k] for k in keys])
        return E, T, v


# -- bit helpers ------------------------------------------------------------------


@nb.njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


# -- exact enumeration ------------------------------------------------------------


@nb.njit(cache=True)
def _enumerate_kernel(n, counts):
    npairs = n * (n - 1) // 2
    pi = np.empty(npairs, np.int64)
    pj = np.empty(npairs, np.int64)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            pi[k] = i
            pj[k] = j
            k += 1
    nbr = np.zeros(n, np.uint64)
    E = 0
    T = 0
    counts[0, 0] += 1
    one = np.uint64(1)
    # Gray code: step k toggles the edge indexed by the lowest set bit of k
    for code in range(1, 1 << npairs):
        b = 0
        while (code >> b) & 1 == 0:
            b += 1
        i = pi[b]
        j = pj[b]
        common = np.int64(_popcount(nbr[i] & nbr[j]))
        if (nbr[i] >> np.uint64(j)) & one:
            E -= 1
            T -= common
        else:
            E += 1
            T += common
        nbr[i] ^= one << np.uint64(j)
        nbr[j] ^= one << np.uint64(i)
        counts[E, T] += 1


def exact_enumerate(n: int, force: bool = False) -> DensityOfStates:
    """Exact counts of labelled graphs on ``n`` vertices by (E, T).

    Walks all ``2^C(n,2)`` graphs in Gray-code order, updating the triangle
    count from common neighbours.  ``n <= 7`` is allowed; ``n = 8``
    (2^28 graphs) needs ``force=True``.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be positive")
    if n > EXACT_MAX_N + 1 or (n == EXACT_MAX_N + 1 and not force):
        raise ResourceError(
            f"exact enumeration is limited to n <= {EXACT_MAX_N} (n = 8 needs force)"
        )
    counts = np.zeros((comb(n, 2) + 1, comb(n, 3) + 1), dtype=np.int64)
    _enumerate_kernel(n, counts)
    nz = np.argwhere(counts > 0)
    c = {(int(E), int(T)): int(counts[E, T]) for E, T in nz}
    total = sum(c.values())
    if total != 2 ** comb(n, 2):
        raise AssertionError("enumeration lost graphs")
    table = {k: math.log(v) for k, v in c.items()}
    return DensityOfStates(n, table, True, c, {"method": "exact"})


# -- Wang-Landau ------------------------------------------------------------------


@dataclass(frozen=True)
class WLConfig:
    """Wang-Landau schedule.

    ``ln f`` starts at ``ln_f0`` and is multiplied by ``reduction`` each
    time the histogram is flat (min >= ``flatness`` * mean over discovered
    bins), down to ``ln_f_final``.  ``max_steps`` bounds each walker; when
    it runs out first the result is flagged partial.  ``window`` optionally
    restricts the walk to ``((e_lo, e_hi), (t_lo, t_hi))`` (open).
    """

    seed: int = 0
    ln_f0: float = 1.0
    reduction: float = 0.5
    flatness: float = 0.8
    ln_f_final: float = 1e-6
    max_steps: int = 2_000_000_000
    check_every: int = 100_000
    recount_every: int = 1_000_000
    walkers: int = 4
    window: tuple | None = None
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.flatness < 1.0:
            raise DomainError("flatness must lie in (0, 1)")
        if not 0.0 < self.reduction < 1.0:
            raise DomainError("reduction must lie in (0, 1) so ln f decreases")
        if not 0.0 < self.ln_f_final < self.ln_f0:
            raise DomainError("need 0 < ln_f_final < ln_f0")
        if self.walkers < 1 or self.threads < 1:
            raise DomainError("walkers and threads must be positive")
        if self.check_every < 1 or self.max_steps < 1 or self.recount_every < 1:
            raise DomainError("step counts must be positive")


@nb.njit(cache=True)
def _count_from_bits(nbr, n):
    E = 0
    T = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (nbr[i] >> np.uint64(j)) & np.uint64(1):
                E += 1
                T += np.int64(_popcount(nbr[i] & nbr[j]))
    return E, T // 3


@nb.njit(cache=True, nogil=True)
def _wl_kernel(
    n, nbr, lng, hist, seen, ln_f, ln_f_final, reduction, flatness,
    check_every, max_steps, recount_every, seed, emin, emax, tmin, tmax,
):
    np.random.seed(seed)
    one = np.uint64(1)
    E, T = _count_from_bits(nbr, n)
    steps = 0
    since_recount = 0
    while ln_f > ln_f_final and steps < max_steps:
        new_bin = False
        for _ in range(check_every):
            i = np.random.randint(n)
            j = np.random.randint(n - 1)
            if j >= i:
                j += 1
            common = np.int64(_popcount(nbr[i] & nbr[j]))
            if (nbr[i] >> np.uint64(j)) & one:
                E2 = E - 1
                T2 = T - common
            else:
                E2 = E + 1
                T2 = T + common
            if emin <= E2 <= emax and tmin <= T2 <= tmax:
                d = lng[E, T] - lng[E2, T2]
                if d >= 0.0 or np.random.random() < math.exp(d):
                    nbr[i] ^= one << np.uint64(j)
                    nbr[j] ^= one << np.uint64(i)
                    E = E2
                    T = T2
            lng[E, T] += ln_f
            hist[E, T] += 1
            if not seen[E, T]:
                seen[E, T] = True
                new_bin = True
            steps += 1
            since_recount += 1
            if since_recount >= recount_every:
                # drift guard: integer updates cannot drift, but a bad move
                # table would show up here
                E, T = _count_from_bits(nbr, n)
                since_recount = 0
        if new_bin:
            hist[:, :] = 0
            continue
        hmin = np.inf
        hsum = 0.0
        cnt = 0
        for a in range(hist.shape[0]):
            for b in range(hist.shape[1]):
                if seen[a, b]:
                    v = hist[a, b]
                    hsum += v
                    cnt += 1
                    if v < hmin:
                        hmin = v
        if cnt > 0 and hmin >= flatness * hsum / cnt:
            ln_f *= reduction
            hist[:, :] = 0
    return ln_f, steps


def window_bounds(n: int, e: float, t: float, delta: float):
    """Integer (E, T) ranges (inclusive) of the open window around (e, t)."""
    ne, nt = comb(n, 2), comb(n, 3)
    elo, ehi = _open_range(e - delta, e + delta, ne)
    tlo, thi = _open_range(t - delta, t + delta, nt)
    return elo, ehi, tlo, thi


def _open_range(lo, hi, N):
    """Integers k in [0, N] with lo < k / N < hi (N = 0 means k = 0 only)."""
    if N == 0:
        return (0, 0) if lo < 0.0 < hi else (1, 0)
    ks = np.arange(N + 1)
    ok = (ks / N > lo) & (ks / N < hi)
    if not ok.any():
        return 1, 0
    idx = np.nonzero(ok)[0]
    return int(idx[0]), int(idx[-1])


def _walker_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0] & 0x7FFFFFFF)


def wang_landau(n: int, config: WLConfig | None = None) -> DensityOfStates:
    """Flat-histogram estimate of the ln density of states over (E, T).

    Single-edge toggles with common-neighbour triangle updates; bins are
    discovered on the fly.  Several walkers (distinct seeds) are averaged
    bin-wise after normalization.  Without a window the result is
    normalized so that the counts sum to ``2^C(n,2)``.
    """
    cfg = config or WLConfig()
    n = int(n)
    if not 3 <= n <= WL_MAX_N:
        raise DomainError(f"wang_landau needs 3 <= n <= {WL_MAX_N}")
    ne, nt = comb(n, 2), comb(n, 3)
    if cfg.window is None:
        emin, emax, tmin, tmax = 0, ne, 0, nt
    else:
        (e_lo, e_hi), (t_lo, t_hi) = cfg.window
        emin, emax = _open_range(e_lo, e_hi, ne)
        tmin, tmax = _open_range(t_lo, t_hi, nt)
        if emin > emax or tmin > tmax:
            raise EmptyWindowError("Wang-Landau window contains no lattice point")
    shape = (emax + 1, tmax + 1)
    if shape[0] * shape[1] > WL_MAX_BINS:
        raise ResourceError(f"(E, T) lattice of {shape[0] * shape[1]} bins is too large")

    def run(k):
        if cfg.window is None:
            nbr = np.zeros(n, np.uint64)
        else:
            e0 = (emin + emax) / (2 * ne)
            t0 = (tmin + tmax) / (2 * nt) if nt else 0.0
            G = _window_start(n, e0, t0, (emin, emax, tmin, tmax), StepGraphon.constant(e0),
                              np.random.default_rng([cfg.seed, k]))
            nbr = _to_bits(G.adjacency)
        lng = np.zeros(shape)
        hist = np.zeros(shape)
        seen = np.zeros(shape, dtype=np.bool_)
        ln_f, steps = _wl_kernel(
            n, nbr, lng, hist, seen, cfg.ln_f0, cfg.ln_f_final, cfg.reduction,
            cfg.flatness, cfg.check_every, cfg.max_steps, cfg.recount_every,
            _walker_seed(cfg.seed, k), emin, emax, tmin, tmax,
        )
        return lng, seen, ln_f, steps

    if cfg.threads > 1 and cfg.walkers > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            runs = list(ex.map(run, range(cfg.walkers)))
    else:
        runs = [run(k) for k in range(cfg.walkers)]

    norm = ne * math.log(2.0) if cfg.window is None else 0.0
    acc = np.zeros(shape)
    cnt = np.zeros(shape)
    partial = False
    for lng, seen, ln_f, steps in runs:
        partial |= ln_f > cfg.ln_f_final
        v = lng[seen]
        lng = lng - (logsumexp(v) - norm)
        acc[seen] += lng[seen]
        cnt[seen] += 1
    occ = cnt > 0
    avg = np.zeros(shape)
    avg[occ] = acc[occ] / cnt[occ]
    avg[occ] -= logsumexp(avg[occ]) - norm
    table = {(int(E), int(T)): float(avg[E, T]) for E, T in np.argwhere(occ)}
    meta = {
        "method": "wang-landau",
        "seed": cfg.seed,
        "walkers": cfg.walkers,
        "ln_f_final": cfg.ln_f_final,
        "flatness": cfg.flatness,
        "partial": bool(partial),
        "normalized": cfg.window is None,
        "steps": [int(r[3]) for r in runs],
    }
    if partial:
        warnings.warn("Wang-Landau step budget ran out before the final ln f; result is partial")
    return DensityOfStates(n, table, False, None, meta)


# -- finite-n entropy -----------------------------------------------------------------


def entropy_finite(dos: DensityOfStates, e: float, t: float, delta: float) -> float:
    """ln(number of graphs in the open (e, t) window) / n^2.

    Raises
    ------
    EmptyWindowError
        If no lattice point (or no occupied bin) lies in the window.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    n = dos.n
    elo, ehi, tlo, thi = window_bounds(n, e, t, delta)
    if elo > ehi or tlo > thi:
        raise EmptyWindowError(f"window around ({e}, {t}) with delta={delta} has no lattice point for n={n}")
    vals = [v for (E, T), v in dos.table.items() if elo <= E <= ehi and tlo <= T <= thi]
    if not vals:
        raise EmptyWindowError(f"no graphs on {n} vertices in the window around ({e}, {t})")
    if dos.exact and dos.counts is not None:
        tot = sum(c for (E, T), c in dos.counts.items() if elo <= E <= ehi and tlo <= T <= thi)
        return math.log(tot) / n**2
    return float(logsumexp(vals)) / n**2


# -- constrained sampling ---------------------------------------------------------


def _to_bits(adj) -> np.ndarray:
    n = adj.shape[0]
    nbr = np.zeros(n, np.uint64)
    for i in range(n):
        for j in np.nonzero(adj[i])[0]:
            nbr[i] |= np.uint64(1) << np.uint64(j)
    return nbr


def _from_bits(nbr, n) -> SimpleGraph:
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            adj[i, j] = bool((int(nbr[i]) >> j) & 1)
    return SimpleGraph.from_adjacency(adj)


def _violation(E, T, bounds):
    elo, ehi, tlo, thi = bounds
    return max(elo - E, 0, E - ehi) + max(tlo - T, 0, T - thi)


def _window_start(n, e, t, bounds, graphon, rng, max_rounds=None):
    """Threshold ``graphon`` at n vertex positions, then repair greedily into the window."""
    x = (np.arange(n) + 0.5) / n
    P = graphon(x[:, None], x[None, :])
    U = rng.random((n, n))
    U = np.triu(U, 1)
    A = np.triu(U < P, 1)
    A = A | A.T
    ne, nt = comb(n, 2), comb(n, 3)
    max_rounds = max_rounds or 20 * ne
    iu = np.triu_indices(n, 1)
    for _ in range(max_rounds):
        Ai = A.astype(np.int64)
        E = int(Ai.sum()) // 2
        C = Ai @ Ai
        T = int(np.sum(C * Ai)) // 6
        v = _violation(E, T, bounds)
        if v == 0:
            return SimpleGraph.from_adjacency(A)
        present = A[iu]
        common = C[iu]
        dE = np.where(present, -1, 1)
        dT = np.where(present, -common, common)
        elo, ehi, tlo, thi = bounds
        E2, T2 = E + dE, T + dT
        v2 = (np.maximum(np.maximum(elo - E2, 0), E2 - ehi)
              + np.maximum(np.maximum(tlo - T2, 0), T2 - thi))
        best = v2.min()
        if best >= v:
            # no single toggle helps: take a random one that changes E
            k = int(rng.integers(len(dE)))
        else:
            cand = np.nonzero(v2 == best)[0]
            k = int(cand[rng.integers(len(cand))])
        i, j = iu[0][k], iu[1][k]
        A[i, j] = A[j, i] = not A[i, j]
    raise ResourceError("could not find a graph in the window within the repair budget")


@nb.njit(cache=True)
def _chain_kernel(n, nbr, burn_in, thin, n_samples, seed, emin, emax, tmin, tmax, out):
    np.random.seed(seed)
    one = np.uint64(1)
    E, T = _count_from_bits(nbr, n)
    total = burn_in + thin * n_samples
    s = 0
    for step in range(1, total + 1):
        i = np.random.randint(n)
        j = np.random.randint(n - 1)
        if j >= i:
            j += 1
        common = np.int64(_popcount(nbr[i] & nbr[j]))
        if (nbr[i] >> np.uint64(j)) & one:
            E2 = E - 1
            T2 = T - common
        else:
            E2 = E + 1
            T2 = T + common
        if emin <= E2 <= emax and tmin <= T2 <= tmax:
            nbr[i] ^= one << np.uint64(j)
            nbr[j] ^= one << np.uint64(i)
            E = E2
            T = T2
        if step > burn_in and (step - burn_in) % thin == 0:
            out[s, :] = nbr
            s += 1
    return s


def sample_constrained(
    n: int,
    e: float,
    t: float,
    delta: float,
    seed: int = 0,
    burn_in: int = 100_000,
    thin: int = 10_000,
    n_samples: int = 100,
    graphon: StepGraphon | None = None,
) -> list:
    """Uniform samples from the graphs whose densities lie in the open window.

    A Metropolis chain of single-edge toggles that rejects moves leaving the
    window (so the uniform distribution on the window is stationary).  The
    chain starts from ``graphon`` (default: constant ``e``) sampled at ``n``
    evenly spaced points, repaired greedily into the window.

    Raises
    ------
    EmptyWindowError
        If the window has no lattice point.
    ResourceError
        If no starting graph in the window is found.
    """
    n = int(n)
    if not 2 <= n <= WL_MAX_N:
        raise DomainError(f"sampling needs 2 <= n <= {WL_MAX_N}")
    if burn_in < 0 or thin < 1 or n_samples < 0:
        raise DomainError("need burn_in >= 0, thin >= 1, n_samples >= 0")
    bounds = window_bounds(n, e, t, delta)
    if bounds[0] > bounds[1] or bounds[2] > bounds[3]:
        raise EmptyWindowError("sampling window has no lattice point")
    rng = np.random.default_rng([seed, 0])
    G0 = _window_start(n, e, t, bounds, graphon or StepGraphon.constant(min(max(e, 0.0), 1.0)), rng)
    nbr = _to_bits(G0.adjacency)
    out = np.zeros((n_samples, n), dtype=np.uint64)
    got = _chain_kernel(n, nbr, burn_in, thin, n_samples, _walker_seed(seed, 1), *bounds, out)
    return [_from_bits(out[k], n) for k in range(got)]


# -- persistence ------------------------------------------------------------------


def write_dos_csv(dos: DensityOfStates, path_or_buf=None, extra_meta: dict | None = None) -> str:
    """CSV with ``# key: value`` metadata lines, then ``n,E,T,ln_count`` rows."""
    buf = io.StringIO()
    meta = {"n": dos.n, "exact": dos.exact, **dos.meta, **(extra_meta or {})}
    for k in sorted(meta):
        buf.write(f"# {k}: {json.dumps(meta[k], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "E", "T", "ln_count"])
    for (E, T) in sorted(dos.table):
        w.writerow([dos.n, E, T, repr(float(dos.table[(E, T)]))])
    text = buf.getvalue()
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)
    return text


def read_dos_csv(path_or_text) -> DensityOfStates:
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text) as fh:
            text = fh.read()
    meta = {}
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = json.loads(val.strip())
        elif line.strip():
            rows.append(line)
    reader = csv.DictReader(rows)
    table = {}
    n = int(meta.pop("n", 0))
    for r in reader:
        n = int(r["n"])
        table[(int(r["E"]), int(r["T"]))] = float(r["ln_count"])
    exact = bool(meta.pop("exact", False))
    counts = None
    if exact:
        counts = {k: int(round(math.exp(v))) for k, v in table.items()}
    return DensityOfStates(n, table, exact, counts, meta)
