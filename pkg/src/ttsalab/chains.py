"""Finite Markov chains, undirected graphs, and the sampling strategies that drive TTSA.

Samplers come in two speeds. The per-step functions (:func:`srw_next`,
:func:`nbrw_next`, ...) are the readable reference and are what
:meth:`Sampler.next` uses; :meth:`Sampler.stream` hands the same state to the
compiled core and advances it in bulk. All three paths consume the SplitMix64
stream in the same order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import backend
from .rng import SplitMix64, bisect_cdf, shuffle_inplace

logger = logging.getLogger(__name__)

KINDS = ("iid", "single-shuffle", "random-shuffle", "srw", "nbrw", "finite-chain", "controlled-kernel")
_KIND_CODE = {
    "iid": backend.IID,
    "single-shuffle": backend.SHUFFLE,
    "random-shuffle": backend.RANDOM_SHUFFLE,
    "srw": backend.SRW,
    "nbrw": backend.NBRW,
    "finite-chain": backend.CHAIN,
}

DENSE_LIMIT = 500


class ChainError(ValueError):
    """A transition matrix or graph violates a structural requirement."""


class GraphError(ValueError):
    pass


# ---------------------------------------------------------------------------
# finite chains


def _successors(P):
    return [np.flatnonzero(row > 0) for row in P]


def _reachable(succ, start=0):
    seen = np.zeros(len(succ), dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in succ[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


def _strongly_connected(P):
    if P.shape[0] == 1:
        return True
    return bool(_reachable(_successors(P)).all() and _reachable(_successors(P.T)).all())


def _period(P):
    """Period of an irreducible chain: gcd of level[u] + 1 - level[v] over positive edges."""
    succ = _successors(P)
    level = np.full(len(succ), -1)
    level[0] = 0
    queue = [0]
    g = 0
    for u in queue:
        for v in succ[u]:
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = math.gcd(g, int(abs(level[u] + 1 - level[v])))
    return g


class FiniteChain:
    """Row-stochastic transition matrix with its stationary distribution.

    Parameters
    ----------
    P : (m, m) array_like
        Transition matrix.
    pi : (m,) array_like, optional
        Known stationary distribution; computed on first access otherwise.
    require : {"ergodic", "irreducible", "none"}
        Structural check performed at construction. Graph walks on bipartite
        graphs are irreducible but periodic, and the non-backtracking edge chain
        of a cycle is neither, so callers building those relax this.
    observe : (m,) array_like of int, optional
        Map from chain state to the index a sampler would report (for the
        non-backtracking edge chain, the head node of each directed edge).
    """

    def __init__(self, P, pi=None, require="ergodic", observe=None, tol=1e-12):
        P = np.array(P, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise ChainError("transition matrix must be square and non-empty")
        if not np.all(np.isfinite(P)) or (P < 0).any():
            raise ChainError("transition matrix has negative or non-finite entries")
        if np.abs(P.sum(axis=1) - 1.0).max() > tol:
            raise ChainError("transition matrix rows do not sum to 1")
        P.setflags(write=False)
        self.P = P
        self.n_states = P.shape[0]
        self.irreducible = _strongly_connected(P)
        self.period = _period(P) if self.irreducible else None
        if require in ("ergodic", "irreducible") and not self.irreducible:
            raise ChainError("chain is reducible: positive-entry digraph is not strongly connected")
        if require == "ergodic" and self.period != 1:
            raise ChainError(f"chain is periodic with period {self.period}")
        self.observe = np.arange(self.n_states) if observe is None else np.asarray(observe, dtype=np.int64)
        self._pi = None
        if pi is not None:
            pi = np.asarray(pi, dtype=np.float64)
            if pi.shape != (self.n_states,) or abs(pi.sum() - 1.0) > 1e-10 or (pi < 0).any():
                raise ChainError("supplied stationary vector is not a probability vector")
            if np.abs(pi @ P - pi).max() > 1e-10:
                raise ChainError("supplied vector is not stationary for P")
            self._pi = pi
        elif not self.irreducible:
            raise ChainError("reducible chain needs an explicit stationary distribution")

    @property
    def ergodic(self):
        return self.irreducible and self.period == 1

    @property
    def pi(self):
        if self._pi is None:
            self._pi = stationary_distribution(self)
        return self._pi

    def __repr__(self):
        return f"FiniteChain(n_states={self.n_states}, irreducible={self.irreducible}, period={self.period})"


def stationary_distribution(chain):
    """Stationary vector of an irreducible chain.

    Dense LU on ``P^T - I`` with one equation replaced by normalisation for
    small chains, power iteration on the lazy chain ``(I + P)/2`` otherwise.
    """
    if chain._pi is not None:
        return chain._pi
    if not chain.irreducible:
        raise ChainError("chain is reducible: stationary distribution is not unique")
    P = chain.P
    m = chain.n_states
    if m <= DENSE_LIMIT:
        A = P.T - np.eye(m)
        A[-1, :] = 1.0
        rhs = np.zeros(m)
        rhs[-1] = 1.0
        pi = np.linalg.solve(A, rhs)
    else:
        pi = np.full(m, 1.0 / m)
        lazy = 0.5 * (P + np.eye(m))
        for _ in range(1_000_000):
            nxt = pi @ lazy
            if np.abs(nxt - pi).max() < 1e-12:
                pi = nxt
                break
            pi = nxt
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    resid = np.abs(pi @ P - pi).max()
    if resid > 1e-10:
        raise ChainError(f"stationary solve residual {resid:.3g} exceeds 1e-10")
    return pi


@dataclass(frozen=True)
class AugmentedChain:
    """Chain on ordered pairs ``(i, j)`` with ``P(i, j) > 0``."""

    edges: np.ndarray
    chain: FiniteChain

    @property
    def P(self):
        return self.chain.P

    @property
    def pi(self):
        return self.chain.pi


def augment_chain(chain):
    """Lift ``chain`` to consecutive-state pairs; ``pi'(i, j) = pi_i P(i, j)``."""
    P = chain.P
    edges = np.argwhere(P > 0)
    index = {(int(i), int(j)): k for k, (i, j) in enumerate(edges)}
    k = len(edges)
    Pp = np.zeros((k, k))
    for e, (i, j) in enumerate(edges):
        for nxt in np.flatnonzero(P[j] > 0):
            Pp[e, index[(int(j), int(nxt))]] = P[j, nxt]
    pip = chain.pi[edges[:, 0]] * P[edges[:, 0], edges[:, 1]]
    pip = pip / pip.sum()
    require = "irreducible" if chain.irreducible else "none"
    aug = FiniteChain(Pp, pi=pip, require=require)
    return AugmentedChain(edges=edges, chain=aug)


# ---------------------------------------------------------------------------
# graphs


class Graph:
    """Connected simple undirected graph stored as sorted adjacency (CSR)."""

    def __init__(self, n_nodes, edges):
        n_nodes = int(n_nodes)
        if n_nodes < 1:
            raise GraphError("graph needs at least one node")
        pairs = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise GraphError(f"edge ({u}, {v}) out of range")
            pairs.add((min(u, v), max(u, v)))
        adj = [[] for _ in range(n_nodes)]
        for u, v in pairs:
            adj[u].append(v)
            adj[v].append(u)
        self.n_nodes = n_nodes
        self.adjacency = tuple(np.array(sorted(a), dtype=np.int64) for a in adj)
        self.degrees = np.array([len(a) for a in adj], dtype=np.int64)
        self.n_edges = len(pairs)
        self.indptr = np.concatenate([[0], np.cumsum(self.degrees)]).astype(np.int64)
        self.indices = (np.concatenate(self.adjacency) if self.n_edges else np.zeros(0)).astype(np.int64)
        n_comp = self.components()
        if n_comp != 1:
            raise GraphError(f"graph is disconnected: {n_comp} components")

    def components(self):
        label = np.full(self.n_nodes, -1)
        count = 0
        for s in range(self.n_nodes):
            if label[s] >= 0:
                continue
            label[s] = count
            stack = [s]
            while stack:
                u = stack.pop()
                for v in self.adjacency[u]:
                    if label[v] < 0:
                        label[v] = count
                        stack.append(v)
            count += 1
        return count

    def edge_list(self):
        return [(u, int(v)) for u in range(self.n_nodes) for v in self.adjacency[u] if u < v]

    def degree_distribution(self):
        return self.degrees / self.degrees.sum()

    def __repr__(self):
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


def path_graph(n):
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(n_leaves):
    return Graph(n_leaves + 1, [(0, i) for i in range(1, n_leaves + 1)])


def random_connected_graph(n, avg_degree=4.0, seed=0):
    """Random spanning tree plus uniformly drawn extra edges up to ``avg_degree``."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        u, v = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(u, v), max(u, v)))
    target = max(n - 1, int(round(avg_degree * n / 2)))
    target = min(target, n * (n - 1) // 2)
    while len(edges) < target:
        u, v = (int(t) for t in rng.integers(n, size=2))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return Graph(n, sorted(edges))


def read_edge_list(path):
    """Parse a whitespace-separated edge list into a :class:`Graph`.

    Lines are ``u v``; ``#`` starts a comment. Indices are 1-based when the
    smallest one is 1, 0-based otherwise. Self-loops and duplicate edges are
    dropped; the counts are logged and stored on ``graph.dropped``.
    """
    raw = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphError(f"{path}:{lineno}: expected 'u v'")
            try:
                raw.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-integer node index") from None
    if not raw:
        raise GraphError(f"{path}: no edges")
    base = min(min(u, v) for u, v in raw)
    if base not in (0, 1):
        base = 0
    seen = set()
    edges = []
    loops = dupes = 0
    for u, v in raw:
        u, v = u - base, v - base
        if u == v:
            loops += 1
            continue
        key = (min(u, v), max(u, v))
        if key in seen:
            dupes += 1
            continue
        seen.add(key)
        edges.append(key)
    if loops or dupes:
        logger.warning("%s: dropped %d self-loops and %d duplicate edges", path, loops, dupes)
    n = 1 + max(max(e) for e in edges) if edges else 1
    graph = Graph(n, edges)
    graph.dropped = {"self_loops": loops, "duplicates": dupes}
    return graph


# ---------------------------------------------------------------------------
# samplers


@dataclass
class SamplerState:
    kind: str
    current: int
    rng_seed: int
    previous: int = -1
    permutation: Optional[np.ndarray] = None
    epoch_pos: int = 0
    rng: SplitMix64 = field(default=None, repr=False)

    def __post_init__(self):
        if self.rng is None:
            self.rng = SplitMix64(self.rng_seed)


def _uniform_neighbor(graph, node, rng):
    nbrs = graph.adjacency[node]
    if len(nbrs) == 0:
        raise GraphError(f"node {node} is isolated")
    return int(nbrs[rng.randbelow(len(nbrs))])


def _advance(state, nxt):
    state.previous = state.current
    state.current = int(nxt)
    return state.current


def srw_next(graph, state):
    """Move to a uniformly chosen neighbour."""
    return _advance(state, _uniform_neighbor(graph, state.current, state.rng))


def nbrw_next(graph, state):
    """Uniform over neighbours other than the previous node; forced backtrack at degree 1."""
    if state.previous < 0:
        return srw_next(graph, state)
    nbrs = graph.adjacency[state.current]
    if len(nbrs) == 1:
        return _advance(state, state.previous)
    k = state.rng.randbelow(len(nbrs) - 1)
    choices = [int(v) for v in nbrs if v != state.previous]
    return _advance(state, choices[k])


def single_shuffle_next(state, N):
    """Cycle through the fixed permutation: returns ``sigma((n + 1) mod N)``."""
    if N <= 0:
        raise ValueError("shuffling needs N >= 1")
    state.epoch_pos = (state.epoch_pos + 1) % N
    return _advance(state, state.permutation[state.epoch_pos])


def random_shuffle_next(state, N):
    """Like :func:`single_shuffle_next` but draws a fresh permutation every epoch."""
    if N <= 0:
        raise ValueError("shuffling needs N >= 1")
    state.epoch_pos = (state.epoch_pos + 1) % N
    if state.epoch_pos == 0:
        perm = list(state.permutation)
        shuffle_inplace(state.rng, perm)
        state.permutation = np.array(perm, dtype=np.int64)
    return _advance(state, state.permutation[state.epoch_pos])


def _check_distribution(mu):
    mu = np.asarray(mu, dtype=np.float64)
    if mu.ndim != 1 or len(mu) == 0 or (mu < 0).any() or abs(mu.sum() - 1.0) > 1e-12:
        raise ValueError("mu must be a probability vector summing to 1 within 1e-12")
    return mu


def _cdf(p):
    c = np.cumsum(p)
    c[-1] = 1.0
    return c


def iid_next(mu, state, cdf=None):
    """Independent draw from ``mu``."""
    if cdf is None:
        cdf = _cdf(_check_distribution(mu))
    return _advance(state, state.rng.choice(cdf))


def _chain_csr(P):
    indptr = [0]
    indices = []
    cdf = []
    for row in P:
        nz = np.flatnonzero(row > 0)
        indices.extend(nz.tolist())
        c = np.cumsum(row[nz])
        c[-1] = 1.0
        cdf.extend(c.tolist())
        indptr.append(len(indices))
    return (np.array(indptr, dtype=np.int64), np.array(indices, dtype=np.int64),
            np.array(cdf, dtype=np.float64))


class Sampler:
    """One stateful stream of noise indices.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    graph : Graph, optional
        Required for ``srw`` and ``nbrw``.
    mu : array_like, optional
        Target distribution for ``iid``.
    n : int, optional
        Dataset size for the shuffling kinds.
    chain : FiniteChain, optional
        Transition matrix for ``finite-chain``.
    kernel : callable, optional
        ``kernel(x, y) -> (m, m) transition matrix`` for ``controlled-kernel``;
        ``equilibrium`` gives the ``(x*, y*)`` at which its target is taken.
    seed : int
        64-bit seed; the start state is drawn from the target with this stream
        unless ``start`` is given.
    """

    def __init__(self, kind, *, graph=None, mu=None, n=None, chain=None, kernel=None,
                 equilibrium=None, seed=0, start=None):
        if kind not in KINDS:
            raise ValueError(f"unknown sampler kind {kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.graph = graph
        self.chain = chain
        self.kernel = kernel
        self.equilibrium = equilibrium
        self._indptr = np.zeros(0, dtype=np.int64)
        self._indices = np.zeros(0, dtype=np.int64)
        self._cdf = np.zeros(0)
        if kind in ("srw", "nbrw"):
            if graph is None:
                raise ValueError(f"{kind} sampler needs a graph")
            self.n_states = graph.n_nodes
            self._indptr, self._indices = graph.indptr, graph.indices
        elif kind == "iid":
            self.mu = _check_distribution(mu)
            self.n_states = len(self.mu)
            self._cdf = _cdf(self.mu)
        elif kind in ("single-shuffle", "random-shuffle"):
            if n is None or int(n) <= 0:
                raise ValueError("shuffling needs N >= 1")
            self.n_states = int(n)
        elif kind == "finite-chain":
            if chain is None:
                raise ValueError("finite-chain sampler needs a chain")
            self.n_states = chain.n_states
            self._indptr, self._indices, self._cdf = _chain_csr(chain.P)
        else:
            if kernel is None or equilibrium is None:
                raise ValueError("controlled-kernel sampler needs kernel and equilibrium")
            self.n_states = np.asarray(kernel(*equilibrium)).shape[0]

        rng = SplitMix64(seed)
        perm = None
        if kind in ("single-shuffle", "random-shuffle"):
            perm = np.array(rng.permutation(self.n_states), dtype=np.int64)
            first = int(perm[0]) if start is None else int(start)
        elif start is None:
            first = rng.choice(_cdf(self.target()))
        else:
            first = int(start)
        self.state = SamplerState(kind=kind, current=first, rng_seed=seed, permutation=perm, rng=rng)

    def target(self):
        """Long-run occupancy of the reported index."""
        if self.kind in ("srw", "nbrw"):
            return self.graph.degree_distribution()
        if self.kind == "iid":
            return self.mu
        if self.kind in ("single-shuffle", "random-shuffle"):
            return np.full(self.n_states, 1.0 / self.n_states)
        if self.kind == "finite-chain":
            return self.chain.pi
        P = np.asarray(self.kernel(*self.equilibrium), dtype=np.float64)
        return FiniteChain(P, require="irreducible").pi

    def next(self, x=None, y=None):
        st = self.state
        kind = self.kind
        if kind == "srw":
            return srw_next(self.graph, st)
        if kind == "nbrw":
            return nbrw_next(self.graph, st)
        if kind == "iid":
            return iid_next(self.mu, st, self._cdf)
        if kind == "single-shuffle":
            return single_shuffle_next(st, self.n_states)
        if kind == "random-shuffle":
            return random_shuffle_next(st, self.n_states)
        if kind == "finite-chain":
            lo, hi = self._indptr[st.current], self._indptr[st.current + 1]
            k = bisect_cdf(self._cdf, lo, hi, st.rng.random())
            return _advance(st, self._indices[k])
        if x is None:
            x, y = self.equilibrium
        row = np.asarray(self.kernel(x, y), dtype=np.float64)[st.current]
        return _advance(st, st.rng.choice(_cdf(row)))

    # -- bulk path through the compiled core -------------------------------

    @property
    def compiled(self):
        return self.kind in _KIND_CODE

    def pack(self):
        if not self.compiled:
            raise ValueError(f"{self.kind} sampler has no compiled representation")
        st = self.state
        perm = st.permutation if st.permutation is not None else np.zeros(0, dtype=np.int64)
        return (
            _KIND_CODE[self.kind],
            np.array([st.rng.state], dtype=np.uint64),
            np.array([st.current, st.previous, st.epoch_pos], dtype=np.int64),
            self._indptr, self._indices, self._cdf,
            np.array(perm, dtype=np.int64),
        )

    def unpack(self, packed):
        _, rng, st, _, _, _, perm = packed
        self.state.rng.state = int(rng[0])
        self.state.current, self.state.previous, self.state.epoch_pos = (int(v) for v in st)
        if self.state.permutation is not None:
            self.state.permutation = perm.copy()

    def stream(self, n, core=None):
        """Advance ``n`` steps and return the visited indices."""
        if not self.compiled:
            return np.array([self.next() for _ in range(n)], dtype=np.int64)
        core = core or backend.core
        packed = self.pack()
        out = core.sample_stream(packed, int(n))
        self.unpack(packed)
        return out

    def finite_chain(self):
        return chain_of_sampler(self.kind, self)

    def __repr__(self):
        return f"Sampler({self.kind!r}, n_states={self.n_states}, current={self.state.current})"


@dataclass(frozen=True)
class SamplerSpec:
    """Recipe for building independent :class:`Sampler` instances from seeds."""

    kind: str
    graph: Optional[Graph] = None
    mu: Optional[np.ndarray] = None
    n: Optional[int] = None
    chain: Optional[FiniteChain] = None
    kernel: Optional[Callable] = None
    equilibrium: Optional[tuple] = None

    def build(self, seed=0, start=None):
        return Sampler(self.kind, graph=self.graph, mu=self.mu, n=self.n, chain=self.chain,
                       kernel=self.kernel, equilibrium=self.equilibrium, seed=seed, start=start)

    def target(self):
        return self.build(0).target()


def srw_matrix(graph):
    P = np.zeros((graph.n_nodes, graph.n_nodes))
    for u, nbrs in enumerate(graph.adjacency):
        P[u, nbrs] = 1.0 / len(nbrs)
    return P


def nbrw_edge_chain(graph):
    """Non-backtracking walk as a chain on directed edges ``(i, j)``, observed at ``j``."""
    edges = [(u, int(v)) for u in range(graph.n_nodes) for v in graph.adjacency[u]]
    index = {e: k for k, e in enumerate(edges)}
    P = np.zeros((len(edges), len(edges)))
    for k, (i, j) in enumerate(edges):
        nbrs = graph.adjacency[j]
        if len(nbrs) == 1:
            P[k, index[(j, i)]] = 1.0
        else:
            p = 1.0 / (len(nbrs) - 1)
            for nxt in nbrs:
                if nxt != i:
                    P[k, index[(j, int(nxt))]] = p
    pi = np.full(len(edges), 1.0 / len(edges))
    head = np.array([j for _, j in edges], dtype=np.int64)
    chain = FiniteChain(P, pi=pi, require="none", observe=head)
    chain.edges = np.array(edges, dtype=np.int64)
    return chain


def chain_of_sampler(kind, graph_or_mu):
    """Transition matrix whose simulation matches the sampler in distribution.

    ``graph_or_mu`` may be a :class:`Graph`, a probability vector, a
    :class:`FiniteChain`, or a :class:`Sampler` of the given kind.
    """
    src = graph_or_mu
    if isinstance(src, Sampler):
        if src.kind == "finite-chain":
            return src.chain
        src = src.graph if src.kind in ("srw", "nbrw") else getattr(src, "mu", None)
    if kind in ("single-shuffle", "random-shuffle"):
        raise ValueError(f"{kind} is deterministic given its permutation and has no "
                         "time-homogeneous finite-chain form; use Monte Carlo")
    if kind == "iid":
        mu = _check_distribution(src)
        return FiniteChain(np.tile(mu, (len(mu), 1)), pi=mu, require="none")
    if kind == "srw":
        return FiniteChain(srw_matrix(src), pi=src.degree_distribution(), require="irreducible")
    if kind == "nbrw":
        return nbrw_edge_chain(src)
    if kind == "finite-chain":
        return src
    raise ValueError(f"no finite-chain form for sampler kind {kind!r}")
