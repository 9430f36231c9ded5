"""Distributed gradient descent with a graph-Laplacian consensus penalty.

Each of n nodes holds exactly one sample and a private parameter vector and
talks only to its graph neighbors.  A synchronous round applies, from the
previous iterate,

    w_i <- w_i - eta (x_i . w_i - y_i) x_i - mu sum_j L_ij w_j

with L = D - A the (positive semidefinite) graph Laplacian; mu is the raw
coupling weight of that iteration.  Near an exact fit the error obeys
delta W <- (I - Q) delta W with Q = eta blockdiag(x_i x_i^T) + mu (L kron I),
so stability and rates are read off Q's spectrum.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .io import atomic_write_text, dumps
from .problem import Dataset, RangeProjector, hessian, range_projector, row_inner, spectral_summary

DIVERGENCE_FACTOR = 1e12
DENSE_GUARD = 4096
ER_MAX_ATTEMPTS = 1000

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERS = "max-iters"
STATUS_DIVERGED = "diverged"


class GraphConnectError(RuntimeError):
    """Random graph stayed disconnected for the whole retry budget."""


@dataclass(frozen=True)
class CommGraph:
    """Undirected connected communication topology (simple graph)."""

    n: int
    edges: tuple[tuple[int, int], ...]
    kind: str
    params: dict
    seed: int

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def max_degree(self) -> int:
        return int(self.degrees().max())

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj


def is_connected(n: int, edges) -> bool:
    """Breadth-first search from node 0 reaches every node."""
    if n <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count == n


def _canon(edges) -> tuple[tuple[int, int], ...]:
    return tuple(sorted({(min(i, j), max(i, j)) for i, j in edges if i != j}))


def make_graph(kind: str, n: int, seed: int = 0, *, rows: int | None = None,
               cols: int | None = None, k: int | None = None,
               p: float | None = None) -> CommGraph:
    """Build a connected simple graph.

    kinds: complete, ring, path, grid (rows x cols = n), k_ring (each node
    linked to its k nearest neighbors per side, 2k < n), erdos_renyi (each
    pair kept with probability p, resampled until connected).  Deterministic
    given seed.
    """
    if n < 2:
        raise ValueError(f"invalid graph spec: need n >= 2, got {n}")
    params: dict = {}
    if kind == "complete":
        edges = _canon(combinations(range(n), 2))
    elif kind == "ring":
        edges = _canon((i, (i + 1) % n) for i in range(n))
    elif kind == "path":
        edges = _canon((i, i + 1) for i in range(n - 1))
    elif kind == "grid":
        if rows is None or cols is None or rows * cols != n:
            raise ValueError(f"invalid graph spec: grid needs rows*cols == n, got {rows}x{cols} for n={n}")
        params = {"rows": rows, "cols": cols}
        edges = []
        for r in range(rows):
            for c in range(cols):
                idx = r * cols + c
                if c + 1 < cols:
                    edges.append((idx, idx + 1))
                if r + 1 < rows:
                    edges.append((idx, idx + cols))
        edges = _canon(edges)
    elif kind == "k_ring":
        if k is None or k < 1 or 2 * k >= n:
            raise ValueError(f"invalid graph spec: k_ring needs 1 <= k with 2k < n, got k={k}, n={n}")
        params = {"k": k}
        edges = _canon((i, (i + j) % n) for i in range(n) for j in range(1, k + 1))
    elif kind == "erdos_renyi":
        if p is None or not 0 < p <= 1:
            raise ValueError(f"invalid graph spec: erdos_renyi needs 0 < p <= 1, got {p}")
        rng = np.random.default_rng(seed)
        pairs = list(combinations(range(n), 2))
        for attempt in range(1, ER_MAX_ATTEMPTS + 1):
            draws = rng.random(len(pairs))
            edges = _canon(pair for pair, u in zip(pairs, draws) if u < p)
            if is_connected(n, edges):
                params = {"p": p, "attempts": attempt}
                break
        else:
            raise GraphConnectError(
                f"no connected graph in {ER_MAX_ATTEMPTS} attempts (n={n}, p={p}); try a larger p"
            )
    else:
        raise ValueError(f"invalid graph spec: unknown kind {kind!r}")
    if not is_connected(n, edges):
        raise ValueError(f"invalid graph spec: {kind} on n={n} is not connected")
    return CommGraph(n=n, edges=edges, kind=kind, params=params, seed=seed)


def laplacian(g: CommGraph) -> np.ndarray:
    """Degree-minus-adjacency matrix; v^T (L kron I) v sums squared edge differences."""
    L = np.zeros((g.n, g.n))
    for i, j in g.edges:
        L[i, i] += 1.0
        L[j, j] += 1.0
        L[i, j] -= 1.0
        L[j, i] -= 1.0
    return L


def incidence(g: CommGraph) -> np.ndarray:
    """Signed edge-node incidence B (E x n); B^T B = laplacian(g).

    The penalty is applied as B^T (B W), which is exactly zero on consensus
    states instead of accumulating rounding from degree-weighted sums.
    """
    B = np.zeros((len(g.edges), g.n))
    for e, (i, j) in enumerate(g.edges):
        B[e, i] = 1.0
        B[e, j] = -1.0
    return B


@dataclass
class ConsensusMetrics:
    mean_err_sq_range: float
    edge_spread: float
    global_spread: float
    node_err_sq: np.ndarray


def _global_spread(W: np.ndarray) -> float:
    # center rows first: the spread is translation-invariant, and removing the
    # common offset keeps the Gram cancellation at the spread's own scale
    Wc = W - W.mean(axis=0)
    sq = np.sum(Wc * Wc, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Wc @ Wc.T)
    return float(np.sqrt(max(float(d2.max()), 0.0)))


def consensus_metrics(W: np.ndarray, ds: Dataset, rp: RangeProjector,
                      g: CommGraph) -> ConsensusMetrics:
    """Mean range-projected error, max edge/global parameter spread, per-node errors."""
    if W.shape != (ds.n, ds.d) or g.n != ds.n:
        raise ValueError("state, dataset and graph dimensions are inconsistent")
    comp = rp.coords(W - ds.w_star)
    node_err = np.sum(comp * comp, axis=1)
    diffs = incidence(g) @ W
    edge_spread = float(np.linalg.norm(diffs, axis=1).max()) if len(g.edges) else 0.0
    return ConsensusMetrics(
        mean_err_sq_range=float(node_err.mean()),
        edge_spread=edge_spread,
        global_spread=_global_spread(W),
        node_err_sq=node_err,
    )


@dataclass
class DgdTrace:
    """Per-round metrics of one distributed run (row t = state after t rounds)."""

    t: np.ndarray
    mean_err_sq_range: np.ndarray
    edge_spread: np.ndarray
    global_spread: np.ndarray
    penalized_loss: np.ndarray
    status: str
    W_final: np.ndarray
    states: np.ndarray | None = None


def dgd_step(ds: Dataset, B: np.ndarray, eta: float, mu: float,
             W: np.ndarray) -> np.ndarray:
    """One synchronous round; every node reads only the previous iterate."""
    e = row_inner(ds.X, W) - ds.y
    return W - eta * e[:, None] * ds.X - mu * (B.T @ (B @ W))


def run_dgd(ds: Dataset, g: CommGraph, eta: float, mu: float,
            max_iters: int = 1000, stop_tol: float = 0.0,
            W0: np.ndarray | None = None, record_states: bool = False) -> DgdTrace:
    """Synchronous distributed GD rounds until stop_tol, divergence, or max_iters.

    stop_tol is relative to the initial mean projected error; zero runs the
    full max_iters.  Divergence (error above 1e12 times initial) is recorded
    as a status, not raised.
    """
    if ds.n != g.n:
        raise ValueError(f"one sample per node required: dataset n={ds.n}, graph n={g.n}")
    if eta <= 0 or mu <= 0:
        raise ValueError(f"eta and mu must be positive: eta={eta}, mu={mu}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1: {max_iters}")
    W = np.zeros((ds.n, ds.d)) if W0 is None else np.array(W0, dtype=float)
    if W.shape != (ds.n, ds.d):
        raise ValueError(f"W0 must have shape ({ds.n}, {ds.d})")
    rp = range_projector(hessian(ds))
    B = incidence(g)

    def penalized_loss(W):
        resid = row_inner(ds.X, W) - ds.y
        diffs = B @ W
        return float(resid @ resid + mu * np.sum(diffs * diffs))

    met = consensus_metrics(W, ds, rp, g)
    err0 = met.mean_err_sq_range
    errs = [err0]
    edge_spreads = [met.edge_spread]
    global_spreads = [met.global_spread]
    losses = [penalized_loss(W)]
    states = [W.copy()] if record_states else None
    status = STATUS_MAX_ITERS
    if stop_tol > 0 and err0 <= stop_tol * err0:
        status = STATUS_CONVERGED
    else:
        for t in range(1, max_iters + 1):
            W = dgd_step(ds, B, eta, mu, W)
            met = consensus_metrics(W, ds, rp, g)
            errs.append(met.mean_err_sq_range)
            edge_spreads.append(met.edge_spread)
            global_spreads.append(met.global_spread)
            losses.append(penalized_loss(W))
            if states is not None:
                states.append(W.copy())
            if stop_tol > 0 and met.mean_err_sq_range <= stop_tol * err0:
                status = STATUS_CONVERGED
                break
            if met.mean_err_sq_range > DIVERGENCE_FACTOR * err0:
                status = STATUS_DIVERGED
                break

    return DgdTrace(
        t=np.arange(len(errs)),
        mean_err_sq_range=np.array(errs),
        edge_spread=np.array(edge_spreads),
        global_spread=np.array(global_spreads),
        penalized_loss=np.array(losses),
        status=status,
        W_final=W,
        states=np.array(states) if states is not None else None,
    )


@dataclass(frozen=True)
class OperatorSpectrum:
    """Spectrum of Q = eta blockdiag(x_i x_i^T) + mu (L kron I) off its exact null space.

    The exact null space is consensus states whose common component lies in
    null(H); sigma_min/sigma_max are taken off it.  rate_spectral is the
    spectral radius of I - Q there, rate_lower = 1 - eta lambda_min_nz(H) is
    the one-sided bound (a consensus test vector shows
    sigma_min <= eta lambda_min_nz(H)), and `stable` requires sigma_max < 2.
    """

    sigma_min: float
    sigma_max: float
    rate_lower: float
    rate_spectral: float
    stable: bool


def dgd_operator_spectrum(ds: Dataset, g: CommGraph, eta: float, mu: float) -> OperatorSpectrum:
    """Dense eigensolve of the nd x nd round operator (guarded at nd <= 4096).

    With mu = 0 the coupling disappears and consensus modes carrying per-node
    null components sit at eigenvalue zero: sigma_min is reported as 0,
    signalling that a positive penalty is required.
    """
    if ds.n != g.n:
        raise ValueError(f"one sample per node required: dataset n={ds.n}, graph n={g.n}")
    n, d = ds.n, ds.d
    if n * d > DENSE_GUARD:
        raise ValueError(f"too large for dense eigensolve: n*d = {n * d} > {DENSE_GUARD}")
    if mu < 0 or eta <= 0:
        raise ValueError(f"need eta > 0 and mu >= 0: eta={eta}, mu={mu}")
    Q = mu * np.kron(laplacian(g), np.eye(d))
    for i in range(n):
        Q[i * d:(i + 1) * d, i * d:(i + 1) * d] += eta * np.outer(ds.X[i], ds.X[i])
    evals = np.linalg.eigvalsh(Q)
    ss = spectral_summary(hessian(ds))
    null_dim = d - ss.rank
    nonnull = evals[null_dim:]
    sigma_max = float(evals[-1])
    sigma_min = float(nonnull[0])
    if sigma_min < 1e-11 * max(sigma_max, 1.0):
        sigma_min = 0.0
    rate_spectral = float(np.max(np.abs(1.0 - nonnull)))
    return OperatorSpectrum(
        sigma_min=sigma_min,
        sigma_max=sigma_max,
        rate_lower=1.0 - eta * ss.lambda_min_nz,
        rate_spectral=rate_spectral,
        stable=sigma_max < 2.0,
    )


def stability_bound(ds: Dataset, g: CommGraph, eta: float, mu: float) -> tuple[float, bool]:
    """Gershgorin-style bound on sigma_max: eta max_i |x_i|^2 + 2 mu max_degree.

    Conservative (bound >= true sigma_max); the flag is bound < 2.
    """
    bound = eta * float(ds.row_norms_sq().max()) + 2.0 * mu * g.max_degree()
    return bound, bound < 2.0


def default_eta(ds: Dataset) -> float:
    """Step size making each node's local gradient block contractive on its own."""
    return 0.5 / float(ds.row_norms_sq().max())


def stable_eta(ds: Dataset, g: CommGraph, mu_loss: float) -> float:
    """Step size whose Gershgorin bound stays below 1 when the consensus
    penalty mu_loss enters the round as a coupling of eta * mu_loss.

    This is the experiment-layer default: eta shrinks as the penalty grows,
    so any positive penalty weight yields a stable round.
    """
    xmax = float(ds.row_norms_sq().max())
    return min(0.5 / xmax, 1.0 / (xmax + 2.0 * mu_loss * g.max_degree()))


def graph_to_json(g: CommGraph) -> str:
    return dumps({
        "n": g.n,
        "kind": g.kind,
        "params": g.params,
        "seed": g.seed,
        "edges": [list(e) for e in g.edges],
    })


def graph_from_json(text: str) -> CommGraph:
    doc = json.loads(text)
    return CommGraph(
        n=int(doc["n"]),
        edges=_canon((int(i), int(j)) for i, j in doc["edges"]),
        kind=str(doc["kind"]),
        params=dict(doc["params"]),
        seed=int(doc["seed"]),
    )


def save_graph(g: CommGraph, path: str) -> None:
    atomic_write_text(path, graph_to_json(g) + "\n")


def load_graph(path: str) -> CommGraph:
    with open(path) as fh:
        return graph_from_json(fh.read())
