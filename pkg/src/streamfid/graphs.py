"""Network construction and structural drift measurement.

Two graphs are built from an event list: the user-hashtag bipartite graph
(weighted by tweet count) and the user-user retweet digraph.  The bipartite
graph is spectrally co-clustered; the digraph is decomposed into the
classic six-component bow-tie.  Flow matrices count how entities move
between the complete-set and sample-set structures.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.sparse import coo_matrix

from .model import Event

LSCC = "LSCC"
IN = "IN"
OUT = "OUT"
TUBES = "Tubes"
TENDRILS = "Tendrils"
DISCONNECTED = "Disconnected"
BOWTIE_COMPONENTS = (LSCC, IN, OUT, TUBES, TENDRILS, DISCONNECTED)

MISSING = "missing"


@dataclass(frozen=True)
class BipartiteGraph:
    """User-hashtag graph; edge weight = number of tweets linking the pair."""

    weights: Mapping[tuple[int, str], int]
    users: tuple[int, ...]
    hashtags: tuple[str, ...]

    def __post_init__(self):
        if any(w < 1 for w in self.weights.values()):
            raise ValueError("edge weights must be positive")

    @property
    def node_count(self) -> int:
        return len(self.users) + len(self.hashtags)


def build_bipartite(events: Iterable[Event]) -> BipartiteGraph:
    weights: Counter = Counter()
    for ev in events:
        for h in set(ev.hashtags):
            weights[(ev.user_id, h)] += 1
    users = tuple(sorted({u for u, _ in weights}))
    hashtags = tuple(sorted({h for _, h in weights}))
    return BipartiteGraph(dict(weights), users, hashtags)


def user_node(user_id) -> str:
    return f"u:{user_id}"


def hashtag_node(tag: str) -> str:
    return f"h:{tag}"


def spectral_cocluster(g: BipartiteGraph, k: int, seed: int = 0) -> dict[str, int]:
    """Co-cluster users and hashtags into k groups (Dhillon-style).

    The degree-normalized weight matrix D_u^-1/2 W D_h^-1/2 is factored for
    its top ceil(log2 k)+1 singular vectors; user and hashtag embeddings are
    stacked and clustered with seeded k-means++.  Keys are namespaced
    ("u:..." / "h:...") so both sides share one labeling.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n_u, n_h = len(g.users), len(g.hashtags)
    if k > n_u + n_h:
        raise ValueError(f"k={k} exceeds node count {n_u + n_h}")
    uidx = {u: i for i, u in enumerate(g.users)}
    hidx = {h: i for i, h in enumerate(g.hashtags)}
    rows = np.fromiter((uidx[u] for u, _ in g.weights), dtype=np.int64, count=len(g.weights))
    cols = np.fromiter((hidx[h] for _, h in g.weights), dtype=np.int64, count=len(g.weights))
    vals = np.fromiter(g.weights.values(), dtype=float, count=len(g.weights))
    w = coo_matrix((vals, (rows, cols)), shape=(n_u, n_h)).tocsr()
    du = np.asarray(w.sum(axis=1)).ravel()
    dh = np.asarray(w.sum(axis=0)).ravel()
    su = 1.0 / np.sqrt(np.maximum(du, 1e-12))
    sh = 1.0 / np.sqrt(np.maximum(dh, 1e-12))
    normalized = w.multiply(su[:, None]).multiply(sh[None, :]).tocsc()

    n_vec = int(np.ceil(np.log2(k))) + 1 if k > 1 else 1
    n_vec = min(n_vec, min(n_u, n_h))
    u_vec, v_vec = _truncated_svd(normalized, n_vec, seed)
    emb = np.vstack([su[:, None] * u_vec, sh[:, None] * v_vec])
    # degree scaling stretches each cluster along a ray from the origin;
    # unit rows make k-means cut by direction instead of radius
    emb /= np.maximum(np.linalg.norm(emb, axis=1, keepdims=True), 1e-12)

    rng_labels = _seeded_kmeans(emb, k, seed)
    out: dict[str, int] = {}
    for i, u in enumerate(g.users):
        out[user_node(u)] = int(rng_labels[i])
    for j, h in enumerate(g.hashtags):
        out[hashtag_node(h)] = int(rng_labels[n_u + j])
    return out


def _truncated_svd(m, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Leading singular vectors, deterministically.

    ARPACK's svds is not reproducible on degenerate spectra, so small
    matrices go through dense LAPACK and larger ones through a seeded
    randomized subspace iteration (power iterations + QR).
    """
    if min(m.shape) <= 512:
        u, _, vt = np.linalg.svd(m.toarray(), full_matrices=False)
        return u[:, :k], vt[:k].T
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((m.shape[1], k + 16))
    y, _ = np.linalg.qr(m @ omega)
    for _ in range(8):
        y, _ = np.linalg.qr(m @ (m.T @ y))
    b = (m.T @ y).T
    ub, _, vt = np.linalg.svd(b, full_matrices=False)
    return (y @ ub)[:, :k], vt[:k].T


def _seeded_kmeans(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    if k == 1:
        return np.zeros(len(points), dtype=int)
    _, labels = kmeans2(points, k, minit="++", seed=seed, missing="warn")
    return labels


@dataclass(frozen=True)
class FlowMatrix:
    """Entity-movement contingency table with a trailing "missing" column."""

    row_labels: tuple
    col_labels: tuple  # ends with "missing"
    counts: np.ndarray  # len(rows) x len(cols)
    ratios: np.ndarray

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def _flow(
    labels_complete: Mapping,
    labels_sample: Mapping,
    row_order: Sequence,
    col_order: Sequence,
    greedy_diagonal: bool,
) -> FlowMatrix:
    extra = set(labels_sample) - set(labels_complete)
    if extra:
        raise ValueError(f"{len(extra)} sample entities missing from the complete labeling")
    counts = np.zeros((len(row_order), len(col_order) + 1), dtype=np.int64)
    rpos = {r: i for i, r in enumerate(row_order)}
    cpos = {c: j for j, c in enumerate(col_order)}
    for entity, ci in labels_complete.items():
        i = rpos[ci]
        sj = labels_sample.get(entity)
        counts[i, cpos[sj] if sj is not None else -1] += 1

    cols = list(col_order)
    if greedy_diagonal and cols:
        body = counts[:, :-1]
        assigned: list[Optional[int]] = [None] * len(row_order)
        free_rows = set(range(len(row_order)))
        free_cols = set(range(len(cols)))
        while free_rows and free_cols:
            best = max(
                ((body[i, j], -i, -j, i, j) for i in free_rows for j in free_cols)
            )
            _, _, _, i, j = best
            assigned[i] = j
            free_rows.discard(i)
            free_cols.discard(j)
        order = [j for j in assigned if j is not None]
        order += [j for j in range(len(cols)) if j not in order]
        counts = np.concatenate([body[:, order], counts[:, -1:]], axis=1)
        cols = [cols[j] for j in order]

    sums = np.maximum(counts.sum(axis=1, keepdims=True), 1)
    return FlowMatrix(tuple(row_order), tuple(cols) + (MISSING,), counts, counts / sums)


def cluster_flow(
    labels_complete: Mapping, labels_sample: Mapping, all_entities: Optional[Iterable] = None
) -> FlowMatrix:
    """k x (k+1) movement matrix between two cluster labelings.

    Rows are complete clusters; columns are sample clusters reordered
    greedily to maximize the diagonal, plus a final column counting
    entities absent from the sample labeling.
    """
    if all_entities is not None:
        missing = set(all_entities) - set(labels_complete)
        if missing:
            raise ValueError("entities outside the complete labeling")
    rows = sorted(set(labels_complete.values()))
    cols = sorted(set(labels_sample.values()) | set(rows))
    return _flow(labels_complete, labels_sample, rows, cols, greedy_diagonal=True)


def bowtie_flow(complete_assignment: Mapping, sample_assignment: Mapping) -> FlowMatrix:
    """6 x 7 movement matrix over bow-tie components in fixed order."""
    return _flow(
        complete_assignment,
        sample_assignment,
        BOWTIE_COMPONENTS,
        BOWTIE_COMPONENTS,
        greedy_diagonal=False,
    )


@dataclass(frozen=True)
class Digraph:
    """Weighted digraph over user ids."""

    edges: Mapping[tuple[int, int], int]
    nodes: frozenset
    skipped_unresolvable: int = 0

    def __post_init__(self):
        if any(w < 1 for w in self.edges.values()):
            raise ValueError("edge weights must be positive")

    def successors(self) -> dict:
        adj = defaultdict(list)
        for (a, b) in self.edges:
            adj[a].append(b)
        return adj

    def predecessors(self) -> dict:
        adj = defaultdict(list)
        for (a, b) in self.edges:
            adj[b].append(a)
        return adj

    @classmethod
    def from_edges(cls, weighted_edges: Mapping, extra_nodes: Iterable = ()) -> "Digraph":
        nodes = {n for e in weighted_edges for n in e} | set(extra_nodes)
        return cls(dict(weighted_edges), frozenset(nodes))


def build_retweet_network(
    events: Sequence[Event], include_quotes: bool = True, include_replies: bool = False
) -> Digraph:
    """Digraph of retweeter -> retweeted author, weighted by retweet count.

    Events whose root cannot be resolved to an author within the list are
    skipped and counted in ``skipped_unresolvable``.
    """
    kinds = {"retweet"}
    if include_quotes:
        kinds.add("quote")
    if include_replies:
        kinds.add("reply")
    author_of = {ev.id: ev.user_id for ev in events if ev.event_type == "root"}
    weights: Counter = Counter()
    skipped = 0
    for ev in events:
        if ev.event_type not in kinds:
            continue
        author = author_of.get(ev.root_id)
        if author is None:
            skipped += 1
            continue
        weights[(ev.user_id, author)] += 1
    nodes = {n for e in weights for n in e}
    return Digraph(dict(weights), frozenset(nodes), skipped)


@dataclass(frozen=True)
class BowtieAssignment:
    """Total map node -> bow-tie component."""

    components: Mapping

    def __post_init__(self):
        bad = set(self.components.values()) - set(BOWTIE_COMPONENTS)
        if bad:
            raise ValueError(f"unknown components {bad}")

    def __getitem__(self, node):
        return self.components[node]

    def __len__(self):
        return len(self.components)

    def sizes(self) -> dict[str, int]:
        c = Counter(self.components.values())
        return {name: c.get(name, 0) for name in BOWTIE_COMPONENTS}


def _tarjan_scc(nodes: Sequence, succ: Mapping) -> list[list]:
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    sccs: list[list] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def _reachable(starts: Iterable, adj: Mapping) -> set:
    seen = set(starts)
    frontier = list(seen)
    while frontier:
        nxt = []
        for v in frontier:
            for w in adj.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return seen


def bowtie_decompose(g: Digraph) -> BowtieAssignment:
    """Six-way bow-tie partition of a digraph.

    LSCC is the largest strongly connected component (ties resolved to the
    one containing the smallest node id).  IN reaches the LSCC, OUT is
    reached from it; of the remainder, nodes both reachable from IN and
    reaching OUT are Tubes, nodes with exactly one of those properties are
    Tendrils, and the rest are Disconnected.
    """
    if not g.nodes:
        return BowtieAssignment({})
    nodes = sorted(g.nodes)
    succ = g.successors()
    pred = g.predecessors()
    sccs = _tarjan_scc(nodes, succ)
    max_size = max(len(c) for c in sccs)
    # ties resolved to the SCC containing the smallest node id
    lscc = set(min((c for c in sccs if len(c) == max_size), key=min))

    fwd = _reachable(lscc, succ)
    bwd = _reachable(lscc, pred)
    out = fwd - lscc
    in_ = bwd - lscc
    rest = set(nodes) - lscc - in_ - out
    from_in = _reachable(in_, succ) if in_ else set()
    to_out = _reachable(out, pred) if out else set()

    comp: dict = {}
    for v in nodes:
        if v in lscc:
            comp[v] = LSCC
        elif v in in_:
            comp[v] = IN
        elif v in out:
            comp[v] = OUT
        else:
            a = v in from_in
            b = v in to_out
            comp[v] = TUBES if a and b else (TENDRILS if a or b else DISCONNECTED)
    return BowtieAssignment(comp)
