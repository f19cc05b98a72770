"""Exhaustive solver for small instances of the joint relay/channel/power problem.

Every admissible backhaul forest is enumerated (any subset of SBSs may be
left out), every channel labelling of its members is tried, and the
minimum powers meeting the SINR target are obtained from a linear system.
With a positive power weight the objective strictly prefers smaller
powers, and the componentwise-minimal solution of ``p = A p + b`` is the
smallest feasible power vector, so nothing optimal is lost by solving only
at equality.

Search order is by supported-set size, largest first: a configuration with
``k`` supported SBSs scores strictly below ``k``, so once the incumbent
reaches ``k`` no smaller set can beat it.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .ascent import RelayTree
from .errors import ParameterError, SizeError
from .radio import NO_CHANNEL, Assignment, RadioParams, gain_matrix
from .topology import ABS_ID, Topology

DEFAULT_MAX_SBS = 7
DEFAULT_MAX_CHANNELS = 3


@dataclass
class ExactSolution:
    assignment: Assignment
    objective: float
    supported: frozenset[int]
    optimal: bool
    power_sum: float = 0.0
    configurations: int = 0

    def recompute_objective(self, alpha: float) -> float:
        return len(self.supported) - alpha * float(sum(self.assignment.power[i] for i in self.supported))


def _prufer_to_parents(seq: tuple[int, ...], labels: list[int]) -> dict[int, int]:
    """Decode a Prüfer sequence over ``labels`` (label 0 = ABS) into parent pointers rooted at the ABS."""
    n = len(labels)
    degree = {v: 1 for v in labels}
    for v in seq:
        degree[v] += 1
    leaves = [v for v in labels if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.append((u, w))
    adj: dict[int, list[int]] = {v: [] for v in labels}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    parent = {}
    stack = [ABS_ID]
    seen = {ABS_ID}
    while stack:
        node = stack.pop()
        for nb in adj[node]:
            if nb not in seen:
                seen.add(nb)
                parent[nb] = node
                stack.append(nb)
    assert len(parent) == n - 1
    return parent


def _rooted_trees(members: tuple[int, ...]) -> Iterator[dict[int, int]]:
    """All spanning trees of ``members`` plus the ABS, as parent maps."""
    if not members:
        yield {}
        return
    labels = [ABS_ID, *members]
    if len(labels) == 2:
        yield {members[0]: ABS_ID}
        return
    for seq in itertools.product(labels, repeat=len(labels) - 2):
        yield _prufer_to_parents(seq, labels)


def _admissible(parent: dict[int, int], params: RadioParams) -> bool:
    """Route capacity (own demand plus relayed demand per uplink) and ABS link limit."""
    if sum(1 for p in parent.values() if p == ABS_ID) > params.k_channels:
        return False
    load = {i: 0 for i in parent}
    for i in parent:
        node = i
        while node != ABS_ID:
            load[node] += 1
            node = parent[node]
    return max(load.values(), default=0) <= params.flows_per_link


def _tree_from_parents(parent: dict[int, int], params: RadioParams, n_sbs: int) -> RelayTree:
    tree = RelayTree()
    load = {i: 0 for i in parent}
    for i in parent:
        node = i
        while node != ABS_ID:
            load[node] += 1
            node = parent[node]
    # attachment order: breadth-first from the ABS
    order, frontier = [], [ABS_ID]
    while frontier:
        nxt = []
        for m in frontier:
            for c in sorted(i for i, p in parent.items() if p == m):
                order.append(c)
                nxt.append(c)
        frontier = nxt
    tree.parent = dict(parent)
    tree.order = order
    tree.residual_capacity = {ABS_ID: params.k_channels * params.link_capacity - params.demand * len(parent)}
    for i in parent:
        tree.residual_capacity[i] = params.link_capacity - params.demand * load[i]
    tree.unconnected = set(range(1, n_sbs + 1)) - set(parent)
    return tree


def _check_size(topology: Topology, params: RadioParams, max_sbs: int, max_channels: int) -> None:
    if topology.n_sbs > max_sbs:
        raise SizeError(f"{topology.n_sbs} SBSs exceeds the enumeration cap of {max_sbs}")
    if params.k_channels > max_channels:
        raise SizeError(f"{params.k_channels} channels exceeds the enumeration cap of {max_channels}")


def _forests_of_size(n_sbs: int, k: int, params: RadioParams) -> Iterator[dict[int, int]]:
    for members in itertools.combinations(range(1, n_sbs + 1), k):
        for parent in _rooted_trees(members):
            if _admissible(parent, params):
                yield parent


def enumerate_relay_forests(
    topology: Topology,
    params: RadioParams,
    *,
    max_sbs: int = DEFAULT_MAX_SBS,
) -> Iterator[RelayTree]:
    """Yield every admissible forest rooted at the ABS, including the empty one."""
    if topology.n_sbs > max_sbs:
        raise SizeError(f"{topology.n_sbs} SBSs exceeds the enumeration cap of {max_sbs}")
    n = topology.n_sbs
    for k in range(n + 1):
        for parent in _forests_of_size(n, k, params):
            yield _tree_from_parents(parent, params, n)


@lru_cache(maxsize=None)
def _canonical_labellings(k: int, n_channels: int) -> np.ndarray:
    """Channel labellings of k ordered items up to relabelling of channels.

    Each returned row is the lexicographically smallest member of its
    relabelling class: the first item uses channel 1 and every later item
    uses at most one more than the largest channel seen so far.
    """
    rows: list[tuple[int, ...]] = []

    def grow(prefix: list[int], top: int):
        if len(prefix) == k:
            rows.append(tuple(prefix))
            return
        for c in range(1, min(top + 1, n_channels) + 1):
            grow(prefix + [c], max(top, c))

    grow([], 0)
    return np.array(rows, dtype=np.int64).reshape(len(rows), k)


def min_powers_for(
    topology: Topology,
    params: RadioParams,
    tree: RelayTree | dict,
    channels,
    *,
    H: np.ndarray | None = None,
) -> np.ndarray | None:
    """Smallest powers that give every SBS in ``tree`` exactly the SINR target.

    ``channels`` maps SBS id to channel (dict or length N+1 array). Returns
    an array of length N+1 (zeros outside the tree), or None when no power
    vector within ``[0, p_max]`` exists.
    """
    parent = tree.parent if isinstance(tree, RelayTree) else dict(tree)
    ids = np.array(sorted(parent), dtype=np.int64)
    out = np.zeros(topology.n_sbs + 1)
    if len(ids) == 0:
        return out
    if H is None:
        H = gain_matrix(params, topology)
    ch = np.array([int(channels[i]) for i in ids], dtype=np.int64)
    if np.any(ch == NO_CHANNEL):
        raise ParameterError("every SBS in the tree needs a channel")
    p = _solve_batch(params, H, ids, np.array([parent[i] for i in ids]), ch[None, :])
    if p is None or not np.isfinite(p[0]).all():
        return None
    out[ids] = p[0]
    return out


def _solve_batch(params, H, ids, rec, labels):
    """Solve ``(I - A) p = b`` for each labelling row; infeasible rows become NaN."""
    k = len(ids)
    own = H[ids, rec]
    # gain from transmitter ids[c] into receiver of ids[a]
    cross = H[np.ix_(ids, rec)].T.copy()
    np.fill_diagonal(cross, 0.0)
    cross = np.nan_to_num(cross, nan=0.0)
    G = params.gamma_min * cross / (params.gain * own[:, None])
    b = params.gamma_min * params.noise / (params.gain * own)

    same = labels[:, :, None] == labels[:, None, :]
    # relay transmitting on the channel it listens on
    rec_pos = {int(v): j for j, v in enumerate(ids)}
    blocked = np.zeros(len(labels), dtype=bool)
    for a in range(k):
        j = rec_pos.get(int(rec[a]))
        if j is not None:
            blocked |= labels[:, a] == labels[:, j]
    A = np.where(same, G[None, :, :], 0.0)
    M = np.eye(k)[None, :, :] - A
    with np.errstate(all="ignore"):
        try:
            p = np.linalg.solve(M, np.broadcast_to(b, (len(labels), k))[..., None])[..., 0]
        except np.linalg.LinAlgError:
            p = np.stack([_safe_solve(M[r], b) for r in range(len(labels))])
    # a strictly positive solution with b > 0 certifies spectral radius < 1
    ok = ~blocked & np.all(p > 0, axis=1) & np.all(p <= params.p_max, axis=1) & np.all(np.isfinite(p), axis=1)
    p[~ok] = np.nan
    return p


def _safe_solve(M, b):
    try:
        return np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        return np.full(len(b), np.nan)


def solve_exact(
    topology: Topology,
    params: RadioParams,
    alpha: float = 0.1,
    *,
    max_sbs: int = DEFAULT_MAX_SBS,
    max_channels: int = DEFAULT_MAX_CHANNELS,
) -> ExactSolution:
    """Maximise ``supported - alpha * power_sum`` by exhaustive search.

    Ties go to the lower power sum, then to the lexicographically smaller
    channel vector.
    """
    _check_size(topology, params, max_sbs, max_channels)
    # alpha = 0 would allow non-tight optima; alpha > 1/p_max could make dropping an SBS pay off
    if not (0 < alpha <= 1.0 / params.p_max):
        raise ParameterError(f"alpha must lie in (0, 1/p_max], got {alpha}")
    n = topology.n_sbs
    best_key = (0.0, -0.0, ())  # empty configuration
    best = (frozenset(), {}, {}, np.zeros(n + 1))
    if n == 0:
        return ExactSolution(Assignment.empty(0), 0.0, frozenset(), True, 0.0, 1)
    H = gain_matrix(params, topology)
    K = params.k_channels
    configs = 1

    for k in range(n, 0, -1):
        if best_key[0] >= k:
            break
        labels_all = _canonical_labellings(k, K)
        for parent in _forests_of_size(n, k, params):
            ids = np.array(sorted(parent), dtype=np.int64)
            rec = np.array([parent[i] for i in ids], dtype=np.int64)
            configs += len(labels_all)
            p = _solve_batch(params, H, ids, rec, labels_all)
            feasible = np.flatnonzero(np.isfinite(p[:, 0]))
            if len(feasible) == 0:
                continue
            sums = p[feasible].sum(axis=1)
            for r, s in zip(feasible, sums):
                full = np.zeros(n + 1, dtype=np.int64)
                full[ids] = labels_all[r]
                key = (k - alpha * float(s), -float(s), tuple(-c for c in full[1:]))
                if key > best_key:
                    best_key = key
                    powers = np.zeros(n + 1)
                    powers[ids] = p[r]
                    best = (frozenset(int(i) for i in ids), dict(parent), {int(i): int(c) for i, c in zip(ids, labels_all[r])}, powers)

    supported, parent, chans, powers = best
    a = Assignment.empty(n)
    for i in supported:
        a.relay[i] = parent[i]
        a.channel[i] = chans[i]
        a.power[i] = powers[i]
    power_sum = float(powers.sum())
    return ExactSolution(
        assignment=a,
        objective=len(supported) - alpha * power_sum,
        supported=supported,
        optimal=True,
        power_sum=power_sum,
        configurations=configs,
    )
