"""Greedy relay selection followed by joint channel and power assignment.

The solver runs in two phases. ``build_relay_tree`` grows a backhaul tree
outward from the ABS, each step attaching the unconnected SBS that is
closest to some connected node with spare capacity. ``assign_channels_and_powers``
then walks the relay groups (children of one node) in attachment order,
moving group members one at a time to the least-loaded channel at their
shared receiver and keeping a move only if the network power sum does not
grow.

Capacity model: an SBS uplink carries the SBS's own demand plus the demand
of every SBS routed through it, and must stay within the link capacity.
The ABS terminates at most K backhaul links.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StateError
from .radio import (
    NO_CHANNEL,
    UNASSIGNED,
    Assignment,
    RadioParams,
    gain_matrix,
    link_terms,
    sinr_vector,
)
from .topology import ABS_ID, Topology


@dataclass(frozen=True)
class AscentConfig:
    power_iterations: int = 100
    convergence_tol: float = 1e-8
    sinr_tol: float = 1e-6

    def __post_init__(self):
        if self.power_iterations < 1:
            raise ParameterError("power_iterations must be >= 1")
        if not (self.convergence_tol > 0 and self.sinr_tol > 0):
            raise ParameterError("tolerances must be positive")


@dataclass
class RelayTree:
    parent: dict[int, int] = field(default_factory=dict)
    residual_capacity: dict[int, float] = field(default_factory=dict)
    unconnected: set[int] = field(default_factory=set)
    order: list[int] = field(default_factory=list)  # SBSs in attachment order

    def children(self, m: int) -> list[int]:
        return sorted(i for i, p in self.parent.items() if p == m)

    def path(self, i: int) -> list[int]:
        out = [i]
        while out[-1] != ABS_ID:
            out.append(self.parent[out[-1]])
            if len(out) > len(self.parent) + 2:
                raise StateError("relay tree contains a loop")
        return out

    def subtree_size(self, m: int) -> int:
        """SBSs whose route to the ABS uses m's uplink, m included."""
        return sum(1 for i in self.parent if m in self.path(i)[:-1])

    def relay_assignment(self, n_sbs: int) -> Assignment:
        a = Assignment.empty(n_sbs)
        for i, p in self.parent.items():
            a.relay[i] = p
        return a


@dataclass
class EvaluationReport:
    """Outcome of one solver run.

    ``sinr`` holds the SINR each connected SBS reached while every connected
    SBS was still transmitting; ``supported`` SBSs are then the only ones
    kept on air and ``assignment`` carries their re-tuned powers.
    """

    assignment: Assignment
    tree: RelayTree
    supported: frozenset[int]
    sinr: dict[int, float]
    final_sinr: dict[int, float]
    power_sum: float  # supported SBSs, final powers
    power_sum_attempted: float  # all connected SBSs before release
    path_lengths: dict[int, int]
    objective: float
    model: str = "mcm"

    @property
    def supported_count(self) -> int:
        return len(self.supported)


def build_relay_tree(topology: Topology, params: RadioParams, *, allow_relaying: bool = True) -> RelayTree:
    """Grow the backhaul tree by repeatedly attaching the closest feasible pair.

    A candidate relay ``m`` is feasible for a new SBS when every SBS on the
    route from ``m`` to the ABS has at least one demand of spare uplink
    capacity; the ABS itself is feasible while it has fewer than K direct
    links. When the nearest connected node is infeasible the next-nearest is
    tried. SBSs that never find a feasible relay stay unconnected. With
    ``allow_relaying=False`` only the ABS may be chosen (single-hop model).
    """
    n = topology.n_sbs
    C, R, K = params.link_capacity, params.demand, params.k_channels
    tree = RelayTree()
    tree.residual_capacity[ABS_ID] = K * C
    if n == 0:
        return tree

    D = topology.distances
    residual = np.full(n + 1, C, dtype=float)
    residual[ABS_ID] = K * C
    parent = np.full(n + 1, UNASSIGNED, dtype=np.int64)
    connected = np.zeros(n + 1, dtype=bool)
    connected[ABS_ID] = True
    abs_links = 0
    # smallest spare capacity on the route from each connected node up to the ABS
    route_min = np.full(n + 1, np.inf)
    eps = 1e-9 * C

    # the ABS-distance sort only fixes tie order between equal distances
    by_abs = np.argsort(D[ABS_ID, 1:], kind="stable") + 1
    unconnected = set(int(i) for i in by_abs)

    while unconnected:
        relay_ok = connected & (route_min >= R - eps)
        relay_ok[ABS_ID] = abs_links < K
        if not allow_relaying:
            relay_ok[1:] = False
        cand_m = np.flatnonzero(relay_ok)
        if len(cand_m) == 0:
            break
        cand_i = np.array(sorted(unconnected), dtype=np.int64)
        sub = D[np.ix_(cand_i, cand_m)]
        flat = int(np.argmin(sub))
        i = int(cand_i[flat // len(cand_m)])
        m = int(cand_m[flat % len(cand_m)])

        parent[i] = m
        connected[i] = True
        unconnected.discard(i)
        tree.parent[i] = m
        tree.order.append(i)
        residual[i] = C - R
        node = m
        while node != ABS_ID:
            residual[node] -= R
            node = parent[node]
        residual[ABS_ID] -= R
        if m == ABS_ID:
            abs_links += 1
        # refresh route minima in attachment order (parents precede children)
        for j in tree.order:
            p = parent[j]
            route_min[j] = min(residual[j], route_min[p])

    tree.unconnected = unconnected
    for node in [ABS_ID] + tree.order:
        tree.residual_capacity[node] = float(residual[node])
    return tree


class _PowerControl:
    """Synchronous capped power update ``p <- min(p_max, gamma_min * p / sinr)`` over an active set."""

    def __init__(self, params: RadioParams, H: np.ndarray, relay: np.ndarray, channel: np.ndarray, active: np.ndarray):
        self.params = params
        self.active = np.asarray(active, dtype=np.int64)
        tx = np.flatnonzero((channel != NO_CHANNEL) & (relay != UNASSIGNED))
        tx = tx[tx != ABS_ID]
        self.tx = tx
        own, cross, blocked = link_terms(H, relay, channel, self.active, tx)
        self.own = own
        self.cross = cross
        self.blocked = blocked

    def sinr(self, power: np.ndarray) -> np.ndarray:
        interf = self.cross @ power[self.tx] + self.params.noise
        s = self.params.gain * power[self.active] * self.own / interf
        s[self.blocked] = 0.0
        return s

    def step(self, power: np.ndarray) -> np.ndarray:
        # gamma_min * p / sinr written as gamma_min * (I + noise) / (g * h): only sums and
        # products of non-negative terms, so rounding cannot make a decreasing sequence tick up
        interf = self.cross @ power[self.tx] + self.params.noise
        target = self.params.gamma_min * interf / (self.params.gain * self.own)
        target[self.blocked] = np.inf
        new = power.copy()
        new[self.active] = np.minimum(self.params.p_max, target)
        return new

    def run(self, power: np.ndarray, iterations: int, tol: float, trace: list | None = None) -> np.ndarray:
        if trace is not None:
            trace.append(power[self.active].copy())
        for _ in range(iterations):
            new = self.step(power)
            pa_old = power[self.active]
            pa_new = new[self.active]
            power = new
            if trace is not None:
                trace.append(pa_new.copy())
            scale = np.maximum(np.abs(pa_old), np.finfo(float).tiny)
            if len(pa_old) == 0 or np.max(np.abs(pa_new - pa_old) / scale) < tol:
                break
        return power


def power_control_iterate(
    topology: Topology,
    params: RadioParams,
    assignment: Assignment,
    active,
    iterations: int = 100,
    tol: float = 1e-8,
    *,
    trace: list | None = None,
) -> Assignment:
    """Iterate the capped target-tracking update over the ``active`` SBSs.

    Powers of inactive transmitters are held fixed and still interfere.
    Stops once the largest relative power change drops below ``tol`` or
    after ``iterations`` updates. If ``trace`` is a list, the active power
    vector is appended before the first and after every update.
    """
    active = np.array(sorted(int(i) for i in active), dtype=np.int64)
    for i in active:
        if assignment.relay[i] == UNASSIGNED or assignment.channel[i] == NO_CHANNEL:
            raise StateError(f"SBS {i} is active but has no relay/channel")
    H = gain_matrix(params, topology)
    pc = _PowerControl(params, H, assignment.relay, assignment.channel, active)
    out = assignment.copy()
    out.power = pc.run(out.power.copy(), iterations, tol, trace)
    return out


def _received_per_channel(params, H, assignment, m, exclude):
    """Total received power at node m on each channel, from all transmitters but ``exclude``."""
    K = params.k_channels
    load = np.zeros(K + 1)
    tx = assignment.assigned()
    tx = tx[(tx != exclude) & (tx != m)]
    if len(tx):
        np.add.at(load, assignment.channel[tx], assignment.power[tx] * H[tx, m])
    load = load[1:]
    if m != ABS_ID and assignment.channel[m] != NO_CHANNEL:
        # m cannot listen on the channel it transmits on
        load[assignment.channel[m] - 1] = np.inf
    return load


def assign_channels_and_powers(
    topology: Topology,
    params: RadioParams,
    tree: RelayTree,
    config: AscentConfig = AscentConfig(),
    *,
    H: np.ndarray | None = None,
    move_log: list | None = None,
) -> Assignment:
    """Channel assignment per relay group followed by power control.

    Groups are processed in attachment order of their receiver (ABS first).
    Every member starts on channel 1. Then, once per member, the member
    with the highest power that has not yet been considered is moved to
    the channel with the least received power at the receiver; powers of
    the group and all earlier groups are reset to ``p_max`` and iterated,
    and the move is undone if the summed power went up. ``move_log``
    collects ``(sbs, channel, before, after, accepted)`` tuples.
    """
    n = topology.n_sbs
    if H is None:
        H = gain_matrix(params, topology)
    a = tree.relay_assignment(n)
    frozen: list[int] = []
    T, tol = config.power_iterations, config.convergence_tol

    def settle(active_ids):
        pc = _PowerControl(params, H, a.relay, a.channel, active_ids)
        p = a.power.copy()
        p[active_ids] = params.p_max
        return pc.run(p, T, tol)

    for m in [ABS_ID] + tree.order:
        group = tree.children(m)
        if not group:
            continue
        a.channel[group] = 1
        active = np.array(sorted(frozen + group), dtype=np.int64)
        a.power = settle(active)
        current = float(a.power[active].sum())
        considered: set[int] = set()
        for _ in range(len(group)):
            pending = [i for i in group if i not in considered]
            # highest power first, ties to the lowest id
            i_sel = min(pending, key=lambda i: (-a.power[i], i))
            load = _received_per_channel(params, H, a, m, exclude=i_sel)
            k_sel = int(np.argmin(load)) + 1
            considered.add(i_sel)
            if k_sel == a.channel[i_sel]:
                continue
            old_k, old_p = int(a.channel[i_sel]), a.power.copy()
            a.channel[i_sel] = k_sel
            a.power = settle(active)
            trial = float(a.power[active].sum())
            accepted = trial <= current
            if move_log is not None:
                move_log.append((i_sel, k_sel, current, trial, accepted))
            if accepted:
                current = trial
            else:
                a.channel[i_sel] = old_k
                a.power = old_p
        frozen.extend(group)
    return a


def supported_set(params: RadioParams, assignment: Assignment, sinrs: dict[int, float], sinr_tol: float) -> set[int]:
    """SBSs meeting the SINR target whose whole route to the ABS also does."""
    ok = {i for i, s in sinrs.items() if s >= params.gamma_min * (1 - sinr_tol)}
    out: set[int] = set()
    for i in ok:
        node, good = i, True
        while node != ABS_ID:
            if node not in ok:
                good = False
                break
            node = int(assignment.relay[node])
        if good:
            out.add(i)
    return out


def finalize(
    topology: Topology,
    params: RadioParams,
    tree: RelayTree,
    assignment: Assignment,
    config: AscentConfig,
    *,
    alpha: float = 0.1,
    model: str = "mcm",
    H: np.ndarray | None = None,
) -> EvaluationReport:
    """Switch off unsupported SBSs and re-tune the powers of the rest.

    Unsupported SBSs release their channel and power. The supported ones are
    re-run through power control from ``p_max``; removing interferers can
    only raise SINR, so the loop below normally ends after one pass.
    """
    if H is None:
        H = gain_matrix(params, topology)
    ids = assignment.assigned()
    sinr_all = dict(zip(ids.tolist(), sinr_vector(params, H, assignment, ids).tolist()))
    attempted = float(assignment.power[ids].sum())
    supported = supported_set(params, assignment, sinr_all, config.sinr_tol)

    a = assignment.copy()
    while True:
        drop = [int(i) for i in a.assigned() if int(i) not in supported]
        for i in drop:
            a.relay[i] = UNASSIGNED
            a.channel[i] = NO_CHANNEL
            a.power[i] = 0.0
        keep = np.array(sorted(supported), dtype=np.int64)
        if len(keep) == 0:
            final = {}
            break
        pc = _PowerControl(params, H, a.relay, a.channel, keep)
        p = a.power.copy()
        p[keep] = params.p_max
        a.power = pc.run(p, config.power_iterations, config.convergence_tol)
        final = dict(zip(keep.tolist(), sinr_vector(params, H, a, keep).tolist()))
        still = supported_set(params, a, final, config.sinr_tol)
        if still == supported:
            break
        supported = still

    power_sum = float(sum(a.power[i] for i in supported))
    paths = {i: a.hop_count(i) for i in supported}
    objective = len(supported) - alpha * power_sum
    return EvaluationReport(
        assignment=a,
        tree=tree,
        supported=frozenset(supported),
        sinr=sinr_all,
        final_sinr=final,
        power_sum=power_sum,
        power_sum_attempted=attempted,
        path_lengths=paths,
        objective=objective,
        model=model,
    )


def solve(
    topology: Topology,
    params: RadioParams,
    config: AscentConfig = AscentConfig(),
    *,
    alpha: float = 0.1,
) -> EvaluationReport:
    """Multi-hop solve: build the relay tree, then assign channels and powers."""
    H = gain_matrix(params, topology) if topology.n_sbs else np.zeros((1, 1))
    tree = build_relay_tree(topology, params)
    a = assign_channels_and_powers(topology, params, tree, config, H=H)
    return finalize(topology, params, tree, a, config, alpha=alpha, model="mcm", H=H)


def objective_value(report: EvaluationReport, alpha: float) -> float:
    return report.supported_count - alpha * report.power_sum


def mean_path_length(report: EvaluationReport) -> float:
    if not report.path_lengths:
        return 0.0
    return float(np.mean(list(report.path_lengths.values())))


__all__ = [
    "AscentConfig",
    "RelayTree",
    "EvaluationReport",
    "build_relay_tree",
    "assign_channels_and_powers",
    "power_control_iterate",
    "supported_set",
    "finalize",
    "solve",
    "objective_value",
    "mean_path_length",
]

