"""Propagation and link-quality model.

Path gain is ``theta * d**-3``; the SINR of SBS ``i`` at its receiver sums
interference from every co-channel transmitter in the network, with the
noise power added once.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import ParameterError, SingularityError, StateError
from .topology import ABS_ID, Topology

UNASSIGNED = -1  # relay sentinel
NO_CHANNEL = 0  # channels are 1..K


@dataclass(frozen=True)
class RadioParams:
    gamma_min: float = 0.3
    theta: float = 0.09
    gain: float = 1.0
    p_max: float = 2.0
    noise: float = 1e-10
    zeta: float | None = None  # None -> 1 / lambda_hat
    k_channels: int = 3
    link_capacity: float = 3.0
    demand: float = 1.0
    lambda_hat: float = 100.0

    def __post_init__(self):
        if self.zeta is None:
            object.__setattr__(self, "zeta", 1.0 / self.lambda_hat if self.lambda_hat > 0 else math.nan)
        for name in ("theta", "gain", "p_max", "noise", "zeta", "lambda_hat"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ParameterError(f"{name} must be positive and finite, got {v}")
        # gamma_min = 0 is allowed so the zero-target limit of the power formulas is reachable
        if not (self.gamma_min >= 0 and math.isfinite(self.gamma_min)):
            raise ParameterError(f"gamma_min must be non-negative, got {self.gamma_min}")
        if int(self.k_channels) != self.k_channels or self.k_channels < 1:
            raise ParameterError(f"k_channels must be an integer >= 1, got {self.k_channels}")
        object.__setattr__(self, "k_channels", int(self.k_channels))
        if not (0 < self.demand <= self.link_capacity):
            raise ParameterError(
                f"need 0 < demand <= link_capacity, got demand={self.demand}, capacity={self.link_capacity}"
            )

    @property
    def flows_per_link(self) -> int:
        """How many SBS demands one link of capacity C can carry."""
        return int(math.floor(self.link_capacity / self.demand + 1e-12))

    def with_(self, **changes) -> "RadioParams":
        return replace(self, **changes)

    def to_section(self) -> dict[str, str]:
        return {k: repr(v) for k, v in asdict(self).items()}

    @classmethod
    def from_section(cls, section) -> "RadioParams":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in dict(section).items():
            if key not in known:
                raise ParameterError(f"unknown radio key {key!r}")
            kwargs[key] = int(raw) if key == "k_channels" else float(raw)
        return cls(**kwargs)

    def save(self, path) -> None:
        cp = configparser.ConfigParser()
        cp["radio"] = self.to_section()
        with open(path, "w") as fh:
            cp.write(fh)

    @classmethod
    def load(cls, path) -> "RadioParams":
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise ParameterError(f"cannot read {path}")
        return cls.from_section(cp["radio"] if cp.has_section("radio") else {})


@dataclass(eq=False)
class Assignment:
    """Per-node link state, one array per attribute.

    Arrays have length N+1 and are indexed by node id; slot 0 is the ABS,
    which never transmits. ``relay[i] == UNASSIGNED`` and ``channel[i] == 0``
    mark an SBS without a link.
    """

    relay: np.ndarray
    channel: np.ndarray
    power: np.ndarray

    @classmethod
    def empty(cls, n_sbs: int) -> "Assignment":
        return cls(
            relay=np.full(n_sbs + 1, UNASSIGNED, dtype=np.int64),
            channel=np.zeros(n_sbs + 1, dtype=np.int64),
            power=np.zeros(n_sbs + 1, dtype=float),
        )

    @property
    def n_sbs(self) -> int:
        return len(self.relay) - 1

    def copy(self) -> "Assignment":
        return Assignment(self.relay.copy(), self.channel.copy(), self.power.copy())

    def assigned(self) -> np.ndarray:
        """Ids of SBSs holding both a relay and a channel."""
        ids = np.arange(len(self.relay))
        return ids[(ids != ABS_ID) & (self.relay != UNASSIGNED) & (self.channel != NO_CHANNEL)]

    def path_to_abs(self, i: int) -> list[int]:
        """Nodes visited from ``i`` up to and including the ABS."""
        path = [i]
        seen = {i}
        node = i
        while node != ABS_ID:
            node = int(self.relay[node])
            if node == UNASSIGNED or node in seen:
                raise StateError(f"SBS {i} has no loop-free route to the ABS")
            path.append(node)
            seen.add(node)
        return path

    def hop_count(self, i: int) -> int:
        return len(self.path_to_abs(i)) - 1

    def validate(self, params: RadioParams) -> None:
        if np.any(self.power < 0) or np.any(self.power > params.p_max * (1 + 1e-12)):
            raise StateError("transmit power outside [0, p_max]")
        has_relay = self.relay[1:] != UNASSIGNED
        has_chan = self.channel[1:] != NO_CHANNEL
        if np.any(has_relay != has_chan):
            raise StateError("relay and channel must be assigned together")
        if np.any(self.channel[1:] > params.k_channels) or np.any(self.channel[1:] < 0):
            raise StateError("channel index outside 1..K")
        for i in self.assigned():
            self.path_to_abs(int(i))

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return (
            np.array_equal(self.relay, other.relay)
            and np.array_equal(self.channel, other.channel)
            and np.array_equal(self.power, other.power)
        )


def path_gain(params: RadioParams, d: float) -> float:
    if d <= 0:
        raise SingularityError(f"path gain undefined at distance {d}")
    return params.theta * d**-3


def gain_matrix(params: RadioParams, topology: Topology) -> np.ndarray:
    """``H[j, m]`` = gain from node j to node m; diagonal is NaN (no self link)."""
    d = topology.distances.copy()
    off = ~np.eye(len(d), dtype=bool)
    if np.any(d[off] == 0):
        raise SingularityError("two nodes share a position")
    np.fill_diagonal(d, np.nan)
    return params.theta * d**-3.0


def link_terms(H: np.ndarray, relay: np.ndarray, channel: np.ndarray, rx_ids: np.ndarray, tx_ids: np.ndarray):
    """Coupling between receivers of ``rx_ids`` and transmitters ``tx_ids``.

    Returns ``own`` (gain of each rx SBS to its relay), ``cross`` with
    ``cross[a, b]`` the gain from ``tx_ids[b]`` to the relay of ``rx_ids[a]``
    when the two share a channel (zero otherwise, and zero for b == a), and
    ``blocked``: True where the relay itself transmits on the link's channel.
    A node cannot receive on the channel it is sending on, so such a link's
    SINR is zero.
    """
    rec = relay[rx_ids]
    own = H[rx_ids, rec]
    same = channel[rx_ids][:, None] == channel[tx_ids][None, :]
    not_self = rx_ids[:, None] != tx_ids[None, :]
    is_rec = rec[:, None] == tx_ids[None, :]
    mask = same & not_self & ~is_rec
    cross = np.where(mask, H[np.ix_(tx_ids, rec)].T if len(rec) and len(tx_ids) else 0.0, 0.0)
    cross = np.nan_to_num(cross, nan=0.0)
    blocked = np.any(same & is_rec, axis=1)
    # the ABS is never a transmitter, so links into it are never blocked
    blocked &= rec != ABS_ID
    return own, cross, blocked


def sinr_vector(params: RadioParams, H: np.ndarray, assignment: Assignment, ids=None) -> np.ndarray:
    """SINR of each SBS in ``ids`` (default: all assigned) at its relay."""
    tx = assignment.assigned()
    ids = tx if ids is None else np.asarray(ids, dtype=np.int64)
    if len(ids) == 0:
        return np.zeros(0)
    own, cross, blocked = link_terms(H, assignment.relay, assignment.channel, ids, tx)
    interf = cross @ assignment.power[tx] + params.noise
    out = params.gain * assignment.power[ids] * own / interf
    out[blocked] = 0.0
    return out


def sinr(params: RadioParams, topology: Topology, assignment: Assignment, i: int) -> float:
    """SINR of SBS ``i`` at its relay, counting every co-channel transmitter."""
    if i == ABS_ID or assignment.relay[i] == UNASSIGNED or assignment.channel[i] == NO_CHANNEL:
        raise StateError(f"SBS {i} has no channel/relay assigned")
    r = int(assignment.relay[i])
    k = assignment.channel[i]
    d = topology.distances
    if r != ABS_ID and assignment.channel[r] == k:
        return 0.0
    signal = params.gain * assignment.power[i] * path_gain(params, d[i, r])
    interference = 0.0
    for j in assignment.assigned():
        if j == i or assignment.channel[j] != k:
            continue
        interference += assignment.power[j] * path_gain(params, d[j, r])
    return signal / (interference + params.noise)


def min_power_closed_form(params: RadioParams, d: float, interference: float) -> float:
    """Smallest power that meets the SINR target over distance ``d``."""
    if d <= 0:
        raise SingularityError(f"distance must be positive, got {d}")
    if interference < 0:
        raise ParameterError("interference must be non-negative")
    return params.gamma_min * (interference + params.noise) * d**3 / (params.gain * params.theta)


def _check_density(lam: float) -> None:
    if not lam > 0:
        raise ParameterError(f"density must be positive, got {lam}")


def interfering_radius_expected(params: RadioParams, lam: float) -> float:
    _check_density(lam)
    return (1.0 / (2.0 * math.sqrt(lam))) * (params.gamma_min / (params.zeta * params.gain)) ** (1.0 / 3.0)


def interfering_radius_for_power(params: RadioParams, power: float) -> float:
    """Distance at which a transmitter of ``power`` is received at ``zeta * noise``."""
    if not power >= 0:
        raise ParameterError("power must be non-negative")
    return (power * params.theta / (params.zeta * params.noise)) ** (1.0 / 3.0)


def expected_min_power(params: RadioParams, lam: float) -> float:
    """Expected minimum power on a nearest-neighbour link at density ``lam``."""
    _check_density(lam)
    return params.gamma_min * params.noise / (params.gain * params.theta * (2.0 * math.sqrt(lam)) ** 3)
