"""Monte Carlo experiment driver and the single-hop baseline.

One trial samples a topology for a (density, seed) pair, runs a solver and
reduces its report to ``TrialMetrics``. A batch sweeps the density grid
with seeds ``seed_base + t`` for ``t < trials``; the same seeds are used at
every density and by both models, so MCM/SCM comparisons are paired.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .ascent import (
    AscentConfig,
    EvaluationReport,
    assign_channels_and_powers,
    build_relay_tree,
    finalize,
    solve,
)
from .bounds import capacity_upper_bound, power_sum_bound
from .errors import ParameterError, TrialError
from .radio import RadioParams, gain_matrix
from .topology import Region, Topology, sample_ppp

MODELS = ("mcm", "scm")
# lower/upper edge of the accepted power-sum ratio when density quadruples
SCALING_WINDOW = (0.3, 0.8)


@dataclass(frozen=True)
class ScenarioConfig:
    # a 3 m disc keeps the SBS count in the tens for densities near 1 per m^2
    region: Region = Region(radius=3.0)
    lambda_grid: tuple[float, ...] = (0.5, 1.0, 2.0)
    radio: RadioParams = RadioParams()
    ascent: AscentConfig = AscentConfig()
    trials: int = 50
    model: str = "mcm"
    alpha: float = 0.1
    seed_base: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lambda_grid", tuple(float(x) for x in self.lambda_grid))
        if int(self.trials) != self.trials or self.trials < 1:
            raise ParameterError(f"trials must be an integer >= 1, got {self.trials}")
        if not self.lambda_grid:
            raise ParameterError("lambda_grid must not be empty")
        for lam in self.lambda_grid:
            if not (0 < lam <= self.radio.lambda_hat):
                raise ParameterError(f"density {lam} outside (0, lambda_hat={self.radio.lambda_hat}]")
        if self.model not in MODELS:
            raise ParameterError(f"model must be one of {MODELS}, got {self.model!r}")
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")

    def with_(self, **changes) -> "ScenarioConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return ScenarioConfig(**d)

    def to_parser(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser()
        cp["region"] = {
            "center_x": repr(self.region.center[0]),
            "center_y": repr(self.region.center[1]),
            "radius": repr(self.region.radius),
        }
        cp["radio"] = self.radio.to_section()
        cp["ascent"] = {k: repr(v) for k, v in asdict(self.ascent).items()}
        cp["experiment"] = {
            "lambda_grid": ", ".join(repr(x) for x in self.lambda_grid),
            "trials": str(self.trials),
            "model": self.model,
            "alpha": repr(self.alpha),
            "seed_base": str(self.seed_base),
        }
        return cp

    def save(self, path) -> None:
        with open(path, "w") as fh:
            self.to_parser().write(fh)

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser) -> "ScenarioConfig":
        known = {"region", "radio", "ascent", "experiment"}
        extra = set(cp.sections()) - known
        if extra:
            raise ParameterError(f"unknown config sections: {sorted(extra)}")
        kwargs: dict = {}
        try:
            if cp.has_section("region"):
                s = dict(cp["region"])
                _reject_unknown("region", s, {"center_x", "center_y", "radius"})
                kwargs["region"] = Region(
                    center=(float(s.get("center_x", 0.0)), float(s.get("center_y", 0.0))),
                    radius=float(s.get("radius", cls.region.radius)),
                )
            if cp.has_section("radio"):
                kwargs["radio"] = RadioParams.from_section(cp["radio"])
            if cp.has_section("ascent"):
                s = dict(cp["ascent"])
                _reject_unknown("ascent", s, {"power_iterations", "convergence_tol", "sinr_tol"})
                conv = {"power_iterations": int, "convergence_tol": float, "sinr_tol": float}
                kwargs["ascent"] = AscentConfig(**{k: conv[k](v) for k, v in s.items()})
            if cp.has_section("experiment"):
                s = dict(cp["experiment"])
                _reject_unknown("experiment", s, {"lambda_grid", "trials", "model", "alpha", "seed_base"})
                if "lambda_grid" in s:
                    kwargs["lambda_grid"] = tuple(float(x) for x in s["lambda_grid"].split(",") if x.strip())
                if "trials" in s:
                    kwargs["trials"] = int(s["trials"])
                if "model" in s:
                    kwargs["model"] = s["model"].strip().lower()
                if "alpha" in s:
                    kwargs["alpha"] = float(s["alpha"])
                if "seed_base" in s:
                    kwargs["seed_base"] = int(s["seed_base"])
        except ValueError as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(str(exc)) from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        cp = configparser.ConfigParser()
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ParameterError(f"cannot read config {path}: {exc}") from exc
        return cls.from_parser(cp)


def _reject_unknown(section: str, values: dict, allowed: set[str]) -> None:
    bad = set(values) - allowed
    if bad:
        raise ParameterError(f"unknown keys in [{section}]: {sorted(bad)}")


def solve_scm(
    topology: Topology,
    params: RadioParams,
    config: AscentConfig = AscentConfig(),
    *,
    alpha: float = 0.1,
) -> EvaluationReport:
    """Single-hop baseline: every admitted SBS links straight to the ABS.

    The ABS terminates at most K links, so the K SBSs nearest to it are
    admitted; channel assignment and power control are the same as for the
    multi-hop solver, run on the one relay group at the ABS.
    """
    H = gain_matrix(params, topology) if topology.n_sbs else np.zeros((1, 1))
    tree = build_relay_tree(topology, params, allow_relaying=False)
    a = assign_channels_and_powers(topology, params, tree, config, H=H)
    return finalize(topology, params, tree, a, config, alpha=alpha, model="scm", H=H)


def run_solver(model: str, topology: Topology, params: RadioParams, config: AscentConfig, alpha: float) -> EvaluationReport:
    if model == "mcm":
        return solve(topology, params, config, alpha=alpha)
    if model == "scm":
        return solve_scm(topology, params, config, alpha=alpha)
    raise ParameterError(f"unknown model {model!r}")


@dataclass(frozen=True)
class TrialMetrics:
    supported_count: float
    normalized_capacity: float  # per m^2
    power_sum: float  # W
    power_density: float  # W per m^2
    power_per_device: float  # W
    sinr_sum: float
    mean_path_length: float  # hops
    throughput_lb: float
    throughput_ub: float


METRIC_NAMES = tuple(f.name for f in fields(TrialMetrics))


def compute_metrics(report: EvaluationReport, region: Region) -> TrialMetrics:
    """Reduce a solver report to per-trial metrics over supported SBSs only.

    The throughput upper bound treats every supported link as a one-hop
    delivery, so it is the plain SINR sum; the lower bound divides that
    sum by the mean end-to-end hop count.
    """
    area = region.enclosed_area()
    ids = sorted(report.supported)
    n = len(ids)
    if n == 0:
        return TrialMetrics(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    sinr_sum = float(sum(report.final_sinr[i] for i in ids))
    hops = float(np.mean([report.path_lengths[i] for i in ids]))
    return TrialMetrics(
        supported_count=n,
        normalized_capacity=n / area,
        power_sum=report.power_sum,
        power_density=report.power_sum / area,
        power_per_device=report.power_sum / n,
        sinr_sum=sinr_sum,
        mean_path_length=hops,
        throughput_lb=sinr_sum / hops,
        throughput_ub=sinr_sum,
    )


@dataclass(frozen=True)
class TrialRecord:
    lam: float
    seed: int
    model: str
    metrics: TrialMetrics


@dataclass
class TrialBatch:
    config: ScenarioConfig
    model: str
    records: list[TrialRecord] = field(default_factory=list)

    def at(self, lam: float) -> list[TrialRecord]:
        return [r for r in self.records if r.lam == lam]

    def values(self, lam: float, metric: str) -> np.ndarray:
        return np.array([getattr(r.metrics, metric) for r in self.at(lam)], dtype=float)

    def mean(self, lam: float, metric: str) -> float:
        return float(np.mean(self.values(lam, metric)))

    def stderr(self, lam: float, metric: str) -> float:
        v = self.values(lam, metric)
        return float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0

    def aggregate(self, lam: float) -> tuple[TrialMetrics, TrialMetrics]:
        mean = TrialMetrics(**{m: self.mean(lam, m) for m in METRIC_NAMES})
        err = TrialMetrics(**{m: self.stderr(lam, m) for m in METRIC_NAMES})
        return mean, err

    def means(self, metric: str) -> list[float]:
        return [self.mean(lam, metric) for lam in self.config.lambda_grid]


def seeds(config: ScenarioConfig) -> list[int]:
    return [config.seed_base + t for t in range(config.trials)]


def run_trial(config: ScenarioConfig, lam: float, seed: int, model: str | None = None) -> TrialRecord:
    model = model or config.model
    try:
        topo = sample_ppp(config.region, lam, seed)
        report = run_solver(model, topo, config.radio, config.ascent, config.alpha)
        return TrialRecord(lam, seed, model, compute_metrics(report, config.region))
    except Exception as exc:
        raise TrialError(lam, seed, exc) from exc


def run_batch(config: ScenarioConfig, model: str | None = None) -> TrialBatch:
    """Run every (density, seed) trial in grid order, seeds ascending."""
    model = model or config.model
    batch = TrialBatch(config, model)
    for lam in config.lambda_grid:
        for s in seeds(config):
            batch.records.append(run_trial(config, lam, s, model))
    return batch


@dataclass
class Comparison:
    mcm: TrialBatch
    scm: TrialBatch

    def ratio(self, lam: float, metric: str = "supported_count") -> float:
        d = self.scm.mean(lam, metric)
        return self.mcm.mean(lam, metric) / d if d else math.inf

    def relative_gap(self, lam: float, metric: str = "supported_count") -> float:
        a, b = self.mcm.mean(lam, metric), self.scm.mean(lam, metric)
        return abs(a - b) / max(abs(a), abs(b)) if max(abs(a), abs(b)) else 0.0


def compare(config: ScenarioConfig) -> Comparison:
    """Paired MCM and SCM batches over the same topologies."""
    return Comparison(run_batch(config, "mcm"), run_batch(config, "scm"))


@dataclass
class BoundsCheck:
    capacity_bound: float
    capacity_violations: list[tuple[float, int, float]]
    power_ratio: dict[float, float]  # mean power sum / expected full-network power sum
    scaling: dict[tuple[float, float], float]  # (lam, 4 lam) -> ratio of mean power sums
    scaling_flags: list[tuple[float, float]]

    @property
    def ok(self) -> bool:
        return not self.capacity_violations


def verify_bounds(batch: TrialBatch, params: RadioParams | None = None, region: Region | None = None) -> BoundsCheck:
    """Check every trial against the capacity bound and report power scaling.

    Capacity violations are hard failures. The power-sum comparisons are
    diagnostics: a density step of 4 should roughly halve the mean power
    sum, and steps whose ratio leaves ``SCALING_WINDOW`` are flagged.
    """
    params = params or batch.config.radio
    region = region or batch.config.region
    cap = capacity_upper_bound(params, region)
    violations = [
        (r.lam, r.seed, r.metrics.supported_count)
        for r in batch.records
        if r.metrics.supported_count > cap + 1e-9
    ]
    grid = batch.config.lambda_grid
    power_ratio = {lam: batch.mean(lam, "power_sum") / power_sum_bound(params, region, lam) for lam in grid}
    scaling, flags = {}, []
    for lam in grid:
        for other in grid:
            if math.isclose(other, 4 * lam, rel_tol=1e-9):
                base = batch.mean(lam, "power_sum")
                r = batch.mean(other, "power_sum") / base if base else math.nan
                scaling[(lam, other)] = r
                if not (SCALING_WINDOW[0] <= r <= SCALING_WINDOW[1]):
                    flags.append((lam, other))
    return BoundsCheck(cap, violations, power_ratio, scaling, flags)


__all__ = [
    "ScenarioConfig",
    "TrialMetrics",
    "TrialRecord",
    "TrialBatch",
    "Comparison",
    "BoundsCheck",
    "solve_scm",
    "run_solver",
    "compute_metrics",
    "run_trial",
    "run_batch",
    "compare",
    "verify_bounds",
]
