"""CSV writers for experiment metrics and per-SBS assignments.

Floats are written with ``repr`` so that output bytes depend only on the
computed values.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .bounds import bounds_report
from .harness import TrialBatch, TrialMetrics
from .radio import Assignment, RadioParams, gain_matrix, sinr_vector
from .topology import Topology

METRICS_HEADER = (
    "lambda",
    "seed",
    "model",
    "supported",
    "norm_capacity",
    "power_sum",
    "power_per_device",
    "sinr_sum",
    "mean_path_len",
    "thr_lb",
    "thr_ub",
)
ASSIGNMENT_HEADER = ("sbs_id", "parent_id", "channel", "power_watts", "sinr", "supported")


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _metric_cells(m: TrialMetrics) -> list[str]:
    return [
        _num(m.supported_count),
        _num(m.normalized_capacity),
        _num(m.power_sum),
        _num(m.power_per_device),
        _num(m.sinr_sum),
        _num(m.mean_path_length),
        _num(m.throughput_lb),
        _num(m.throughput_ub),
    ]


def metrics_csv(*batches: TrialBatch) -> str:
    """Bounds comment block, then per-trial rows and mean/stderr rows per density."""
    out = io.StringIO()
    cfg = batches[0].config
    for lam in cfg.lambda_grid:
        for line in bounds_report(cfg.radio, cfg.region, lam).comment_lines(lam):
            out.write(line + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for batch in batches:
        for lam in batch.config.lambda_grid:
            for rec in batch.at(lam):
                w.writerow([_num(lam), str(rec.seed), rec.model, *_metric_cells(rec.metrics)])
            mean, err = batch.aggregate(lam)
            w.writerow([_num(lam), "mean", batch.model, *_metric_cells(mean)])
            w.writerow([_num(lam), "stderr", batch.model, *_metric_cells(err)])
    return out.getvalue()


def assignment_csv(
    topology: Topology,
    params: RadioParams,
    assignment: Assignment,
    supported,
    *,
    objective: float | None = None,
) -> str:
    """One row per SBS; unconnected SBSs have parent -1, channel 0 and zero SINR."""
    H = gain_matrix(params, topology) if topology.n_sbs else None
    ids = assignment.assigned()
    s = dict(zip(ids.tolist(), sinr_vector(params, H, assignment, ids).tolist())) if len(ids) else {}
    supported = set(int(i) for i in supported)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(ASSIGNMENT_HEADER)
    for i in range(1, topology.n_sbs + 1):
        parent = int(assignment.relay[i])
        w.writerow([
            str(i),
            str(parent),
            str(int(assignment.channel[i])),
            _num(assignment.power[i]),
            _num(s.get(i, 0.0)),
            "1" if i in supported else "0",
        ])
    if objective is not None:
        out.write(f"# objective={objective!r}\n")
    return out.getvalue()


def read_assignment_csv(text: str) -> tuple[Assignment, set[int], float | None]:
    lines = text.splitlines()
    objective = None
    body = []
    for line in lines:
        if line.startswith("# objective="):
            objective = float(line.split("=", 1)[1])
        elif not line.startswith("#") and line.strip():
            body.append(line)
    rows = list(csv.DictReader(body))
    a = Assignment.empty(len(rows))
    supported = set()
    for r in rows:
        i = int(r["sbs_id"])
        a.relay[i] = int(r["parent_id"])
        a.channel[i] = int(r["channel"])
        a.power[i] = float(r["power_watts"])
        if r["supported"] == "1":
            supported.add(i)
    return a, supported, objective
