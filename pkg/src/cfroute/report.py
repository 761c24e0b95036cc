"""JSON / CSV experiment reports."""

from __future__ import annotations

import csv
import io
import json
import sys

from .sim import ExperimentSummary

TIMING_FIELDS = ("runtime_mean", "runtime_se", "runtime_max")


def experiment_dict(summary: ExperimentSummary, timing: bool = False, **labels) -> dict:
    runs = []
    for r in summary.runs:
        d = r.as_dict(timing=timing)
        d.pop("mnnt_values")
        runs.append(d)
    agg = summary.aggregate()
    if not timing:
        for f in TIMING_FIELDS:
            agg.pop(f, None)
    return {**labels, "policy": summary.policy, "per_replication": runs, "aggregate": agg}


def build_report(config: dict, experiments: list[dict]) -> dict:
    """A single experiment keeps the flat {config, per_replication, aggregate} shape."""
    if len(experiments) == 1:
        return {"config": config, **experiments[0]}
    return {"config": config, "experiments": experiments}


def _experiments(report: dict) -> list[dict]:
    return report.get("experiments", [report])


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def to_csv(report: dict) -> str:
    exps = _experiments(report)
    metric_cols = sorted({k for e in exps for run in e["per_replication"] for k in run})
    metric_cols = [c for c in metric_cols if c not in ("seed", "policy")]
    label_cols = sorted({k for e in exps for k in e
                         if k not in ("per_replication", "aggregate", "policy")})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*label_cols, "policy", "row", "seed", *metric_cols])
    for e in exps:
        labels = [e.get(k, "") for k in label_cols]
        for run in e["per_replication"]:
            w.writerow([*labels, e["policy"], "replication", run["seed"],
                        *(repr(run[c]) if isinstance(run[c], float) else run[c] for c in metric_cols)])
        for stat in ("mean", "sd", "se"):
            w.writerow([*labels, e["policy"], stat, "",
                        *(repr(e["aggregate"][c][stat]) if c in e["aggregate"] else ""
                          for c in metric_cols)])
    return buf.getvalue()


def emit_report(report: dict, fmt: str = "json", path: str | None = None) -> str:
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    text = to_json(report) if fmt == "json" else to_csv(report)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_report(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def read_csv_aggregates(text: str) -> dict:
    """Aggregate rows of a CSV report as {(labels..., policy): {metric: {stat: value}}}."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    n_keys, first_metric = header.index("row"), header.index("seed") + 1
    out: dict = {}
    for row in reader:
        stat = row[n_keys]
        if stat == "replication":
            continue
        key = tuple(row[:n_keys])
        for metric, value in zip(header[first_metric:], row[first_metric:]):
            if value != "":
                out.setdefault(key, {}).setdefault(metric, {})[stat] = float(value)
    return out
