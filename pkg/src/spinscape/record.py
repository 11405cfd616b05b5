"""Experiment records (JSON) and plot-ready CSV exports.

One experiment = one self-contained JSON file: network, task, full
optimizer configuration (including the seed), every stored controller
with its metrics, and the analysis reports.  Records are written
atomically and, apart from the `created_utc` timestamp, are byte-identical
across reruns with the same seed and flags.

CSV column contracts (headers are exact):

    time-vs-infidelity    T,log10_infidelity
    infidelity-histogram  bin_left,count
    rank-vs-sensitivity   rank,log10_infidelity,log10_sensitivity_norm
    fastest-table         N,target,T_fastest,infidelity
    evolution             t,p,p_natural

Infidelities and sensitivity norms are floored at 1e-16 before taking
log10 so exact zeros stay finite.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import os
from typing import Any

import numpy as np

from . import dynamics, optimizer
from .errors import RecordError
from .network import SpinNetwork, build_network, single_excitation_hamiltonian

SCHEMA_VERSION = "1.0"
TOOL_VERSION = "0.1.0"
LOG_FLOOR = 1e-16

PLOT_KINDS = (
    "time-vs-infidelity",
    "infidelity-histogram",
    "rank-vs-sensitivity",
    "fastest-table",
    "evolution",
)


def jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return [float(x) for x in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def controller_to_dict(c: optimizer.Controller) -> dict:
    return {
        "bias": [float(x) for x in c.bias],
        "time": float(c.time),
        "fidelity": float(c.fidelity),
        "infidelity": float(c.infidelity),
        "sensitivity_norm": None if c.sensitivity_norm is None else float(c.sensitivity_norm),
        "provenance": jsonable(c.provenance),
    }


def controller_from_dict(d: dict) -> optimizer.Controller:
    prov = d["provenance"]
    return optimizer.Controller(
        bias=np.array(d["bias"], dtype=float),
        time=float(d["time"]),
        fidelity=float(d["fidelity"]),
        infidelity=float(d["infidelity"]),
        sensitivity_norm=None if d.get("sensitivity_norm") is None else float(d["sensitivity_norm"]),
        provenance=optimizer.Provenance(
            seed=int(prov["seed"]),
            restart_index=int(prov["restart_index"]),
            iterations=int(prov["iterations"]),
            converged=bool(prov["converged"]),
        ),
    )


def build_record(net: SpinNetwork, cset: optimizer.ControllerSet,
                 config: optimizer.OptimizationConfig,
                 task_extra: dict | None = None,
                 grid: list[dict] | None = None,
                 reports: dict | None = None) -> dict:
    task = {
        "m": cset.m,
        "n": cset.n,
        "objective_kind": cset.objective_kind,
        "delta_t": cset.delta_t,
    }
    if task_extra:
        task.update(task_extra)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "spinscape", "version": TOOL_VERSION},
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "network": {
            "n_spins": net.n_spins,
            "topology": net.topology,
            "kappa": float(net.kappa),
        },
        "task": task,
        "config": jsonable(config),
        "controllers": [controller_to_dict(c) for c in cset.controllers],
        "grid": grid,
        "reports": jsonable(reports) if reports else {},
    }


def network_from_record(record: dict) -> SpinNetwork:
    net = record["network"]
    return build_network(int(net["n_spins"]), net["topology"], float(net["kappa"]))


def controller_set_from_record(record: dict) -> optimizer.ControllerSet:
    task = record["task"]
    return optimizer.ControllerSet(
        m=int(task["m"]),
        n=int(task["n"]),
        objective_kind=task["objective_kind"],
        delta_t=None if task.get("delta_t") is None else float(task["delta_t"]),
        controllers=tuple(controller_from_dict(d) for d in record["controllers"]),
    )


def dumps_record(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def write_record(path: str, record: dict) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_record(record))
    os.replace(tmp, path)


def read_record(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            record = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise RecordError(f"cannot read record {path!r}: {exc}") from exc
    if not isinstance(record, dict) or "schema_version" not in record:
        raise RecordError(f"{path!r} is not an experiment record (no schema_version)")
    major = str(record["schema_version"]).split(".", 1)[0]
    ours = SCHEMA_VERSION.split(".", 1)[0]
    if major != ours:
        raise RecordError(
            f"unsupported record schema {record['schema_version']!r} (supported major: {ours})"
        )
    for key in ("network", "task", "config", "controllers"):
        if key not in record:
            raise RecordError(f"record {path!r} is missing the {key!r} section")
    return record


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _log10(x: float) -> float:
    return float(np.log10(max(float(x), LOG_FLOOR)))


def _write_csv(path: str, header: str, rows: list[list]) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, (int, str)) else _fmt(v) for v in row) + "\n")


def export_plot(record: dict, kind: str, out_path: str, index: int = 0,
                extra_records: list[dict] | None = None) -> None:
    """Write one plot-ready CSV for a record (see module docstring for columns)."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    if kind == "time-vs-infidelity":
        _export_time_vs_infidelity(record, out_path)
    elif kind == "infidelity-histogram":
        _export_histogram(record, out_path)
    elif kind == "rank-vs-sensitivity":
        _export_rank_sensitivity(record, out_path)
    elif kind == "fastest-table":
        _export_fastest_table([record, *(extra_records or [])], out_path)
    else:
        _export_evolution(record, out_path, index)


def _export_time_vs_infidelity(record: dict, out_path: str) -> None:
    rows = []
    if record.get("grid"):
        for entry in record["grid"]:
            rows.append([entry["t"], _log10(entry["best_infidelity"])])
    else:
        ctrls = sorted(record["controllers"], key=lambda c: (c["time"], c["infidelity"]))
        rows = [[c["time"], _log10(c["infidelity"])] for c in ctrls]
    _write_csv(out_path, "T,log10_infidelity", rows)


def _export_histogram(record: dict, out_path: str, bins: int = 40) -> None:
    vals = [_log10(c["infidelity"]) for c in record["controllers"]]
    rows = []
    if vals:
        counts, edges = np.histogram(np.array(vals), bins=bins)
        rows = [[edges[i], int(counts[i])] for i in range(len(counts))]
    _write_csv(out_path, "bin_left,count", rows)


def _export_rank_sensitivity(record: dict, out_path: str) -> None:
    ctrls = [c for c in record["controllers"] if c.get("sensitivity_norm") is not None]
    ctrls.sort(key=lambda c: c["infidelity"])
    rows = [
        [rank, _log10(c["infidelity"]), _log10(c["sensitivity_norm"])]
        for rank, c in enumerate(ctrls, start=1)
    ]
    _write_csv(out_path, "rank,log10_infidelity,log10_sensitivity_norm", rows)


def _export_fastest_table(records: list[dict], out_path: str) -> None:
    rows = []
    for record in records:
        cset = controller_set_from_record(record)
        cfg = record["config"]
        threshold = cfg.get("fidelity_threshold")
        if threshold is None:
            threshold = optimizer.default_threshold(cset.objective_kind)
        fastest = optimizer.fastest_above_threshold(cset, threshold)
        if fastest is None:
            continue  # no qualifying solution: nothing to report for this record
        rows.append([
            record["network"]["n_spins"],
            cset.n + 1,        # 1-based target label, as in the summary figures
            fastest.time,
            fastest.infidelity,
        ])
    _write_csv(out_path, "N,target,T_fastest,infidelity", rows)


def _export_evolution(record: dict, out_path: str, index: int) -> None:
    net = network_from_record(record)
    cset = controller_set_from_record(record)
    if not 0 <= index < len(cset.controllers):
        raise ValueError(f"controller index {index} out of range")
    ctrl = cset.controllers[index]
    eig = dynamics.eigensystem(single_excitation_hamiltonian(net, ctrl.bias))
    eig0 = dynamics.eigensystem(single_excitation_hamiltonian(net, np.zeros(net.n_spins)))
    t_end = max(ctrl.time * 1.25, ctrl.time + 1.0)
    ts = np.union1d(np.linspace(0.0, t_end, 801), [ctrl.time])
    rows = [
        [t, dynamics.fidelity(eig, cset.m, cset.n, t), dynamics.fidelity(eig0, cset.m, cset.n, t)]
        for t in ts
    ]
    _write_csv(out_path, "t,p,p_natural", rows)
