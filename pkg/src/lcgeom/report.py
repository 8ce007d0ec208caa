"""JSON-lines records with a fixed field set, plus CSV tables and a run summary."""

from __future__ import annotations

import csv
import json
import math
import os
from importlib import metadata

import numpy as np

FIELDS = ("experiment", "check", "params", "estimate", "ci", "exact", "bound", "constants",
          "pass", "flags")


def _clean(v, flags, path):
    if isinstance(v, dict):
        return {str(k): _clean(x, flags, f"{path}.{k}") for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x, flags, f"{path}[{i}]") for i, x in enumerate(v)]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            flags.append(f"non-finite value at {path}")
            return None
        return v
    return v


def record(experiment, check, *, params=None, estimate=None, ci=None, exact=False, bound=None,
           constants=None, passed=None, flags=()) -> dict:
    """One schema-valid record. Numbers must carry a CI or ``exact=True``."""
    fl = list(flags)
    rec = {
        "experiment": str(experiment),
        "check": str(check),
        "params": params or {},
        "estimate": estimate,
        "ci": ci,
        "exact": bool(exact),
        "bound": bound,
        "constants": constants or {},
        "pass": passed,
    }
    out = {k: _clean(v, fl, k) for k, v in rec.items()}
    out["flags"] = fl
    if out["estimate"] is not None and out["ci"] is None and not out["exact"]:
        out["flags"].append("no confidence interval")
    return out


def validate(rec: dict) -> None:
    if tuple(sorted(rec)) != tuple(sorted(FIELDS)):
        raise ValueError(f"record fields {sorted(rec)} differ from the schema")


def dumps(records) -> str:
    lines = []
    for r in records:
        validate(r)
        lines.append(json.dumps(r, sort_keys=True, allow_nan=False))
    return "\n".join(lines) + ("\n" if lines else "")


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def write_report(out_dir, name, records, config_text="", summary=None) -> str:
    """Write ``<name>.jsonl``, ``<name>.config`` and ``<name>.summary.json``; returns the jsonl path."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{name}.jsonl")
        with open(path, "w") as fh:
            fh.write(dumps(records))
        if config_text:
            with open(os.path.join(out_dir, f"{name}.config"), "w") as fh:
                fh.write(config_text)
        s = {"version": version(), "records": len(records),
             "passed": sum(r["pass"] is True for r in records),
             "failed": sum(r["pass"] is False for r in records)}
        s.update(summary or {})
        with open(os.path.join(out_dir, f"{name}.summary.json"), "w") as fh:
            json.dump(_clean(s, [], "summary"), fh, sort_keys=True, indent=1)
    except OSError as exc:
        raise OSError(f"cannot write report to {out_dir}: {exc}") from exc
    return path


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
