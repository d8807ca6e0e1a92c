"""Run manifests and delimited output."""
from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from pathlib import Path

from . import __version__

FLOAT_FMT = "{:.17g}"


def _fmt(v):
    if isinstance(v, float):
        return FLOAT_FMT.format(v)
    return v


def make_manifest(command: str, config: dict, seeds: dict | None = None,
                  rule_meta: dict | None = None) -> dict:
    """Manifest with a content hash; timestamps are excluded from the hash."""
    body = {"command": command, "config": config, "seeds": seeds or {},
            "rule": rule_meta or {}, "version": __version__}
    h = hashlib.sha256(json.dumps(body, sort_keys=True, default=str).encode()).hexdigest()[:16]
    return {**body, "manifest_hash": h, "python": platform.python_version(),
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "wall_time_s": None}


def finish_manifest(manifest: dict, t0: float, outdir: Path) -> None:
    manifest["wall_time_s"] = round(time.perf_counter() - t0, 3)
    with open(Path(outdir) / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _write_rows(fh, header, rows, manifest_hash):
    if manifest_hash:
        fh.write(f"# manifest_hash={manifest_hash}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])


def write_csv(path, header, rows, manifest_hash: str | None = None) -> None:
    """CSV with floats at 17 significant digits; ``path`` may be an open stream."""
    if hasattr(path, "write"):
        _write_rows(path, header, rows, manifest_hash)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, header, rows, manifest_hash)


def write_json(path, obj, manifest_hash: str | None = None) -> None:
    if manifest_hash and isinstance(obj, dict):
        obj = {**obj, "manifest_hash": manifest_hash}
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
