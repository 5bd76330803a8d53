"""Writers and readers for the experiment toolkit's external file formats.

This package talks to the modeling toolkit only through files, so the
formats are re-implemented here from their interface contract:

Claims: UTF-8 JSONL, one object per line with at least claim_id and text.
Feature view: JSON manifest {"name", "dim", "rows"} (plus optional extra
keys, which the toolkit ignores) next to a CSV with header
"claim_id,f0,...,f{dim-1}"; rows sorted by claim_id, shortest round-trip
float repr.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np


class ExtractError(Exception):
    """Unusable input (claims file, clip, table) or encoder failure."""


def read_claims(path: str | Path) -> list[dict]:
    """Read claims JSONL; returns the raw objects in file order."""
    claims = []
    seen = set()
    if not Path(path).exists():
        raise ExtractError(f"claims file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ExtractError(f"claims line {lineno}: invalid JSON ({e.msg})") from None
            if "claim_id" not in obj or "text" not in obj:
                raise ExtractError(f"claims line {lineno}: needs claim_id and text")
            if obj["claim_id"] in seen:
                raise ExtractError(f"claims line {lineno}: duplicate claim_id {obj['claim_id']!r}")
            seen.add(obj["claim_id"])
            claims.append(obj)
    if not claims:
        raise ExtractError(f"{path}: empty claims file")
    return claims


def write_view(
    out_dir: str | Path,
    name: str,
    dim: int,
    rows: dict[str, np.ndarray],
    extra_manifest: dict | None = None,
) -> Path:
    """Write `<name>.json` + `<name>.csv` in the toolkit's canonical form."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"name": name, "dim": dim, "rows": f"{name}.csv"}
    if extra_manifest:
        manifest.update(extra_manifest)
    manifest_path = out_dir / f"{name}.json"
    manifest_path.write_text(
        json.dumps(manifest, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8"
    )

    out = io.StringIO()
    out.write(",".join(["claim_id"] + [f"f{i}" for i in range(dim)]))
    out.write("\n")
    for cid in sorted(rows):
        vec = np.asarray(rows[cid], dtype=float)
        if vec.shape != (dim,):
            raise ExtractError(f"row for {cid!r} has shape {vec.shape}, expected ({dim},)")
        out.write(cid)
        for x in vec:
            out.write(",")
            out.write(repr(float(x)))
        out.write("\n")
    (out_dir / f"{name}.csv").write_text(out.getvalue(), encoding="utf-8")
    return manifest_path
