"""Convert an externally produced i-vector table into the toolkit's view format.

The extraction itself (background-model adaptation) happens elsewhere; this
adapter validates dimensions, re-keys rows by claim_id, drops rows for
unknown claims with a warning, and errors on claims with no row.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .viewio import ExtractError, read_claims, write_view

IVECTOR_DIM = 600


def read_ivector_table(path: str | Path, dim: int = IVECTOR_DIM) -> dict[str, np.ndarray]:
    """Read a CSV keyed by claim_id; an optional header row is skipped."""
    rows: dict[str, np.ndarray] = {}
    if not Path(path).exists():
        raise ExtractError(f"i-vector table not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec:
                continue
            if lineno == 1 and rec[0] == "claim_id":
                continue
            cid = rec[0]
            if len(rec) - 1 != dim:
                raise ExtractError(f"{path} line {lineno}: {len(rec) - 1} values for {cid!r}, expected {dim}")
            if cid in rows:
                raise ExtractError(f"{path} line {lineno}: duplicate claim_id {cid!r}")
            try:
                rows[cid] = np.array([float(v) for v in rec[1:]], dtype=float)
            except ValueError:
                raise ExtractError(f"{path} line {lineno}: unparseable float") from None
    if not rows:
        raise ExtractError(f"{path}: empty i-vector table")
    return rows


def ivector_convert(
    claims_path: str | Path,
    table_path: str | Path,
    out_dir: str | Path,
    view_name: str = "ivector",
) -> tuple[Path, list[str]]:
    """Re-key the external table onto the claims; returns (manifest, warnings)."""
    claims = read_claims(claims_path)
    table = read_ivector_table(table_path)
    claim_ids = {c["claim_id"] for c in claims}

    missing = sorted(claim_ids - set(table))
    if missing:
        raise ExtractError(f"i-vector table misses {len(missing)} claims (first: {missing[0]!r})")

    warnings = []
    rows = {}
    for cid, vec in table.items():
        if cid not in claim_ids:
            warnings.append(f"dropping i-vector row for unknown claim {cid!r}")
            continue
        rows[cid] = vec
    manifest = write_view(out_dir, view_name, IVECTOR_DIM, rows)
    return manifest, warnings
