"""Dataset model and file formats for claim-veracity experiments.

A dataset is a list of claims (text, speaker, debate, ordinal veracity label,
train/test split) plus any number of named feature views: fixed-dimension real
vectors keyed by claim id.  This module owns loading/writing the canonical
file formats, dataset validation, leave-one-debate-out fold construction,
inverse-frequency class weights, and a synthetic multi-view generator used by
the test suite and the end-to-end smoke runs.

File formats
------------
Claims: UTF-8 JSONL, one object per claim with keys
    claim_id, debate_id, speaker, text, label, split, audio (optional,
    {"start_s": float, "end_s": float}).
Feature view: a JSON manifest {"name", "dim", "rows"} where "rows" names a
CSV file (relative to the manifest) with header "claim_id,f0,...,f{dim-1}".
Writers emit a canonical form (fixed key order, rows sorted by claim_id,
shortest round-trip float repr) so that write(load(x)) == x byte-for-byte.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import DataError

TRAIN = "train"
TEST = "test"
_SPLITS = (TRAIN, TEST)


class Label(IntEnum):
    """Ordinal veracity label: false < half-true < true."""

    FALSE = 0
    HALF_TRUE = 1
    TRUE = 2

    @classmethod
    def parse(cls, s: str) -> "Label":
        """Parse "false" / "half-true" / "true" (case-insensitive)."""
        key = s.strip().lower()
        try:
            return _LABEL_STRINGS[key]
        except KeyError:
            raise DataError(f"unknown label string: {s!r}") from None

    def as_string(self) -> str:
        return _LABEL_NAMES[int(self)]


_LABEL_NAMES = ("false", "half-true", "true")
_LABEL_STRINGS = {name: Label(i) for i, name in enumerate(_LABEL_NAMES)}
N_CLASSES = 3


@dataclass(frozen=True)
class Claim:
    """One spoken statement with its fact-check verdict."""

    claim_id: str
    debate_id: str
    speaker: str
    text: str
    label: Label
    split: str
    audio_span: tuple[float, float] | None = None


@dataclass
class FeatureView:
    """A named family of per-claim real vectors, all of the same dimension."""

    name: str
    dim: int
    rows: dict[str, np.ndarray]

    def matrix(self, claim_ids: list[str]) -> np.ndarray:
        """Stack rows for the given claim ids into an (n, dim) array."""
        try:
            return np.stack([self.rows[c] for c in claim_ids])
        except KeyError as e:
            raise DataError(f"view {self.name!r} has no row for claim {e.args[0]!r}") from None


@dataclass
class Dataset:
    """Claims plus feature views plus the ordered speaker roster."""

    claims: list[Claim]
    views: list[FeatureView]
    roster: list[str]
    _by_id: dict[str, Claim] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._by_id = {c.claim_id: c for c in self.claims}
        if len(self._by_id) != len(self.claims):
            raise DataError("duplicate claim_id in dataset")

    def claim(self, claim_id: str) -> Claim:
        return self._by_id[claim_id]

    def split(self, name: str) -> list[Claim]:
        return [c for c in self.claims if c.split == name]

    def split_ids(self, name: str) -> list[str]:
        return [c.claim_id for c in self.claims if c.split == name]

    def view(self, name: str) -> FeatureView:
        for v in self.views:
            if v.name == name:
                return v
        raise DataError(f"no view named {name!r}")

    def labels(self, claim_ids: list[str]) -> list[Label]:
        return [self._by_id[c].label for c in claim_ids]

    def texts(self, claim_ids: list[str]) -> list[str]:
        return [self._by_id[c].text for c in claim_ids]


@dataclass(frozen=True)
class Fold:
    """One leave-one-debate-out fold over the train split."""

    held_out_debate_id: str
    train_claim_ids: tuple[str, ...]
    heldout_claim_ids: tuple[str, ...]


@dataclass
class FoldSpec:
    folds: list[Fold]

    def __len__(self) -> int:
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


@dataclass(frozen=True)
class ClassWeights:
    """Per-class sample weights, normalized so the mean weight is 1."""

    weights: tuple[float, float, float]

    def __getitem__(self, label: Label | int) -> float:
        return self.weights[int(label)]

    def per_example(self, labels: list[Label]) -> np.ndarray:
        return np.array([self.weights[int(y)] for y in labels], dtype=float)

    @staticmethod
    def uniform() -> "ClassWeights":
        return ClassWeights((1.0, 1.0, 1.0))


# ---------------------------------------------------------------------------
# Claims file I/O


def _parse_claim(obj: dict, lineno: int) -> Claim:
    try:
        claim_id = obj["claim_id"]
        debate_id = obj["debate_id"]
        speaker = obj["speaker"]
        text = obj["text"]
        label = Label.parse(obj["label"])
        split = obj["split"]
    except KeyError as e:
        raise DataError(f"claims line {lineno}: missing key {e.args[0]!r}")
    if not isinstance(text, str):
        raise DataError(f"claims line {lineno}: text must be a string")
    if split not in _SPLITS:
        raise DataError(f"claims line {lineno}: split must be one of {_SPLITS}, got {split!r}")
    span = None
    if "audio" in obj and obj["audio"] is not None:
        a = obj["audio"]
        try:
            span = (float(a["start_s"]), float(a["end_s"]))
        except (KeyError, TypeError, ValueError):
            raise DataError(f"claims line {lineno}: bad audio span") from None
        if not (0.0 <= span[0] < span[1]):
            raise DataError(f"claims line {lineno}: audio span must satisfy 0 <= start < end")
    return Claim(claim_id, debate_id, speaker, text, label, split, span)


def load_claims(path: str | Path) -> list[Claim]:
    """Read a claims JSONL file; raises DataError on any malformed line."""
    claims = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"claims line {lineno}: invalid JSON ({e.msg})") from None
            claim = _parse_claim(obj, lineno)
            if claim.claim_id in seen:
                raise DataError(f"claims line {lineno}: duplicate claim_id {claim.claim_id!r}")
            seen.add(claim.claim_id)
            claims.append(claim)
    return claims


def claims_to_bytes(claims: list[Claim]) -> bytes:
    """Serialize claims in canonical JSONL form (fixed key order, compact)."""
    out = io.StringIO()
    for c in claims:
        obj: dict = {
            "claim_id": c.claim_id,
            "debate_id": c.debate_id,
            "speaker": c.speaker,
            "text": c.text,
            "label": c.label.as_string(),
            "split": c.split,
        }
        if c.audio_span is not None:
            obj["audio"] = {"start_s": c.audio_span[0], "end_s": c.audio_span[1]}
        out.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
        out.write("\n")
    return out.getvalue().encode("utf-8")


def write_claims(path: str | Path, claims: list[Claim]) -> None:
    Path(path).write_bytes(claims_to_bytes(claims))


# ---------------------------------------------------------------------------
# Feature view I/O


def load_view(manifest_path: str | Path) -> FeatureView:
    """Load one feature view from its JSON manifest + CSV data file."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{manifest_path}: invalid manifest JSON ({e.msg})") from None
    try:
        name = manifest["name"]
        dim = int(manifest["dim"])
        rows_file = manifest["rows"]
    except (KeyError, TypeError, ValueError):
        raise DataError(f"{manifest_path}: manifest needs name, dim, rows") from None
    if dim < 1:
        raise DataError(f"{manifest_path}: dim must be >= 1")

    csv_path = manifest_path.parent / rows_file
    rows: dict[str, np.ndarray] = {}
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["claim_id"] + [f"f{i}" for i in range(dim)]
        if header != expected:
            raise DataError(f"{csv_path}: bad header for dim {dim}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != dim + 1:
                raise DataError(f"{csv_path} line {lineno}: expected {dim + 1} fields, got {len(rec)}")
            cid = rec[0]
            if cid in rows:
                raise DataError(f"{csv_path} line {lineno}: duplicate claim_id {cid!r}")
            try:
                rows[cid] = np.array([float(x) for x in rec[1:]], dtype=float)
            except ValueError:
                raise DataError(f"{csv_path} line {lineno}: unparseable float") from None
    return FeatureView(name=name, dim=dim, rows=rows)


def view_to_bytes(view: FeatureView) -> tuple[bytes, bytes]:
    """Canonical (manifest, csv) bytes: rows sorted by claim_id, repr floats."""
    manifest = json.dumps(
        {"name": view.name, "dim": view.dim, "rows": f"{view.name}.csv"},
        ensure_ascii=False,
        sort_keys=True,
    )
    out = io.StringIO()
    out.write(",".join(["claim_id"] + [f"f{i}" for i in range(view.dim)]))
    out.write("\n")
    for cid in sorted(view.rows):
        vec = view.rows[cid]
        out.write(cid)
        for x in vec:
            out.write(",")
            out.write(repr(float(x)))
        out.write("\n")
    return (manifest + "\n").encode("utf-8"), out.getvalue().encode("utf-8")


def write_view(out_dir: str | Path, view: FeatureView) -> Path:
    """Write `<name>.json` + `<name>.csv` under out_dir; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_bytes, csv_bytes = view_to_bytes(view)
    manifest_path = out_dir / f"{view.name}.json"
    manifest_path.write_bytes(manifest_bytes)
    (out_dir / f"{view.name}.csv").write_bytes(csv_bytes)
    return manifest_path


def load_dataset(
    claims_path: str | Path,
    view_paths: list[str | Path] = (),
    strict: bool = True,
) -> Dataset:
    """Load claims plus views and validate; raises DataError on error findings.

    The roster is the sorted set of distinct speakers.  In strict mode a view
    missing rows for some claims is an error; otherwise only a warning.
    """
    claims = load_claims(claims_path)
    views = [load_view(p) for p in view_paths]
    roster = sorted({c.speaker for c in claims})
    ds = Dataset(claims=claims, views=views, roster=roster)
    report = validate(ds, strict=strict)
    if report.errors:
        raise DataError("dataset failed validation:\n" + report.summary())
    return ds


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    code: str
    message: str


@dataclass
class ValidationReport:
    findings: list[Finding]

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "warning"]

    def ok(self) -> bool:
        return not self.errors

    def summary(self) -> str:
        if not self.findings:
            return "no findings"
        return "\n".join(f"{f.severity}: [{f.code}] {f.message}" for f in self.findings)


def validate(dataset: Dataset, strict: bool = True) -> ValidationReport:
    """Check all dataset invariants; findings are data, not exceptions."""
    findings: list[Finding] = []
    roster = set(dataset.roster)
    ids = set()
    for c in dataset.claims:
        if c.claim_id in ids:
            findings.append(Finding("error", "dup-claim", f"duplicate claim_id {c.claim_id!r}"))
        ids.add(c.claim_id)
        if c.speaker not in roster:
            findings.append(
                Finding("error", "unknown-speaker", f"claim {c.claim_id!r}: speaker {c.speaker!r} not in roster")
            )
        if not c.text:
            findings.append(Finding("error", "empty-text", f"claim {c.claim_id!r}: empty text"))
        if c.split not in _SPLITS:
            findings.append(Finding("error", "bad-split", f"claim {c.claim_id!r}: split {c.split!r}"))
        if c.audio_span is not None and not (0.0 <= c.audio_span[0] < c.audio_span[1]):
            findings.append(Finding("error", "bad-audio-span", f"claim {c.claim_id!r}: span {c.audio_span}"))

    missing_severity = "error" if strict else "warning"
    for v in dataset.views:
        for cid, vec in v.rows.items():
            if cid not in ids:
                findings.append(
                    Finding("error", "unknown-claim-row", f"view {v.name!r}: row for unknown claim {cid!r}")
                )
            if vec.shape != (v.dim,):
                findings.append(
                    Finding("error", "dim-mismatch", f"view {v.name!r} claim {cid!r}: shape {vec.shape} != ({v.dim},)")
                )
            elif not np.all(np.isfinite(vec)):
                findings.append(
                    Finding("error", "non-finite", f"view {v.name!r} claim {cid!r}: non-finite entry")
                )
        missing = sorted(ids - set(v.rows))
        if missing:
            findings.append(
                Finding(
                    missing_severity,
                    "missing-rows",
                    f"view {v.name!r}: no rows for {len(missing)} claims (first: {missing[0]!r})",
                )
            )
    return ValidationReport(findings)


# ---------------------------------------------------------------------------
# Folds and class weights


def loo_debate_folds(dataset: Dataset) -> FoldSpec:
    """Leave-one-debate-out folds over the train split, sorted by debate id."""
    train = dataset.split(TRAIN)
    debates = sorted({c.debate_id for c in train})
    if len(debates) < 2:
        raise DataError(f"need >= 2 train debates for leave-one-debate-out folds, found {len(debates)}")
    folds = []
    for deb in debates:
        held = tuple(c.claim_id for c in train if c.debate_id == deb)
        rest = tuple(c.claim_id for c in train if c.debate_id != deb)
        folds.append(Fold(held_out_debate_id=deb, train_claim_ids=rest, heldout_claim_ids=held))
    return FoldSpec(folds)


def class_weights(labels: list[Label]) -> ClassWeights:
    """weight_c = N / (3 * n_c); requires all three classes present.

    With this normalization sum_c weight_c * n_c == N, i.e. the mean
    per-example weight is exactly 1.
    """
    counts = [0, 0, 0]
    for y in labels:
        counts[int(y)] += 1
    if any(n == 0 for n in counts):
        raise DataError(f"class weights need all 3 classes present, counts={counts}")
    n = len(labels)
    return ClassWeights(tuple(n / (N_CLASSES * n_c) for n_c in counts))


# ---------------------------------------------------------------------------
# Synthetic multi-view generator

_SYNTH_COMMON = (
    "the a and to of in on we they it said plan tax jobs trade budget years "
    "people country state vote law bill health care energy school report"
).split()
# Class-marker vocabularies; text always carries some label signal so that
# text-derived features (TF-IDF) are learnable on synthetic data.
_SYNTH_MARKERS = (
    ("never", "wrong", "deny", "fabricated"),
    ("partly", "roughly", "about", "somewhat"),
    ("exactly", "confirmed", "record", "verified"),
)
_SYNTH_SPEAKERS = ("ada", "brie", "cruz", "dale", "eva", "finn")


def synth_multiview(
    n_claims: int,
    n_debates: int,
    view_specs: list[tuple[str, int, float]],
    seed: int,
    test_fraction: float = 0.0,
    text_signal: float = 0.5,
) -> Dataset:
    """Generate a class-conditional Gaussian multi-view dataset.

    Labels are balanced (counts differ by at most 1) and shuffled by the seed.
    View j (zero-based position in view_specs) with spec (name, dim, s) draws
    rows ~ N(mu, I) where mu = s * e0 when the claim's label equals j mod 3
    and mu = 0 otherwise: each view separates exactly one class from the other
    two, so fusing views is strictly more informative than any single view.
    Texts mix common words with per-class marker words (probability
    text_signal per token).  Deterministic given the seed.

    When test_fraction > 0, the last round(n_debates * test_fraction) debates
    (at least 1) form the test split; the rest are train.
    """
    if n_debates < 2 or n_claims < n_debates:
        raise DataError(f"need n_claims >= n_debates >= 2, got {n_claims}/{n_debates}")
    if any(dim < 1 for _, dim, _ in view_specs):
        raise DataError("view dims must be >= 1")
    if not 0.0 <= test_fraction < 1.0:
        raise DataError("test_fraction must be in [0, 1)")

    rng = np.random.default_rng(seed)
    labels = np.array([i % N_CLASSES for i in range(n_claims)])
    rng.shuffle(labels)

    n_test_debates = max(1, round(n_debates * test_fraction)) if test_fraction > 0 else 0
    test_debates = {f"deb{j:02d}" for j in range(n_debates - n_test_debates, n_debates)}

    claims = []
    for i in range(n_claims):
        label = Label(int(labels[i]))
        debate = f"deb{i % n_debates:02d}"
        tokens = []
        for _ in range(int(rng.integers(6, 13))):
            if rng.random() < text_signal:
                tokens.append(_SYNTH_MARKERS[int(label)][int(rng.integers(len(_SYNTH_MARKERS[int(label)])))])
            else:
                tokens.append(_SYNTH_COMMON[int(rng.integers(len(_SYNTH_COMMON)))])
        claims.append(
            Claim(
                claim_id=f"c{i:04d}",
                debate_id=debate,
                speaker=_SYNTH_SPEAKERS[i % len(_SYNTH_SPEAKERS)],
                text=" ".join(tokens),
                label=label,
                split=TEST if debate in test_debates else TRAIN,
            )
        )

    views = []
    for j, (name, dim, strength) in enumerate(view_specs):
        target = j % N_CLASSES
        X = rng.standard_normal((n_claims, dim))
        X[labels == target, 0] += strength
        views.append(FeatureView(name=name, dim=dim, rows={claims[i].claim_id: X[i] for i in range(n_claims)}))

    roster = sorted({c.speaker for c in claims})
    return Dataset(claims=claims, views=views, roster=roster)
