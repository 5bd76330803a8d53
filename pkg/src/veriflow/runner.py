"""Experiment orchestration: declarative configs in, report bundles out.

A run trains the configured model family on the train split, evaluates on
the test split, and writes a self-describing report directory: metrics table
(CSV + aligned text), per-row confusion matrices and predictions, training
history for neural runs, and a manifest with the config, seed, and content
hashes of every input file.  All outputs are deterministic functions of
(config, seed, inputs): no timestamps, fixed float formatting, fixed row
order, so identical runs are byte-identical.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus, evalkit, fusion, neurofusion, textfeat
from .corpus import ClassWeights, Dataset, Label
from .errors import ConfigError, DataError, TrainingError
from .evalkit import MetricsBundle, evaluate_predictions
from .linmodel import argmax_label
from .pipeline import FusionNetSpec, LexiconSpeakerSource, LRSpec, StoredViewSource, TfidfSource
from .tuningcv import GridSpec, grid_search, leaderboard_csv

COMPUTED_FEATURES = ("tfidf", "liwc_speaker")
MODEL_FAMILIES = ("lr", "concat_lr", "prob_avg", "stacked", "fusion_net")
ABLATION_MODES = ("none", "single_view", "leave_one_view_out", "both")
DEFAULT_L2_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)


@dataclass
class ExperimentConfig:
    claims_path: Path
    view_paths: list[Path] = field(default_factory=list)
    lexicon_path: Path | None = None
    strict: bool = True
    features: list[str] = field(default_factory=list)
    no_standardize: list[str] = field(default_factory=list)
    family: str = "lr"
    l2: float = 1.0
    l2_grid: list[float] = field(default_factory=lambda: list(DEFAULT_L2_GRID))
    class_weighting: bool = True
    hyper: neurofusion.Hyper = field(default_factory=neurofusion.Hyper)
    ablation: str = "none"
    seed: int = 0
    out_dir: Path = Path("runs/out")
    references: list[tuple[str, dict[str, float]]] = field(default_factory=list)
    report_inputs: list[Path] = field(default_factory=list)
    synth: dict = field(default_factory=dict)
    raw_sections: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in MODEL_FAMILIES:
            raise ConfigError(f"model family must be one of {MODEL_FAMILIES}, got {self.family!r}")
        if self.ablation not in ABLATION_MODES:
            raise ConfigError(f"ablation must be one of {ABLATION_MODES}, got {self.ablation!r}")


def _parse_list(raw: str) -> list[str]:
    return [x.strip() for x in raw.split(",") if x.strip()]


def _parse_floats(raw: str) -> list[float]:
    try:
        return [float(x) for x in _parse_list(raw)]
    except ValueError:
        raise ConfigError(f"expected comma-separated floats, got {raw!r}") from None


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read an INI-style config; CLI overrides (seed, out) win over the file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None

    base = path.parent

    def get(section: str, key: str, default: str | None = None) -> str | None:
        if parser.has_option(section, key):
            return parser.get(section, key)
        return default

    data = {
        "claims_path": base / get("data", "claims", "claims.jsonl"),
        "view_paths": [base / p for p in _parse_list(get("data", "views", "") or "")],
        "strict": (get("data", "strict", "true") or "true").lower() != "false",
        "features": _parse_list(get("features", "use", "") or ""),
        "no_standardize": _parse_list(get("features", "no_standardize", "") or ""),
        "family": get("model", "family", "lr"),
        "l2": float(get("model", "l2", "1.0")),
        "l2_grid": _parse_floats(get("model", "l2_grid", ",".join(str(x) for x in DEFAULT_L2_GRID))),
        "class_weighting": (get("model", "class_weighting", "true") or "true").lower() != "false",
        "ablation": get("run", "ablation", "none"),
        "out_dir": base / get("run", "out", "runs/out"),
        "seed": int(get("train", "seed", "0")),
    }
    lex = get("data", "lexicon")
    data["lexicon_path"] = (base / lex) if lex else None

    hyper_kw = {}
    for key, cast in (
        ("epochs", int),
        ("learning_rate", float),
        ("momentum", float),
        ("dropout_retention", float),
        ("batch_size", int),
    ):
        raw = get("train", key)
        if raw is not None:
            hyper_kw[key] = cast(raw)

    references = []
    if parser.has_section("report"):
        for name, raw in parser.items("report"):
            if name == "inputs":
                data["report_inputs"] = [base / p for p in _parse_list(raw)]
                continue
            vals = _parse_floats(raw)
            if len(vals) != 5:
                raise ConfigError(f"[report] {name}: expected 5 values (mae, mmae, acc, f1, mar)")
            references.append((name, dict(zip(("mae", "mmae", "acc", "f1", "mar"), vals))))
    data["references"] = references

    synth = {}
    if parser.has_section("synth"):
        synth["n_claims"] = int(get("synth", "n_claims", "360"))
        synth["n_debates"] = int(get("synth", "n_debates", "6"))
        synth["test_fraction"] = float(get("synth", "test_fraction", "0.34"))
        synth["text_signal"] = float(get("synth", "text_signal", "0.5"))
        specs = []
        for item in _parse_list(get("synth", "views", "viewa:6:2.5, viewb:6:2.5, viewc:6:2.5")):
            parts = item.split(":")
            if len(parts) != 3:
                raise ConfigError(f"[synth] views entries must be name:dim:strength, got {item!r}")
            specs.append((parts[0], int(parts[1]), float(parts[2])))
        synth["view_specs"] = specs
    data["synth"] = synth

    if overrides:
        if overrides.get("seed") is not None:
            data["seed"] = int(overrides["seed"])
            hyper_kw.setdefault("seed", int(overrides["seed"]))
        if overrides.get("out") is not None:
            data["out_dir"] = Path(overrides["out"])
    hyper_kw.setdefault("seed", data["seed"])
    data["hyper"] = neurofusion.Hyper(**hyper_kw)
    data["raw_sections"] = {s: dict(parser.items(s)) for s in parser.sections()}
    return ExperimentConfig(**data)


# ---------------------------------------------------------------------------
# Source construction


def build_sources(config: ExperimentConfig, dataset: Dataset) -> list:
    """One feature source per configured family, in declared order."""
    if not config.features:
        raise ConfigError("[features] use must list at least one feature family")
    lexicon = None
    sources = []
    stored_names = {v.name for v in dataset.views}
    for name in config.features:
        if name == "tfidf":
            sources.append(TfidfSource())
        elif name == "liwc_speaker":
            if lexicon is None:
                lex_path = config.lexicon_path or textfeat.stub_lexicon_path()
                lexicon = textfeat.load_lexicon(lex_path)
            sources.append(LexiconSpeakerSource(lexicon=lexicon))
        elif name in stored_names:
            sources.append(StoredViewSource(name, standardize=name not in config.no_standardize))
        else:
            raise ConfigError(f"feature {name!r} is neither a computed family nor a stored view")
    return sources


def _train_weights(config: ExperimentConfig, dataset: Dataset) -> ClassWeights | None:
    if not config.class_weighting:
        return None
    return corpus.class_weights(dataset.labels(dataset.split_ids(corpus.TRAIN)))


# ---------------------------------------------------------------------------
# Report bundle


@dataclass
class ReportBundle:
    rows: list[tuple[str, MetricsBundle]]
    out_dir: Path
    files: list[Path] = field(default_factory=list)


def metrics_csv(rows: list[tuple[str, MetricsBundle]]) -> str:
    out = io.StringIO()
    out.write("config,mae,mmae,acc,f1,mar\n")
    for name, b in rows:
        out.write(f"{name},{b.mae:.4f},{b.mmae:.4f},{b.accuracy:.2f},{b.macro_f1:.2f},{b.mar:.2f}\n")
    return out.getvalue()


def metrics_table(rows: list[tuple[str, MetricsBundle]]) -> str:
    width = max([len("configuration")] + [len(name) for name, _ in rows]) + 2
    out = io.StringIO()
    out.write(f"{'configuration':<{width}}{'MAE':>7}{'MMAE':>7}{'Acc':>8}{'F1':>8}{'MAR':>8}\n")
    for name, b in rows:
        out.write(
            f"{name:<{width}}{b.mae:>7.2f}{b.mmae:>7.2f}{b.accuracy:>8.2f}{b.macro_f1:>8.2f}{b.mar:>8.2f}\n"
        )
    return out.getvalue()


def confusion_csv(cm: evalkit.ConfusionMatrix) -> str:
    names = ["false", "half-true", "true"]
    lines = ["true\\pred," + ",".join(names)]
    for i, row in enumerate(cm.counts):
        lines.append(names[i] + "," + ",".join(str(x) for x in row))
    return "\n".join(lines) + "\n"


def predictions_csv(dataset: Dataset, claim_ids: list[str], preds: list[Label]) -> str:
    lines = ["claim_id,true,pred"]
    for cid, p in sorted(zip(claim_ids, preds)):
        lines.append(f"{cid},{dataset.claim(cid).label.as_string()},{p.as_string()}")
    return "\n".join(lines) + "\n"


def _sha256(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def input_hashes(config: ExperimentConfig) -> dict[str, str]:
    hashes = {}
    paths = [config.claims_path] + list(config.view_paths)
    if config.lexicon_path:
        paths.append(config.lexicon_path)
    for p in paths:
        if p.exists():
            hashes[p.name] = _sha256(p)
            if p.suffix == ".json":  # view manifest: hash the data file too
                try:
                    rows = json.loads(p.read_text(encoding="utf-8")).get("rows")
                    if rows and (p.parent / rows).exists():
                        hashes[rows] = _sha256(p.parent / rows)
                except (json.JSONDecodeError, AttributeError):
                    pass
    return hashes


def write_manifest(config: ExperimentConfig, out_dir: Path) -> Path:
    manifest = {
        "config": config.raw_sections,
        "seed": config.seed,
        "inputs": input_hashes(config),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _safe(name: str) -> str:
    return name.replace(":", "_").replace("/", "_")


# ---------------------------------------------------------------------------
# The run operation


def _load_dataset(config: ExperimentConfig) -> Dataset:
    return corpus.load_dataset(config.claims_path, config.view_paths, strict=config.strict)


def _fit_per_view_lrs(config, dataset, sources, weights, train_ids):
    return [
        (src.name, LRSpec(sources=[src], l2=config.l2, weights=weights, seed=config.seed).fit(dataset, train_ids))
        for src in sources
    ]


def run(config: ExperimentConfig, dataset: Dataset | None = None) -> ReportBundle:
    """Train on the train split, evaluate on the test split, write reports."""
    if dataset is None:
        dataset = _load_dataset(config)
    train_ids = dataset.split_ids(corpus.TRAIN)
    test_ids = dataset.split_ids(corpus.TEST)
    if not train_ids or not test_ids:
        raise DataError("run needs non-empty train and test splits")
    sources = build_sources(config, dataset)
    weights = _train_weights(config, dataset)
    y_test = dataset.labels(test_ids)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[tuple[str, MetricsBundle]] = []
    pred_rows: list[tuple[str, list[Label]]] = []
    extra_files: list[Path] = []

    family = config.family
    if family == "lr":
        for name, fitted in _fit_per_view_lrs(config, dataset, sources, weights, train_ids):
            preds = fitted.predict(dataset, test_ids)
            rows.append((f"lr:{name}", evaluate_predictions(y_test, preds)))
            pred_rows.append((f"lr:{name}", preds))
    elif family == "concat_lr":
        fitted = LRSpec(sources=sources, l2=config.l2, weights=weights, seed=config.seed).fit(dataset, train_ids)
        preds = fitted.predict(dataset, test_ids)
        rows.append(("concat_lr", evaluate_predictions(y_test, preds)))
        pred_rows.append(("concat_lr", preds))
    elif family == "prob_avg":
        per_view = _fit_per_view_lrs(config, dataset, sources, weights, train_ids)
        stacks = [f.proba_matrix(dataset, test_ids) for _, f in per_view]
        preds = [argmax_label(fusion.avg_probabilities([S[i] for S in stacks])) for i in range(len(test_ids))]
        rows.append(("prob_avg", evaluate_predictions(y_test, preds)))
        pred_rows.append(("prob_avg", preds))
    elif family == "stacked":
        folds = corpus.loo_debate_folds(dataset)
        base_specs = [LRSpec(sources=[src], l2=config.l2, weights=weights, seed=config.seed) for src in sources]
        model = fusion.stack_train(base_specs, dataset, folds, config.l2_grid)
        preds = fusion.stack_predict(model, dataset, test_ids)
        rows.append(("stacked", evaluate_predictions(y_test, preds)))
        pred_rows.append(("stacked", preds))
        oof_path = out_dir / "oof_records.csv"
        oof_path.write_text(fusion.oof_records_csv(model, [s.name for s in sources]), encoding="utf-8")
        extra_files.append(oof_path)
    elif family == "fusion_net":
        spec = FusionNetSpec(sources=sources, hyper=config.hyper, weights=weights)
        fitted = spec.fit(dataset, train_ids, eval_ids=test_ids)
        if config.ablation in ("none", "both"):
            preds = fitted.predict(dataset, test_ids)
            rows.append(("fusion_net:all", evaluate_predictions(y_test, preds)))
            pred_rows.append(("fusion_net:all", preds))
        n_views = len(sources)
        if config.ablation in ("single_view", "both"):
            for v, src in enumerate(sources):
                mask = [i == v for i in range(n_views)]
                p = fitted.predict(dataset, test_ids, active_mask=mask)
                rows.append((f"fusion_net:only:{src.name}", evaluate_predictions(y_test, p)))
                pred_rows.append((f"fusion_net:only:{src.name}", p))
        if config.ablation in ("leave_one_view_out", "both"):
            for v, src in enumerate(sources):
                mask = [i != v for i in range(n_views)]
                p = fitted.predict(dataset, test_ids, active_mask=mask)
                rows.append((f"fusion_net:without:{src.name}", evaluate_predictions(y_test, p)))
                pred_rows.append((f"fusion_net:without:{src.name}", p))
        hist_path = out_dir / "history.csv"
        hist_path.write_text(neurofusion.history_to_csv(fitted.history), encoding="utf-8")
        extra_files.append(hist_path)

    files = [out_dir / "metrics.csv", out_dir / "metrics.txt"]
    (out_dir / "metrics.csv").write_text(metrics_csv(rows), encoding="utf-8")
    (out_dir / "metrics.txt").write_text(metrics_table(rows), encoding="utf-8")
    for (name, b), (_, preds) in zip(rows, pred_rows):
        cpath = out_dir / f"confusion_{_safe(name)}.csv"
        cpath.write_text(confusion_csv(b.cm), encoding="utf-8")
        ppath = out_dir / f"predictions_{_safe(name)}.csv"
        ppath.write_text(predictions_csv(dataset, test_ids, preds), encoding="utf-8")
        files += [cpath, ppath]
    files.append(write_manifest(config, out_dir))
    return ReportBundle(rows=rows, out_dir=out_dir, files=files + extra_files)


# ---------------------------------------------------------------------------
# Other subcommand operations


def run_validate(config: ExperimentConfig) -> corpus.ValidationReport:
    claims = corpus.load_claims(config.claims_path)
    views = [corpus.load_view(p) for p in config.view_paths]
    roster = sorted({c.speaker for c in claims})
    ds = Dataset(claims=claims, views=views, roster=roster)
    return corpus.validate(ds, strict=config.strict)


def run_featurize_text(config: ExperimentConfig) -> list[Path]:
    """Write tfidf (fit on train texts) and liwc_speaker views for all claims."""
    dataset = _load_dataset(config)
    train_ids = dataset.split_ids(corpus.TRAIN)
    all_ids = [c.claim_id for c in dataset.claims]
    out_dir = Path(config.out_dir)

    tfidf = TfidfSource().fit(dataset, train_ids)
    lex_path = config.lexicon_path or textfeat.stub_lexicon_path()
    lsp = LexiconSpeakerSource(lexicon=textfeat.load_lexicon(lex_path)).fit(dataset, all_ids)

    written = []
    for fitted in (tfidf, lsp):
        rows = dict(zip(all_ids, fitted.matrix(dataset, all_ids)))
        written.append(corpus.write_view(out_dir, corpus.FeatureView(fitted.name, fitted.dim, rows)))
    return written


def run_train(config: ExperimentConfig) -> list[Path]:
    """Fit the configured family on the train split and save model artifacts."""
    from .linmodel import save_linear

    dataset = _load_dataset(config)
    train_ids = dataset.split_ids(corpus.TRAIN)
    sources = build_sources(config, dataset)
    weights = _train_weights(config, dataset)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if config.family == "lr":
        for name, fitted in _fit_per_view_lrs(config, dataset, sources, weights, train_ids):
            path = out_dir / f"model_lr_{_safe(name)}.txt"
            save_linear(path, fitted.model)
            written.append(path)
    elif config.family == "concat_lr":
        fitted = LRSpec(sources=sources, l2=config.l2, weights=weights, seed=config.seed).fit(dataset, train_ids)
        path = out_dir / "model_concat_lr.txt"
        save_linear(path, fitted.model)
        written.append(path)
    elif config.family == "fusion_net":
        spec = FusionNetSpec(sources=sources, hyper=config.hyper, weights=weights)
        fitted = spec.fit(dataset, train_ids)
        path = out_dir / "model_fusion_net.txt"
        neurofusion.save_net(path, fitted.net)
        hist = out_dir / "history.csv"
        hist.write_text(neurofusion.history_to_csv(fitted.history), encoding="utf-8")
        written += [path, hist]
    elif config.family == "stacked":
        folds = corpus.loo_debate_folds(dataset)
        base_specs = [LRSpec(sources=[src], l2=config.l2, weights=weights, seed=config.seed) for src in sources]
        model = fusion.stack_train(base_specs, dataset, folds, config.l2_grid)
        meta_path = out_dir / "model_stacked_meta.txt"
        save_linear(meta_path, model.meta.model)
        oof_path = out_dir / "oof_records.csv"
        oof_path.write_text(fusion.oof_records_csv(model, [s.name for s in sources]), encoding="utf-8")
        written += [meta_path, oof_path]
    else:
        raise ConfigError(f"train does not support family {config.family!r}")
    written.append(write_manifest(config, out_dir))
    return written


def run_cv_tune(config: ExperimentConfig) -> list[Path]:
    """Grid-search l2 by pooled leave-one-debate-out MAR; write leaderboards."""
    dataset = _load_dataset(config)
    folds = corpus.loo_debate_folds(dataset)
    sources = build_sources(config, dataset)
    weights = _train_weights(config, dataset)
    grid = GridSpec({"l2": list(config.l2_grid)})
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if config.family == "lr":
        specs = [(src.name, LRSpec(sources=[src], l2=config.l2, weights=weights, seed=config.seed)) for src in sources]
    elif config.family == "concat_lr":
        specs = [("concat", LRSpec(sources=sources, l2=config.l2, weights=weights, seed=config.seed))]
    else:
        raise ConfigError(f"cv-tune supports lr and concat_lr, not {config.family!r}")
    for name, spec in specs:
        result = grid_search(grid, spec, dataset, folds)
        path = out_dir / f"leaderboard_{_safe(name)}.csv"
        path.write_text(leaderboard_csv(result), encoding="utf-8")
        written.append(path)
    written.append(write_manifest(config, out_dir))
    return written


def run_synth(config: ExperimentConfig) -> list[Path]:
    """Generate a synthetic dataset on disk in the canonical formats."""
    params = config.synth
    if not params:
        raise ConfigError("synth needs a [synth] config section")
    dataset = corpus.synth_multiview(
        n_claims=params["n_claims"],
        n_debates=params["n_debates"],
        view_specs=params["view_specs"],
        seed=config.seed,
        test_fraction=params["test_fraction"],
        text_signal=params["text_signal"],
    )
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    claims_path = out_dir / "claims.jsonl"
    corpus.write_claims(claims_path, dataset.claims)
    written = [claims_path]
    for view in dataset.views:
        written.append(corpus.write_view(out_dir, view))
    return written


def report_compare(
    bundles: list[tuple[str, MetricsBundle]],
    reference_constants: list[tuple[str, dict[str, float]]],
) -> list[tuple[str, dict[str, float]]]:
    """Merge produced bundles with fixed reference rows, ascending by MAE."""
    rows = [(name, b.as_dict()) for name, b in bundles]
    rows += [(name, dict(vals)) for name, vals in reference_constants]
    rows.sort(key=lambda r: (r[1]["mae"], r[0]))
    return rows


def comparison_csv(rows: list[tuple[str, dict[str, float]]]) -> str:
    out = io.StringIO()
    out.write("system,mae,mmae,acc,f1,mar\n")
    for name, vals in rows:
        out.write(
            f"{name},{vals['mae']:.4f},{vals['mmae']:.4f},{vals['acc']:.2f},{vals['f1']:.2f},{vals['mar']:.2f}\n"
        )
    return out.getvalue()


def read_metrics_csv(path: Path) -> list[tuple[str, dict[str, float]]]:
    rows = []
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "config,mae,mmae,acc,f1,mar":
        raise DataError(f"{path}: not a metrics.csv file")
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 6:
            raise DataError(f"{path}: malformed row {line!r}")
        rows.append((parts[0], dict(zip(("mae", "mmae", "acc", "f1", "mar"), map(float, parts[1:])))))
    return rows


def run_report(config: ExperimentConfig) -> Path:
    produced = []
    for path in config.report_inputs:
        produced += read_metrics_csv(Path(path))
    rows = produced + [(name, dict(vals)) for name, vals in config.references]
    rows.sort(key=lambda r: (r[1]["mae"], r[0]))
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "comparison.csv"
    path.write_text(comparison_csv(rows), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Synthetic end-to-end smoke run


def synth_e2e(seed: int = 7, out_dir: str | Path = "runs/synth_e2e", quick: bool = False) -> ReportBundle:
    """Generate synthetic data, run every model family, and check that the
    fusion net beats the best single view by a clear margin.

    Each synthetic view separates only one class, so any single view caps
    near 2/3 accuracy while the fused model can approach 100%; the run
    asserts a >= 10 point gap (TrainingError otherwise).
    """
    n_claims, n_debates = (180, 6) if quick else (360, 6)
    dataset = corpus.synth_multiview(
        n_claims=n_claims,
        n_debates=n_debates,
        view_specs=[("viewa", 6, 2.5), ("viewb", 6, 2.5), ("viewc", 6, 2.5)],
        seed=seed,
        test_fraction=0.34,
        text_signal=0.5,
    )
    train_ids = dataset.split_ids(corpus.TRAIN)
    test_ids = dataset.split_ids(corpus.TEST)
    weights = corpus.class_weights(dataset.labels(train_ids))
    y_test = dataset.labels(test_ids)
    sources = [StoredViewSource(v.name) for v in dataset.views]
    folds = corpus.loo_debate_folds(dataset)

    rows: list[tuple[str, MetricsBundle]] = []

    per_view = [(s.name, LRSpec(sources=[s], l2=0.01, weights=weights, seed=seed).fit(dataset, train_ids)) for s in sources]
    for name, fitted in per_view:
        rows.append((f"lr:{name}", evaluate_predictions(y_test, fitted.predict(dataset, test_ids))))

    concat = LRSpec(sources=sources, l2=0.01, weights=weights, seed=seed).fit(dataset, train_ids)
    rows.append(("concat_lr", evaluate_predictions(y_test, concat.predict(dataset, test_ids))))

    stacks = [f.proba_matrix(dataset, test_ids) for _, f in per_view]
    avg_preds = [argmax_label(fusion.avg_probabilities([S[i] for S in stacks])) for i in range(len(test_ids))]
    rows.append(("prob_avg", evaluate_predictions(y_test, avg_preds)))

    base_specs = [LRSpec(sources=[s], l2=0.01, weights=weights, seed=seed) for s in sources]
    stacked = fusion.stack_train(base_specs, dataset, folds, list(DEFAULT_L2_GRID))
    rows.append(("stacked", evaluate_predictions(y_test, fusion.stack_predict(stacked, dataset, test_ids))))

    hyper = neurofusion.Hyper(seed=seed, epochs=128 if quick else 512)
    net_spec = FusionNetSpec(sources=sources, hyper=hyper, weights=weights)
    fitted_net = net_spec.fit(dataset, train_ids)
    net_preds = fitted_net.predict(dataset, test_ids)
    fused = evaluate_predictions(y_test, net_preds)
    rows.append(("fusion_net:all", fused))

    masked_accs = []
    for v, src in enumerate(sources):
        mask = [i == v for i in range(len(sources))]
        b = evaluate_predictions(y_test, fitted_net.predict(dataset, test_ids, active_mask=mask))
        rows.append((f"fusion_net:only:{src.name}", b))
        masked_accs.append(b.accuracy)

    best_single = max([b.accuracy for name, b in rows if name.startswith("lr:")] + masked_accs)
    if fused.accuracy < best_single + 10.0:
        raise TrainingError(
            f"fusion net accuracy {fused.accuracy:.2f} does not beat best single view {best_single:.2f} by 10 points"
        )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.csv").write_text(metrics_csv(rows), encoding="utf-8")
    (out_dir / "metrics.txt").write_text(metrics_table(rows), encoding="utf-8")
    (out_dir / "history.csv").write_text(neurofusion.history_to_csv(fitted_net.history), encoding="utf-8")
    files = [out_dir / "metrics.csv", out_dir / "metrics.txt", out_dir / "history.csv"]
    return ReportBundle(rows=rows, out_dir=out_dir, files=files)
