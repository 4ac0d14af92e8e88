"""Evaluation of label results: vocabulary/negatives set algebra, confusion
sets against human truth, precision/recall/F1, and aggregation across
samples.

The per-sample vocabulary at a threshold is the union of every
configuration's positives list at that threshold; negatives are the
vocabulary minus a configuration's own positives. A 0/0 precision or
recall is treated as undefined (not an error) and excluded from averages,
with the exclusion counted in the report.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import InconsistencyError
from .labels import LabelObservation, PositivesList, obtain_labels, positives_for_map
from .reproject import (
    EquirectImage,
    PrismMapConfig,
    content_id,
    load_face_pixels,
    manifest_sample_id,
    read_manifest,
    render_face,
    table2_configs,
)

DEFAULT_THRESHOLDS = (0.25, 0.5, 0.75)

#: Identifier for the direct-2:1 pseudo-configuration (whole photosphere as
#: one face). Reported with n=1 and fov 360 since it sees everything.
DIRECT_CONFIG_ID = "direct"
DIRECT_N = 1
DIRECT_FOV_DEG = 360.0


# ---------------------------------------------------------------------------
# set algebra
# ---------------------------------------------------------------------------


def vocabulary(positive_lists: Iterable[PositivesList | Iterable[str]]) -> frozenset[str]:
    """Union of all configurations' positives at one threshold."""
    lists = list(positive_lists)
    if not lists:
        raise ValueError("vocabulary needs at least one positives list")
    vocab: set[str] = set()
    for entry in lists:
        vocab |= set(entry.entries if isinstance(entry, PositivesList) else entry)
    return frozenset(vocab)


def negatives(vocab: frozenset[str] | set[str], positives: frozenset[str] | set[str]) -> frozenset[str]:
    """Vocabulary minus positives; the positives must be drawn from the vocabulary."""
    positives = frozenset(positives)
    vocab = frozenset(vocab)
    stray = positives - vocab
    if stray:
        raise InconsistencyError(
            f"positives not contained in vocabulary: {sorted(stray)}"
        )
    return vocab - positives


def confusion(
    positives: frozenset[str] | set[str],
    negs: frozenset[str] | set[str],
    truth: frozenset[str] | set[str],
) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    """(TP, FP, FN) label sets for one configuration against human truth."""
    positives = frozenset(positives)
    negs = frozenset(negs)
    truth = frozenset(truth)
    stray = truth - (positives | negs)
    if stray:
        raise InconsistencyError(
            f"truth labels outside positives-union-negatives: {sorted(stray)}"
        )
    return truth & positives, positives - truth, negs & truth


def prf1(
    tp: frozenset[str] | set[str] | int,
    fp: frozenset[str] | set[str] | int,
    fn: frozenset[str] | set[str] | int,
) -> tuple[float | None, float | None, float | None]:
    """Precision, recall, F1 from confusion sets (or their cardinalities).

    0/0 precision or recall is None (undefined). F1 is None whenever
    precision or recall is, and 0.0 when both are defined but zero.
    """
    ntp = tp if isinstance(tp, int) else len(tp)
    nfp = fp if isinstance(fp, int) else len(fp)
    nfn = fn if isinstance(fn, int) else len(fn)
    precision = ntp / (ntp + nfp) if ntp + nfp > 0 else None
    recall = ntp / (ntp + nfn) if ntp + nfn > 0 else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


# ---------------------------------------------------------------------------
# truth files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruthSet:
    """Human-judged correct labels for one sample; threshold None = shared."""

    sample_id: str
    labels: frozenset[str]
    threshold: float | None = None


def load_truth_file(path: str | Path) -> list[TruthSet]:
    """Read one truth JSON file ({"sample", "threshold"?, "truth"}) or a list of them."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    records = data if isinstance(data, list) else [data]
    out = []
    for record in records:
        threshold = record.get("threshold")
        out.append(
            TruthSet(
                sample_id=record["sample"],
                labels=frozenset(record["truth"]),
                threshold=None if threshold is None else float(threshold),
            )
        )
    return out


def load_truth_dir(path: str | Path) -> list[TruthSet]:
    sets: list[TruthSet] = []
    for file in sorted(Path(path).glob("*.json")):
        sets.extend(load_truth_file(file))
    return sets


def truth_lookup(truth_sets: Iterable[TruthSet]) -> dict[tuple[str, float | None], frozenset[str]]:
    return {(t.sample_id, t.threshold): t.labels for t in truth_sets}


def truth_for(lookup: Mapping, sample_id: str, threshold: float) -> frozenset[str] | None:
    """Per-threshold truth, falling back to a shared (threshold-less) set."""
    exact = lookup.get((sample_id, threshold))
    if exact is not None:
        return exact
    return lookup.get((sample_id, None))


# ---------------------------------------------------------------------------
# report structures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfigKey:
    """Identity and reporting metadata for one configuration row."""

    config_id: str
    n: int
    fov_deg: float


DIRECT_KEY = ConfigKey(DIRECT_CONFIG_ID, DIRECT_N, DIRECT_FOV_DEG)


@dataclass(frozen=True)
class MetricTriple:
    precision: float | None
    recall: float | None
    f1: float | None


@dataclass(frozen=True)
class SampleEvaluation:
    """Per-sample metrics keyed by (config_id, threshold)."""

    sample_id: str
    rows: Mapping[tuple[str, float], MetricTriple]


@dataclass(frozen=True)
class AggregateRow:
    config_id: str
    n: int
    fov_deg: float
    threshold: float
    mean_precision: float | None
    std_precision: float | None
    mean_recall: float | None
    std_recall: float | None
    mean_f1: float | None
    std_f1: float | None
    undefined_count: int


@dataclass(frozen=True)
class AggregateReport:
    """Cross-sample means and sample standard deviations per (config, threshold)."""

    rows: tuple[AggregateRow, ...]
    per_sample: tuple[SampleEvaluation, ...]
    skipped_samples: tuple[str, ...] = ()
    truth_violations: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def has_skipped(self) -> bool:
        return bool(self.skipped_samples)


def _mean_std(values: Sequence[float]) -> tuple[float | None, float | None]:
    """Mean and sample (n-1) standard deviation; std is 0.0 below 2 values."""
    if not values:
        return None, None
    mean = sum(values) / len(values)
    if len(values) < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


def aggregate(
    per_sample: Sequence[SampleEvaluation],
    config_keys: Sequence[ConfigKey],
    thresholds: Sequence[float],
    skipped_samples: Sequence[str] = (),
    truth_violations: Mapping[str, tuple[str, ...]] | None = None,
) -> AggregateReport:
    """Reduce per-sample metrics to means/std devs over defined values only."""
    rows = []
    for key in config_keys:
        for t in thresholds:
            triples = [s.rows[(key.config_id, t)] for s in per_sample if (key.config_id, t) in s.rows]
            columns = {}
            undefined = 0
            for name in ("precision", "recall", "f1"):
                defined = [getattr(tr, name) for tr in triples if getattr(tr, name) is not None]
                undefined += len(triples) - len(defined)
                columns[name] = _mean_std(defined)
            rows.append(
                AggregateRow(
                    config_id=key.config_id,
                    n=key.n,
                    fov_deg=key.fov_deg,
                    threshold=t,
                    mean_precision=columns["precision"][0],
                    std_precision=columns["precision"][1],
                    mean_recall=columns["recall"][0],
                    std_recall=columns["recall"][1],
                    mean_f1=columns["f1"][0],
                    std_f1=columns["f1"][1],
                    undefined_count=undefined,
                )
            )
    return AggregateReport(
        rows=tuple(rows),
        per_sample=tuple(per_sample),
        skipped_samples=tuple(skipped_samples),
        truth_violations=dict(truth_violations or {}),
    )


# ---------------------------------------------------------------------------
# per-sample evaluation core (shared by in-memory and file-driven paths)
# ---------------------------------------------------------------------------


def evaluate_sample(
    sample_id: str,
    observations_by_config: Mapping[str, Sequence[Sequence[LabelObservation]]],
    config_keys: Sequence[ConfigKey],
    truth_sets: Mapping,
    thresholds: Sequence[float],
    baseline_observations: Sequence[LabelObservation] | None = None,
    include_baseline: bool = False,
    baseline_in_vocabulary: bool = False,
) -> tuple[SampleEvaluation, dict[str, tuple[str, ...]]]:
    """Run the positives/vocabulary/confusion/metric chain for one sample.

    Truth labels outside the vocabulary are dropped and reported back as
    violations rather than failing the run.
    """
    rows: dict[tuple[str, float], MetricTriple] = {}
    violations: dict[str, tuple[str, ...]] = {}
    for t in thresholds:
        positives = {
            key.config_id: positives_for_map(
                observations_by_config[key.config_id], t, key.config_id, sample_id
            )
            for key in config_keys
        }
        vocab_sources = list(positives.values())
        baseline_pos = None
        if baseline_observations is not None:
            baseline_pos = positives_for_map(
                [baseline_observations], t, DIRECT_CONFIG_ID, sample_id
            )
            if baseline_in_vocabulary:
                vocab_sources.append(baseline_pos)
        vocab = vocabulary(vocab_sources)

        truth_raw = truth_for(truth_sets, sample_id, t)
        if truth_raw is None:
            raise InconsistencyError(f"sample {sample_id} has no truth for threshold {t}")
        truth = truth_raw & vocab
        dropped = truth_raw - vocab
        if dropped:
            violations[f"{sample_id}@{t:g}"] = tuple(sorted(dropped))

        evaluated = [(key.config_id, positives[key.config_id]) for key in config_keys]
        if include_baseline and baseline_pos is not None:
            evaluated.append((DIRECT_CONFIG_ID, baseline_pos))
        for config_id, pos in evaluated:
            # The baseline's positives may contain labels outside the
            # vocabulary when it is excluded from the union; restrict them
            # so the partitioning stays well defined.
            entries = pos.entries & vocab if config_id == DIRECT_CONFIG_ID else pos.entries
            negs = negatives(vocab, entries)
            tp, fp, fn = confusion(entries, negs, truth)
            p, r, f1 = prf1(tp, fp, fn)
            rows[(config_id, t)] = MetricTriple(p, r, f1)
    return SampleEvaluation(sample_id, rows), violations


# ---------------------------------------------------------------------------
# experiment driver (render + label + evaluate, in memory)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSample:
    """One test-set entry: panorama plus its truth sets."""

    sample_id: str
    image: EquirectImage
    truth_sets: tuple[TruthSet, ...]


def _config_key(config: PrismMapConfig) -> ConfigKey:
    return ConfigKey(config.config_id, config.n, config.fov_deg)


def _label_sample(
    sample: ExperimentSample,
    configs: Sequence[PrismMapConfig],
    backend,
    need_baseline: bool,
    jobs: int = 1,
) -> tuple[dict[str, list[list[LabelObservation]]], list[LabelObservation] | None]:
    tasks = [(config, k) for config in configs for k in range(config.n)]

    def work(task):
        config, k = task
        return obtain_labels(render_face(sample.image, config, k), backend)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(task) for task in tasks]

    observations: dict[str, list[list[LabelObservation]]] = {}
    cursor = 0
    for config in configs:
        observations[config.config_id] = results[cursor : cursor + config.n]
        cursor += config.n
    baseline = obtain_labels(sample.image.pixels, backend) if need_baseline else None
    return observations, baseline


def run_experiment(
    samples: Sequence[ExperimentSample],
    backend,
    configs: Sequence[PrismMapConfig] | None = None,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    include_baseline: bool = False,
    baseline_in_vocabulary: bool = False,
    jobs: int = 1,
) -> AggregateReport:
    """Render every configuration of every sample, label the faces, and
    aggregate precision/recall/F1 across samples.

    Samples missing truth for any requested threshold are skipped and
    listed in the report. Faces are independent, so jobs > 1 renders and
    labels each sample's faces concurrently; samples are reduced in order.
    """
    if configs is None:
        configs = table2_configs()
    config_keys = [_config_key(c) for c in configs]
    need_baseline = include_baseline or baseline_in_vocabulary

    kept: list[ExperimentSample] = []
    skipped: list[str] = []
    for sample in samples:
        lookup = truth_lookup(sample.truth_sets)
        if all(truth_for(lookup, sample.sample_id, t) is not None for t in thresholds):
            kept.append(sample)
        else:
            skipped.append(sample.sample_id)

    def evaluate_one(sample: ExperimentSample):
        observations, baseline = _label_sample(sample, configs, backend, need_baseline, jobs)
        return evaluate_sample(
            sample.sample_id,
            observations,
            config_keys,
            truth_lookup(sample.truth_sets),
            thresholds,
            baseline_observations=baseline,
            include_baseline=include_baseline,
            baseline_in_vocabulary=baseline_in_vocabulary,
        )

    results = [evaluate_one(sample) for sample in kept]
    per_sample = [r[0] for r in results]
    violations: dict[str, tuple[str, ...]] = {}
    for _, v in results:
        violations.update(v)

    keys = list(config_keys) + ([DIRECT_KEY] if include_baseline else [])
    return aggregate(per_sample, keys, thresholds, skipped, violations)


# ---------------------------------------------------------------------------
# file-driven evaluation (manifests + label dumps, no rendering)
# ---------------------------------------------------------------------------


def evaluate_from_files(
    manifest_paths: Sequence[str | Path],
    dump: Mapping[str, Sequence[LabelObservation]],
    truth_sets: Sequence[TruthSet],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    include_baseline: bool = False,
    baseline_in_vocabulary: bool = False,
) -> AggregateReport:
    """Evaluate previously rendered and labeled sweeps.

    Manifests are grouped by input stem into samples; each referenced face
    file is re-hashed to fetch its observations from the dump. Samples
    without truth for every threshold are skipped and listed.
    """
    by_sample: dict[str, list[tuple[ConfigKey, Path, dict]]] = {}
    for path in manifest_paths:
        path = Path(path)
        manifest = read_manifest(path)
        sample_id = manifest_sample_id(path)
        key = ConfigKey(f"n{manifest['n']}_fov{manifest['fov_deg']:g}",
                        manifest["n"], manifest["fov_deg"])
        by_sample.setdefault(sample_id, []).append((key, path, manifest))

    lookup = truth_lookup(truth_sets)
    need_baseline = include_baseline or baseline_in_vocabulary
    all_keys: dict[str, ConfigKey] = {}
    per_sample: list[SampleEvaluation] = []
    skipped: list[str] = []
    violations: dict[str, tuple[str, ...]] = {}

    for sample_id in sorted(by_sample):
        if any(truth_for(lookup, sample_id, t) is None for t in thresholds):
            skipped.append(sample_id)
            continue
        entries = sorted(by_sample[sample_id], key=lambda e: (e[0].n, e[0].fov_deg))
        source_ids = {manifest["source_id"] for _, _, manifest in entries}
        if len(source_ids) != 1:
            raise InconsistencyError(
                f"sample {sample_id} manifests disagree on source_id: {sorted(source_ids)}"
            )
        observations: dict[str, list[list[LabelObservation]]] = {}
        missing: list[str] = []
        for key, path, manifest in entries:
            all_keys[key.config_id] = key
            faces = []
            for face_entry in manifest["faces"]:
                face_hash = content_id(load_face_pixels(path, face_entry))
                if face_hash not in dump:
                    missing.append(face_hash)
                    faces.append([])
                else:
                    faces.append(list(dump[face_hash]))
            observations[key.config_id] = faces
        baseline = None
        if need_baseline:
            source_id = next(iter(source_ids))
            if source_id not in dump:
                missing.append(source_id)
            else:
                baseline = list(dump[source_id])
        if missing:
            raise InconsistencyError(
                f"sample {sample_id}: no labels dumped for hashes {sorted(set(missing))}"
            )
        config_keys = [key for key, _, _ in entries]
        evaluation, sample_violations = evaluate_sample(
            sample_id,
            observations,
            config_keys,
            lookup,
            thresholds,
            baseline_observations=baseline,
            include_baseline=include_baseline,
            baseline_in_vocabulary=baseline_in_vocabulary,
        )
        per_sample.append(evaluation)
        violations.update(sample_violations)

    ordered_keys = sorted(all_keys.values(), key=lambda k: (k.n, k.fov_deg))
    if include_baseline:
        ordered_keys.append(DIRECT_KEY)
    return aggregate(per_sample, ordered_keys, thresholds, skipped, violations)


def report_config_keys(report: AggregateReport) -> dict[str, ConfigKey]:
    """config_id -> reporting metadata, recovered from aggregate rows."""
    return {row.config_id: ConfigKey(row.config_id, row.n, row.fov_deg) for row in report.rows}


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------

REPORT_CSV_HEADER = (
    "config,n,fov_deg,threshold,mean_precision,std_precision,"
    "mean_recall,std_recall,mean_f1,std_f1,undefined_count"
)
PER_SAMPLE_CSV_HEADER = "config,n,fov_deg,threshold,sample,precision,recall,f1"


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def report_to_csv(report: AggregateReport) -> str:
    out = io.StringIO()
    out.write(REPORT_CSV_HEADER + "\n")
    for row in report.rows:
        out.write(
            f"{row.config_id},{row.n},{row.fov_deg:g},{row.threshold:g},"
            f"{_fmt(row.mean_precision)},{_fmt(row.std_precision)},"
            f"{_fmt(row.mean_recall)},{_fmt(row.std_recall)},"
            f"{_fmt(row.mean_f1)},{_fmt(row.std_f1)},{row.undefined_count}\n"
        )
    return out.getvalue()


def per_sample_csv(report: AggregateReport, config_keys: Mapping[str, ConfigKey]) -> str:
    out = io.StringIO()
    out.write(PER_SAMPLE_CSV_HEADER + "\n")
    for evaluation in report.per_sample:
        for (config_id, t), triple in sorted(
            evaluation.rows.items(), key=lambda kv: (kv[0][0], kv[0][1])
        ):
            key = config_keys[config_id]
            out.write(
                f"{config_id},{key.n},{key.fov_deg:g},{t:g},{evaluation.sample_id},"
                f"{_fmt(triple.precision)},{_fmt(triple.recall)},{_fmt(triple.f1)}\n"
            )
    return out.getvalue()


def report_to_json(report: AggregateReport) -> str:
    payload = {
        "rows": [
            {
                "config": row.config_id,
                "n": row.n,
                "fov_deg": row.fov_deg,
                "threshold": row.threshold,
                "mean_precision": row.mean_precision,
                "std_precision": row.std_precision,
                "mean_recall": row.mean_recall,
                "std_recall": row.std_recall,
                "mean_f1": row.mean_f1,
                "std_f1": row.std_f1,
                "undefined_count": row.undefined_count,
            }
            for row in report.rows
        ],
        "skipped_samples": list(report.skipped_samples),
        "truth_violations": {k: list(v) for k, v in sorted(report.truth_violations.items())},
    }
    return json.dumps(payload, indent=2) + "\n"
