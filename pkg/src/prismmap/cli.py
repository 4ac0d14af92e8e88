"""Command-line surface: convert, sweep, labels, eval.

Exit codes: 0 success, 1 I/O, 2 validation, 3 backend, 4 evaluation
inconsistency (including samples skipped for missing truth).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import labels as labels_mod
from . import metrics, reproject
from .errors import (
    BackendError,
    InconsistencyError,
    PrismMapError,
    ValidationError,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_BACKEND = 3
EXIT_EVAL = 4

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _err(category: str, message: str) -> None:
    print(f"prismmap: error: {category}: {message}", file=sys.stderr)


def _warn(message: str) -> None:
    print(f"prismmap: warning: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# convert
# ---------------------------------------------------------------------------


def _make_config(args, n: int, fov: float) -> reproject.PrismMapConfig:
    return reproject.PrismMapConfig(
        n=n,
        fov_deg=fov,
        face_size=args.face_size,
        sampling=args.sampling,
        allow_narrow_fov=args.allow_narrow_fov,
    )


def cmd_convert(args) -> int:
    image = reproject.load_photosphere(args.input, resample=args.resample_to_2to1)
    config = _make_config(args, args.n, args.fov)
    pmap = reproject.render_prism_map(image, config, jobs=args.jobs)
    stem = Path(args.input).stem
    manifest_path = reproject.write_prism_map(pmap, args.out, stem, args.format)
    print(f"wrote {config.n} faces and {manifest_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def parse_sweep_spec(spec: str) -> list[tuple[int, float]]:
    """Parse 'n:fov,n:fov,...' into unique (n, fov) pairs."""
    pairs = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        n_text, _, fov_text = part.partition(":")
        try:
            pair = (int(n_text), float(fov_text))
        except ValueError as exc:
            raise ValidationError(f"bad sweep entry {part!r}; expected n:fov") from exc
        if pair in pairs:
            raise ValidationError(f"duplicate sweep entry {part!r}")
        pairs.append(pair)
    if not pairs:
        raise ValidationError("sweep spec is empty")
    return pairs


def _sweep_inputs(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    return [path]


def _existing_map_ok(manifest_path: Path, source_id: str) -> bool:
    """True when a previous render of this input is already on disk."""
    if not manifest_path.exists():
        return False
    try:
        manifest = reproject.read_manifest(manifest_path)
    except (OSError, ValueError):
        return False
    if manifest.get("source_id") != source_id:
        return False
    return all((manifest_path.parent / f["file"]).exists() for f in manifest["faces"])


def cmd_sweep(args) -> int:
    pairs = parse_sweep_spec(args.configs) if args.configs else list(reproject.TABLE2_SWEEP)
    inputs = _sweep_inputs(Path(args.input))
    if not inputs:
        _warn(f"no photosphere images found in {args.input}")
        return EXIT_OK

    rendered = faces = skipped = 0
    failures: list[tuple[Path, Exception]] = []
    for input_path in inputs:
        try:
            image = reproject.load_photosphere(input_path, resample=args.resample_to_2to1)
        except PrismMapError as exc:
            failures.append((input_path, exc))
            continue
        stem = input_path.stem
        for n, fov in pairs:
            try:
                config = _make_config(args, n, fov)
                manifest_path = Path(args.out) / reproject.manifest_filename(stem, config)
                if args.skip_existing and _existing_map_ok(manifest_path, image.content_id):
                    skipped += 1
                    continue
                pmap = reproject.render_prism_map(image, config, jobs=args.jobs)
                reproject.write_prism_map(pmap, args.out, stem, args.format)
                rendered += 1
                faces += config.n
            except (PrismMapError, OSError) as exc:
                failures.append((input_path, exc))
    print(f"rendered {rendered} prism maps ({faces} faces), skipped {skipped} up-to-date maps")
    if failures:
        for path, exc in failures:
            _err("sweep", f"{path}: {exc}")
        if any(isinstance(exc, ValidationError) for _, exc in failures):
            return EXIT_VALIDATION
        return EXIT_IO
    return EXIT_OK


# ---------------------------------------------------------------------------
# labels
# ---------------------------------------------------------------------------


def _build_backend(args):
    if args.backend == "stub":
        return labels_mod.StubBackend()
    if args.backend == "replay":
        descriptor = labels_mod.BackendDescriptor(
            "replay", replay_path=Path(args.replay_file) if args.replay_file else None
        )
        return descriptor.create()
    limiter = labels_mod.RateLimiter(args.rate_limit) if args.rate_limit else None
    return labels_mod.RemoteBackend.from_environment(
        adapter=args.adapter,
        image_format=args.image_format,
        max_retries=args.retries,
        rate_limiter=limiter,
    )


def _label_targets(paths: list[str]) -> list[tuple[str, object]]:
    """Expand CLI arguments into (description, loader) pairs, one per image."""
    targets = []
    for raw in paths:
        path = Path(raw)
        if path.name.endswith(".manifest.json"):
            manifest = reproject.read_manifest(path)
            for entry in manifest["faces"]:
                targets.append(
                    (f"{path.name}#f{entry['index']}",
                     lambda p=path, e=entry: reproject.load_face_pixels(p, e))
                )
        else:
            targets.append(
                (path.name, lambda p=path: reproject.load_photosphere(p).pixels)
            )
    return targets


def cmd_labels(args) -> int:
    backend = _build_backend(args)  # config errors surface before any work
    out_path = Path(args.out)
    known: dict[str, list[labels_mod.LabelObservation]] = {}
    if out_path.exists():
        known = labels_mod.load_label_dump(out_path)

    targets = _label_targets(args.inputs)

    def run_one(target):
        description, loader = target
        pixels = loader()
        image_hash = reproject.content_id(pixels)
        if image_hash in known:
            return description, image_hash, None, None
        try:
            return description, image_hash, labels_mod.obtain_labels(pixels, backend), None
        except BackendError as exc:
            return description, image_hash, None, exc

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_one, targets))
    else:
        results = [run_one(t) for t in targets]

    labeled = reused = 0
    failures = []
    for description, image_hash, observations, error in results:
        if error is not None:
            failures.append((description, error))
        elif observations is None:
            reused += 1
        else:
            known[image_hash] = observations
            labeled += 1

    labels_mod.write_label_dump(labels_mod.dump_records(known, backend.name), out_path)
    print(f"labeled {labeled} new images, reused {reused}, dump at {out_path}")
    if failures:
        for description, error in failures:
            _err("labels", f"{description}: {error}")
        return EXIT_BACKEND
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _parse_thresholds(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ValidationError(f"bad threshold list {text!r}") from exc
    if not values or any(not 0.0 <= v <= 1.0 for v in values):
        raise ValidationError(f"thresholds must be fractions in [0, 1], got {text!r}")
    return values


def _load_truth(path: Path) -> list[metrics.TruthSet]:
    if path.is_dir():
        return metrics.load_truth_dir(path)
    return metrics.load_truth_file(path)


def cmd_eval(args) -> int:
    manifest_paths = sorted(Path(args.sweep_dir).glob("*.manifest.json"))
    if not manifest_paths:
        _err("eval", f"no manifests found in {args.sweep_dir}")
        return EXIT_VALIDATION
    dump = labels_mod.load_label_dump(args.dumps)
    truth_sets = _load_truth(Path(args.truth))
    thresholds = _parse_thresholds(args.thresholds)

    report = metrics.evaluate_from_files(
        manifest_paths,
        dump,
        truth_sets,
        thresholds=thresholds,
        include_baseline=args.include_baseline,
        baseline_in_vocabulary=args.baseline_in_vocabulary,
    )

    out_path = Path(args.out)
    reproject.atomic_write_bytes(out_path, metrics.report_to_csv(report).encode("utf-8"))
    json_path = Path(args.json_out) if args.json_out else out_path.with_suffix(".json")
    reproject.atomic_write_bytes(json_path, metrics.report_to_json(report).encode("utf-8"))
    written = [str(out_path), str(json_path)]
    if args.per_sample:
        per_sample_path = out_path.with_name(out_path.stem + ".per_sample.csv")
        keys = metrics.report_config_keys(report)
        reproject.atomic_write_bytes(
            per_sample_path, metrics.per_sample_csv(report, keys).encode("utf-8")
        )
        written.append(str(per_sample_path))

    print(f"wrote {', '.join(written)}")
    for key, dropped in sorted(report.truth_violations.items()):
        _warn(f"truth labels outside vocabulary at {key}: {', '.join(dropped)}")
    if report.skipped_samples:
        _err("eval", f"samples skipped for missing truth: {', '.join(report.skipped_samples)}")
        return EXIT_EVAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_render_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--face-size", type=int, default=1024, help="face edge in pixels")
    parser.add_argument("--sampling", choices=reproject.SAMPLING_MODES, default="bilinear")
    parser.add_argument("--format", choices=("png", "jpeg"), default="png",
                        help="face image format")
    parser.add_argument("--resample-to-2to1", action="store_true",
                        help="resize off-ratio inputs instead of rejecting them")
    parser.add_argument("--allow-narrow-fov", action="store_true",
                        help="accept fov below the central angle (leaves equator gaps)")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads")
    parser.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prismmap",
        description="Convert 2:1 photospheres to n-gonal prism maps and evaluate label backends",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="render one prism map")
    p_convert.add_argument("input", help="photosphere image (PNG/JPEG)")
    p_convert.add_argument("--n", type=int, required=True, help="lateral side count")
    p_convert.add_argument("--fov", type=float, required=True, help="field of view in degrees")
    _add_render_options(p_convert)
    p_convert.set_defaults(func=cmd_convert)

    p_sweep = sub.add_parser("sweep", help="render the configuration sweep")
    p_sweep.add_argument("input", help="photosphere image or directory of images")
    p_sweep.add_argument("--configs", default=None,
                         help="comma list of n:fov pairs (default: the 11-row sweep)")
    p_sweep.add_argument("--skip-existing", action="store_true",
                         help="skip configs whose manifest matches the input hash")
    _add_render_options(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_labels = sub.add_parser("labels", help="label faces through a backend")
    p_labels.add_argument("inputs", nargs="+",
                          help="manifest files and/or photosphere images")
    p_labels.add_argument("--backend", choices=labels_mod.BACKEND_KINDS, default="stub")
    p_labels.add_argument("--replay-file", default=None, help="dump file for the replay backend")
    p_labels.add_argument("--adapter", default="generic", help="remote provider adapter")
    p_labels.add_argument("--image-format", choices=("png", "jpeg"), default="jpeg",
                          help="upload encoding for the remote backend")
    p_labels.add_argument("--retries", type=int, default=3, help="remote retry budget")
    p_labels.add_argument("--rate-limit", type=float, default=None,
                          help="remote calls per second, shared across workers")
    p_labels.add_argument("--jobs", type=int, default=1, help="worker threads")
    p_labels.add_argument("--out", required=True, help="label dump file (JSON)")
    p_labels.set_defaults(func=cmd_labels)

    p_eval = sub.add_parser("eval", help="compute precision/recall/F1 reports")
    p_eval.add_argument("--sweep-dir", required=True, help="directory with manifests and faces")
    p_eval.add_argument("--dumps", required=True, help="label dump file")
    p_eval.add_argument("--truth", required=True, help="truth JSON file or directory")
    p_eval.add_argument("--thresholds", default="0.25,0.5,0.75",
                        help="comma list of confidence thresholds")
    p_eval.add_argument("--include-baseline", action="store_true",
                        help="add direct-2:1 baseline rows to the report")
    p_eval.add_argument("--baseline-in-vocabulary", action="store_true",
                        help="let baseline labels join the vocabulary union")
    p_eval.add_argument("--per-sample", action="store_true",
                        help="also write per-sample metric rows")
    p_eval.add_argument("--out", required=True, help="report CSV path")
    p_eval.add_argument("--json-out", default=None, help="report JSON path (default: CSV sibling)")
    p_eval.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        _err("validation", str(exc))
        return EXIT_VALIDATION
    except BackendError as exc:
        _err("backend", str(exc))
        return EXIT_BACKEND
    except InconsistencyError as exc:
        _err("evaluation", str(exc))
        return EXIT_EVAL
    except OSError as exc:
        _err("io", str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
