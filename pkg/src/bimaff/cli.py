"""Command-line entry point.

Subcommands: extract (pipeline over a sequence directory), filter /
augment / stats (dataset management), eval (benchmark scoring + report),
adapt (model outputs -> predictions), selftest (built-in checks), and
serve (annotation backend). Errors are reported as JSON lines on stderr;
exit code 0 means the run finished with none.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
import threading
from pathlib import Path

from . import adapters, benchmark, dataset, images, selftest
from .annotation_store import AnnotationStore
from .config import ToolConfig, load_config
from .extraction import PipelineConfig, OracleSet, SequenceAnnotation, run_pipeline
from .oracles import OracleCapabilities, OracleSession


def _log(stream, **fields) -> None:
    stream.write(json.dumps(fields, separators=(",", ":"), default=str) + "\n")
    stream.flush()


def _load_tool_config(args) -> ToolConfig:
    config = load_config(args.config) if getattr(args, "config", None) else ToolConfig()
    for name in ("workers", "strategy"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "thresholds", None):
        config.thresholds = tuple(float(t) for t in args.thresholds.split(","))
    if getattr(args, "mode", None):
        config.eval_mode = args.mode
    if getattr(args, "mode_scoring", None):
        config.mode_scoring = args.mode_scoring
    if getattr(args, "crop", False):
        config.crop = True
    if getattr(args, "blacklist", None):
        config.blacklist_path = Path(args.blacklist)
    config.validate()
    return config


def _session_factory(config: ToolConfig, strategy: str):
    completer_kind = "completer_vs" if strategy == "vs" else "completer_ir"
    needed = ("propagator", "inpainter", completer_kind)
    for kind in needed:
        if kind not in config.oracles:
            raise SystemExit(f"config is missing an [oracles.{kind}] table")

    def make() -> OracleSet:
        def session(kind):
            oc = config.oracles[kind]
            return OracleSession(
                kind, oc.command,
                capabilities=OracleCapabilities(
                    max_frames_per_request=oc.max_frames_per_request,
                    input_window=oc.window))
        return OracleSet(
            propagator=session("propagator"),
            inpainter=session("inpainter"),
            completer=session(completer_kind),
        )

    return make


def cmd_extract(args) -> int:
    config = _load_tool_config(args)
    make_sessions = _session_factory(config, config.strategy)
    blacklist = (dataset.Blacklist.from_file(config.blacklist_path)
                 if config.blacklist_path else dataset.Blacklist())
    pipe_config = PipelineConfig(
        completion_strategy=config.strategy,
        erode_iterations=config.erode,
        dilate_iterations=config.dilate,
        inpaint_stride=config.stride,
        inpaint_halo=config.halo,
        blacklist=blacklist,
    )
    sequence_paths = sorted(Path(args.sequences).glob("*.json"))

    local = threading.local()
    all_sessions: list[OracleSet] = []
    sessions_lock = threading.Lock()

    def worker(path: Path):
        if not hasattr(local, "sessions"):
            local.sessions = make_sessions()
            with sessions_lock:
                all_sessions.append(local.sessions)
        seq = SequenceAnnotation.from_file(path)
        return run_pipeline(seq, local.sessions, pipe_config)

    accepted = []
    rejected = []
    errors = 0
    try:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(worker, path): path for path in sequence_paths}
            for future in concurrent.futures.as_completed(futures):
                path = futures[future]
                try:
                    result = future.result()
                except Exception as exc:
                    errors += 1
                    _log(sys.stderr, event="sequence-error", sequence=path.stem,
                         stage=getattr(exc, "stage", None), reason=str(exc))
                    continue
                if result.rejected:
                    rejected.append(result)
                    _log(sys.stderr, event="sequence-rejected",
                         sequence=result.record.record_id, reason=result.rejected)
                else:
                    accepted.append(result)
    finally:
        for sessions in all_sessions:
            sessions.close()

    accepted.sort(key=lambda r: r.record.record_id)
    rejected.sort(key=lambda r: r.record.record_id)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    frames_dir = Path(args.frames_dir) if args.frames_dir else out_path.parent / "frames"
    for result in accepted:
        if result.inpainted_image is not None:
            images.save_image(result.inpainted_image, frames_dir / result.record.inpainted_frame)
    dataset.write_records((r.record for r in accepted), out_path)
    if args.rejects:
        with open(args.rejects, "w", encoding="utf-8") as fh:
            for result in rejected:
                fh.write(json.dumps({
                    "record": result.record.to_json_obj(),
                    "reason": result.rejected,
                    "provenance": result.provenance,
                }, separators=(",", ":")) + "\n")
    _log(sys.stderr, event="extract-finished", sequences=len(sequence_paths),
         accepted=len(accepted), rejected=len(rejected), errors=errors)
    return 1 if errors else 0


def cmd_filter(args) -> int:
    config = _load_tool_config(args)
    blacklist = (dataset.Blacklist.from_file(config.blacklist_path)
                 if config.blacklist_path else dataset.Blacklist())
    records = dataset.read_records(args.input, strict=not args.lenient,
                                   on_skip=lambda line, msg: _log(
                                       sys.stderr, event="bad-line", line=line, reason=msg))
    kept, rejected = dataset.filter_records(records, blacklist)
    dataset.write_records(kept, args.out)
    for rejection in rejected:
        _log(sys.stderr, event="record-rejected",
             record=rejection.record.record_id, reason=rejection.reason)
    if args.rejects:
        with open(args.rejects, "w", encoding="utf-8") as fh:
            for rejection in rejected:
                fh.write(json.dumps({
                    "record": rejection.record.to_json_obj(),
                    "reason": rejection.reason,
                }, separators=(",", ":")) + "\n")
    _log(sys.stderr, event="filter-finished", kept=len(kept), rejected=len(rejected))
    return 0


def cmd_augment(args) -> int:
    config = _load_tool_config(args)
    records = list(dataset.read_records(args.input))
    images_root = Path(args.images_root) if args.images_root else None
    out_images = Path(args.out_images) if args.out_images else (
        images_root if images_root is None else Path(args.out).parent / "frames")

    def materialize(record, transform, suffix):
        """Write the transformed frame and re-point the record at it;
        without an images root, the augmentation tag alone marks the
        transform for on-the-fly rendering."""
        if images_root is None:
            return record
        src = images_root / record.inpainted_frame
        if not src.exists():
            _log(sys.stderr, event="missing-frame", record=record.record_id,
                 path=str(src))
            return record
        frame = images.load_image(src)
        new_ref = f"{Path(record.inpainted_frame).stem}{suffix}.png"
        images.save_image(transform(frame), out_images / new_ref)
        record.inpainted_frame = new_ref
        return record

    out = list(records)
    if args.hflip:
        flipped = [dataset.hflip_augment(r) for r in records]
        out += [materialize(r, images.hflip_image, "_hflip") for r in flipped]
    if args.jitter:
        ranges = dataset.JitterRanges(config.brightness, config.contrast,
                                      config.saturation, config.hue)
        jittered = []
        for i, record in enumerate(records):
            seed = config.seed + i
            copy = dataset.AffordanceRecord.from_json_obj(record.to_json_obj())
            copy.record_id = f"{record.record_id}#jitter"
            copy.augmentation_tags = record.augmentation_tags + ["jittered"]
            copy.extra["jitter_seed"] = seed
            copy = materialize(
                copy, lambda img, s=seed: dataset.color_jitter(img, s, ranges), "_jitter")
            jittered.append(copy)
        out += jittered
    if args.crop:
        cropped = []
        for i, record in enumerate(records):
            result = dataset.random_crop(record, seed=config.seed + i,
                                         min_scale=config.min_scale)
            if isinstance(result, dataset.Rejection):
                _log(sys.stderr, event="crop-rejected",
                     record=result.record.record_id, reason=result.reason)
            else:
                result.record_id = f"{record.record_id}#crop"
                box = result.crop_box
                result = materialize(
                    result,
                    lambda img, b=box: images.crop_image(img, b.x_min, b.y_min,
                                                         b.x_max, b.y_max),
                    "_crop")
                cropped.append(result)
        out += cropped
    dataset.write_records(out, args.out)
    _log(sys.stderr, event="augment-finished", read=len(records), written=len(out))
    return 0


def cmd_stats(args) -> int:
    stats = dataset.compute_stats(dataset.read_records(args.input))
    if args.json:
        print(json.dumps(stats.to_json_obj(), indent=2))
    else:
        print(stats.to_table())
    return 0


def cmd_eval(args) -> int:
    config = _load_tool_config(args)
    entries = benchmark.load_benchmark(args.benchmark)
    predictions = benchmark.read_predictions(args.predictions)
    eval_config = benchmark.EvalConfig(
        mode=config.eval_mode,
        thresholds=config.thresholds,
        crop=config.crop,
        bbox_margin=config.bbox_margin,
        mode_scoring=config.mode_scoring,
    )
    try:
        result = benchmark.evaluate(predictions, entries, eval_config)
    except KeyError as exc:
        _log(sys.stderr, event="eval-error", reason=str(exc))
        return 1
    for entry_id, reason in result.skipped_crops:
        _log(sys.stderr, event="crop-skipped", entry=entry_id, reason=reason)
    table = {args.model_name: result.aggregates}
    csv_text = benchmark.emit_report(table, fmt="csv")
    if args.out_csv:
        Path(args.out_csv).write_text(csv_text)
    else:
        print(csv_text, end="")
    if args.out_md:
        Path(args.out_md).write_text(benchmark.emit_report(table, fmt="markdown"))
    if args.per_entry:
        with open(args.per_entry, "w", encoding="utf-8") as fh:
            for entry_id in sorted(result.per_entry):
                fh.write(json.dumps({
                    "entry_id": entry_id,
                    **result.per_entry[entry_id].to_json_obj(),
                }, separators=(",", ":")) + "\n")
    return 0


def cmd_adapt(args) -> int:
    count = adapters.convert_model_outputs(args.input, args.out, args.threshold)
    _log(sys.stderr, event="adapt-finished", converted=count)
    return 0


def cmd_selftest(args) -> int:
    results = selftest.run_all(seed=args.seed, quick=args.quick)
    failed = 0
    for suite in results:
        status = "PASS" if suite.passed else "FAIL"
        print(f"[{status}] {suite.name}: {suite.checks - suite.failures}/{suite.checks} checks")
        if not suite.passed:
            failed += 1
    return 1 if failed else 0


def cmd_serve(args) -> int:
    from . import server

    store = AnnotationStore(args.tasks, args.store)
    server.serve(store, host=args.host, port=args.port,
                 static_dir=args.static, images_root=args.images)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bimaff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run the affordance extraction pipeline")
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--sequences", required=True, help="directory of sequence JSON files")
    p.add_argument("--out", required=True, help="output dataset JSONL")
    p.add_argument("--rejects", default=None, help="rejection log JSONL")
    p.add_argument("--frames-dir", default=None, help="directory for inpainted frames")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--strategy", choices=["vs", "ir"], default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("filter", help="apply consistency and blacklist filtering")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rejects", default=None)
    p.add_argument("--blacklist", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--lenient", action="store_true", help="skip malformed lines")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("augment", help="materialize augmented copies")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hflip", action="store_true", help="add horizontally flipped records")
    p.add_argument("--jitter", action="store_true", help="add seeded color-jittered records")
    p.add_argument("--crop", action="store_true", help="add seeded random crops")
    p.add_argument("--images-root", default=None,
                   help="frame files root; when given, transformed frames are written out")
    p.add_argument("--out-images", default=None,
                   help="directory for materialized frames (default: <out dir>/frames)")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("stats", help="dataset summary table")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="score predictions against a benchmark")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--model-name", default="model")
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-md", default=None)
    p.add_argument("--per-entry", default=None, help="per-entry reports JSONL")
    p.add_argument("--mode", choices=["per-hand", "union"], default=None)
    p.add_argument("--mode-scoring", choices=["union-of-modes", "best-mode"], default=None)
    p.add_argument("--crop", action="store_true")
    p.add_argument("--thresholds", default=None, help="comma-separated, e.g. 0.1,0.5,0.9")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("adapt", help="convert raw model outputs to predictions")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("selftest", help="built-in metric and gradient checks")
    p.add_argument("--seed", type=int, default=20240915)
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("serve", help="annotation backend")
    p.add_argument("--tasks", required=True, help="task manifest JSON")
    p.add_argument("--store", required=True, help="writable store directory")
    p.add_argument("--static", default=None, help="static UI directory")
    p.add_argument("--images", default=None, help="image files root")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
