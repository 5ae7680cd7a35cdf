"""Command-line driver: detect, synth, info and waterfall.

Exit status: 0 on success (including zero detections), 2 when the input
cannot be read or parsed, 3 when the configuration is invalid.  Logs go to
stderr as JSON lines; live object events go to stdout as JSON lines.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import socket
import sys
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

from .config import ConfigError, PipelineConfig, dump_config, load_config
from .georef import object_properties, write_catalog
from .imaging import feature_overlay, roi_overlay, write_pgm, write_ppm
from .pipeline import DetectionEngine, process_tile
from .waterfall import TileBuilder, equalize
from .xtf import TruncatedPacket, XtfError, XtfReader, group_by_ping

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3

log = logging.getLogger("sonarcat")

_STD_ATTRS = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        doc = {
            "ts": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            "level": record.levelname.lower(),
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _STD_ATTRS and not key.startswith("_"):
                doc[key] = value
        return json.dumps(doc, default=str)


def setup_logging(verbose: bool = False):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


class InputError(Exception):
    pass


@contextmanager
def open_input(path: str | None, live: str | None):
    """Binary stream for a file path, ``-`` for stdin, or a HOST:PORT TCP endpoint."""
    if live:
        host, _, port = live.rpartition(":")
        try:
            sock = socket.create_connection((host or "localhost", int(port)))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot connect to {live}: {exc}") from None
        try:
            with sock.makefile("rb") as fh:
                yield fh, f"tcp://{live}"
        finally:
            sock.close()
        return
    if path is None:
        raise InputError("no input given")
    if path == "-":
        yield sys.stdin.buffer, "stdin"
        return
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        yield fh, str(path)


def open_reader(fh) -> XtfReader:
    try:
        return XtfReader(fh)
    except (XtfError, ValueError) as exc:
        raise InputError(f"not a readable XTF stream: {exc}") from None


def read_pings(reader: XtfReader):
    """Pings until end of stream; a truncated last packet ends the stream with a warning."""
    try:
        for packet in reader:
            if isinstance(packet, tuple):
                yield from packet
    except TruncatedPacket as exc:
        log.warning("truncated_input", extra={"event": "truncated_input", "offset": exc.offset})


def resolve_config(args) -> PipelineConfig:
    """--config, else $SONARCAT_CONFIG, else built-in defaults; then command-line overrides."""
    path = getattr(args, "config", None) or os.environ.get("SONARCAT_CONFIG")
    cfg = load_config(path) if path else PipelineConfig()
    overrides = {}
    if getattr(args, "channels", None):
        overrides["channels"] = tuple(s.strip() for s in args.channels.split(",") if s.strip())
    if getattr(args, "no_equalize", False):
        overrides["equalize"] = False
    if getattr(args, "workers", None):
        overrides["workers"] = args.workers
    return cfg.with_overrides(**overrides) if overrides else cfg


def cmd_detect(args) -> int:
    cfg = resolve_config(args)
    if args.dump_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open_input(args.input, args.live) as (fh, source):
        reader = open_reader(fh)
        engine = DetectionEngine(cfg, source=source)
        with engine:
            for ping in read_pings(reader):
                for obj in engine.feed(ping):
                    _emit(obj, args.live)
            for obj in engine.finish():
                _emit(obj, args.live)
    objects = engine.objects
    fmts = ("geojson", "csv") if args.format == "both" else (args.format,)
    for fmt in fmts:
        path = write_catalog(objects, out_dir / f"catalog.{fmt}", fmt)
        log.info("catalog_written", extra={"event": "catalog_written", "path": str(path), "objects": len(objects)})
    stats = reader.stats
    log.info("detect_done", extra={"event": "detect_done", "pings": stats.pings, "objects": len(objects),
                                   "resyncs": stats.resyncs, "skipped_packets": stats.skipped})
    return EXIT_OK


def _emit(obj, live: str | None):
    if live:
        sys.stdout.write(json.dumps(object_properties(obj)) + "\n")
        sys.stdout.flush()


def cmd_info(args) -> int:
    with open_input(args.input, None) as (fh, source):
        reader = open_reader(fh)
        pings = list(read_pings(reader))
    groups = group_by_ping(pings)
    hdr = reader.header
    lines = [f"source {source}", f"channels {hdr.channel_count}"]
    for info in hdr.channel_infos:
        lines.append(f"  channel {info.index}: {info.side.value}, {8 * info.bytes_per_sample}-bit samples"
                     + (f", {info.samples_per_ping_hint} samples/ping" if info.samples_per_ping_hint else ""))
    lines.append(f"pings {len(groups)}")
    if groups:
        t0, t1 = groups[0][0].timestamp, groups[-1][0].timestamp
        lines.append(f"time span {t0.isoformat()} .. {t1.isoformat()} ({(t1 - t0).total_seconds():.2f} s)")
        with_nav = sum(g[0].nav is not None for g in groups)
        lines.append(f"nav coverage {100.0 * with_nav / len(groups):.0f}%")
        widths = sorted({8 * p.channel.bytes_per_sample for p in pings})
        lines.append("sample width " + ", ".join(f"{w}-bit" for w in widths))
        sizes = sorted({p.samples.size for p in pings})
        lines.append("samples per ping " + ", ".join(str(s) for s in sizes))
    else:
        lines.append("nav coverage 0%")
    st = reader.stats
    lines.append(f"packets {st.packets} (skipped {st.skipped}, resyncs {st.resyncs})")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_waterfall(args) -> int:
    cfg = resolve_config(args)
    if args.dump_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    builders = {side: TileBuilder(side, cfg.tile_rows, cfg.tile_overlap, equalize=False) for side in cfg.sides}
    counters = dict.fromkeys(builders, 0)

    def handle(tile):
        name = f"{tile.channel_side.value}_{counters[tile.channel_side]:04d}"
        counters[tile.channel_side] += 1
        write_pgm(out_dir / f"{name}_corrected.pgm", tile.pixels)
        if cfg.equalize:
            tile = equalize(tile)
            write_pgm(out_dir / f"{name}_equalized.pgm", tile.pixels)
        if args.overlay != "none":
            res = process_tile(tile, cfg)
            if args.overlay == "features":
                rgb = feature_overlay(tile.pixels, res.cloud.rows, res.cloud.cols, res.labels)
            else:
                rgb = roi_overlay(tile.pixels, res.cloud.rows, res.cloud.cols, res.labels,
                                  [r.bbox for r in res.rois])
            write_ppm(out_dir / f"{name}_{args.overlay}.ppm", rgb)

    with open_input(args.input, None) as (fh, _):
        reader = open_reader(fh)
        for ping in read_pings(reader):
            b = builders.get(ping.channel.side)
            if b is not None:
                for tile in b.push(ping):
                    handle(tile)
    for b in builders.values():
        for tile in b.flush():
            handle(tile)
    log.info("waterfall_done", extra={"event": "waterfall_done",
                                      "tiles": {s.value: n for s, n in counters.items()}})
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import ScenarioError, SurveyScenario, acceptance_scenario, load_scenario, write_survey
    from dataclasses import replace

    try:
        if args.config:
            scenario = load_scenario(args.config)
        elif args.empty:
            scenario = SurveyScenario()
        else:
            # the built-in targets are spread over whatever length is asked for
            scenario = acceptance_scenario(ping_count=args.pings if args.pings is not None else 2000)
        kw = {}
        if args.seed is not None:
            kw["seed"] = args.seed
        if args.pings is not None:
            kw["ping_count"] = args.pings
        if kw:
            scenario = replace(scenario, **kw)
    except (ScenarioError, OSError) as exc:
        raise ConfigError("scenario", str(exc)) from None
    path, truth = write_survey(scenario, args.out)
    log.info("synth_written", extra={"event": "synth_written", "path": str(path), "pings": scenario.ping_count,
                                     "targets": len(truth), "seed": scenario.seed})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sonarcat", description="Sidescan sonar object detection and cataloguing.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect objects and write a georeferenced catalog")
    p.add_argument("input", nargs="?", help="XTF file, or - for stdin")
    p.add_argument("--config", help="pipeline configuration file (default: $SONARCAT_CONFIG)")
    p.add_argument("--live", metavar="HOST:PORT", help="read a live XTF stream over TCP and emit JSON-lines events")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("geojson", "csv", "both"), default="both")
    p.add_argument("--channels", help="comma-separated channel sides (port,starboard)")
    p.add_argument("--workers", type=int, help="feature/clustering worker processes")
    p.add_argument("--no-equalize", action="store_true", help="skip histogram equalization")
    p.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("info", help="summarize an XTF file")
    p.add_argument("input")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("waterfall", help="write corrected and equalized tile images")
    p.add_argument("input")
    p.add_argument("--config")
    p.add_argument("--out", default=".")
    p.add_argument("--channels")
    p.add_argument("--no-equalize", action="store_true")
    p.add_argument("--overlay", choices=("features", "rois", "none"), default="none")
    p.add_argument("--dump-config", action="store_true")
    p.set_defaults(func=cmd_waterfall)

    p = sub.add_parser("synth", help="generate a synthetic survey with ground truth")
    p.add_argument("out", help="output XTF path; truth goes to <stem>.truth.geojson")
    p.add_argument("--config", help="scenario file")
    p.add_argument("--seed", type=int)
    p.add_argument("--pings", type=int)
    p.add_argument("--empty", action="store_true", help="no targets (default: the ten-target survey)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("invalid_config", extra={"event": "invalid_config", "field": exc.field_name, "error": str(exc)})
        print(f"sonarcat: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        log.error("bad_input", extra={"event": "bad_input", "error": str(exc)})
        print(f"sonarcat: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
