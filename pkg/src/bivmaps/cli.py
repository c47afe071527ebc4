"""Command line entry point.

    bivmaps render    --technique T --geometry G --data D --out map.svg
    bivmaps popchart  --variant V --geometry G --data D --cities C --out map.svg
    bivmaps oracle    --task T --geometry G --data D [--cities C] --out answer.json
    bivmaps design    --techniques a,b,c,d --question-sets s1,s2,s3,s4 --participants n --out d.csv
    bivmaps analyze   --trials t.csv [--rankings r.csv] --seed N --out dir/
    bivmaps validate  [--geometry G] [--data D] [--cities C] [--trials T] [--rankings R]
    bivmaps --from-meta out.svg.meta.json

Every run that writes ``--out X`` also writes ``X.meta.json`` holding the
fully resolved configuration; ``--from-meta`` replays it.

Exit status: 0 success, 1 bad input or usage, 2 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

from . import __version__
from .cartogram import ContiguousParams
from .classify import DEFAULT_K, default_scheme, parse_palette
from .errors import BivmapsError
from .geometry import adjacency
from .model import join_data, parse_cities, parse_geometry, parse_trials, read_region_table
from .model import validate as validate_data
from .popchart import VARIANTS, PopchartSpec, default_bandwidth, render_popchart
from .scene import Camera, write_svg
from .stats import DEFAULT_RESAMPLES, analyze, estimate_chart, rank_summary, rows_to_csv
from .taskoracle import generate_design, oracle_query
from .techniques import TECHNIQUES, RegionTechniqueSpec, render_region_map

log = logging.getLogger("bivmaps")

TASKS = ("rank", "absolute", "neighbor_argmax", "compare", "biggest_city",
         "region_population")


class UsageError(BivmapsError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bivmaps", description="Bivariate choropleth and popchart toolkit.",
                allow_abbrev=False)
    p.add_argument("--version", action="version", version=f"bivmaps {__version__}")
    p.add_argument("--from-meta", metavar="FILE",
                   help="replay a run from its .meta.json sidecar")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, *, inputs=("geometry", "data"), required=(), out_required=True):
        for name in inputs:
            sp.add_argument(f"--{name}", required=name in required, metavar="PATH")
        sp.add_argument("--out", required=out_required, metavar="PATH")

    def drawing(sp):
        sp.add_argument("--classes", type=int, default=DEFAULT_K)
        sp.add_argument("--palette", default=None, help="comma-separated hex colours")
        sp.add_argument("--highlight", default="", help="comma-separated region ids")
        sp.add_argument("--width", type=float, default=800.0)
        sp.add_argument("--height", type=float, default=600.0)
        sp.add_argument("--pitch", type=float, default=55.0)
        sp.add_argument("--height-scale", type=float, default=120.0)
        sp.add_argument("--statistic-unit", choices=("percent", "fraction"), default="percent")
        sp.add_argument("--seed", type=int, default=0, help="unused by renderers; recorded")

    sp = sub.add_parser("render", help="draw one region-level design", allow_abbrev=False)
    common(sp, required=("geometry", "data"))
    sp.add_argument("--technique", required=True, choices=TECHNIQUES)
    sp.add_argument("--max-iterations", type=int, default=128)
    sp.add_argument("--target-error", type=float, default=0.02)
    sp.add_argument("--damping", type=float, default=0.25)
    sp.add_argument("--diagnostics", action="store_true",
                    help="also write layout diagnostics to <out>.diagnostics.json")
    drawing(sp)

    sp = sub.add_parser("popchart", help="draw a city-level overlay", allow_abbrev=False)
    common(sp, inputs=("geometry", "data", "cities"), required=("geometry", "data", "cities"))
    sp.add_argument("--variant", required=True, choices=VARIANTS)
    sp.add_argument("--bandwidth", type=float, default=None)
    sp.add_argument("--resolution", type=int, default=256)
    sp.add_argument("--r-max", type=float, default=None)
    drawing(sp)

    sp = sub.add_parser("oracle", help="answer a map-reading task", allow_abbrev=False)
    common(sp, inputs=("geometry", "data", "cities"), required=("geometry", "data"))
    sp.add_argument("--task", required=True, choices=TASKS)
    sp.add_argument("--metric", default="absolute", choices=("population", "rate", "absolute"))
    sp.add_argument("--region", default=None)
    sp.add_argument("--candidates", default="", help="comma-separated region ids")
    sp.add_argument("--set-a", default="")
    sp.add_argument("--set-b", default="")
    sp.add_argument("--seed", type=int, default=0, help="unused by the oracle; recorded")
    sp.add_argument("--statistic-unit", choices=("percent", "fraction"), default="percent")

    sp = sub.add_parser("design", help="counterbalanced study design", allow_abbrev=False)
    common(sp, inputs=())
    sp.add_argument("--techniques", required=True)
    sp.add_argument("--question-sets", required=True)
    sp.add_argument("--participants", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0, help="unused by the design; recorded")

    sp = sub.add_parser("analyze", help="estimation statistics for trial logs",
                        allow_abbrev=False)
    common(sp, inputs=("trials", "rankings"), required=("trials",))
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)

    sp = sub.add_parser("validate", help="check input files", allow_abbrev=False)
    common(sp, inputs=("geometry", "data", "cities", "trials", "rankings"),
           out_required=False)
    sp.add_argument("--statistic-unit", choices=("percent", "fraction"), default="percent")
    return p


# --- loading --------------------------------------------------------------

def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _load_data(args):
    gmap = parse_geometry(_read(args.geometry), source=args.geometry)
    rows = read_region_table(_read(args.data), source=args.data)
    return join_data(gmap, rows, args.statistic_unit)


def _camera(args) -> Camera:
    return Camera(pitch=args.pitch, height_scale=args.height_scale)


def _palette(args):
    if args.palette:
        return parse_palette(args.palette)
    return None


def _write(path: str, payload: bytes | str) -> None:
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True)
    p.write_bytes(payload)


# --- subcommands ----------------------------------------------------------

def cmd_render(args) -> dict:
    data = _load_data(args)
    palette = _palette(args)
    spec = RegionTechniqueSpec(
        technique=args.technique, k=args.classes, palette=palette, camera=_camera(args),
        highlight=tuple(_csv_list(args.highlight)), width=args.width, height=args.height,
        cartogram=ContiguousParams(args.max_iterations, args.target_error, args.damping))
    scene = render_region_map(data, spec)
    _write(args.out, write_svg(scene))
    if args.diagnostics:
        diag = {k: scene.meta[k] for k in ("cartogram", "noncontiguous") if k in scene.meta}
        _write(args.out + ".diagnostics.json", json.dumps(diag, indent=2, sort_keys=True))
    return {"palette": ",".join(palette or default_scheme(args.classes))}


def cmd_popchart(args) -> dict:
    data = _load_data(args)
    cities = parse_cities(_read(args.cities), data, source=args.cities)
    for w in cities.warnings:
        print(f"warning: {w}", file=sys.stderr)
    palette = _palette(args)
    bandwidth = args.bandwidth if args.bandwidth is not None else default_bandwidth(data)
    spec = PopchartSpec(
        variant=args.variant, k=args.classes, palette=palette, bandwidth=bandwidth,
        resolution=args.resolution, camera=_camera(args), r_max=args.r_max,
        highlight=tuple(_csv_list(args.highlight)), width=args.width, height=args.height)
    scene = render_popchart(data, cities, spec)
    _write(args.out, write_svg(scene))
    return {"palette": ",".join(palette or default_scheme(args.classes)),
            "bandwidth": bandwidth, "r_max": scene.meta.get("r_max", args.r_max)}


def cmd_oracle(args) -> dict:
    data = _load_data(args)
    cities = parse_cities(_read(args.cities), data, source=args.cities) if args.cities else None
    adj = adjacency(data.map) if args.task == "neighbor_argmax" else None
    result = oracle_query(args.task, data, metric=args.metric,
                          candidates=_csv_list(args.candidates) or None, region=args.region,
                          set_a=_csv_list(args.set_a), set_b=_csv_list(args.set_b),
                          adj=adj, cities=cities)
    _write(args.out, json.dumps(result.as_dict(), indent=2, sort_keys=True) + "\n")
    return {}


def cmd_design(args) -> dict:
    design = generate_design(_csv_list(args.techniques), _csv_list(args.question_sets),
                             args.participants)
    _write(args.out, design.to_csv())
    return {}


def cmd_analyze(args) -> dict:
    trials = parse_trials(_read(args.trials),
                          _read(args.rankings) if args.rankings else None, source=args.trials)
    rows = analyze(trials, args.resamples, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(str(out / "estimates.csv"), rows_to_csv(rows))
    for measure in ("accuracy", "time", "accuracy_diff", "time_ratio"):
        _write(str(out / f"chart_{measure}.svg"), write_svg(estimate_chart(rows, measure)))
    if trials.rankings:
        _write(str(out / "rankings.csv"), rank_summary(trials.rankings).to_csv())
    return {}


def cmd_validate(args) -> dict:
    problems: list[str] = []
    data = None
    report: dict = {"checked": []}
    try:
        if args.geometry:
            report["checked"].append("geometry")
            gmap = parse_geometry(_read(args.geometry), source=args.geometry)
            report["regions"] = len(gmap)
            report["warnings"] = list(gmap.warnings)
            if args.data:
                report["checked"].append("data")
                rows = read_region_table(_read(args.data), source=args.data)
                data = join_data(gmap, rows, args.statistic_unit)
        elif args.data or args.cities:
            raise UsageError("--data and --cities need --geometry")
        cities = None
        if args.cities:
            if data is None:
                raise UsageError("--cities needs --data")
            report["checked"].append("cities")
            cities = parse_cities(_read(args.cities), data, source=args.cities)
            report.setdefault("warnings", []).extend(cities.warnings)
        if data is not None:
            problems += validate_data(data, cities)
        if args.trials:
            report["checked"].append("trials")
            ts = parse_trials(_read(args.trials),
                              _read(args.rankings) if args.rankings else None,
                              source=args.trials)
            report["trials"] = len(ts.records)
    except UsageError:
        raise
    except BivmapsError as exc:
        problems.append(str(exc))
    report["errors"] = problems
    for w in report.get("warnings", []):
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        _write(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    if problems:
        for msg in problems:
            print(f"error: {msg}", file=sys.stderr)
        raise _Invalid()
    return {}


class _Invalid(BivmapsError):
    pass


COMMANDS = {
    "render": cmd_render,
    "popchart": cmd_popchart,
    "oracle": cmd_oracle,
    "design": cmd_design,
    "analyze": cmd_analyze,
    "validate": cmd_validate,
}


# --- metadata -------------------------------------------------------------

def _meta_path(out: str) -> str:
    return out.rstrip("/\\") + ".meta.json"


def _config(args, resolved: dict) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("command", "from_meta")}
    cfg.update(resolved)
    return cfg


def argv_from_meta(meta: dict) -> list[str]:
    argv = [meta["command"]]
    parser = build_parser()
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[meta["command"]]
    for action in sp._actions:
        if not action.option_strings or action.dest == "help":
            continue
        if action.dest not in meta["config"]:
            continue
        value = meta["config"][action.dest]
        flag = action.option_strings[0]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is not None:
            argv += [flag, repr(value) if isinstance(value, float) else str(value)]
    return argv


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.from_meta:
            if args.command:
                raise UsageError("--from-meta cannot be combined with a subcommand")
            meta = json.loads(Path(args.from_meta).read_text(encoding="utf-8"))
            args = parser.parse_args(argv_from_meta(meta))
        if not args.command:
            raise UsageError("missing subcommand; see --help")
        resolved = COMMANDS[args.command](args)
        if getattr(args, "out", None):
            meta = {"tool": "bivmaps", "version": __version__, "command": args.command,
                    "config": _config(args, resolved)}
            _write(_meta_path(args.out), json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return 0
    except _Invalid:
        return 1
    except (BivmapsError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 - last-resort reporting
        traceback.print_exc(file=sys.stderr)
        return 2


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s",
                        stream=sys.stderr)
    sys.exit(run())
