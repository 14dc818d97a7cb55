"""Command-line driver for simulations, bootstraps, matching, and ingestion."""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from .datasets import load_edge_list, prepare_multilayer, write_edge_list
from .experiments import ConfigError, load_config, run_experiment

#: Source datasets studied with this tool.  They are not redistributed here;
#: download them yourself and verify the bytes with `fetch --file --sha256`.
DATASETS = (
    ("bnu1-connectomes",
     "Test/retest DTMRI connectomes (57 subjects, 1085 shared vertices)",
     "http://www.cis.jhu.edu/~parky/Microsoft/JHU-MSR/ZMx2/BNU1/DS01216-xyz.zip"),
    ("multilayer-social",
     "Three-layer social network (YouTube/Twitter/FriendFeed, 422 common users)",
     "see the multilayer network collection of Magnani & Rossi (ml dataset)"),
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to a .cfg (JSON) experiment config")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")


def _run_kind(args, kind: str) -> int:
    cfg = load_config(args.config)
    if cfg["kind"] != kind:
        raise ConfigError(f"config kind is {cfg['kind']!r}, expected {kind!r}")
    print(f"running experiment {cfg['experiment']!r} ({kind})", file=sys.stderr)
    table = run_experiment(cfg, seed=args.seed, threads=args.threads)
    if args.format == "csv":
        payload = table.to_csv_bytes()
    else:
        import json

        payload = (json.dumps(table.to_json_obj(), indent=2) + "\n").encode()
    if args.out:
        Path(args.out).write_bytes(payload)
        print(f"wrote {len(table.rows)} rows to {args.out}", file=sys.stderr)
    else:
        sys.stdout.buffer.write(payload)
    return 0


def _cmd_ingest(args) -> int:
    layers = {}
    sources = []
    for spec in args.layer:
        name, _, path = spec.partition("=")
        if not path:
            name, path = Path(spec).stem, spec
        layers[name] = load_edge_list(path, symmetrize=not args.no_symmetrize,
                                      drop_self_loops=not args.keep_self_loops)
        sources.append((name, path))
    dataset = prepare_multilayer(layers, provenance=sources)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    for name, g in dataset.layers:
        dest = outdir / f"{name}.edges"
        write_edge_list(g, dataset.labels, dest)
        print(f"{name}: {g.n} vertices, {g.edge_count()} edges -> {dest}",
              file=sys.stderr)
    (outdir / "vertices.txt").write_text("\n".join(dataset.labels) + "\n",
                                         encoding="utf-8")
    print(f"common vertex set: {dataset.n} vertices", file=sys.stderr)
    return 0


def _cmd_fetch(args) -> int:
    if args.file:
        if not args.sha256:
            print("fetch: --file requires --sha256 to verify", file=sys.stderr)
            return 2
        digest = hashlib.sha256(Path(args.file).read_bytes()).hexdigest()
        if digest == args.sha256.lower():
            print(f"{args.file}: checksum OK")
            return 0
        print(f"{args.file}: checksum MISMATCH\n  expected {args.sha256.lower()}\n  actual   {digest}",
              file=sys.stderr)
        return 1
    print("Datasets are not bundled; download them from their maintainers:\n")
    for key, desc, url in DATASETS:
        print(f"  {key}: {desc}\n      {url}")
    print("\nVerify a download with: shuffletest fetch --file PATH --sha256 HEX")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shuffletest",
        description="Two-sample network testing under shuffled vertex labels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for kind, help_text in (
        ("simulate", "direct Monte Carlo power over a shuffle grid"),
        ("bootstrap", "parametric-bootstrap level/power for three graphs"),
        ("two-tier", "two-tier Monte Carlo power for latent-position models"),
        ("match", "match-then-test power and achieved level"),
    ):
        p = sub.add_parser(kind, help=help_text)
        _add_common(p)
        p.set_defaults(func=lambda args, kind=kind: _run_kind(args, kind))

    p = sub.add_parser("ingest", help="prepare multilayer edge lists on a common vertex set")
    p.add_argument("layer", nargs="+", help="layer inputs, either PATH or NAME=PATH")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--no-symmetrize", action="store_true")
    p.add_argument("--keep-self-loops", action="store_true")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("fetch", help="print dataset sources / verify a download")
    p.add_argument("--file", default=None, help="downloaded file to verify")
    p.add_argument("--sha256", default=None, help="expected hex digest")
    p.set_defaults(func=_cmd_fetch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
