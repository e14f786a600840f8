"""
Command-line entry point.

    python3 -m hybridcad validate docs/
    python3 -m hybridcad tessellate part.json --format stl --output part.stl
    python3 -m hybridcad sample part.json --points 8192 --seed 0 --output part.xyz
    python3 -m hybridcad metrics generated/ reference/ --jobs 4
    python3 -m hybridcad metadata part.json
    python3 -m hybridcad curate corpus/ --target 200 --output manifest.jsonl
    python3 -m hybridcad roundtrip part.json --output canonical.json

JSON results go to stdout and logs to stderr.  Exit status is 0 on success,
1 for invalid input or failed checks, and 2 for I/O problems.  Settings come
from flags, then the JSON config file (``--config`` or $HYBRIDCAD_CONFIG),
then built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, HybridCadError

log = logging.getLogger("hybridcad")

CONFIG_ENV = "HYBRIDCAD_CONFIG"
EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    chord_tolerance: float = 1e-3
    n_points: int = 8192
    seed: int = 0
    jsd_grid: int = 32
    epsilon: float = 6e-4
    ratios: tuple = (0.10, 0.50, 0.40)
    jobs: int = 1

    def __post_init__(self):
        if not self.chord_tolerance > 0 or not self.epsilon > 0:
            raise ConfigError("tolerances must be positive")
        if self.n_points < 1:
            raise ConfigError("points must be >= 1")
        if self.jsd_grid < 2:
            raise ConfigError("grid must be >= 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        ratios = tuple(float(r) for r in self.ratios)
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
            raise ConfigError("ratios must be three non-negative numbers summing to 1")
        object.__setattr__(self, "ratios", ratios)


_FLAG_FIELDS = {"tolerance": "chord_tolerance", "points": "n_points", "seed": "seed",
                "grid": "jsd_grid", "epsilon": "epsilon", "ratios": "ratios", "jobs": "jobs"}


def load_config(args) -> RunConfig:
    values = {}
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        for key in sorted(set(data) - known):
            log.warning("config: ignoring unknown key %r", key)
        values.update({k: v for k, v in data.items() if k in known})
    for flag, name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[name] = value
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ----------------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------------

def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=False) + "\n")
    sys.stdout.flush()


def _write_atomic(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _output(data: bytes, path: str | None) -> None:
    if path:
        _write_atomic(path, data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _collect(inputs) -> list[Path]:
    files = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            files.extend(sorted(q for q in p.iterdir() if q.suffix == ".json" and q.is_file()))
        elif p.is_file():
            files.append(p)
        else:
            raise FileNotFoundError(f"no such file or directory: {item}")
    return files


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _load_doc(path):
    from .cad_json import parse_document

    return parse_document(Path(path).read_bytes())


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

def _validate_one(task):
    from .cad_json import validate_document

    path, tol = task
    return [v.to_dict() for v in validate_document(Path(path).read_bytes(), tol)]


def cmd_validate(args, cfg: RunConfig) -> int:
    from .metrics import invalidity_ratio

    files = _collect(args.inputs)
    if not files:
        raise FileNotFoundError("no input documents found")
    reports = _map(_validate_one, [(str(f), cfg.chord_tolerance) for f in files], cfg.jobs)
    for f, rep in zip(files, reports):
        _emit({"file": str(f), "valid": not rep, "violations": rep})
    ir = invalidity_ratio(reports)
    invalid = sum(1 for r in reports if r)
    _emit({"summary": {"total": len(files), "invalid": invalid, "ir": ir}})
    log.info("validated %d documents, IR %.4f", len(files), ir)
    return EXIT_OK if invalid == 0 else EXIT_INVALID


def _report_invalid(path, violations) -> int:
    _emit({"file": str(path), "valid": False, "violations": [v.to_dict() for v in violations]})
    for v in violations:
        log.error("%s: %s", path, v)
    return EXIT_INVALID


def cmd_tessellate(args, cfg: RunConfig) -> int:
    from .cad_json import check_document
    from .mesh import export_mesh

    doc, mesh, violations = check_document(Path(args.input).read_bytes(), cfg.chord_tolerance)
    if violations:
        return _report_invalid(args.input, violations)
    fmt = args.format or "obj"
    data = export_mesh(mesh, fmt)
    _output(data, args.output)
    log.info("%d faces -> %d vertices, %d triangles after welding",
             len(doc.faces), mesh.n_vertices, mesh.n_triangles)
    if args.output:
        _emit({"faces": len(doc.faces), "vertices": mesh.n_vertices,
               "triangles": mesh.n_triangles, "bytes": len(data), "output": args.output})
    return EXIT_OK


def cmd_sample(args, cfg: RunConfig) -> int:
    from .cad_json import check_document
    from .mesh import export_points, sample_points

    _, mesh, violations = check_document(Path(args.input).read_bytes(), cfg.chord_tolerance)
    if violations:
        return _report_invalid(args.input, violations)
    cloud = sample_points(mesh, cfg.n_points, cfg.seed)
    _output(export_points(cloud, args.format or "xyz"), args.output)
    if args.output:
        _emit({"points": cloud.count, "seed": cfg.seed, "output": args.output})
    return EXIT_OK


def _pairs(args) -> list[tuple[Path, Path]]:
    gen_dir, ref_dir = Path(args.generated), Path(args.reference)
    for d in (gen_dir, ref_dir):
        if not d.is_dir():
            raise FileNotFoundError(f"not a directory: {d}")
    if args.pairs:
        manifest = json.loads(Path(args.pairs).read_text(encoding="utf-8"))
        if isinstance(manifest, dict):
            manifest = sorted(manifest.items())
        return [(gen_dir / g, ref_dir / r) for g, r in manifest]
    gen = {p.stem: p for p in _collect([gen_dir])}
    ref = {p.stem: p for p in _collect([ref_dir])}
    for stem in sorted(set(gen) ^ set(ref)):
        side = "generated" if stem in gen else "reference"
        log.warning("unpaired %s file %r excluded", side, stem)
    return [(gen[s], ref[s]) for s in sorted(set(gen) & set(ref))]


def cmd_metrics(args, cfg: RunConfig) -> int:
    from .metrics import evaluate_pairs

    pairs = _pairs(args)
    if not pairs:
        log.error("no paired documents")
        return EXIT_INVALID
    texts = [(g.read_bytes(), r.read_bytes()) for g, r in pairs]
    report = evaluate_pairs(texts, cfg.n_points, cfg.seed, cfg.jsd_grid,
                            cfg.chord_tolerance, cfg.jobs)
    out = report.to_dict()
    out.update({"pairs": len(pairs), "seed": cfg.seed, "grid": cfg.jsd_grid})
    _emit(out)
    return EXIT_OK


def cmd_metadata(args, cfg: RunConfig) -> int:
    from .cad_json import check_document
    from .topology import mesh_metadata

    _, mesh, violations = check_document(Path(args.input).read_bytes(), cfg.chord_tolerance)
    if violations:
        return _report_invalid(args.input, violations)
    _emit(mesh_metadata(mesh).to_payload())
    return EXIT_OK


def _features_one(task):
    from .curation import extract_features

    path, tol = task
    try:
        return extract_features(Path(path).read_bytes(), tol), None
    except HybridCadError as exc:
        return None, str(exc)


def cmd_curate(args, cfg: RunConfig) -> int:
    from .curation import CorpusStats, curate_corpus, score_corpus

    files = _collect([args.input])
    results = _map(_features_one, [(str(f), cfg.chord_tolerance) for f in files], cfg.jobs)
    features = {}
    for f, (feat, err) in zip(files, results):
        if feat is None:
            log.warning("%s excluded: %s", f, err)
        else:
            features[f.stem] = feat
    if not features:
        log.error("no usable documents in %s", args.input)
        return EXIT_INVALID
    stats = CorpusStats.from_dict(json.loads(Path(args.stats_in).read_text())) if args.stats_in else None
    parts, stats = score_corpus(features, stats)
    manifest = curate_corpus(parts, args.target, cfg.ratios, cfg.seed)
    lines = "".join(json.dumps(e) + "\n" for e in manifest).encode("utf-8")
    stats_bytes = (json.dumps(stats.to_dict(), indent=2) + "\n").encode("utf-8")
    if args.output:
        _write_atomic(args.output, lines)
        _write_atomic(args.stats or f"{args.output}.stats.json", stats_bytes)
    else:
        sys.stdout.buffer.write(lines)
        if args.stats:
            _write_atomic(args.stats, stats_bytes)
    counts = {t: sum(1 for e in manifest if e["selected"] and e["tier"] == t)
              for t in ("simple", "moderate", "complex")}
    log.info("selected %d of %d parts: %s", args.target, len(manifest), counts)
    return EXIT_OK


def cmd_roundtrip(args, cfg: RunConfig) -> int:
    from .cad_json import roundtrip
    from .errors import DocumentError

    try:
        canonical, changes = roundtrip(Path(args.input).read_bytes())
    except DocumentError as exc:
        _emit({"file": args.input, "valid": False,
               "violations": [{"face": exc.face, "field": exc.path, "message": exc.message}]})
        log.error("%s: %s", args.input, exc)
        return EXIT_INVALID
    if args.output:
        _write_atomic(args.output, canonical)
        _emit({"file": args.input, "output": args.output, "changes": changes})
    else:
        sys.stdout.buffer.write(canonical)
        for c in changes:
            log.info("changed %s", c)
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------

def _ratios(text: str) -> tuple:
    parts = text.replace(":", ",").split(",")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad ratios {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"JSON run config (default ${CONFIG_ENV})")
    common.add_argument("--tolerance", type=float, help="chord tolerance (normalized units)")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--output", "-o", help="output file (default stdout)")
    common.add_argument("--verbose", "-v", action="store_true")

    p = argparse.ArgumentParser(prog="hybridcad", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="validate documents, report IR")
    s.add_argument("inputs", nargs="+", help="files or directories of .json documents")

    s = sub.add_parser("tessellate", parents=[common], help="mesh a document")
    s.add_argument("input")
    s.add_argument("--format", choices=["obj", "stl"])

    s = sub.add_parser("sample", parents=[common], help="sample a point cloud")
    s.add_argument("input")
    s.add_argument("--points", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--format", choices=["xyz", "ply"])

    s = sub.add_parser("metrics", parents=[common], help="CD/HD/JSD/MMD/IR over paired docs")
    s.add_argument("generated")
    s.add_argument("reference")
    s.add_argument("--points", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--grid", type=int)
    s.add_argument("--pairs", help="JSON list of [generated, reference] file names")

    s = sub.add_parser("metadata", parents=[common], help="dimensions, area, volume, holes")
    s.add_argument("input")

    s = sub.add_parser("curate", parents=[common], help="score and sample a corpus")
    s.add_argument("input", help="directory of .json documents")
    s.add_argument("--target", type=int, required=True)
    s.add_argument("--ratios", type=_ratios, help="simple,moderate,complex (default 0.1,0.5,0.4)")
    s.add_argument("--seed", type=int)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--stats", help="where to write corpus statistics")
    s.add_argument("--stats-in", help="reuse statistics from a previous run")

    s = sub.add_parser("roundtrip", parents=[common], help="canonicalize a document")
    s.add_argument("input")
    return p


COMMANDS = {"validate": cmd_validate, "tessellate": cmd_tessellate, "sample": cmd_sample,
            "metrics": cmd_metrics, "metadata": cmd_metadata, "curate": cmd_curate,
            "roundtrip": cmd_roundtrip}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (HybridCadError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
