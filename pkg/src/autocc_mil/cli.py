"""Command-line entry point: ``autocc-mil <verb> ...``.

Verbs: build-codebook, extract, classify, evaluate, gen-synthetic.
Exit status is 0 on success, 1 on usage or configuration errors and 2 on
data errors.
"""

import argparse
import csv
import hashlib
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import io
from .errors import PipelineError, UsageError
from .evaluation import DEFAULT_FOLDS, DEFAULT_RUNS, derive_seed
from .features import DEFAULT_GRID, extract_bag
from .mil import (CORRELATION, DEFAULT_CITERS, DEFAULT_RANK, DEFAULT_REFERENCES, EUCLIDEAN,
                  KTH_RANKED, MIN_HAUSDORFF, DistanceConfig, classify_citation_knn)
from .pipeline import build_codebook, codebook_digest, evaluate_images
from .quantizer import DEFAULT_K, codebook_from_json, codebook_to_json
from .raster import DEFAULT_CROP_THRESHOLD, preprocess
from .synthetic import DEFAULT_IMAGE_SIZE, gen_synthetic

log = logging.getLogger("autocc_mil")


@dataclass
class PipelineConfig:
    k_bins: int = DEFAULT_K
    grid: int = DEFAULT_GRID
    crop_threshold: float = DEFAULT_CROP_THRESHOLD
    references: int = DEFAULT_REFERENCES
    citers: int = DEFAULT_CITERS
    instance_metric: str = CORRELATION
    bag_distance: str = KTH_RANKED
    rank: int = DEFAULT_RANK
    folds: int = DEFAULT_FOLDS
    runs: int = DEFAULT_RUNS
    seed: int = 0

    def __post_init__(self):
        for name in ("k_bins", "grid", "references", "folds", "runs", "rank"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be positive")
        if self.citers < 0:
            raise UsageError("citers must be non-negative")
        if not 0 <= self.crop_threshold <= 255:
            raise UsageError("crop threshold must lie in [0, 255]")

    @property
    def distance(self) -> DistanceConfig:
        return DistanceConfig(self.instance_metric, self.bag_distance, self.rank)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline options")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--k-bins", type=int, default=None)
    g.add_argument("--grid", type=int, default=None)
    g.add_argument("--crop-threshold", type=float, default=None)
    g.add_argument("--references", type=int, default=None)
    g.add_argument("--citers", type=int, default=None)
    g.add_argument("--metric", choices=[CORRELATION, EUCLIDEAN], default=None)
    g.add_argument("--bag-distance", choices=[KTH_RANKED, MIN_HAUSDORFF], default=None)
    g.add_argument("--rank", type=int, default=None, help="rank for kth_ranked (default 64)")
    g.add_argument("--folds", type=int, default=None)
    g.add_argument("--runs", type=int, default=None)
    g.add_argument("--shared-codebook", action="store_true",
                   help="train one codebook on all images (leaks test shades; faster)")
    g.add_argument("--no-stratify", action="store_true")
    g.add_argument("--from-dirs", action="store_true",
                   help="treat MANIFEST as a directory with one subdirectory per class")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="autocc-mil", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("build-codebook", parents=[common], help="learn the color codebook")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("extract", parents=[common], help="write one bag per image")
    p.add_argument("manifest")
    p.add_argument("--codebook", required=True)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("classify", parents=[common], help="Citation-KNN predictions")
    p.add_argument("--train", required=True, help="labelled bag file or model file")
    p.add_argument("--query", required=True, help="bag file to classify")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--save-model", default=None)

    p = sub.add_parser("evaluate", parents=[common], help="repeated k-fold cross-validation")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("gen-synthetic", parents=[common], help="write a synthetic dataset")
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--image-size", type=int, default=DEFAULT_IMAGE_SIZE)
    p.add_argument("-o", "--out", required=True, help="output directory")
    return parser


def config_from_args(args) -> PipelineConfig:
    pairs = {"seed": args.seed, "k_bins": args.k_bins, "grid": args.grid,
             "crop_threshold": args.crop_threshold, "references": args.references,
             "citers": args.citers, "instance_metric": args.metric,
             "bag_distance": args.bag_distance, "rank": args.rank,
             "folds": args.folds, "runs": args.runs}
    return PipelineConfig(**{k: v for k, v in pairs.items() if v is not None})


def _manifest(args) -> io.Manifest:
    if args.from_dirs:
        return io.manifest_from_dirs(args.manifest)
    return io.parse_manifest(args.manifest)


def _sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def cmd_build_codebook(args, cfg: PipelineConfig) -> int:
    manifest = _manifest(args)
    pre = []
    for e in manifest.entries:
        try:
            pre.append(preprocess(io.load_image(e.path), cfg.crop_threshold))
        except PipelineError as exc:
            log.error("%s: %s", e.path, exc)
            raise
    cb = build_codebook(pre, cfg.k_bins, derive_seed(cfg.seed, "codebook"))
    io.ensure_parent(args.out)
    Path(args.out).write_text(codebook_to_json(cb))
    print(f"k={cb.k} shades={cb.shade_count} sse={cb.training_sse:.6g}")
    return 0


def cmd_extract(args, cfg: PipelineConfig) -> int:
    manifest = _manifest(args)
    cb = codebook_from_json(Path(args.codebook).read_text())
    bags, failures = [], []
    for e in manifest.entries:
        try:
            img = io.load_image(e.path)
            bags.append(extract_bag(img, cb, cfg.grid, id=e.path.stem, label=e.label,
                                    threshold=cfg.crop_threshold))
        except PipelineError as exc:
            log.warning("skipping %s: %s", e.path, exc)
            failures.append((str(e.path), type(exc).__name__, str(exc)))
    io.ensure_parent(args.out)
    io.write_bags(args.out, bags, {"k_bins": cb.k, "grid": cfg.grid,
                                   "crop_threshold": cfg.crop_threshold,
                                   "codebook": codebook_digest(cb)})
    sidecar = Path(str(args.out) + ".errors.csv")
    if failures:
        with open(sidecar, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "error", "message"])
            w.writerows(failures)
        print(f"wrote {len(bags)} bags; {len(failures)} images skipped (see {sidecar})")
        return 2
    if sidecar.exists():
        sidecar.unlink()
    print(f"wrote {len(bags)} bags")
    return 0


def cmd_classify(args, cfg: PipelineConfig) -> int:
    explicit = lambda name: getattr(args, name) is not None  # noqa: E731
    dist = cfg.distance if (explicit("metric") or explicit("bag_distance") or explicit("rank")) else None
    model = io.model_from_file(args.train,
                               references=cfg.references if explicit("references") else None,
                               citers=cfg.citers if explicit("citers") else None,
                               cfg=dist)
    _, queries = io.read_bag_file(args.query)
    preds = [classify_citation_knn(q, model) for q in queries]
    io.ensure_parent(args.out)
    io.write_predictions(args.out, [q.id for q in queries], preds)
    if args.save_model:
        io.write_model(args.save_model, model)
    print(f"classified {len(preds)} bags against {len(model)} training bags")
    return 0


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    manifest = _manifest(args)
    if any(lab is None for lab in manifest.labels):
        raise UsageError("evaluate needs a label on every manifest entry")
    images = [io.load_image(e.path) for e in manifest.entries]
    report = evaluate_images(images, manifest.labels, cfg.k_bins, cfg.grid, cfg.crop_threshold,
                             cfg.folds, cfg.runs, cfg.seed, cfg.references, cfg.citers,
                             cfg.distance, stratify=not args.no_stratify,
                             shared_codebook=args.shared_codebook,
                             ids=[e.path.stem for e in manifest.entries])
    report.config["pipeline"] = asdict(cfg)
    if not args.from_dirs:
        report.config["manifest_sha256"] = _sha(manifest.source)
    io.ensure_parent(args.out)
    Path(args.out).write_text(report.to_json())
    print(report.summary())
    return 0


def cmd_gen_synthetic(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    counters = {}
    for s in gen_synthetic(args.per_class, cfg.seed, args.image_size, cfg.grid):
        n = counters.get(s.label, 0)
        counters[s.label] = n + 1
        name = f"{s.label}_{n:04d}.png"
        io.save_png(out / name, s.raster)
        rows.append((name, s.label))
    io.write_manifest(out / "manifest.csv", rows)
    print(f"wrote {len(rows)} images and {out / 'manifest.csv'}")
    return 0


COMMANDS = {
    "build-codebook": cmd_build_codebook,
    "extract": cmd_extract,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.verb](args, cfg)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
