"""Artifact files: manifests, images, bag files, model files and predictions."""

import csv
import io as _io
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EmptyManifest, FormatError, MalformedRow, MissingFile
from .features import Bag
from .mil import DistanceConfig, TrainedModel

BAG_FORMAT = "autocc-bags"
MODEL_FORMAT = "citation-knn-model"
FILE_VERSION = 1
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"}


@dataclass
class ManifestEntry:
    path: Path
    label: str | None


@dataclass
class Manifest:
    entries: list
    source: Path

    @property
    def labels(self):
        return [e.label for e in self.entries]

    def __len__(self):
        return len(self.entries)


def parse_manifest(path) -> Manifest:
    """Read a ``path,label`` CSV; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["path", "label"]:
        raise MalformedRow(1, 'header must be "path,label"')
    entries = []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise MalformedRow(line, f"expected 2 fields, got {len(row)}")
        p, label = row[0].strip(), row[1].strip()
        if not p:
            raise MalformedRow(line, "empty path")
        p = Path(p)
        if not p.is_absolute():
            p = path.parent / p
        entries.append(ManifestEntry(p, label or None))
    if not entries:
        raise EmptyManifest(f"manifest {path} lists no images")
    return Manifest(entries, path)


def manifest_from_dirs(root) -> Manifest:
    """One class per subdirectory of ``root``; both levels sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise MissingFile(f"not a directory: {root}")
    entries = [ManifestEntry(f, d.name)
               for d in sorted(p for p in root.iterdir() if p.is_dir())
               for f in sorted(d.iterdir()) if f.suffix.lower() in IMAGE_SUFFIXES]
    if not entries:
        raise EmptyManifest(f"no images under {root}")
    return Manifest(entries, root)


def write_manifest(path, rows):
    """``rows`` are (path, label) pairs; paths are written as given."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "label"])
    for p, label in rows:
        w.writerow([str(p), label or ""])
    Path(path).write_text(buf.getvalue())


def load_image(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except FileNotFoundError:
        raise MissingFile(f"image not found: {path}") from None
    except OSError as exc:
        raise FormatError(f"cannot decode {path}: {exc}") from None


def save_png(path, raster: np.ndarray):
    Image.fromarray(raster, mode="RGB").save(path, format="PNG", optimize=False)


# -- bag / model files (newline-delimited JSON) ----------------------------

def _bag_record(bag: Bag) -> str:
    return json.dumps({"id": bag.id, "label": bag.label,
                       "instances": bag.instances.tolist()}, separators=(",", ":"))


def bags_to_text(bags, header: dict) -> str:
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines.extend(_bag_record(b) for b in bags)
    return "\n".join(lines) + "\n"


def write_bags(path, bags, config: dict | None = None):
    header = {"format": BAG_FORMAT, "version": FILE_VERSION, "config": config or {}}
    Path(path).write_text(bags_to_text(bags, header))


def _parse_records(lines, start_line, path):
    bags = []
    for n, line in enumerate(lines, start=start_line):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            bags.append(Bag(str(rec["id"]), np.array(rec["instances"], dtype=np.float64), rec.get("label")))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise FormatError(f"{path}:{n}: bad bag record ({exc})") from None
    return bags


def read_bag_file(path) -> tuple[dict, list]:
    """Return ``(header, bags)`` of a bag or model file; an empty file holds no bags."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"bag file not found: {path}")
    lines = path.read_text().splitlines()
    if not any(line.strip() for line in lines):
        return {}, []
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise FormatError(f"{path}:1: header is not JSON") from None
    if header.get("format") not in (BAG_FORMAT, MODEL_FORMAT):
        raise FormatError(f"{path}: unknown file format {header.get('format')!r}")
    if header.get("version") != FILE_VERSION:
        raise FormatError(f"{path}: unsupported version {header.get('version')!r}")
    return header, _parse_records(lines[1:], 2, path)


def write_model(path, model: TrainedModel):
    cfg = model.config
    header = {"format": MODEL_FORMAT, "version": FILE_VERSION, "classes": model.classes,
              "references": model.references, "citers": model.citers,
              "instance_metric": cfg.instance_metric, "bag_distance": cfg.bag_distance,
              "rank": cfg.rank}
    Path(path).write_text(bags_to_text(model.bags, header))


def model_from_file(path, references=None, citers=None, cfg=None) -> TrainedModel:
    """Build a model from a model file or a plain labelled bag file.

    Settings stored in a model file win unless explicitly overridden.
    """
    header, bags = read_bag_file(path)
    classes = None
    if header.get("format") == MODEL_FORMAT:
        classes = header["classes"]
        stored = DistanceConfig(header["instance_metric"], header["bag_distance"], header["rank"])
        cfg = cfg or stored
        references = references if references is not None else header["references"]
        citers = citers if citers is not None else header["citers"]
    kwargs = {}
    if references is not None:
        kwargs["references"] = references
    if citers is not None:
        kwargs["citers"] = citers
    if cfg is not None:
        kwargs["config"] = cfg
    return TrainedModel(bags, classes=classes, **kwargs)


def write_predictions(path, ids, predictions):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "predicted_label", "nearest_reference", "distance"])
    for i, p in zip(ids, predictions):
        w.writerow([i, p.label, p.nearest_reference, repr(p.distance)])
    Path(path).write_text(buf.getvalue())


def read_predictions(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
