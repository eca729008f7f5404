"""Dataset manifests and eager corpus loading.

A corpus directory holds a ``manifest.jsonl`` (one JSON object per line) plus
the image and scene-graph files it points to, by paths relative to the
manifest's own directory. Loading is eager and strict: every referenced file
is read and validated up front, and all failures are reported together.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import DatasetError, FormatError
from .model import Example
from .ppm import decode_ppm
from .scenegraph import parse_scene_graph

_REQUIRED_FIELDS = ("id", "text", "image_path", "tsg_path", "vsg_path",
                    "label", "split")
_SPLITS = ("train", "test")


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    text: str
    image_path: str
    tsg_path: str
    vsg_path: str
    label: int
    split: str


def write_manifest(records: list[ManifestRecord], path: str | Path) -> None:
    lines = []
    for rec in records:
        lines.append(json.dumps(asdict(rec), ensure_ascii=False,
                                separators=(", ", ": ")))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def _check_record(obj: object, line_no: int) -> ManifestRecord:
    where = f"manifest line {line_no}"
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: record must be a JSON object")
    missing = [f for f in _REQUIRED_FIELDS if f not in obj]
    if missing:
        raise FormatError(f"{where}: missing fields {missing}")
    extra = [k for k in obj if k not in _REQUIRED_FIELDS]
    if extra:
        raise FormatError(f"{where}: unknown fields {extra}")
    for f in ("id", "text", "image_path", "tsg_path", "vsg_path", "split"):
        if not isinstance(obj[f], str):
            raise FormatError(f"{where}: field {f!r} must be a string")
    if isinstance(obj["label"], bool) or not isinstance(obj["label"], int):
        raise FormatError(f"{where}: field 'label' must be an integer")
    if obj["label"] not in (0, 1):
        raise FormatError(f"{where}: label must be 0 (real) or 1 (fake), "
                          f"got {obj['label']}")
    if obj["split"] not in _SPLITS:
        raise FormatError(f"{where}: split must be one of {_SPLITS}, "
                          f"got {obj['split']!r}")
    if not obj["id"]:
        raise FormatError(f"{where}: id must be non-empty")
    return ManifestRecord(**obj)


def load_manifest(path: str | Path) -> list[ManifestRecord]:
    """Parse manifest.jsonl; errors carry 1-based line numbers."""
    raw = Path(path).read_bytes()
    if raw.startswith(b"\xef\xbb\xbf"):
        raise FormatError("manifest must not start with a byte-order mark")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"manifest is not valid UTF-8 at byte {exc.start}") from exc
    records: list[ManifestRecord] = []
    seen: dict[str, int] = {}
    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest line {line_no}: invalid JSON "
                              f"(column {exc.colno}): {exc.msg}") from exc
        rec = _check_record(obj, line_no)
        if rec.id in seen:
            raise FormatError(f"manifest line {line_no}: duplicate id "
                              f"{rec.id!r} (first used on line {seen[rec.id]})")
        seen[rec.id] = line_no
        records.append(rec)
    if not records:
        raise FormatError("manifest contains no records")
    return records


def load_dataset(manifest_path: str | Path) -> list[Example]:
    """Eagerly load every record; aggregate all per-record failures."""
    manifest_path = Path(manifest_path)
    records = load_manifest(manifest_path)
    root = manifest_path.parent
    examples: list[Example] = []
    failures: list[str] = []
    for rec in records:
        try:
            image = decode_ppm((root / rec.image_path).read_bytes())
            tsg = parse_scene_graph((root / rec.tsg_path).read_bytes(),
                                    default_modality="text")
            vsg = parse_scene_graph((root / rec.vsg_path).read_bytes(),
                                    default_modality="visual")
            if tsg.modality != "text":
                raise FormatError(f"{rec.tsg_path}: modality must be 'text', "
                                  f"got {tsg.modality!r}")
            if vsg.modality != "visual":
                raise FormatError(f"{rec.vsg_path}: modality must be "
                                  f"'visual', got {vsg.modality!r}")
        except (OSError, ValueError) as exc:
            failures.append(f"{rec.id}: {exc}")
            continue
        examples.append(Example(id=rec.id, text=rec.text, image=image,
                                tsg=tsg, vsg=vsg, label=rec.label,
                                split=rec.split))
    if failures:
        raise DatasetError(failures)
    return examples
