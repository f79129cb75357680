"""Interchange format for per-image segmentation outputs.

A dataset file is line-delimited JSON (UTF-8, one document per line). The
first line is a header::

    {"format_version": "1", "producer": "<tool name>", "created": "<timestamp>"}

Every following line is one record::

    {"image_id": "...", "image_width": W, "image_height": H, "granularity": 64,
     "segments": [{"h": H, "w": W, "counts": [...]}, ...],
     "class_instances": [{"label": "...", "score": 0.9, "mask": {...}}, ...]}

Masks are uncompressed run-length encodings over pixels in column-major
order. Runs alternate background/foreground and the first run counts
background pixels, so an all-foreground mask starts with a zero-length
background run. Canonical encodings contain no other zero-length runs and
the run lengths always sum to ``h * w``.

Field names are exact and case-sensitive. Unknown fields on records and
class instances are preserved opaquely for forward compatibility; unknown
keys inside mask objects are ignored. Records are immutable once built and
safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

FORMAT_VERSION = "1"

# A decoded mask is a 2-D boolean numpy array of shape (height, width).
BinaryMask = np.ndarray


class MaskFormatError(ValueError):
    """A run-length mask violates the codec invariants."""


class RecordParseError(ValueError):
    """A serialized record is malformed or violates a record invariant."""

    def __init__(self, message: str, *, byte_offset: int | None = None,
                 field_path: str | None = None):
        parts = [message]
        if field_path is not None:
            parts.append(f"at field {field_path}")
        if byte_offset is not None:
            parts.append(f"near byte offset {byte_offset}")
        super().__init__(" ".join(parts))
        self.byte_offset = byte_offset
        self.field_path = field_path


@dataclass(frozen=True)
class RunLengthMask:
    """Uncompressed RLE mask: alternating background/foreground run lengths."""

    height: int
    width: int
    counts: tuple[int, ...]

    def problems(self) -> list[str]:
        """Invariant violations as human-readable strings; empty if valid."""
        out = []
        if not (isinstance(self.height, int) and self.height >= 1):
            out.append(f"height must be a positive integer, got {self.height!r}")
        if not (isinstance(self.width, int) and self.width >= 1):
            out.append(f"width must be a positive integer, got {self.width!r}")
        if any(c < 0 for c in self.counts):
            out.append("run lengths must be non-negative")
        if any(c == 0 for c in self.counts[1:]):
            out.append("only the first run may have length zero")
        if out:
            return out
        total = sum(self.counts)
        if total != self.height * self.width:
            out.append(
                f"run lengths sum to {total}, expected "
                f"{self.height}*{self.width}={self.height * self.width}"
            )
        return out

    @property
    def foreground_area(self) -> int:
        """Number of foreground pixels (sum of odd-indexed runs)."""
        return sum(self.counts[1::2])


@dataclass(frozen=True)
class ClassInstance:
    """One named instance from the panoptic segmenter; mask is optional."""

    label: str
    score: float | None = None
    mask: RunLengthMask | None = None
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SegmentationRecord:
    """Per-image bundle of class-agnostic segments and named class instances."""

    image_id: str
    image_width: int
    image_height: int
    segments: tuple[RunLengthMask, ...] = ()
    class_instances: tuple[ClassInstance, ...] = ()
    granularity: int = 64
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetHeader:
    format_version: str = FORMAT_VERSION
    producer: str = ""
    created: str = ""
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Finding:
    field_path: str
    message: str


@dataclass
class ValidationReport:
    """Outcome of validate_record: findings are errors, warnings are advisory."""

    findings: list[Finding] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings


def _mask_context(image_id: str | None, mask_index: int | None) -> str:
    ctx = ""
    if image_id is not None:
        ctx += f" in record {image_id!r}"
    if mask_index is not None:
        ctx += f" (mask index {mask_index})"
    return ctx


def decode_rle(rle: RunLengthMask, *, image_id: str | None = None,
               mask_index: int | None = None) -> BinaryMask:
    """Decode an RLE mask to a boolean (height, width) array.

    Raises MaskFormatError when the mask violates its invariants; the
    message names the image_id and mask index when provided.
    """
    problems = rle.problems()
    if problems:
        raise MaskFormatError(
            f"malformed mask{_mask_context(image_id, mask_index)}: "
            + "; ".join(problems)
        )
    values = (np.arange(len(rle.counts)) % 2).astype(bool)
    flat = np.repeat(values, np.asarray(rle.counts, dtype=np.int64))
    return flat.reshape((rle.height, rle.width), order="F")


def encode_rle(mask: BinaryMask) -> RunLengthMask:
    """Encode a boolean mask as canonical column-major RLE.

    The encoding starts with the background run (possibly zero-length) and
    contains no other zero-length runs, so it is unique per mask and
    ``decode_rle(encode_rle(m)) == m``.
    """
    arr = np.asarray(mask, dtype=bool)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise MaskFormatError(f"mask must be a 2-D array of shape >= 1x1, got {arr.shape}")
    h, w = arr.shape
    flat = arr.ravel(order="F")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds)
    if flat[0]:
        counts = (0, *(int(r) for r in runs))
    else:
        counts = tuple(int(r) for r in runs)
    return RunLengthMask(height=h, width=w, counts=counts)


def validate_record(record: SegmentationRecord) -> ValidationReport:
    """Check every record invariant; never raises.

    Returns a report listing one finding per violated invariant. The
    empirical producer property num_seg > num_class is reported as a
    warning, not a finding (it is not enforceable).
    """
    report = ValidationReport()

    def bad(path: str, message: str) -> None:
        report.findings.append(Finding(field_path=path, message=message))

    if not isinstance(record.image_id, str) or not record.image_id:
        bad("image_id", "image_id must be a non-empty string")
    for name in ("image_width", "image_height"):
        v = getattr(record, name)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            bad(name, f"{name} must be a positive integer, got {v!r}")
    if not isinstance(record.granularity, int) or isinstance(record.granularity, bool) \
            or record.granularity < 1:
        bad("granularity", f"granularity must be a positive integer, got {record.granularity!r}")

    def check_mask(mask: RunLengthMask, path: str) -> None:
        problems = mask.problems()
        for p in problems:
            bad(path, p)
        if not problems and (mask.height, mask.width) != (record.image_height, record.image_width):
            bad(path, f"mask is {mask.height}x{mask.width} but the image is "
                      f"{record.image_height}x{record.image_width}")

    for i, seg in enumerate(record.segments):
        check_mask(seg, f"segments[{i}]")
    for i, inst in enumerate(record.class_instances):
        path = f"class_instances[{i}]"
        if not isinstance(inst.label, str) or not inst.label:
            bad(f"{path}.label", "label must be a non-empty string")
        if inst.score is not None and not (0.0 <= inst.score <= 1.0):
            bad(f"{path}.score", f"score must lie in [0, 1], got {inst.score!r}")
        if inst.mask is not None:
            check_mask(inst.mask, f"{path}.mask")

    n_seg = len(record.segments)
    n_class = len(record.class_instances)
    if (n_seg or n_class) and n_seg <= n_class:
        report.warnings.append(
            f"record {record.image_id!r}: expected more segments than class "
            f"instances, got num_seg={n_seg} num_class={n_class}"
        )
    return report


# --- parsing ---------------------------------------------------------------

def _require(obj: dict, key: str, path: str, byte_offset: int | None) -> Any:
    if key not in obj:
        raise RecordParseError(f"missing required field {key!r}",
                               field_path=f"{path}{key}", byte_offset=byte_offset)
    return obj[key]


def _as_int(value: Any, path: str, byte_offset: int | None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise RecordParseError(f"expected an integer, got {value!r}",
                               field_path=path, byte_offset=byte_offset)
    return value


def _parse_mask(obj: Any, path: str, image_id: str | None,
                byte_offset: int | None) -> RunLengthMask:
    if not isinstance(obj, dict):
        raise RecordParseError("mask must be an object {h, w, counts}",
                               field_path=path, byte_offset=byte_offset)
    h = _as_int(_require(obj, "h", path + ".", byte_offset), path + ".h", byte_offset)
    w = _as_int(_require(obj, "w", path + ".", byte_offset), path + ".w", byte_offset)
    counts_raw = _require(obj, "counts", path + ".", byte_offset)
    if not isinstance(counts_raw, list):
        raise RecordParseError("counts must be an array of integers",
                               field_path=path + ".counts", byte_offset=byte_offset)
    counts = tuple(
        _as_int(c, f"{path}.counts[{i}]", byte_offset) for i, c in enumerate(counts_raw)
    )
    mask = RunLengthMask(height=h, width=w, counts=counts)
    problems = mask.problems()
    if problems:
        raise MaskFormatError(
            f"malformed mask{_mask_context(image_id, None)} at {path}: "
            + "; ".join(problems)
        )
    return mask


_RECORD_KNOWN = {"image_id", "image_width", "image_height", "granularity",
                 "segments", "class_instances"}
_INSTANCE_KNOWN = {"label", "score", "mask"}


def load_record(data: bytes | str, *, byte_offset: int = 0) -> SegmentationRecord:
    """Parse and fully validate one serialized record.

    Raises RecordParseError (with byte offset or field path) on malformed
    documents, MaskFormatError on malformed masks. Unknown fields on the
    record or on class instances are preserved in ``extras``.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        prefix = len(text[:e.pos].encode("utf-8"))
        raise RecordParseError(f"invalid record JSON: {e.msg}",
                               byte_offset=byte_offset + prefix) from e
    if not isinstance(obj, dict):
        raise RecordParseError("record must be a JSON object", byte_offset=byte_offset)

    image_id = _require(obj, "image_id", "", byte_offset)
    if not isinstance(image_id, str) or not image_id:
        raise RecordParseError("image_id must be a non-empty string",
                               field_path="image_id", byte_offset=byte_offset)
    width = _as_int(_require(obj, "image_width", "", byte_offset), "image_width", byte_offset)
    height = _as_int(_require(obj, "image_height", "", byte_offset), "image_height", byte_offset)
    granularity = obj.get("granularity", 64)
    granularity = _as_int(granularity, "granularity", byte_offset)

    segments_raw = obj.get("segments", [])
    if not isinstance(segments_raw, list):
        raise RecordParseError("segments must be an array", field_path="segments",
                               byte_offset=byte_offset)
    segments = tuple(
        _parse_mask(m, f"segments[{i}]", image_id, byte_offset)
        for i, m in enumerate(segments_raw)
    )

    instances_raw = obj.get("class_instances", [])
    if not isinstance(instances_raw, list):
        raise RecordParseError("class_instances must be an array",
                               field_path="class_instances", byte_offset=byte_offset)
    instances = []
    for i, inst in enumerate(instances_raw):
        path = f"class_instances[{i}]"
        if not isinstance(inst, dict):
            raise RecordParseError("class instance must be an object",
                                   field_path=path, byte_offset=byte_offset)
        label = _require(inst, "label", path + ".", byte_offset)
        score = inst.get("score")
        if score is not None and not isinstance(score, (int, float)):
            raise RecordParseError(f"score must be a number, got {score!r}",
                                   field_path=path + ".score", byte_offset=byte_offset)
        mask = inst.get("mask")
        if mask is not None:
            mask = _parse_mask(mask, path + ".mask", image_id, byte_offset)
        extras = {k: v for k, v in inst.items() if k not in _INSTANCE_KNOWN}
        instances.append(ClassInstance(
            label=label, score=None if score is None else float(score),
            mask=mask, extras=extras,
        ))

    extras = {k: v for k, v in obj.items() if k not in _RECORD_KNOWN}
    record = SegmentationRecord(
        image_id=image_id, image_width=width, image_height=height,
        segments=segments, class_instances=tuple(instances),
        granularity=granularity, extras=extras,
    )
    report = validate_record(record)
    if not report.ok:
        first = report.findings[0]
        raise RecordParseError(
            "; ".join(f.message for f in report.findings),
            field_path=first.field_path, byte_offset=byte_offset,
        )
    return record


# --- serialization ---------------------------------------------------------

def _mask_to_json(mask: RunLengthMask) -> dict[str, Any]:
    return {"h": mask.height, "w": mask.width, "counts": list(mask.counts)}


def record_to_json(record: SegmentationRecord) -> dict[str, Any]:
    instances = []
    for inst in record.class_instances:
        obj: dict[str, Any] = {"label": inst.label}
        if inst.score is not None:
            obj["score"] = inst.score
        if inst.mask is not None:
            obj["mask"] = _mask_to_json(inst.mask)
        obj.update(inst.extras)
        instances.append(obj)
    out: dict[str, Any] = {
        "image_id": record.image_id,
        "image_width": record.image_width,
        "image_height": record.image_height,
        "granularity": record.granularity,
        "segments": [_mask_to_json(m) for m in record.segments],
        "class_instances": instances,
    }
    out.update(record.extras)
    return out


def dumps_record(record: SegmentationRecord) -> str:
    return json.dumps(record_to_json(record), separators=(",", ":"), ensure_ascii=False)


def write_dataset(path: str | Path, records: Iterable[SegmentationRecord],
                  header: DatasetHeader | None = None) -> None:
    """Write a header line plus one record per line."""
    header = header or DatasetHeader()
    head: dict[str, Any] = {
        "format_version": header.format_version,
        "producer": header.producer,
        "created": header.created,
    }
    head.update(header.extras)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(head, separators=(",", ":"), ensure_ascii=False) + "\n")
        for record in records:
            fh.write(dumps_record(record) + "\n")


def read_dataset(path: str | Path) -> tuple[DatasetHeader, list[SegmentationRecord]]:
    """Read and validate a whole dataset file.

    Enforces the header's format_version and uniqueness of image_id across
    the file. Error messages carry the file-relative byte offset and the
    line number of the offending record.
    """
    path = Path(path)
    records: list[SegmentationRecord] = []
    seen: set[str] = set()
    header: DatasetHeader | None = None
    offset = 0
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip(b"\r\n")
            if not line.strip():
                offset += len(raw)
                continue
            if header is None:
                try:
                    obj = json.loads(line.decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError) as e:
                    raise RecordParseError(f"{path}:{lineno}: invalid header JSON: {e}",
                                           byte_offset=offset) from e
                version = obj.get("format_version")
                if version != FORMAT_VERSION:
                    raise RecordParseError(
                        f"{path}:{lineno}: unsupported format_version {version!r}, "
                        f"expected {FORMAT_VERSION!r}", byte_offset=offset)
                extras = {k: v for k, v in obj.items()
                          if k not in {"format_version", "producer", "created"}}
                header = DatasetHeader(format_version=version,
                                       producer=obj.get("producer", ""),
                                       created=obj.get("created", ""),
                                       extras=extras)
            else:
                try:
                    record = load_record(line, byte_offset=offset)
                except (RecordParseError, MaskFormatError) as e:
                    # Re-raise with file:line context, keeping offset/path attrs.
                    wrapped = type(e)(f"{path}:{lineno}: {e}")
                    if isinstance(e, RecordParseError):
                        wrapped.byte_offset = e.byte_offset
                        wrapped.field_path = e.field_path
                    raise wrapped from e
                if record.image_id in seen:
                    raise RecordParseError(
                        f"{path}:{lineno}: duplicate image_id {record.image_id!r}",
                        field_path="image_id", byte_offset=offset)
                seen.add(record.image_id)
                records.append(record)
            offset += len(raw)
    if header is None:
        raise RecordParseError(f"{path}: empty dataset file (missing header line)")
    return header, records


def read_datasets(paths: Sequence[str | Path]) -> tuple[list[DatasetHeader], list[SegmentationRecord]]:
    """Read several dataset files, enforcing image_id uniqueness across all."""
    headers: list[DatasetHeader] = []
    records: list[SegmentationRecord] = []
    seen: set[str] = set()
    for p in paths:
        header, recs = read_dataset(p)
        headers.append(header)
        for r in recs:
            if r.image_id in seen:
                raise RecordParseError(
                    f"{p}: duplicate image_id {r.image_id!r} across dataset files",
                    field_path="image_id")
            seen.add(r.image_id)
        records.extend(recs)
    return headers, records
