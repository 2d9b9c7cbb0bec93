"""Benchmark I/O, overlap metrics, success analysis and report rendering."""
from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass

import numpy as np

from .core import BBox
from .errors import DataError, InvalidArgument
from .synth import SequenceDataset, SynthSpec, generate_synthetic  # noqa: F401  (re-exported)

THRESHOLDS = np.linspace(0.0, 1.0, 101)
IMAGE_EXTS = (".jpg", ".jpeg", ".png")
GT_NAME = "groundtruth_rect.txt"


def overlap_ratio(bt: BBox, bg: BBox) -> float:
    """Intersection over union of two boxes."""
    iw = min(bt.x + bt.w, bg.x + bg.w) - max(bt.x, bg.x)
    ih = min(bt.y + bt.h, bg.y + bg.h) - max(bt.y, bg.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = bt.w * bt.h + bg.w * bg.h - inter
    return float(min(1.0, inter / union))


@dataclass(frozen=True)
class EvalReport:
    per_frame_overlap: tuple
    average_overlap: float
    success_curve: tuple
    auc: float

    @property
    def thresholds(self) -> np.ndarray:
        return THRESHOLDS


def success_analysis(overlaps) -> EvalReport:
    """Success rate ``fraction(S > t)`` at ``t = 0, 0.01, ..., 1``; AUC is its mean."""
    s = np.asarray(list(overlaps), dtype=float)
    if s.size == 0:
        raise InvalidArgument("success analysis needs at least one overlap value")
    if np.any(~np.isfinite(s)) or np.any(s < 0) or np.any(s > 1):
        raise InvalidArgument("overlap values must lie in [0, 1]")
    curve = (s[None, :] > THRESHOLDS[:, None]).mean(axis=1)
    return EvalReport(tuple(s.tolist()), float(s.mean()), tuple(curve.tolist()), float(curve.mean()))


def evaluate(boxes, gt_boxes) -> EvalReport:
    if len(boxes) != len(gt_boxes):
        raise DataError(f"{len(boxes)} result boxes for {len(gt_boxes)} ground-truth boxes")
    return success_analysis([overlap_ratio(a, b) for a, b in zip(boxes, gt_boxes)])


# -- OTB layout ---------------------------------------------------------------

_SPLIT = re.compile(r"[,\t ]+")


def parse_box_lines(text: str, source: str, one_based: bool = True) -> list[BBox]:
    """Parse ``x,y,w,h`` lines (comma, tab or space separated), skipping blank lines."""
    out = []
    shift = 1.0 if one_based else 0.0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p for p in _SPLIT.split(line) if p]
        try:
            if len(parts) != 4:
                raise ValueError(f"expected 4 values, found {len(parts)}")
            x, y, w, h = (float(p) for p in parts)
            out.append(BBox(x - shift, y - shift, w, h))
        except ValueError as exc:
            raise DataError(f"{source}:{lineno}: cannot parse box {line!r} ({exc})") from None
    return out


def _frame_number(name: str) -> int:
    m = re.search(r"(\d+)", os.path.splitext(name)[0])
    return int(m.group(1)) if m else -1


def list_frames(img_dir) -> list[str]:
    names = [n for n in os.listdir(img_dir) if n.lower().endswith(IMAGE_EXTS)]
    names.sort(key=lambda n: (_frame_number(n), n))
    return [os.path.join(img_dir, n) for n in names]


def load_otb_sequence(seq_dir) -> SequenceDataset:
    """Load ``seq_dir/img/*`` and ``seq_dir/groundtruth_rect.txt`` (1-based boxes)."""
    img_dir = os.path.join(seq_dir, "img")
    gt_path = os.path.join(seq_dir, GT_NAME)
    if not os.path.isdir(img_dir):
        raise FileNotFoundError(f"missing frame directory {img_dir}")
    if not os.path.isfile(gt_path):
        raise FileNotFoundError(f"missing ground truth {gt_path}")
    frames = list_frames(img_dir)
    if not frames:
        raise DataError(f"{img_dir}: no .jpg or .png frames")
    with open(gt_path) as fh:
        boxes = parse_box_lines(fh.read(), gt_path)
    if len(boxes) != len(frames):
        raise DataError(f"{gt_path}: {len(boxes)} boxes for {len(frames)} frames")
    name = os.path.basename(os.path.normpath(seq_dir))
    return SequenceDataset(name, tuple(frames), tuple(boxes))


RESULT_HEADER = "frame,x,y,w,h"
REPORT_HEADER = "sequence,avg_overlap,auc"


def format_results(boxes) -> str:
    """Result CSV; ``frame`` is 1-based and boxes are 0-based pixel coordinates."""
    lines = [RESULT_HEADER]
    lines += [f"{k + 1},{b.x:.6g},{b.y:.6g},{b.w:.6g},{b.h:.6g}" for k, b in enumerate(boxes)]
    return "\n".join(lines) + "\n"


def write_results(boxes, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_results(boxes))


def read_results(path) -> list[BBox]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != RESULT_HEADER:
        raise DataError(f"{path}: expected header {RESULT_HEADER!r}")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            if len(parts) != 5:
                raise ValueError(f"expected 5 fields, found {len(parts)}")
            out.append(BBox(*(float(p) for p in parts[1:])))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


# -- reports ------------------------------------------------------------------


@dataclass(frozen=True)
class ReportTable:
    text: str
    csv: str


def _name(s) -> str:
    return s if s else "(unnamed)"


def render_report(rows, trackers=None) -> ReportTable:
    """Table of average overlap per sequence plus a mean row.

    ``rows`` holds ``(sequence, report)`` pairs for a single tracker, or
    ``(sequence, [report, ...])`` with one entry per name in ``trackers``.
    A ``None`` report marks a failed run. The best value of each row is
    wrapped in ``*`` in the text rendering.
    """
    rows = list(rows)
    if not rows:
        raise InvalidArgument("a report needs at least one row")
    multi = trackers is not None
    names = [_name(t) for t in trackers] if multi else ["avg_overlap"]
    table = [(seq, list(r) if multi else [r]) for seq, r in rows]
    if any(len(r) != len(names) for _, r in table):
        raise InvalidArgument("every row needs one report per tracker")

    def cell(rep, best):
        if rep is None:
            return "FAILED"
        v = f"{rep.average_overlap:.3f}"
        return f"*{v}*" if best else v

    def best_mask(reps):
        vals = [r.average_overlap for r in reps if r is not None]
        if len(names) < 2 or not vals:
            return [False] * len(reps)
        top = round(max(vals), 3)
        return [r is not None and round(r.average_overlap, 3) == top for r in reps]

    body = [[_name(seq)] + [cell(r, b) for r, b in zip(reps, best_mask(reps))] for seq, reps in table]
    means = []
    for k in range(len(names)):
        ok = [reps[k] for _, reps in table if reps[k] is not None]
        means.append(_MeanRow(float(np.mean([r.average_overlap for r in ok])), float(np.mean([r.auc for r in ok]))) if ok else None)
    body.append(["mean"] + [cell(m, b) for m, b in zip(means, best_mask(means))])

    header = ["sequence"] + names
    widths = [max(len(str(r[c])) for r in [header] + body) for c in range(len(header))]
    fmt = lambda r: "  ".join(str(v).ljust(w) if c == 0 else str(v).rjust(w) for c, (v, w) in enumerate(zip(r, widths)))
    lines = [fmt(header), "  ".join("-" * w for w in widths)] + [fmt(r) for r in body[:-1]]
    lines += ["  ".join("-" * w for w in widths), fmt(body[-1])]

    buf = io.StringIO()
    buf.write(("tracker," if multi else "") + REPORT_HEADER + "\n")
    for k, tname in enumerate(names):
        for seq, reps in table + [("mean", means)]:
            rep = reps[k]
            prefix = f"{tname}," if multi else ""
            if rep is None:
                buf.write(f"{prefix}{_csv_field(_name(seq))},FAILED,FAILED\n")
            else:
                buf.write(f"{prefix}{_csv_field(_name(seq))},{rep.average_overlap!r},{rep.auc!r}\n")
    return ReportTable("\n".join(lines) + "\n", buf.getvalue())


@dataclass(frozen=True)
class _MeanRow:
    average_overlap: float
    auc: float


def _csv_field(s: str) -> str:
    return f'"{s}"' if any(c in s for c in ',"\n') else s
