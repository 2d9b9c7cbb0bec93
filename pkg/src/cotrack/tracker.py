"""Frame-to-frame tracking loop: fused detection, scale search, model update."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, TextIO

import numpy as np

from .circulant import ResponseMap, correlation_response, forward_spectrum
from .config import TrackerConfig
from .core import BBox, LabelMap, WindowWeights, clip_bbox, gaussian_label, hann_window, scale_bbox_about_center
from .errors import InvalidArgument, NumericalError, TrackingLost
from .features import CNLookupTable, FeatureStack, default_table, extract_features, extract_patch
from .imageio import export_annotated, load_frame
from .solver import FilterBank, ProblemInstance, solve_joint_filters


@dataclass
class TrackerState:
    bbox: BBox
    model_templates: FeatureStack
    unlabeled: FeatureStack
    bank: FilterBank
    label: LabelMap
    cfg: TrackerConfig
    window: WindowWeights
    table: CNLookupTable | None = None
    frame_index: int = 0
    last_responses: list = field(default_factory=list)
    diagnostics: set = field(default_factory=set)
    skipped_updates: list = field(default_factory=list)

    @property
    def grid(self) -> tuple[int, int]:
        return self.window.shape

    @property
    def patch_pixels(self) -> tuple[int, int]:
        r, c = self.grid
        return r * self.cfg.cell_size, c * self.cfg.cell_size


@dataclass
class TrackResult:
    boxes: list
    lost_at: int | None = None
    skipped_updates: list = field(default_factory=list)
    diagnostics: set = field(default_factory=set)


class _FramePrefix:
    """Text sink that prefixes every solver trace row with the frame index."""

    def __init__(self, sink: TextIO, frame: int):
        self.sink, self.frame = sink, frame

    def write(self, line: str):
        return self.sink.write(f"{self.frame},{line}")


def grid_size(b: BBox, cfg: TrackerConfig) -> tuple[int, int]:
    rows = max(1, int(round(b.h * cfg.padding / cfg.cell_size)))
    cols = max(1, int(round(b.w * cfg.padding / cfg.cell_size)))
    return rows, cols


def _features(cfg: TrackerConfig, frame, box, window, table) -> FeatureStack:
    rows, cols = window.shape
    patch = extract_patch(frame, box, cfg.padding, rows * cfg.cell_size, cols * cfg.cell_size)
    return extract_features(patch, cfg.features_enabled, cfg.cell_size, window, table)


def init(
    first_frame: np.ndarray,
    ground_truth: BBox,
    cfg: TrackerConfig,
    table: CNLookupTable | None = None,
    trace: TextIO | None = None,
) -> TrackerState:
    """Learn the initial filters from the first frame.

    The labeled sample doubles as the unlabeled one since no second view of
    the target exists yet.
    """
    frame = np.asarray(first_frame)
    fh, fw = frame.shape[:2]
    cx, cy = ground_truth.center
    if not (0 <= cx <= fw and 0 <= cy <= fh):
        raise InvalidArgument(f"initial box {ground_truth.as_tuple()} lies outside the {fw}x{fh} frame")
    if table is None and "cn" in cfg.features_enabled:
        table = default_table()
    rows, cols = grid_size(ground_truth, cfg)
    window = hann_window(rows, cols)
    stack = _features(cfg, frame, ground_truth, window, table)
    sigma = cfg.label_sigma_factor * math.sqrt(ground_truth.w * ground_truth.h) / cfg.cell_size
    label = gaussian_label(rows, cols, sigma)
    sink = _FramePrefix(trace, 0) if trace is not None else None
    bank, _ = solve_joint_filters(ProblemInstance(stack, stack, label), cfg.solver, trace=sink)
    return TrackerState(
        bbox=ground_truth,
        model_templates=stack,
        unlabeled=stack,
        bank=bank,
        label=label,
        cfg=cfg,
        window=window,
        table=table,
        diagnostics=set(stack.diagnostics),
    )


def fused_responses(st: TrackerState, stack: FeatureStack) -> tuple[ResponseMap, list[ResponseMap]]:
    per = [
        correlation_response(forward_spectrum(g.values), forward_spectrum(w))
        for g, w in zip(stack.grids, st.bank.per_feature)
    ]
    fused = ResponseMap.from_values(np.mean([r.values for r in per], axis=0))
    return fused, per


def detect_translation(st: TrackerState, frame: np.ndarray):
    """Locate the target near its previous position.

    Returns ``(new_center, fused, per_feature)``. The peak of a circular
    correlation sits at ``grid_center - displacement``, so the displacement
    in cells is the grid center minus the peak position.
    """
    stack = _features(st.cfg, frame, st.bbox, st.window, st.table)
    fused, per = fused_responses(st, stack)
    rows, cols = st.grid
    d_row = rows // 2 - fused.peak_row
    d_col = cols // 2 - fused.peak_col
    # cells wrap around: map to the signed shift of smallest magnitude
    d_row = (d_row + rows // 2) % rows - rows // 2
    d_col = (d_col + cols // 2) % cols - cols // 2
    px_h, px_w = st.patch_pixels
    sy = st.bbox.h * st.cfg.padding / px_h
    sx = st.bbox.w * st.cfg.padding / px_w
    cx, cy = st.bbox.center
    center = (cx + d_col * st.cfg.cell_size * sx, cy + d_row * st.cfg.cell_size * sy)
    st.last_responses = per
    return center, fused, per


def scale_prior(cfg: TrackerConfig) -> np.ndarray:
    factors = np.asarray(cfg.scale_factors, dtype=float)
    n = np.arange(len(factors)) - unit_index(cfg)
    return np.exp(-(n**2) / (2.0 * cfg.scale_prior_sigma**2))


def unit_index(cfg: TrackerConfig) -> int:
    factors = np.asarray(cfg.scale_factors, dtype=float)
    return int(np.argmin(np.abs(factors - 1.0)))


def search_scale(st: TrackerState, frame: np.ndarray, center) -> tuple[float, list[float]]:
    """Score every candidate scale at ``center``; returns ``(best_scale, weighted_scores)``."""
    cfg = st.cfg
    prior = scale_prior(cfg)
    base = BBox.from_center(center[0], center[1], st.bbox.w, st.bbox.h)
    scores = []
    for s in cfg.scale_factors:
        stack = _features(cfg, frame, scale_bbox_about_center(base, s), st.window, st.table)
        fused, _ = fused_responses(st, stack)
        scores.append(float(fused.values.max()))
    weighted = [float(g * v) for g, v in zip(prior, scores)]
    u = unit_index(cfg)
    # maximum score, then closeness to the unit scale
    order = sorted(range(len(weighted)), key=lambda k: (-weighted[k], abs(k - u)))
    return float(cfg.scale_factors[order[0]]), weighted


def update_model(st: TrackerState, frame: np.ndarray, new_bbox: BBox, trace: TextIO | None = None) -> TrackerState:
    """Blend fresh templates into the model and re-solve from the current filters."""
    fresh = _features(st.cfg, frame, new_bbox, st.window, st.table)
    model = st.model_templates.blend(fresh, st.cfg.learning_rate)
    sink = _FramePrefix(trace, st.frame_index + 1) if trace is not None else None
    nxt = replace(st, bbox=new_bbox, frame_index=st.frame_index + 1)
    nxt.diagnostics = st.diagnostics | set(fresh.diagnostics)
    try:
        bank, _ = solve_joint_filters(
            ProblemInstance(model, fresh, st.label), st.cfg.solver, warm_start=st.bank, trace=sink
        )
    except NumericalError:
        nxt.skipped_updates = st.skipped_updates + [nxt.frame_index]
        return nxt
    nxt.model_templates, nxt.unlabeled, nxt.bank = model, fresh, bank
    return nxt


def step(st: TrackerState, frame: np.ndarray, trace: TextIO | None = None) -> TrackerState:
    frame = np.asarray(frame)
    center, _, _ = detect_translation(st, frame)
    s, _ = search_scale(st, frame, center)
    box = scale_bbox_about_center(BBox.from_center(center[0], center[1], st.bbox.w, st.bbox.h), s)
    box = clip_bbox(box, frame.shape[1], frame.shape[0])
    return update_model(st, frame, box, trace)


def _as_frame(f) -> np.ndarray:
    return np.asarray(f) if isinstance(f, np.ndarray) else load_frame(f)


def track_sequence(
    frames: Iterable,
    init_box: BBox,
    cfg: TrackerConfig,
    *,
    table: CNLookupTable | None = None,
    render_dir=None,
    trace: TextIO | None = None,
) -> TrackResult:
    """Track through ``frames`` (arrays or image paths) and return one box per frame.

    If the target is lost, every remaining frame repeats the last good box and
    ``lost_at`` records the frame where tracking stopped.
    """
    it = iter(frames)
    try:
        first = _as_frame(next(it))
    except StopIteration:
        raise InvalidArgument("a sequence needs at least one frame") from None
    st = init(first, init_box, cfg, table=table, trace=trace)
    result = TrackResult(boxes=[init_box])
    if render_dir is not None:
        export_annotated(first, init_box, render_dir, 0)
    for k, f in enumerate(it, start=1):
        frame = _as_frame(f)
        if result.lost_at is None:
            try:
                st = step(st, frame, trace)
            except TrackingLost:
                result.lost_at = k
        result.boxes.append(st.bbox)
        if render_dir is not None:
            export_annotated(frame, st.bbox, render_dir, k)
    result.skipped_updates = list(st.skipped_updates)
    result.diagnostics = set(st.diagnostics)
    return result
