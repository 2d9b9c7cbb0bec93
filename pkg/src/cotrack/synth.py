"""Synthetic OTB-layout sequences with known ground truth.

A value-noise textured target moves over a differently textured static
background. Ground truth boxes have integer coordinates; the target is
pasted at exactly that box every frame.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import BBox
from .errors import InvalidArgument
from .imageio import save_frame

KINDS = ("translate", "scale_ramp", "illumination_ramp", "deform")


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters.

    Motion parameters by kind:

    * ``translate``: center follows ``amplitude * (sin, cos)(2 pi k / period)``.
    * ``scale_ramp``: side lengths are ``round(side * (1 + rate * k))``.
    * ``illumination_ramp``: pixel gain ``1 + gain_rate * k``.
    * ``deform``: width and height swing by ``+-deform_amp`` with ``period``.
    """

    kind: str
    frames: int = 100
    frame_w: int = 320
    frame_h: int = 240
    target_w: int = 64
    target_h: int = 64
    amplitude: float = 20.0
    period: float = 50.0
    rate: float = 0.002
    gain_rate: float = -0.004
    deform_amp: float = 0.15
    noise_sigma: float = 2.0
    seed: int = 0
    grayscale: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.frames) != self.frames or self.frames < 2:
            raise InvalidArgument(f"frames must be an integer >= 2, got {self.frames}")
        for name in ("frame_w", "frame_h", "target_w", "target_h"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be a positive integer")
        if not self.period > 0:
            raise InvalidArgument("period must be > 0")
        if not self.noise_sigma >= 0:
            raise InvalidArgument("noise_sigma must be >= 0")
        if not 0 <= self.deform_amp < 1:
            raise InvalidArgument("deform_amp must lie in [0, 1)")
        for k, b in enumerate(ground_truth_boxes(self)):
            if b.w < 1 or b.h < 1 or b.x < 0 or b.y < 0 or b.x + b.w > self.frame_w or b.y + b.h > self.frame_h:
                raise InvalidArgument(f"target leaves the {self.frame_w}x{self.frame_h} frame at frame {k + 1}")


@dataclass(frozen=True)
class SequenceDataset:
    name: str
    frame_paths: tuple
    gt_boxes: tuple

    def __post_init__(self):
        if not self.frame_paths:
            raise InvalidArgument("a dataset needs at least one frame")
        if len(self.frame_paths) != len(self.gt_boxes):
            raise InvalidArgument("frame and ground-truth counts differ")


def ground_truth_boxes(spec: SynthSpec) -> list[BBox]:
    """Integer-pixel boxes (0-based) for every frame, before validation."""
    cx0, cy0 = spec.frame_w / 2.0, spec.frame_h / 2.0
    out = []
    for k in range(spec.frames):
        cx, cy, w, h = cx0, cy0, spec.target_w, spec.target_h
        phase = 2.0 * math.pi * k / spec.period
        if spec.kind == "translate":
            cx += spec.amplitude * math.sin(phase)
            cy += spec.amplitude * (math.cos(phase) - 1.0)
        elif spec.kind == "scale_ramp":
            w = spec.target_w * (1.0 + spec.rate * k)
            h = spec.target_h * (1.0 + spec.rate * k)
        elif spec.kind == "deform":
            w = spec.target_w * (1.0 + spec.deform_amp * math.sin(phase))
            h = spec.target_h * (1.0 - spec.deform_amp * math.sin(phase))
        w, h = max(1, int(round(w))), max(1, int(round(h)))
        x, y = int(round(cx - w / 2.0)), int(round(cy - h / 2.0))
        # BBox rejects degenerate sizes; validation in SynthSpec reports escapes
        out.append(BBox(float(x), float(y), float(w), float(h)))
    return out


def value_noise(rng: np.random.Generator, rows: int, cols: int, channels: int, cell: int) -> np.ndarray:
    """Smooth random texture in [0, 255]: a coarse lattice upsampled with cubic splines."""
    cr, cc = rows // cell + 3, cols // cell + 3
    out = np.empty((rows, cols, channels))
    ys = np.arange(rows) / cell + 1.0
    xs = np.arange(cols) / cell + 1.0
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    for c in range(channels):
        lattice = rng.uniform(0.0, 255.0, size=(cr, cc))
        out[:, :, c] = ndimage.map_coordinates(lattice, [yy, xx], order=3, mode="nearest")
    return np.clip(out, 0.0, 255.0)


def _resize(img: np.ndarray, rows: int, cols: int) -> np.ndarray:
    ys = (np.arange(rows) + 0.5) * (img.shape[0] / rows) - 0.5
    xs = (np.arange(cols) + 0.5) * (img.shape[1] / cols) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack(
        [ndimage.map_coordinates(img[:, :, c], [yy, xx], order=1, mode="nearest") for c in range(img.shape[2])],
        axis=2,
    )


def render_frames(spec: SynthSpec):
    """Yield ``(frame, box)`` pairs; frames are ``uint8`` arrays."""
    boxes = ground_truth_boxes(spec)
    channels = 1 if spec.grayscale else 3
    tex_rng, bg_rng, noise_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(3))
    big_w = max(int(b.w) for b in boxes)
    big_h = max(int(b.h) for b in boxes)
    # target texture at the largest size it ever reaches, resampled down per frame
    target = value_noise(tex_rng, big_h, big_w, channels, cell=8)
    background = value_noise(bg_rng, spec.frame_h, spec.frame_w, channels, cell=24)
    background = 0.5 * background + 64.0
    for k, b in enumerate(boxes):
        frame = background.copy()
        x, y, w, h = (int(v) for v in b.as_tuple())
        frame[y : y + h, x : x + w] = _resize(target, h, w)
        if spec.kind == "illumination_ramp":
            frame *= 1.0 + spec.gain_rate * k
        if spec.noise_sigma > 0:
            frame += noise_rng.normal(0.0, spec.noise_sigma, size=frame.shape)
        out = np.clip(np.rint(frame), 0, 255).astype(np.uint8)
        yield (out[:, :, 0] if spec.grayscale else out), b


def format_gt_line(b: BBox) -> str:
    """One 1-based ``x,y,w,h`` line with integer coordinates."""
    return f"{int(b.x) + 1},{int(b.y) + 1},{int(b.w)},{int(b.h)}"


def generate_synthetic(spec: SynthSpec, out_dir) -> SequenceDataset:
    """Write ``out_dir/img/NNNN.png`` and ``out_dir/groundtruth_rect.txt``."""
    img_dir = os.path.join(out_dir, "img")
    os.makedirs(img_dir, exist_ok=True)
    paths, boxes = [], []
    for k, (frame, b) in enumerate(render_frames(spec)):
        path = os.path.join(img_dir, f"{k + 1:04d}.png")
        save_frame(frame, path)
        paths.append(path)
        boxes.append(b)
    with open(os.path.join(out_dir, "groundtruth_rect.txt"), "w") as fh:
        fh.write("".join(format_gt_line(b) + "\n" for b in boxes))
    name = os.path.basename(os.path.normpath(out_dir)) or spec.kind
    return SequenceDataset(name, tuple(paths), tuple(boxes))
