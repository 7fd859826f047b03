"""Shared builders for hand-crafted lineage forests."""

from __future__ import annotations

from typing import Sequence

from celltrack import (
    Box,
    CellClass,
    EndReason,
    LineageForest,
    Provenance,
    Track,
    TrackEntry,
    TrackStatus,
    VideoMeta,
)


def bx(cx: float, cy: float, w: float = 10.0, h: float = 10.0) -> Box:
    """Box from its center point."""
    return (cx - w / 2.0, cy - h / 2.0, w, h)


def make_track(
    tid: int,
    start: int,
    boxes: Sequence[Box],
    *,
    parent: int | None = None,
    children: Sequence[int] = (),
    classes: CellClass | Sequence[CellClass] = CellClass.ALIVE,
    provenances: Provenance | Sequence[Provenance] = Provenance.OBSERVED_HIGH,
    end_reason: EndReason | None = None,
) -> Track:
    """Track with one entry per consecutive frame from ``start``."""
    n = len(boxes)
    if isinstance(classes, CellClass):
        classes = [classes] * n
    if isinstance(provenances, Provenance):
        provenances = [provenances] * n
    entries = {
        start + i: TrackEntry(
            box=boxes[i], cell_class=classes[i], provenance=provenances[i]
        )
        for i in range(n)
    }
    if children:
        status = TrackStatus.DIVIDED
    elif any(c is CellClass.DEAD for c in classes):
        status = TrackStatus.DEAD
    else:
        status = TrackStatus.CLOSED
    return Track(
        track_id=tid,
        entries=entries,
        parent=parent,
        children=sorted(children),
        status=status,
        end_reason=end_reason,
    )


def make_forest(
    *tracks: Track,
    frames: int | None = None,
    video_id: str = "",
    width: float = 512.0,
    height: float = 512.0,
    dosage: str = "",
) -> LineageForest:
    """Forest from tracks; the frame count defaults to the last entry + 1."""
    if frames is None:
        frames = 1 + max(t.last_frame for t in tracks) if tracks else 1
    meta = VideoMeta(
        video_id=video_id,
        frames=frames,
        width=width,
        height=height,
        dosage=dosage,
    )
    return LineageForest(tracks={t.track_id: t for t in tracks}, meta=meta)
