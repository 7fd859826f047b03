"""Two-stage tracking-by-detection with division and death events.

Per frame the engine runs:

1. confidence partition of the frame's detections (high / low / dropped);
2. stage 1 — living tracks against high-confidence alive detections, and
   dead tracks against high-confidence dead detections, both under the
   spatial and appearance gates;
3. death matching — living tracks left over from stage 1 against the
   remaining high-confidence dead detections, spatial gate only;
4. stage 2 — still-unmatched tracks (including the memory bank) against
   low-confidence detections of their own class, re-identification only;
5. new tracks from unclaimed high-confidence detections;
6. memory aging — unmatched tracks sit in the bank for up to
   ``memory_frames`` attempts before they are closed.

A track matching two or more detections in stage 1 is a division: the
parent closes and one daughter track starts per detection.  A living
track matching a dead detection is a death: the track keeps following
the corpse but can never return to the living pool.  Lost tracks are
re-acquired at their Kalman-predicted position, and the skipped frames
are filled with blended predictions so tracks stay gap-free.

Conflicts over detections are settled globally greedily: candidate pairs
are consumed in order of ascending cost, ties broken by lower track id
and then lower detection index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    Box,
    CellClass,
    Detection,
    EndReason,
    LineageForest,
    Point,
    Provenance,
    Track,
    TrackEntry,
    TrackerConfig,
    TrackStatus,
    ValidationError,
    VideoMeta,
    centroid,
)
from .ingest import partition_by_confidence
from .kalman import (
    KalmanState,
    batch_predict,
    batch_update,
    interpolate_gap,
    kf_init,
)

__all__ = [
    "CandidatePair",
    "TrackRef",
    "Outcome",
    "MemoryEntry",
    "MemoryBank",
    "pair_cost",
    "build_candidates",
    "resolve_conflicts",
    "classify_outcomes",
    "CellTracker",
    "track_video",
]


def pair_cost(similarity: float, distance: float, config: TrackerConfig) -> float:
    """Association cost: gate-normalized blend of appearance and position.

    ``appearance_weight`` weighs the embedding L1 distance (normalized by
    ``tau_sim``) against the centroid distance (normalized by
    ``tau_dist``).  A pair sitting exactly on both gates costs 1.0.
    """
    w = config.appearance_weight
    return w * (similarity / config.tau_sim) + (1.0 - w) * (
        distance / config.tau_dist
    )


@dataclass(frozen=True)
class TrackRef:
    """A track as seen by the matcher: identity, position, appearance.

    ``position`` is the last observed centroid for active tracks and the
    Kalman prediction for tracks in the memory bank.
    """

    track_id: int
    position: Point
    embedding: np.ndarray


@dataclass(frozen=True)
class CandidatePair:
    track_id: int
    det_index: int
    distance: float
    similarity: float
    cost: float


class Outcome(Enum):
    UNMATCHED = "unmatched"
    CONTINUED = "continued"
    DIVIDED = "divided"


def build_candidates(
    refs: Sequence[TrackRef],
    detections: Sequence[Detection],
    config: TrackerConfig,
    gate_similarity: bool = True,
) -> list[CandidatePair]:
    """All (track, detection) pairs that survive the gates.

    The spatial gate ``distance <= tau_dist`` always applies; the
    appearance gate ``similarity <= tau_sim`` is skipped for death
    matching, where appearance is unreliable but the cost still ranks
    candidates.
    """
    if not refs or not detections:
        return []
    pos = np.array([r.position for r in refs])
    cen = np.array([d.centroid for d in detections])
    dx = pos[:, 0:1] - cen[None, :, 0]
    dy = pos[:, 1:2] - cen[None, :, 1]
    dist = np.hypot(dx, dy)
    ti, di = np.nonzero(dist <= config.tau_dist)
    if ti.size == 0:
        return []
    emb_t = np.stack([refs[i].embedding for i in ti])
    emb_d = np.stack([detections[j].embedding for j in di])
    if emb_t.shape[1] != emb_d.shape[1]:
        raise ValidationError(
            f"embedding length mismatch: tracks {emb_t.shape[1]} vs "
            f"detections {emb_d.shape[1]}"
        )
    sim = np.abs(emb_t - emb_d).sum(axis=1)
    if gate_similarity:
        keep = sim <= config.tau_sim
        ti, di, sim = ti[keep], di[keep], sim[keep]
        if ti.size == 0:
            return []
    d = dist[ti, di]
    w = config.appearance_weight
    cost = w * (sim / config.tau_sim) + (1.0 - w) * (d / config.tau_dist)
    return [
        CandidatePair(
            track_id=refs[i].track_id,
            det_index=int(j),
            distance=float(d[k]),
            similarity=float(sim[k]),
            cost=float(cost[k]),
        )
        for k, (i, j) in enumerate(zip(ti, di))
    ]


def resolve_conflicts(
    candidates: Sequence[CandidatePair],
    max_per_track: int | Mapping[int, int],
) -> dict[int, list[int]]:
    """Globally greedy assignment of detections to tracks.

    Pairs are taken cheapest-first (ties: lower track id, then lower
    detection index).  A detection, once claimed, is gone for everyone
    else; a track stops claiming at its cap.  Returns the per-track
    claimed detection indices in ascending index order.
    """
    order = sorted(
        candidates, key=lambda p: (p.cost, p.track_id, p.det_index)
    )
    claimed: set[int] = set()
    out: dict[int, list[int]] = {}
    for pair in order:
        if pair.det_index in claimed:
            continue
        cap = (
            max_per_track
            if isinstance(max_per_track, int)
            else max_per_track.get(pair.track_id, 1)
        )
        got = out.get(pair.track_id)
        if got is not None and len(got) >= cap:
            continue
        claimed.add(pair.det_index)
        out.setdefault(pair.track_id, []).append(pair.det_index)
    for indices in out.values():
        indices.sort()
    return out


def classify_outcomes(
    assignment: Mapping[int, Sequence[int]], track_ids: Iterable[int]
) -> dict[int, Outcome]:
    """Label each track by its stage-1 match count: 0 / 1 / several."""
    out: dict[int, Outcome] = {}
    for tid in track_ids:
        n = len(assignment.get(tid, ()))
        if n == 0:
            out[tid] = Outcome.UNMATCHED
        elif n == 1:
            out[tid] = Outcome.CONTINUED
        else:
            out[tid] = Outcome.DIVIDED
    return out


@dataclass(frozen=True)
class MemoryEntry:
    track_id: int
    frames_since_lost: int
    state: KalmanState | None
    embedding: np.ndarray
    box: Box


@dataclass
class MemoryBank:
    """Snapshot of the lost-track buffer between frames."""

    max_frames: int
    entries: list[MemoryEntry] = field(default_factory=list)


class _Runtime:
    """Mutable per-track state while a video is being processed."""

    __slots__ = (
        "track_id",
        "parent",
        "children",
        "entries",
        "start_frame",
        "last_obs",
        "last_centroid",
        "box_size",
        "embedding",
        "cell_class",
        "death_frame",
        "lost_count",
        "closed",
        "end_reason",
        "kf_mean",
        "kf_cov",
        "anchor_mean",
        "anchor_cov",
    )

    def __init__(
        self,
        track_id: int,
        frame_index: int,
        det: Detection,
        config: TrackerConfig,
        parent: int | None = None,
    ) -> None:
        self.track_id = track_id
        self.parent = parent
        self.children: list[int] = []
        self.entries: dict[int, TrackEntry] = {}
        self.start_frame = frame_index
        self.last_obs = frame_index
        self.last_centroid = det.centroid
        x, y, w, h = det.box
        self.box_size = (w, h)
        self.embedding = det.embedding
        self.cell_class = det.cell_class
        self.death_frame: int | None = None
        self.lost_count = 0
        self.closed = False
        self.end_reason: EndReason | None = None
        self.kf_mean: np.ndarray | None = None
        self.kf_cov: np.ndarray | None = None
        if config.use_kalman:
            state = kf_init(det.centroid, config)
            self.kf_mean = state.mean.copy()
            self.kf_cov = state.cov.copy()
        self.anchor_mean = self.kf_mean
        self.anchor_cov = self.kf_cov
        self.entries[frame_index] = _entry_from_detection(det)


def _entry_from_detection(det: Detection) -> TrackEntry:
    prov = Provenance.OBSERVED_HIGH
    return TrackEntry(
        box=det.box,
        cell_class=det.cell_class,
        provenance=prov,
        embedding=det.embedding,
        confidence=det.confidence,
    )


class CellTracker:
    """Stateful engine; feed frames in order, then finalize."""

    def __init__(self, config: TrackerConfig | None = None, record_usage: bool = False):
        self.config = config or TrackerConfig()
        self._open: dict[int, _Runtime] = {}
        self._done: list[_Runtime] = []
        self._next_id = 1
        self._next_frame = 0
        self._dim: int | None = None
        self.record_usage = record_usage
        # frame -> list of (index into the frame's detection list, consumer)
        self.usage_log: dict[int, list[tuple[int, str]]] = {}

    # -- public API ---------------------------------------------------------

    def step(self, frame_index: int, detections: Sequence[Detection]) -> None:
        if frame_index != self._next_frame:
            raise ValidationError(
                f"frames must be fed in order: expected {self._next_frame}, "
                f"got {frame_index}"
            )
        for det in detections:
            if det.frame_index != frame_index:
                raise ValidationError(
                    f"detection tagged frame {det.frame_index} fed at "
                    f"frame {frame_index}"
                )
            if self._dim is None:
                self._dim = det.embedding.size
            elif det.embedding.size != self._dim:
                raise ValidationError(
                    f"embedding length changed from {self._dim} to "
                    f"{det.embedding.size} at frame {frame_index}"
                )
        self._process(frame_index, list(detections))
        self._next_frame += 1

    def memory_bank(self) -> MemoryBank:
        bank = MemoryBank(max_frames=self.config.memory_frames)
        for rt in self._open.values():
            if rt.lost_count >= 1:
                state = None
                if rt.kf_mean is not None:
                    state = KalmanState(mean=rt.kf_mean, cov=rt.kf_cov)
                bank.entries.append(
                    MemoryEntry(
                        track_id=rt.track_id,
                        frames_since_lost=rt.lost_count,
                        state=state,
                        embedding=rt.embedding,
                        box=(
                            rt.last_centroid[0] - rt.box_size[0] / 2.0,
                            rt.last_centroid[1] - rt.box_size[1] / 2.0,
                            rt.box_size[0],
                            rt.box_size[1],
                        ),
                    )
                )
        return bank

    def finalize(self, meta: VideoMeta | None = None) -> LineageForest:
        """Close everything still open and emit the lineage forest."""
        for rt in list(self._open.values()):
            self._close(rt, EndReason.END_OF_VIDEO)
        tracks: dict[int, Track] = {}
        for rt in self._done:
            status = TrackStatus.CLOSED
            if rt.children:
                status = TrackStatus.DIVIDED
            elif any(
                e.cell_class is CellClass.DEAD for e in rt.entries.values()
            ):
                status = TrackStatus.DEAD
            tracks[rt.track_id] = Track(
                track_id=rt.track_id,
                entries=dict(sorted(rt.entries.items())),
                parent=rt.parent,
                children=sorted(rt.children),
                status=status,
                end_reason=rt.end_reason,
            )
        if meta is None:
            meta = VideoMeta(frames=self._next_frame)
        forest = LineageForest(tracks=tracks, meta=meta)
        forest.validate(
            require_coverage=self.config.use_kalman,
            require_adjacency=True,
        )
        return forest

    # -- internals ----------------------------------------------------------

    def _process(self, fi: int, detections: list[Detection]) -> None:
        cfg = self.config
        high, low, _ = partition_by_confidence(detections, cfg)
        if self.record_usage:
            det_pos = {id(d): i for i, d in enumerate(detections)}
            self.usage_log[fi] = []

        open_rts = list(self._open.values())
        if cfg.use_kalman and open_rts:
            self._predict_all(open_rts)

        living = [rt for rt in open_rts if rt.cell_class is CellClass.ALIVE]
        dead = [rt for rt in open_rts if rt.cell_class is CellClass.DEAD]
        high_alive = [j for j, d in enumerate(high) if d.cell_class is CellClass.ALIVE]
        high_dead = [j for j, d in enumerate(high) if d.cell_class is CellClass.DEAD]

        matched: set[int] = set()
        claimed_high: set[int] = set()

        # Stage 1: living tracks vs high-confidence alive detections.  A
        # lost track may only divide when interpolation can reconnect the
        # parent, otherwise it re-identifies a single detection.
        caps = {
            rt.track_id: (
                cfg.max_daughters
                if rt.lost_count == 0 or cfg.use_kalman
                else 1
            )
            for rt in living
        }
        assign_living = self._match(
            living, high, high_alive, caps, gate_similarity=True
        )
        # Corpse continuation: dead tracks follow dead detections, one each.
        assign_corpse = self._match(
            dead, high, high_dead, 1, gate_similarity=True
        )

        # Death matching: living tracks that found no living detection vs
        # dead detections nobody continues.  Spatial gate only.
        unmatched_living = [
            rt for rt in living if rt.track_id not in assign_living
        ]
        corpse_taken = {j for js in assign_corpse.values() for js2 in [js] for j in js2}
        free_dead = [j for j in high_dead if j not in corpse_taken]
        assign_death = self._match(
            unmatched_living, high, free_dead, 1, gate_similarity=False
        )

        by_id = {rt.track_id: rt for rt in open_rts}
        for tid, indices in assign_living.items():
            rt = by_id[tid]
            if len(indices) == 1:
                self._extend(rt, fi, high[indices[0]])
            else:
                self._divide(rt, fi, [high[j] for j in indices])
            matched.add(tid)
            claimed_high.update(indices)
            if self.record_usage:
                for j in indices:
                    self.usage_log[fi].append(
                        (det_pos[id(high[j])], f"track:{tid}")
                    )
        for tid, indices in assign_corpse.items():
            rt = by_id[tid]
            self._extend(rt, fi, high[indices[0]])
            matched.add(tid)
            claimed_high.update(indices)
            if self.record_usage:
                self.usage_log[fi].append(
                    (det_pos[id(high[indices[0]])], f"track:{tid}")
                )
        for tid, indices in assign_death.items():
            rt = by_id[tid]
            self._extend(rt, fi, high[indices[0]])
            matched.add(tid)
            claimed_high.update(indices)
            if self.record_usage:
                self.usage_log[fi].append(
                    (det_pos[id(high[indices[0]])], f"track:{tid}")
                )

        # Stage 2: whatever is still open and unmatched (current frame
        # misses and the whole memory bank) gets one shot at the
        # low-confidence detections of its own class.
        remaining = [
            rt
            for rt in open_rts
            if rt.track_id not in matched and not rt.closed
        ]
        low_alive = [j for j, d in enumerate(low) if d.cell_class is CellClass.ALIVE]
        low_dead = [j for j, d in enumerate(low) if d.cell_class is CellClass.DEAD]
        rem_living = [rt for rt in remaining if rt.cell_class is CellClass.ALIVE]
        rem_dead = [rt for rt in remaining if rt.cell_class is CellClass.DEAD]
        assign_low = self._match(
            rem_living, low, low_alive, 1, gate_similarity=True
        )
        assign_low.update(
            self._match(rem_dead, low, low_dead, 1, gate_similarity=True)
        )
        for tid, indices in assign_low.items():
            rt = by_id[tid]
            self._extend(rt, fi, low[indices[0]], Provenance.OBSERVED_LOW)
            matched.add(tid)
            if self.record_usage:
                self.usage_log[fi].append(
                    (det_pos[id(low[indices[0]])], f"track:{tid}")
                )

        # Fresh tracks from high-confidence detections nobody claimed.
        for j, det in enumerate(high):
            if j in claimed_high:
                continue
            rt = self._new_track(fi, det)
            if self.record_usage:
                self.usage_log[fi].append(
                    (det_pos[id(det)], f"init:{rt.track_id}")
                )

        # Memory aging: a track may miss up to memory_frames consecutive
        # matching attempts; one more and it is closed.
        for rt in open_rts:
            if rt.closed or rt.track_id in matched:
                continue
            rt.lost_count += 1
            if rt.lost_count > self.config.memory_frames:
                self._close(rt, EndReason.LOST)

    def _match(
        self,
        tracks: list[_Runtime],
        dets: list[Detection],
        det_indices: list[int],
        caps: int | Mapping[int, int],
        gate_similarity: bool,
    ) -> dict[int, list[int]]:
        """Gate + greedy-resolve a track pool against a detection subset.

        Returns per-track lists of indices into ``dets``.
        """
        if not tracks or not det_indices:
            return {}
        refs = [
            TrackRef(
                track_id=rt.track_id,
                position=self._ref_position(rt),
                embedding=rt.embedding,
            )
            for rt in tracks
        ]
        subset = [dets[j] for j in det_indices]
        pairs = build_candidates(
            refs, subset, self.config, gate_similarity=gate_similarity
        )
        assignment = resolve_conflicts(pairs, caps)
        return {
            tid: [det_indices[j] for j in indices]
            for tid, indices in assignment.items()
        }

    def _ref_position(self, rt: _Runtime) -> Point:
        if rt.lost_count >= 1 and self.config.use_kalman:
            return (float(rt.kf_mean[0]), float(rt.kf_mean[1]))
        return rt.last_centroid

    def _predict_all(self, rts: list[_Runtime]) -> None:
        means = np.stack([rt.kf_mean for rt in rts])
        covs = np.stack([rt.kf_cov for rt in rts])
        means, covs = batch_predict(means, covs, self.config.process_noise)
        for k, rt in enumerate(rts):
            rt.kf_mean = means[k]
            rt.kf_cov = covs[k]

    def _fill_gap(self, rt: _Runtime, fi: int, anchor: Point | None) -> None:
        """Interpolate the frames a lost track skipped before this match."""
        if not self.config.use_kalman or fi <= rt.last_obs + 1:
            return
        gap = range(rt.last_obs + 1, fi)
        state = KalmanState(mean=rt.anchor_mean, cov=rt.anchor_cov)
        rt.entries.update(
            interpolate_gap(
                state,
                rt.box_size,
                gap,
                self.config,
                anchor_after=anchor,
                cell_class=rt.cell_class,
            )
        )

    def _extend(
        self,
        rt: _Runtime,
        fi: int,
        det: Detection,
        provenance: Provenance = Provenance.OBSERVED_HIGH,
    ) -> None:
        if rt.cell_class is CellClass.DEAD and det.cell_class is CellClass.ALIVE:
            raise AssertionError("dead track offered a living detection")
        if rt.lost_count >= 1:
            self._fill_gap(rt, fi, det.centroid)
        rt.entries[fi] = TrackEntry(
            box=det.box,
            cell_class=det.cell_class,
            provenance=provenance,
            embedding=det.embedding,
            confidence=det.confidence,
        )
        if det.cell_class is CellClass.DEAD and rt.cell_class is CellClass.ALIVE:
            rt.death_frame = fi
        rt.cell_class = det.cell_class
        rt.last_obs = fi
        rt.last_centroid = det.centroid
        x, y, w, h = det.box
        rt.box_size = (w, h)
        rt.embedding = det.embedding
        rt.lost_count = 0
        if self.config.use_kalman:
            means, covs = batch_update(
                rt.kf_mean[None, :],
                rt.kf_cov[None, :, :],
                np.array([det.centroid]),
                self.config.measurement_noise,
            )
            rt.kf_mean = means[0]
            rt.kf_cov = covs[0]
            rt.anchor_mean = rt.kf_mean
            rt.anchor_cov = rt.kf_cov

    def _divide(self, rt: _Runtime, fi: int, dets: list[Detection]) -> None:
        if rt.lost_count >= 1:
            anchor = (
                float(np.mean([d.centroid[0] for d in dets])),
                float(np.mean([d.centroid[1] for d in dets])),
            )
            self._fill_gap(rt, fi, anchor)
        rt.closed = True
        rt.end_reason = EndReason.DIVISION
        del self._open[rt.track_id]
        self._done.append(rt)
        for det in dets:
            child = self._new_track(fi, det, parent=rt.track_id)
            rt.children.append(child.track_id)

    def _new_track(
        self, fi: int, det: Detection, parent: int | None = None
    ) -> _Runtime:
        rt = _Runtime(self._next_id, fi, det, self.config, parent=parent)
        self._next_id += 1
        self._open[rt.track_id] = rt
        return rt

    def _close(self, rt: _Runtime, reason: EndReason) -> None:
        rt.closed = True
        if rt.death_frame is not None:
            # A track that witnessed its death keeps that as its fate even
            # if the corpse is later lost.
            rt.end_reason = EndReason.DEATH
        else:
            rt.end_reason = reason
        del self._open[rt.track_id]
        self._done.append(rt)


def track_video(
    frames: Sequence[Sequence[Detection]],
    config: TrackerConfig | None = None,
    meta: VideoMeta | None = None,
) -> LineageForest:
    """Track a whole video (list of per-frame detection lists)."""
    engine = CellTracker(config)
    for fi, dets in enumerate(frames):
        engine.step(fi, dets)
    if meta is not None and meta.frames == 0:
        meta.frames = len(frames)
    return engine.finalize(meta=meta)
