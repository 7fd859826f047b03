"""Evaluation of predicted lineage forests against ground truth.

Two metric families are computed over the same pair of acyclic tracking
graphs (nodes = per-frame boxes, edges = within-track links and
parent->daughter division edges):

* graph-edit scores DET / LNK / TRA.  Ground truth is matched to
  prediction per frame by the covered-center rule, and the weighted
  count of edit operations needed to turn the prediction into ground
  truth (node splits, additions, deletions; edge additions, deletions,
  semantics changes) is normalized against the cost of building ground
  truth from an empty prediction.

* detection-association scores HOTA (with its DetA / AssA factors over
  an IoU threshold grid), MOTA, MOTP and IDF1, all based on per-frame
  one-to-one box matching that maximizes total IoU subject to
  ``iou >= alpha``.

Both families are invariant to track relabeling and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    Box,
    LineageForest,
    ValidationError,
)

__all__ = [
    "UndefinedMetricError",
    "AOGMWeights",
    "AOGMCounts",
    "CtcScores",
    "TrackingGraph",
    "build_graph",
    "iou_matrix",
    "match_frame_objects",
    "aogm_counts",
    "aogm_penalty",
    "det_lnk_tra",
    "HotaScores",
    "hota",
    "mota",
    "motp",
    "idf1",
    "MetricReport",
    "evaluate",
    "DEFAULT_ALPHAS",
]

LINK = "link"
PARENT = "parent"

# IoU threshold grid for HOTA: 0.05, 0.10, ..., 0.95.
DEFAULT_ALPHAS: tuple[float, ...] = tuple(i / 20 for i in range(1, 20))


class UndefinedMetricError(ValueError):
    """A metric has no defined value on this input (e.g. empty support)."""


@dataclass(frozen=True)
class AOGMWeights:
    """Edit-operation weights; defaults are the conventional ones."""

    node_split: float = 5.0
    false_negative: float = 10.0
    false_positive: float = 1.0
    edge_delete: float = 1.0
    edge_add: float = 1.5
    edge_change: float = 1.0


@dataclass(frozen=True)
class AOGMCounts:
    """Raw edit-operation counts from graph comparison."""

    node_splits: int = 0
    false_negatives: int = 0
    false_positives: int = 0
    edge_deletions: int = 0
    edge_additions: int = 0
    edge_changes: int = 0


Node = tuple[int, int]  # (track_id, frame)


@dataclass(eq=False)
class TrackingGraph:
    """Frame-indexed node arrays plus typed edges for one forest."""

    frames: int
    frame_ids: list[np.ndarray] = field(default_factory=list)
    frame_boxes: list[np.ndarray] = field(default_factory=list)
    edges: dict[tuple[Node, Node], str] = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return sum(ids.size for ids in self.frame_ids)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def nodes_per_track(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for ids in self.frame_ids:
            for tid in ids:
                counts[tid] = counts.get(tid, 0) + 1
        return counts


def build_graph(forest: LineageForest, frames: int | None = None) -> TrackingGraph:
    """Flatten a lineage forest into its tracking graph."""
    if frames is None:
        frames = forest.meta.frames
        if frames <= 0:
            frames = 1 + max(
                (t.last_frame for t in forest.tracks.values()), default=-1
            )
    per_frame: list[list[tuple[int, Box]]] = [[] for _ in range(frames)]
    edges: dict[tuple[Node, Node], str] = {}
    for tid in sorted(forest.tracks):
        track = forest.tracks[tid]
        entry_frames = sorted(track.entries)
        if entry_frames and entry_frames[-1] >= frames:
            raise ValidationError(
                f"track {tid} extends to frame {entry_frames[-1]}, "
                f"beyond the declared {frames} frames"
            )
        for f in entry_frames:
            per_frame[f].append((tid, track.entries[f].box))
        for a, b in zip(entry_frames, entry_frames[1:]):
            if b == a + 1:
                edges[((tid, a), (tid, b))] = LINK
    for tid in sorted(forest.tracks):
        track = forest.tracks[tid]
        for child_id in track.children:
            child = forest.tracks[child_id]
            edges[
                ((tid, track.last_frame), (child_id, child.start_frame))
            ] = PARENT
    graph = TrackingGraph(frames=frames)
    for f in range(frames):
        nodes = per_frame[f]
        graph.frame_ids.append(np.array([tid for tid, _ in nodes], dtype=int))
        graph.frame_boxes.append(
            np.array([box for _, box in nodes], dtype=float).reshape(-1, 4)
        )
    graph.edges = edges
    return graph


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two (n, 4) box arrays in (x, y, w, h) form."""
    if boxes_a.size == 0 or boxes_b.size == 0:
        return np.zeros((boxes_a.shape[0], boxes_b.shape[0]))
    ax1, ay1 = boxes_a[:, 0], boxes_a[:, 1]
    ax2, ay2 = ax1 + boxes_a[:, 2], ay1 + boxes_a[:, 3]
    bx1, by1 = boxes_b[:, 0], boxes_b[:, 1]
    bx2, by2 = bx1 + boxes_b[:, 2], by1 + boxes_b[:, 3]
    iw = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(
        ax1[:, None], bx1[None, :]
    )
    ih = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(
        ay1[:, None], by1[None, :]
    )
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    inter[(iw <= 0) | (ih <= 0)] = 0.0
    areas_a = boxes_a[:, 2] * boxes_a[:, 3]
    areas_b = boxes_b[:, 2] * boxes_b[:, 3]
    union = areas_a[:, None] + areas_b[None, :] - inter
    # Rounding in x+w can push the ratio a hair past 1 for equal boxes.
    return np.minimum(inter / union, 1.0)


def _center_cover_mapping(
    gt_boxes: np.ndarray, pred_boxes: np.ndarray
) -> np.ndarray:
    """Covered-center assignment for one frame.

    Returns, per ground-truth node, the index of the prediction whose box
    contains the ground-truth box center with the largest intersection
    area, or -1 when no box covers it.  Intersection ties are broken by
    IoU — when a small box sits wholly inside a larger one, both cover
    the small ground truth completely, and the snugger box is the right
    partner — and remaining ties go to the lowest prediction index.
    Several ground-truth nodes may map to one prediction; that surfaces
    as node splits in the edit counts.
    """
    m = gt_boxes.shape[0]
    out = np.full(m, -1, dtype=int)
    if m == 0 or pred_boxes.shape[0] == 0:
        return out
    cx = gt_boxes[:, 0] + gt_boxes[:, 2] / 2.0
    cy = gt_boxes[:, 1] + gt_boxes[:, 3] / 2.0
    px1, py1 = pred_boxes[:, 0], pred_boxes[:, 1]
    px2, py2 = px1 + pred_boxes[:, 2], py1 + pred_boxes[:, 3]
    inside = (
        (cx[:, None] >= px1[None, :])
        & (cx[:, None] <= px2[None, :])
        & (cy[:, None] >= py1[None, :])
        & (cy[:, None] <= py2[None, :])
    )
    if not inside.any():
        return out
    ix1 = np.maximum(gt_boxes[:, 0][:, None], px1[None, :])
    iy1 = np.maximum(gt_boxes[:, 1][:, None], py1[None, :])
    ix2 = np.minimum((gt_boxes[:, 0] + gt_boxes[:, 2])[:, None], px2[None, :])
    iy2 = np.minimum((gt_boxes[:, 1] + gt_boxes[:, 3])[:, None], py2[None, :])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    union = (
        (gt_boxes[:, 2] * gt_boxes[:, 3])[:, None]
        + (pred_boxes[:, 2] * pred_boxes[:, 3])[None, :]
        - inter
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        iou_tie = np.where(union > 0, inter / union, 0.0)
    masked_inter = np.where(inside, inter, -1.0)
    top_inter = masked_inter.max(axis=1, keepdims=True)
    tied = inside & (masked_inter == top_inter)
    masked_iou = np.where(tied, iou_tie, -1.0)
    top_iou = masked_iou.max(axis=1, keepdims=True)
    best = tied & (masked_iou == top_iou)
    rows = inside.any(axis=1)
    out[rows] = np.argmax(best[rows], axis=1)
    return out


def _max_iou_matching(
    ious: np.ndarray, alpha: float
) -> list[tuple[int, int]]:
    """One-to-one matching maximizing total IoU over pairs with iou >= alpha.

    The eligible bipartite graph is split into connected components and
    each component is solved with the Hungarian algorithm; singleton
    pairs short-circuit.  Returns (row, col) index pairs.
    """
    eligible = ious >= alpha
    if not eligible.any():
        return []
    m, n = ious.shape
    # Union-find over rows [0, m) and columns [m, m+n).
    parent = list(range(m + n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    rows_e, cols_e = np.nonzero(eligible)
    for r, c in zip(rows_e, cols_e):
        ra, rb = find(int(r)), find(int(c) + m)
        if ra != rb:
            parent[ra] = rb
    comps: dict[int, tuple[list[int], list[int]]] = {}
    for r in set(rows_e.tolist()):
        comps.setdefault(find(r), ([], []))[0].append(r)
    for c in set(cols_e.tolist()):
        comps.setdefault(find(c + m), ([], []))[1].append(c)
    matches: list[tuple[int, int]] = []
    for rows, cols in comps.values():
        if not rows or not cols:
            continue
        if len(rows) == 1 and len(cols) == 1:
            matches.append((rows[0], cols[0]))
            continue
        rows.sort()
        cols.sort()
        sub = ious[np.ix_(rows, cols)].copy()
        sub[sub < alpha] = 0.0
        ri, ci = linear_sum_assignment(sub, maximize=True)
        for a, b in zip(ri, ci):
            if sub[a, b] >= alpha:
                matches.append((rows[a], cols[b]))
    matches.sort()
    return matches


def match_frame_objects(
    gt_boxes: np.ndarray,
    pred_boxes: np.ndarray,
    criterion: str = "center",
    alpha: float = 0.5,
) -> np.ndarray | list[tuple[int, int]]:
    """Frame-level correspondence between ground truth and prediction.

    ``criterion="center"`` applies the covered-center rule and returns a
    per-ground-truth array of prediction indices (-1 for unmatched);
    ``criterion="iou"`` returns the one-to-one (gt, pred) index pairs of
    the total-IoU-maximizing assignment under ``iou >= alpha``.
    """
    gt_boxes = np.asarray(gt_boxes, dtype=float).reshape(-1, 4)
    pred_boxes = np.asarray(pred_boxes, dtype=float).reshape(-1, 4)
    if criterion == "center":
        return _center_cover_mapping(gt_boxes, pred_boxes)
    if criterion == "iou":
        return _max_iou_matching(iou_matrix(gt_boxes, pred_boxes), alpha)
    raise ValueError(f"unknown matching criterion {criterion!r}")


# ---------------------------------------------------------------------------
# Graph-edit scores


def aogm_counts(gt: TrackingGraph, pred: TrackingGraph) -> AOGMCounts:
    """Count the edit operations turning ``pred`` into ``gt``.

    Nodes: ground-truth nodes without a covering prediction are
    additions (FN); predictions covering nothing are deletions (FP); a
    prediction covering k > 1 ground-truth nodes needs k - 1 splits.
    Edges: each ground-truth edge is served by the prediction edge
    between its mapped endpoints — exactly once, matching semantics
    preferred, a semantics change when only the wrong kind is there, an
    addition otherwise.  Prediction edges serving no ground-truth edge
    are deletions.
    """
    if gt.frames != pred.frames:
        raise ValidationError(
            f"frame count mismatch: gt {gt.frames} vs pred {pred.frames}"
        )
    ns = fn = fp = 0
    mapping: dict[Node, Node] = {}
    for f in range(gt.frames):
        gt_ids = gt.frame_ids[f]
        pred_ids = pred.frame_ids[f]
        assigned = _center_cover_mapping(gt.frame_boxes[f], pred.frame_boxes[f])
        hits = np.zeros(pred_ids.size, dtype=int)
        for gi, pi in enumerate(assigned):
            if pi < 0:
                fn += 1
            else:
                hits[pi] += 1
                mapping[(int(gt_ids[gi]), f)] = (int(pred_ids[pi]), f)
        fp += int((hits == 0).sum())
        ns += int(np.clip(hits - 1, 0, None).sum())

    used: set[tuple[Node, Node]] = set()
    deferred: list[tuple[Node, Node] | None] = []
    ea = ec = 0
    for (ga, gb), kind in gt.edges.items():
        pa = mapping.get(ga)
        pb = mapping.get(gb)
        if pa is None or pb is None or pa == pb:
            ea += 1
            continue
        pkey = (pa, pb)
        pkind = pred.edges.get(pkey)
        if pkind == kind and pkey not in used:
            used.add(pkey)
        elif pkind is None:
            ea += 1
        else:
            deferred.append(pkey)
    for pkey in deferred:
        if pkey is not None and pkey not in used:
            used.add(pkey)
            ec += 1
        else:
            ea += 1
    ed = len(pred.edges) - len(used)
    return AOGMCounts(
        node_splits=ns,
        false_negatives=fn,
        false_positives=fp,
        edge_deletions=ed,
        edge_additions=ea,
        edge_changes=ec,
    )


def aogm_penalty(
    counts: AOGMCounts, weights: AOGMWeights | None = None, ops: str = "all"
) -> float:
    """Weighted edit cost; ``ops`` restricts to "nodes" or "edges"."""
    w = weights or AOGMWeights()
    nodes = (
        w.node_split * counts.node_splits
        + w.false_negative * counts.false_negatives
        + w.false_positive * counts.false_positives
    )
    edges = (
        w.edge_delete * counts.edge_deletions
        + w.edge_add * counts.edge_additions
        + w.edge_change * counts.edge_changes
    )
    if ops == "all":
        return nodes + edges
    if ops == "nodes":
        return nodes
    if ops == "edges":
        return edges
    raise ValueError(f"unknown ops selector {ops!r}")


def _normalized(penalty: float, empty_cost: float) -> float:
    if empty_cost == 0:
        return 1.0 if penalty == 0 else 0.0
    return 1.0 - min(penalty, empty_cost) / empty_cost


@dataclass(frozen=True)
class CtcScores:
    det: float
    lnk: float
    tra: float
    counts: AOGMCounts


def det_lnk_tra(
    pred: LineageForest | TrackingGraph,
    gt: LineageForest | TrackingGraph,
    weights: AOGMWeights | None = None,
) -> CtcScores:
    """DET / LNK / TRA of a prediction against ground truth.

    Each score is ``1 - min(penalty, empty) / empty`` where ``empty`` is
    the cost of building the ground-truth graph from nothing, restricted
    to node operations (DET), edge operations (LNK), or both (TRA).
    """
    w = weights or AOGMWeights()
    gt_graph = gt if isinstance(gt, TrackingGraph) else build_graph(gt)
    pred_graph = (
        pred if isinstance(pred, TrackingGraph) else build_graph(pred, gt_graph.frames)
    )
    n_gt = gt_graph.node_count
    if n_gt == 0:
        raise UndefinedMetricError("ground truth has no objects")
    e_gt = gt_graph.edge_count
    counts = aogm_counts(gt_graph, pred_graph)
    det = _normalized(aogm_penalty(counts, w, "nodes"), n_gt * w.false_negative)
    lnk = _normalized(aogm_penalty(counts, w, "edges"), e_gt * w.edge_add)
    tra = _normalized(
        aogm_penalty(counts, w, "all"),
        n_gt * w.false_negative + e_gt * w.edge_add,
    )
    return CtcScores(det=det, lnk=lnk, tra=tra, counts=counts)


# ---------------------------------------------------------------------------
# Detection-association scores


@dataclass(frozen=True)
class HotaScores:
    hota: float
    det_a: float
    ass_a: float
    alphas: tuple[float, ...]
    hota_alpha: tuple[float, ...]
    det_a_alpha: tuple[float, ...]
    ass_a_alpha: tuple[float, ...]


def _frame_iou_cache(
    gt: TrackingGraph, pred: TrackingGraph
) -> list[np.ndarray]:
    return [
        iou_matrix(gt.frame_boxes[f], pred.frame_boxes[f])
        for f in range(gt.frames)
    ]


def hota(
    pred: LineageForest | TrackingGraph,
    gt: LineageForest | TrackingGraph,
    alphas: tuple[float, ...] = DEFAULT_ALPHAS,
) -> HotaScores:
    """HOTA with its detection and association factors.

    Per threshold alpha, frames are matched one-to-one maximizing total
    IoU over pairs with ``iou >= alpha``; DetA is TP / (TP + FN + FP)
    and AssA averages, over true-positive detections, the Jaccard index
    between the ground-truth and predicted trajectories they join.  The
    headline numbers average over the threshold grid.
    """
    gt_graph = gt if isinstance(gt, TrackingGraph) else build_graph(gt)
    pred_graph = (
        pred if isinstance(pred, TrackingGraph) else build_graph(pred, gt_graph.frames)
    )
    if gt_graph.frames != pred_graph.frames:
        raise ValidationError("frame count mismatch")
    if gt_graph.node_count == 0:
        raise UndefinedMetricError("ground truth has no objects")
    gt_sizes = gt_graph.nodes_per_track()
    pred_sizes = pred_graph.nodes_per_track()
    gt_total = gt_graph.node_count
    pred_total = pred_graph.node_count
    cache = _frame_iou_cache(gt_graph, pred_graph)

    h_list: list[float] = []
    d_list: list[float] = []
    a_list: list[float] = []
    for alpha in alphas:
        tp = 0
        pair_counts: dict[tuple[int, int], int] = {}
        for f in range(gt_graph.frames):
            for gi, pi in _max_iou_matching(cache[f], alpha):
                key = (int(gt_graph.frame_ids[f][gi]), int(pred_graph.frame_ids[f][pi]))
                pair_counts[key] = pair_counts.get(key, 0) + 1
                tp += 1
        det_a = tp / (gt_total + pred_total - tp) if gt_total + pred_total else 0.0
        if tp == 0:
            ass_a = 0.0
        else:
            acc = 0.0
            for (g, p), c in pair_counts.items():
                acc += c * (c / (gt_sizes[g] + pred_sizes[p] - c))
            ass_a = acc / tp
        h_list.append(math.sqrt(det_a * ass_a))
        d_list.append(det_a)
        a_list.append(ass_a)
    return HotaScores(
        hota=float(np.mean(h_list)),
        det_a=float(np.mean(d_list)),
        ass_a=float(np.mean(a_list)),
        alphas=tuple(alphas),
        hota_alpha=tuple(h_list),
        det_a_alpha=tuple(d_list),
        ass_a_alpha=tuple(a_list),
    )


def _clear_matches(
    gt: TrackingGraph, pred: TrackingGraph, alpha: float
) -> tuple[list[list[tuple[int, int, float]]], int]:
    """Per-frame (gt_id, pred_id, iou) matches at one threshold."""
    frames: list[list[tuple[int, int, float]]] = []
    for f in range(gt.frames):
        ious = iou_matrix(gt.frame_boxes[f], pred.frame_boxes[f])
        out = []
        for gi, pi in _max_iou_matching(ious, alpha):
            out.append(
                (
                    int(gt.frame_ids[f][gi]),
                    int(pred.frame_ids[f][pi]),
                    float(ious[gi, pi]),
                )
            )
        frames.append(out)
    return frames, gt.node_count


def mota(
    pred: LineageForest | TrackingGraph,
    gt: LineageForest | TrackingGraph,
    alpha: float = 0.5,
) -> float:
    """1 - (FN + FP + IDSW) / |GT| at the given IoU threshold."""
    gt_graph = gt if isinstance(gt, TrackingGraph) else build_graph(gt)
    pred_graph = (
        pred if isinstance(pred, TrackingGraph) else build_graph(pred, gt_graph.frames)
    )
    if gt_graph.node_count == 0:
        raise UndefinedMetricError("ground truth has no objects")
    per_frame, gt_total = _clear_matches(gt_graph, pred_graph, alpha)
    tp = sum(len(m) for m in per_frame)
    fn = gt_total - tp
    fp = pred_graph.node_count - tp
    idsw = 0
    last_pred: dict[int, int] = {}
    for matches in per_frame:
        for g, p, _ in matches:
            if g in last_pred and last_pred[g] != p:
                idsw += 1
            last_pred[g] = p
    return 1.0 - (fn + fp + idsw) / gt_total


def motp(
    pred: LineageForest | TrackingGraph,
    gt: LineageForest | TrackingGraph,
    alpha: float = 0.5,
) -> float:
    """Mean IoU over matched pairs; undefined without any match."""
    gt_graph = gt if isinstance(gt, TrackingGraph) else build_graph(gt)
    pred_graph = (
        pred if isinstance(pred, TrackingGraph) else build_graph(pred, gt_graph.frames)
    )
    per_frame, _ = _clear_matches(gt_graph, pred_graph, alpha)
    overlaps = [iou for matches in per_frame for (_, _, iou) in matches]
    if not overlaps:
        raise UndefinedMetricError("no matched pairs at this threshold")
    return float(np.mean(overlaps))


def idf1(
    pred: LineageForest | TrackingGraph,
    gt: LineageForest | TrackingGraph,
    alpha: float = 0.5,
) -> float:
    """Identity F1: optimal trajectory pairing, then detection-level F1.

    Trajectories are paired one-to-one to maximize the number of frames
    where the paired tracks overlap with ``iou >= alpha``; those frames
    are the identity true positives.
    """
    gt_graph = gt if isinstance(gt, TrackingGraph) else build_graph(gt)
    pred_graph = (
        pred if isinstance(pred, TrackingGraph) else build_graph(pred, gt_graph.frames)
    )
    if gt_graph.node_count == 0:
        raise UndefinedMetricError("ground truth has no objects")
    gt_ids = sorted({int(t) for ids in gt_graph.frame_ids for t in ids})
    pred_ids = sorted({int(t) for ids in pred_graph.frame_ids for t in ids})
    gt_pos = {t: i for i, t in enumerate(gt_ids)}
    pred_pos = {t: i for i, t in enumerate(pred_ids)}
    overlap = np.zeros((len(gt_ids), len(pred_ids)))
    for f in range(gt_graph.frames):
        ious = iou_matrix(gt_graph.frame_boxes[f], pred_graph.frame_boxes[f])
        rows, cols = np.nonzero(ious >= alpha)
        for r, c in zip(rows, cols):
            overlap[
                gt_pos[int(gt_graph.frame_ids[f][r])],
                pred_pos[int(pred_graph.frame_ids[f][c])],
            ] += 1
    idtp = 0.0
    if overlap.size:
        ri, ci = linear_sum_assignment(overlap, maximize=True)
        idtp = float(overlap[ri, ci].sum())
    idfn = gt_graph.node_count - idtp
    idfp = pred_graph.node_count - idtp
    return 2.0 * idtp / (2.0 * idtp + idfp + idfn)


# ---------------------------------------------------------------------------
# Combined report


@dataclass(frozen=True)
class MetricReport:
    det: float
    lnk: float
    tra: float
    hota: float
    det_a: float
    ass_a: float
    mota: float
    motp: float
    idf1: float
    counts: AOGMCounts
    alphas: tuple[float, ...]
    hota_alpha: tuple[float, ...]

    def to_flat(self) -> dict[str, float]:
        out = {
            "det": self.det,
            "lnk": self.lnk,
            "tra": self.tra,
            "hota": self.hota,
            "det_a": self.det_a,
            "ass_a": self.ass_a,
            "mota": self.mota,
            "motp": self.motp,
            "idf1": self.idf1,
            "aogm_node_splits": float(self.counts.node_splits),
            "aogm_false_negatives": float(self.counts.false_negatives),
            "aogm_false_positives": float(self.counts.false_positives),
            "aogm_edge_deletions": float(self.counts.edge_deletions),
            "aogm_edge_additions": float(self.counts.edge_additions),
            "aogm_edge_changes": float(self.counts.edge_changes),
        }
        for alpha, value in zip(self.alphas, self.hota_alpha):
            out[f"hota_alpha_{alpha:.2f}"] = value
        return out


def evaluate(
    pred: LineageForest,
    gt: LineageForest,
    weights: AOGMWeights | None = None,
    alphas: tuple[float, ...] = DEFAULT_ALPHAS,
) -> MetricReport:
    """Compute the full metric suite for one video.

    MOTP is reported as 0.0 when no pair matches at the 0.5 threshold
    (the mean overlap is undefined there).
    """
    if (
        pred.meta.frames
        and gt.meta.frames
        and pred.meta.frames != gt.meta.frames
    ):
        raise ValidationError(
            f"frame-range mismatch: prediction covers {pred.meta.frames} "
            f"frames, ground truth {gt.meta.frames}"
        )
    gt_graph = build_graph(gt)
    pred_graph = build_graph(pred, gt_graph.frames)
    scores = det_lnk_tra(pred_graph, gt_graph, weights)
    h = hota(pred_graph, gt_graph, alphas)
    try:
        motp_value = motp(pred_graph, gt_graph)
    except UndefinedMetricError:
        motp_value = 0.0
    return MetricReport(
        det=scores.det,
        lnk=scores.lnk,
        tra=scores.tra,
        hota=h.hota,
        det_a=h.det_a,
        ass_a=h.ass_a,
        mota=mota(pred_graph, gt_graph),
        motp=motp_value,
        idf1=idf1(pred_graph, gt_graph),
        counts=scores.counts,
        alphas=h.alphas,
        hota_alpha=h.hota_alpha,
    )
