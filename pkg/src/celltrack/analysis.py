"""Population-level readouts of a lineage forest.

Five analyses, each a pure function of (forest, filter, seed):

* division/death rates over time, binned and normalized by population;
* cell-size inheritance (ancestor vs. descendant Pearson correlations);
* sister-cell size synchrony over their shared frames;
* interdivision durations grouped by dosage tag and generation;
* per-lineage event timelines with stratified subsampling.

Cell size is box area (w*h).  Correlations use each track's mean
observed size unless told otherwise.  Generations count from 0 at the
roots.  All outputs are plain data; CSV writers live at the bottom.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from statistics import median
from typing import Iterable, Sequence

import numpy as np

from .core import (
    CellClass,
    EndReason,
    LineageForest,
    Provenance,
    Track,
    ValidationError,
)

__all__ = [
    "AnalysisFilter",
    "EventRates",
    "CorrelationStat",
    "InheritanceReport",
    "SisterPair",
    "InterdivisionRecord",
    "DurationStats",
    "DivisionProfile",
    "eligible_profiles",
    "sample_profiles",
    "generation_index",
    "event_rates",
    "cell_size_series",
    "track_mean_size",
    "pearson",
    "ancestor_descendant_correlation",
    "sister_correlation",
    "interdivision_records",
    "interdivision_times",
    "summarize_durations",
    "division_profiles",
    "write_event_rates_csv",
    "write_inheritance_csv",
    "write_sister_csv",
    "write_interdivision_csv",
    "write_profiles_csv",
]


@dataclass(frozen=True)
class AnalysisFilter:
    """Shared eligibility thresholds for the lineage analyses."""

    min_track_frames: int = 10
    max_generation: int = 5
    max_interdivision_frames: int = 100

    def __post_init__(self) -> None:
        for name in (
            "min_track_frames",
            "max_generation",
            "max_interdivision_frames",
        ):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")


def generation_index(forest: LineageForest) -> dict[int, int]:
    """Map track id -> generation; roots are generation 0."""
    gens: dict[int, int] = {}

    def resolve(tid: int) -> int:
        if tid in gens:
            return gens[tid]
        parent = forest.tracks[tid].parent
        g = 0 if parent is None else resolve(parent) + 1
        gens[tid] = g
        return g

    for tid in forest.tracks:
        resolve(tid)
    return gens


# ---------------------------------------------------------------------------
# Event rates


@dataclass(frozen=True)
class EventRates:
    """Binned division/death counts and rates plus the population curve.

    ``population[f]`` counts tracks whose span covers frame ``f``;
    ``alive[f]`` counts tracks with an alive-class entry at ``f``.
    Rates divide the per-bin event count by the mean alive count over
    the bin's frames (0.0 when the bin is empty of cells).
    """

    bin_size: int
    bin_starts: tuple[int, ...]
    divisions: tuple[int, ...]
    deaths: tuple[int, ...]
    division_rate: tuple[float, ...]
    death_rate: tuple[float, ...]
    population: tuple[int, ...]
    alive: tuple[int, ...]


def event_rates(forest: LineageForest, bin_size: int = 10) -> EventRates:
    if bin_size <= 0:
        raise ValidationError("bin_size must be positive")
    if not forest.tracks:
        return EventRates(bin_size, (), (), (), (), (), (), ())
    n_frames = max(t.last_frame for t in forest.tracks.values()) + 1
    population = np.zeros(n_frames, dtype=int)
    alive = np.zeros(n_frames, dtype=int)
    division_frames: list[int] = []
    death_frames: list[int] = []
    for track in forest.tracks.values():
        population[track.start_frame : track.last_frame + 1] += 1
        for frame, entry in track.entries.items():
            if entry.cell_class is CellClass.ALIVE:
                alive[frame] += 1
        if track.children:
            # One division event, placed where the daughters appear.
            division_frames.append(track.last_frame + 1)
        death = track.death_event_frame()
        if death is not None:
            death_frames.append(death)

    n_bins = (n_frames + bin_size - 1) // bin_size
    div_counts = np.zeros(n_bins, dtype=int)
    death_counts = np.zeros(n_bins, dtype=int)
    for f in division_frames:
        if f < n_frames:
            div_counts[f // bin_size] += 1
    for f in death_frames:
        death_counts[f // bin_size] += 1
    div_rate = []
    death_rate = []
    for b in range(n_bins):
        chunk = alive[b * bin_size : (b + 1) * bin_size]
        mean_alive = float(chunk.mean()) if chunk.size else 0.0
        div_rate.append(div_counts[b] / mean_alive if mean_alive > 0 else 0.0)
        death_rate.append(
            death_counts[b] / mean_alive if mean_alive > 0 else 0.0
        )
    return EventRates(
        bin_size=bin_size,
        bin_starts=tuple(b * bin_size for b in range(n_bins)),
        divisions=tuple(int(c) for c in div_counts),
        deaths=tuple(int(c) for c in death_counts),
        division_rate=tuple(div_rate),
        death_rate=tuple(death_rate),
        population=tuple(int(c) for c in population),
        alive=tuple(int(c) for c in alive),
    )


# ---------------------------------------------------------------------------
# Size series and correlations


def cell_size_series(track: Track) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """(frames, w*h) over the track's observed entries, in frame order.

    Interpolated entries carry no measured box and are skipped.
    """
    frames: list[int] = []
    sizes: list[float] = []
    for frame in sorted(track.entries):
        entry = track.entries[frame]
        if entry.provenance is Provenance.INTERPOLATED:
            continue
        frames.append(frame)
        sizes.append(entry.box[2] * entry.box[3])
    return tuple(frames), tuple(sizes)


def track_mean_size(track: Track, summary: str = "mean") -> float | None:
    _, sizes = cell_size_series(track)
    if not sizes:
        return None
    if summary == "mean":
        return float(np.mean(sizes))
    if summary == "median":
        return float(np.median(sizes))
    raise ValidationError(f"unknown size summary {summary!r}")


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson correlation, or None when it is undefined.

    Undefined means fewer than two points or zero variance on either
    side; callers drop such pairs rather than inventing a value.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape:
        raise ValidationError("series must have equal length")
    if xa.size < 2:
        return None
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    denom = float(np.sqrt(np.dot(xd, xd)) * np.sqrt(np.dot(yd, yd)))
    if denom == 0.0:
        return None
    return float(np.dot(xd, yd) / denom)


@dataclass(frozen=True)
class CorrelationStat:
    n: int
    r: float


@dataclass(frozen=True)
class InheritanceReport:
    """Size correlations between ancestors (generation >= 1) and descendants.

    ``by_pair`` keys are (ancestor_generation, descendant_generation);
    ``by_gap`` pools every pair with the same generation distance.
    Cells with undefined correlations are omitted.
    """

    by_pair: dict[tuple[int, int], CorrelationStat]
    by_gap: dict[int, CorrelationStat]


def _ancestor_at(
    forest: LineageForest, tid: int, gens: dict[int, int], target_gen: int
) -> int | None:
    cur: int | None = tid
    while cur is not None and gens[cur] > target_gen:
        cur = forest.tracks[cur].parent
    if cur is not None and gens[cur] == target_gen:
        return cur
    return None


def ancestor_descendant_correlation(
    forest: LineageForest,
    filt: AnalysisFilter | None = None,
    summary: str = "mean",
) -> InheritanceReport:
    filt = filt or AnalysisFilter()
    gens = generation_index(forest)
    sizes: dict[int, float] = {}
    for tid, track in forest.tracks.items():
        if track.span() < filt.min_track_frames:
            continue
        s = track_mean_size(track, summary)
        if s is not None:
            sizes[tid] = s

    pair_values: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for tid, size in sizes.items():
        g = gens[tid]
        if g < 2 or g > filt.max_generation:
            continue
        for anc_gen in range(1, g):
            anc = _ancestor_at(forest, tid, gens, anc_gen)
            if anc is None or anc not in sizes:
                continue
            pair_values.setdefault((anc_gen, g), []).append(
                (sizes[anc], size)
            )

    by_pair: dict[tuple[int, int], CorrelationStat] = {}
    gap_values: dict[int, list[tuple[float, float]]] = {}
    for key in sorted(pair_values):
        pairs = pair_values[key]
        gap_values.setdefault(key[1] - key[0], []).extend(pairs)
        if len(pairs) < 2:
            continue
        r = pearson([p[0] for p in pairs], [p[1] for p in pairs])
        if r is not None:
            by_pair[key] = CorrelationStat(n=len(pairs), r=r)
    by_gap: dict[int, CorrelationStat] = {}
    for gap in sorted(gap_values):
        pairs = gap_values[gap]
        if len(pairs) < 2:
            continue
        r = pearson([p[0] for p in pairs], [p[1] for p in pairs])
        if r is not None:
            by_gap[gap] = CorrelationStat(n=len(pairs), r=r)
    return InheritanceReport(by_pair=by_pair, by_gap=by_gap)


@dataclass(frozen=True)
class SisterPair:
    generation: int
    track_a: int
    track_b: int
    overlap: int
    r: float


def sister_correlation(
    forest: LineageForest, filt: AnalysisFilter | None = None
) -> list[SisterPair]:
    """Per sister pair, the Pearson r of box area over shared frames.

    Pairs where either sister fails the length filter, the overlap is
    under two frames, or the correlation is undefined are skipped.
    """
    filt = filt or AnalysisFilter()
    gens = generation_index(forest)
    out: list[SisterPair] = []
    for tid in sorted(forest.tracks):
        track = forest.tracks[tid]
        if len(track.children) != 2:
            continue
        a, b = sorted(track.children)
        ta, tb = forest.tracks[a], forest.tracks[b]
        if (
            ta.span() < filt.min_track_frames
            or tb.span() < filt.min_track_frames
        ):
            continue
        fa, sa = cell_size_series(ta)
        fb, sb = cell_size_series(tb)
        da = dict(zip(fa, sa))
        db = dict(zip(fb, sb))
        common = sorted(set(da) & set(db))
        if len(common) < 2:
            continue
        r = pearson([da[f] for f in common], [db[f] for f in common])
        if r is None:
            continue
        out.append(
            SisterPair(
                generation=gens[a],
                track_a=a,
                track_b=b,
                overlap=len(common),
                r=r,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Interdivision durations


@dataclass(frozen=True)
class InterdivisionRecord:
    dosage: str
    generation: int
    track_id: int
    duration: int


@dataclass(frozen=True)
class DurationStats:
    n: int
    mean: float
    median: float


def interdivision_records(
    forest: LineageForest, filt: AnalysisFilter | None = None
) -> list[InterdivisionRecord]:
    """Durations of full division cycles: born by division, ends dividing.

    Duration is the inclusive frame span; cycles longer than the
    filter's cap are dropped as likely tracking artifacts.
    """
    filt = filt or AnalysisFilter()
    gens = generation_index(forest)
    dosage = forest.meta.dosage if forest.meta else ""
    out: list[InterdivisionRecord] = []
    for tid in sorted(forest.tracks):
        track = forest.tracks[tid]
        if track.parent is None or not track.children:
            continue
        duration = track.span()
        if duration > filt.max_interdivision_frames:
            continue
        out.append(
            InterdivisionRecord(
                dosage=dosage,
                generation=gens[tid],
                track_id=tid,
                duration=duration,
            )
        )
    return out


def summarize_durations(
    records: Iterable[InterdivisionRecord],
) -> dict[tuple[str, int], DurationStats]:
    grouped: dict[tuple[str, int], list[int]] = {}
    for rec in records:
        grouped.setdefault((rec.dosage, rec.generation), []).append(
            rec.duration
        )
    return {
        key: DurationStats(
            n=len(vals),
            mean=float(np.mean(vals)),
            median=float(median(vals)),
        )
        for key, vals in sorted(grouped.items())
    }


def interdivision_times(
    forest: LineageForest, filt: AnalysisFilter | None = None
) -> dict[tuple[str, int], DurationStats]:
    return summarize_durations(interdivision_records(forest, filt))


# ---------------------------------------------------------------------------
# Division profiles


@dataclass(frozen=True)
class DivisionProfile:
    """One lineage line from a root to a leaf, as an event timeline.

    ``events`` is ordered (frame, kind) with kind in
    {"division", "death", "censored"}; the terminal event is always
    last.  ``divisions`` counts the division events.
    """

    tracks: tuple[int, ...]
    events: tuple[tuple[int, str], ...]
    video: str = ""

    @property
    def divisions(self) -> int:
        return sum(1 for _, kind in self.events if kind == "division")


def _leaf_paths(forest: LineageForest) -> list[list[int]]:
    paths: list[list[int]] = []

    def walk(tid: int, prefix: list[int]) -> None:
        track = forest.tracks[tid]
        path = prefix + [tid]
        if track.children:
            for child in sorted(track.children):
                walk(child, path)
        else:
            paths.append(path)

    for root in sorted(t.track_id for t in forest.roots()):
        walk(root, [])
    return paths


def eligible_profiles(forest: LineageForest) -> list[DivisionProfile]:
    """All root-to-leaf timelines that end in death or at the video end.

    Lineage lines whose final track was simply lost are not eligible:
    the line was not followed to a real outcome.
    """
    profiles: list[DivisionProfile] = []
    video = forest.meta.video_id if forest.meta else ""
    for path in _leaf_paths(forest):
        leaf = forest.tracks[path[-1]]
        if leaf.end_reason not in (EndReason.DEATH, EndReason.END_OF_VIDEO):
            continue
        events: list[tuple[int, str]] = []
        for tid in path[:-1]:
            events.append((forest.tracks[tid].last_frame, "division"))
        death = leaf.death_event_frame()
        if death is not None:
            events.append((death, "death"))
        else:
            events.append((leaf.last_frame, "censored"))
        profiles.append(
            DivisionProfile(
                tracks=tuple(path), events=tuple(events), video=video
            )
        )
    return profiles


def sample_profiles(
    profiles: list[DivisionProfile], sample_size: int, seed: int = 0
) -> list[DivisionProfile]:
    """Stratified subsample preserving the division-count histogram.

    Proportional allocation per division count with largest-remainder
    rounding (each stratum lands within one of its exact quota), then a
    uniform draw inside each stratum.  Deterministic for a fixed seed;
    returns the input unchanged when it is already small enough.
    """
    if sample_size <= 0:
        raise ValidationError("sample_size must be positive")
    if len(profiles) <= sample_size:
        return list(profiles)

    strata: dict[int, list[DivisionProfile]] = {}
    for prof in profiles:
        strata.setdefault(prof.divisions, []).append(prof)
    total = len(profiles)
    keys = sorted(strata)
    quotas = {k: sample_size * len(strata[k]) / total for k in keys}
    counts = {k: int(quotas[k]) for k in keys}
    short = sample_size - sum(counts.values())
    # Hand the leftover slots to the largest fractional remainders.
    for k in sorted(
        keys, key=lambda k: (-(quotas[k] - counts[k]), k)
    )[:short]:
        counts[k] += 1

    rng = np.random.default_rng(seed)
    sampled: list[DivisionProfile] = []
    for k in keys:
        members = strata[k]
        take = counts[k]
        if take >= len(members):
            sampled.extend(members)
            continue
        idx = rng.choice(len(members), size=take, replace=False)
        sampled.extend(members[i] for i in sorted(idx))
    return sampled


def division_profiles(
    forest: LineageForest, sample_size: int = 300, seed: int = 0
) -> list[DivisionProfile]:
    return sample_profiles(eligible_profiles(forest), sample_size, seed)


# ---------------------------------------------------------------------------
# CSV output


def _open_writer(path: str | Path):
    handle = open(path, "w", newline="")
    return handle, csv.writer(handle)


def write_event_rates_csv(
    path: str | Path, groups: Sequence[tuple[str, EventRates]]
) -> None:
    """One row per (group label, bin); labels are dosage or video tags."""
    handle, writer = _open_writer(path)
    with handle:
        writer.writerow(
            [
                "group",
                "bin_start",
                "bin_end",
                "divisions",
                "deaths",
                "division_rate",
                "death_rate",
                "mean_alive",
            ]
        )
        for label, rates in groups:
            for i, start in enumerate(rates.bin_starts):
                end = start + rates.bin_size - 1
                chunk = rates.alive[start : start + rates.bin_size]
                mean_alive = sum(chunk) / len(chunk) if chunk else 0.0
                writer.writerow(
                    [
                        label,
                        start,
                        end,
                        rates.divisions[i],
                        rates.deaths[i],
                        f"{rates.division_rate[i]:.6f}",
                        f"{rates.death_rate[i]:.6f}",
                        f"{mean_alive:.3f}",
                    ]
                )


def write_inheritance_csv(
    path: str | Path, groups: Sequence[tuple[str, InheritanceReport]]
) -> None:
    handle, writer = _open_writer(path)
    with handle:
        writer.writerow(
            [
                "group",
                "kind",
                "ancestor_generation",
                "descendant_generation",
                "generation_gap",
                "pairs",
                "pearson_r",
            ]
        )
        for label, report in groups:
            for (anc, desc), stat in sorted(report.by_pair.items()):
                writer.writerow(
                    [
                        label,
                        "pair",
                        anc,
                        desc,
                        desc - anc,
                        stat.n,
                        f"{stat.r:.6f}",
                    ]
                )
            for gap, stat in sorted(report.by_gap.items()):
                writer.writerow(
                    [label, "gap", "", "", gap, stat.n, f"{stat.r:.6f}"]
                )


def write_sister_csv(
    path: str | Path, groups: Sequence[tuple[str, list[SisterPair]]]
) -> None:
    handle, writer = _open_writer(path)
    with handle:
        writer.writerow(
            [
                "group",
                "generation",
                "track_a",
                "track_b",
                "overlap_frames",
                "pearson_r",
            ]
        )
        for label, pairs in groups:
            for p in pairs:
                writer.writerow(
                    [
                        label,
                        p.generation,
                        p.track_a,
                        p.track_b,
                        p.overlap,
                        f"{p.r:.6f}",
                    ]
                )


def write_interdivision_csv(
    path: str | Path, stats: dict[tuple[str, int], DurationStats]
) -> None:
    handle, writer = _open_writer(path)
    with handle:
        writer.writerow(
            ["dosage", "generation", "cycles", "mean_frames", "median_frames"]
        )
        for (dosage, gen), stat in sorted(stats.items()):
            writer.writerow(
                [dosage, gen, stat.n, f"{stat.mean:.3f}", f"{stat.median:.3f}"]
            )


def write_profiles_csv(
    path: str | Path, groups: Sequence[tuple[str, list[DivisionProfile]]]
) -> None:
    """Long format: one row per event of each sampled lineage line."""
    handle, writer = _open_writer(path)
    with handle:
        writer.writerow(
            [
                "group",
                "video",
                "profile",
                "root_track",
                "leaf_track",
                "divisions",
                "event_index",
                "frame",
                "kind",
            ]
        )
        for label, profiles in groups:
            for i, prof in enumerate(profiles):
                for j, (frame, kind) in enumerate(prof.events):
                    writer.writerow(
                        [
                            label,
                            prof.video,
                            i,
                            prof.tracks[0],
                            prof.tracks[-1],
                            prof.divisions,
                            j,
                            frame,
                            kind,
                        ]
                    )
