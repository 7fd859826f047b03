"""Constant-velocity Kalman filter on box centroids.

State vector is (cx, cy, vx, vy) with unit frame spacing.  Process noise
acts on the velocity components only; measurements are centroid
positions.  The tracker uses the filter for two things: predicting where
a lost track should be while it sits in the memory bank, and filling the
skipped frames once such a track is re-identified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Box,
    CellClass,
    Point,
    Provenance,
    TrackEntry,
    TrackerConfig,
)

__all__ = [
    "KalmanState",
    "kf_init",
    "kf_predict",
    "kf_update",
    "batch_predict",
    "batch_update",
    "interpolate_gap",
]

# Transition and observation matrices for unit time steps.
_F = np.array(
    [
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)
_H = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ]
)

# Initial velocity variance: the first position pins the filter down, the
# velocity is unknown until a second measurement arrives.
_INIT_VELOCITY_VAR = 1000.0


@dataclass(frozen=True)
class KalmanState:
    """Filter state: mean (4,) and covariance (4, 4)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).reshape(4)
        cov = np.asarray(self.cov, dtype=float).reshape(4, 4)
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def position(self) -> Point:
        return (float(self.mean[0]), float(self.mean[1]))

    @property
    def velocity(self) -> Point:
        return (float(self.mean[2]), float(self.mean[3]))


def kf_init(position: Point, config: TrackerConfig) -> KalmanState:
    """Start a filter at a known position with zero assumed velocity."""
    mean = np.array([position[0], position[1], 0.0, 0.0])
    r = config.measurement_noise
    cov = np.diag([r, r, _INIT_VELOCITY_VAR, _INIT_VELOCITY_VAR])
    return KalmanState(mean=mean, cov=cov)


def batch_predict(
    means: np.ndarray, covs: np.ndarray, process_noise: float
) -> tuple[np.ndarray, np.ndarray]:
    """Predict step for a stack of filters: means (m, 4), covs (m, 4, 4)."""
    means = means @ _F.T
    covs = _F @ covs @ _F.T
    covs = covs + np.diag([0.0, 0.0, process_noise, process_noise])
    covs = (covs + covs.transpose(0, 2, 1)) / 2.0
    return means, covs


def batch_update(
    means: np.ndarray,
    covs: np.ndarray,
    measurements: np.ndarray,
    measurement_noise: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Measurement step for a stack of filters (Joseph-form covariance).

    ``measurements`` is (m, 2) centroid positions.
    """
    r = measurement_noise
    innovation = measurements - means[:, :2]
    s = covs[:, :2, :2] + r * np.eye(2)
    gain = covs[:, :, :2] @ np.linalg.inv(s)  # (m, 4, 2)
    means = means + (gain @ innovation[:, :, None])[:, :, 0]
    ikh = np.eye(4) - gain @ _H
    covs = ikh @ covs @ ikh.transpose(0, 2, 1) + gain @ (
        r * np.eye(2)
    ) @ gain.transpose(0, 2, 1)
    covs = (covs + covs.transpose(0, 2, 1)) / 2.0
    return means, covs


def kf_predict(state: KalmanState, config: TrackerConfig) -> KalmanState:
    """Advance one frame: positions drift by velocity, uncertainty grows."""
    means, covs = batch_predict(
        state.mean[None, :], state.cov[None, :, :], config.process_noise
    )
    return KalmanState(mean=means[0], cov=covs[0])


def kf_update(
    state: KalmanState, measurement: Point, config: TrackerConfig
) -> KalmanState:
    """Fold in a measured centroid."""
    means, covs = batch_update(
        state.mean[None, :],
        state.cov[None, :, :],
        np.array([[measurement[0], measurement[1]]]),
        config.measurement_noise,
    )
    return KalmanState(mean=means[0], cov=covs[0])


def interpolate_gap(
    state: KalmanState,
    box_size: tuple[float, float],
    gap_frames: Sequence[int],
    config: TrackerConfig,
    anchor_after: Point | None = None,
    cell_class: CellClass = CellClass.ALIVE,
) -> dict[int, TrackEntry]:
    """Synthesize entries for frames a track was unobserved.

    ``state`` is the filter state at the last observed frame (post
    update).  The filter is rolled forward one predict per gap frame;
    when ``anchor_after`` gives the re-identified position on the frame
    right after the gap, the predictions are blended linearly toward it
    so the track rejoins the new observation without a jump.  Returned
    boxes reuse the last observed width/height.

    An empty ``gap_frames`` yields an empty dict.
    """
    if not gap_frames:
        return {}
    w, h = box_size
    positions: list[np.ndarray] = []
    rolling = state
    for _ in gap_frames:
        rolling = kf_predict(rolling, config)
        positions.append(rolling.mean[:2].copy())
    if anchor_after is not None:
        rolling = kf_predict(rolling, config)
        residual = np.array(anchor_after) - rolling.mean[:2]
        k = len(gap_frames)
        for i in range(k):
            positions[i] = positions[i] + residual * ((i + 1) / (k + 1))
    entries: dict[int, TrackEntry] = {}
    for frame, pos in zip(gap_frames, positions):
        box: Box = (float(pos[0]) - w / 2.0, float(pos[1]) - h / 2.0, w, h)
        entries[frame] = TrackEntry(
            box=box,
            cell_class=cell_class,
            provenance=Provenance.INTERPOLATED,
        )
    return entries
