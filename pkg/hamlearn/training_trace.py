"""
Training Trace - Per-epoch monitoring & reporting

Tracks cost, trace distance and validation error across the epochs of a
training run and provides detailed reporting and plot-ready export.
"""

from typing import Any, Dict, List, Optional, Sequence
from dataclasses import dataclass
import csv
import json
import math

import numpy as np

from .errors import ArtifactIOError, DivergenceError


def format_csv(value: Optional[float]) -> str:
    """Fixed CSV float formatting (10 significant digits, empty for missing)."""
    if value is None:
        return ""
    return f"{value:.10g}"


@dataclass
class EpochRecord:
    """Record of a single training epoch."""
    epoch: int
    cost: float
    trace_distance: Optional[float] = None
    validation_error: Optional[float] = None
    params: Optional[List[float]] = None


class TrainingTrace:
    """
    Tracks and reports the progress of one optimization run.

    Attributes:
        records: One EpochRecord per epoch, epoch 0 being the initial point
        snapshot_every: Parameter snapshots are kept every this many epochs
        final_validation: Validation error per held-out observable label
        final_params: Parameters after the last epoch
    """

    def __init__(self, snapshot_every: int = 10):
        """
        Initialize training trace.

        Args:
            snapshot_every: Keep a parameter snapshot every this many epochs
        """
        if snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {snapshot_every}")
        self.snapshot_every = snapshot_every
        self.records: List[EpochRecord] = []
        self.final_validation: Dict[str, float] = {}
        self.final_params: Optional[List[float]] = None
        self.stop_reason = "not started"
        self.metadata: Dict[str, Any] = {}

    def record(
        self,
        epoch: int,
        cost: float,
        params: Sequence[float],
        trace_distance: Optional[float] = None,
        validation_error: Optional[float] = None,
    ) -> EpochRecord:
        """
        Record one epoch.

        Args:
            epoch: Epoch index (0 = before the first update)
            cost: Cost at the epoch's parameters
            params: Parameter vector at the epoch
            trace_distance: Distance to the truth, when known
            validation_error: Held-out validation error, when computed

        Returns:
            The stored EpochRecord
        """
        if not math.isfinite(cost) or cost < 0:
            raise DivergenceError(f"Cost {cost} at epoch {epoch} is not a finite non-negative number")
        params = [float(p) for p in np.asarray(params).reshape(-1)]
        snapshot = params if epoch % self.snapshot_every == 0 else None
        rec = EpochRecord(epoch, float(cost), trace_distance, validation_error, snapshot)
        self.records.append(rec)
        self.final_params = params
        return rec

    @property
    def epochs(self) -> int:
        """Number of parameter updates performed."""
        return max(0, len(self.records) - 1)

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records])

    @property
    def initial_cost(self) -> float:
        return self.records[0].cost if self.records else float("nan")

    @property
    def final_cost(self) -> float:
        return self.records[-1].cost if self.records else float("nan")

    @property
    def final_trace_distance(self) -> Optional[float]:
        for rec in reversed(self.records):
            if rec.trace_distance is not None:
                return rec.trace_distance
        return None

    @property
    def final_validation_error(self) -> Optional[float]:
        """Largest validation error over the held-out observables."""
        if not self.final_validation:
            return None
        return max(self.final_validation.values())

    @property
    def cost_reduction_factor(self) -> float:
        """Factor by which training reduced the cost."""
        if not self.records:
            return 1.0
        if self.final_cost == 0:
            return float("inf") if self.initial_cost > 0 else 1.0
        return self.initial_cost / self.final_cost

    def snapshots(self) -> Dict[int, List[float]]:
        return {r.epoch: r.params for r in self.records if r.params is not None}

    def report(self) -> Dict[str, Any]:
        """
        Generate a training report.

        Returns:
            Dictionary with convergence metrics
        """
        return {
            "epochs": self.epochs,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "cost_reduction_factor": self.cost_reduction_factor,
            "final_trace_distance": self.final_trace_distance,
            "final_validation": dict(self.final_validation),
            "stop_reason": self.stop_reason,
            "final_params": self.final_params,
        }

    def summary(self) -> str:
        """Generate human-readable summary."""
        report = self.report()
        lines = [
            "Training Report",
            "===============",
            f"Epochs: {report['epochs']} ({report['stop_reason']})",
            f"Initial cost: {report['initial_cost']:.6e}",
            f"Final cost: {report['final_cost']:.6e}",
            f"Cost reduction: {report['cost_reduction_factor']:.3g}x",
        ]
        if report["final_trace_distance"] is not None:
            lines.append(f"Trace distance: {report['final_trace_distance']:.6e}")
        for label, error in sorted(self.final_validation.items()):
            lines.append(f"  Validation {label}: {error:.6e}")
        return "\n".join(lines) + "\n"

    def reset(self) -> None:
        """Reset all tracking data."""
        self.records.clear()
        self.final_validation = {}
        self.final_params = None
        self.stop_reason = "not started"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metadata": self.metadata,
            "snapshot_every": self.snapshot_every,
            "report": self.report(),
            "epochs": [
                {
                    "epoch": r.epoch,
                    "cost": r.cost,
                    "trace_distance": r.trace_distance,
                    "validation_error": r.validation_error,
                    **({"params": r.params} if r.params is not None else {}),
                }
                for r in self.records
            ],
        }

    def to_csv(self, path: str) -> None:
        """Write epoch,cost,trace_distance,validation_error rows."""
        try:
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["epoch", "cost", "trace_distance", "validation_error"])
                for r in self.records:
                    writer.writerow([r.epoch, format_csv(r.cost), format_csv(r.trace_distance),
                                     format_csv(r.validation_error)])
        except OSError as e:
            raise ArtifactIOError(f"Cannot write trace CSV {path}: {e}") from e

    def to_json(self, path: str) -> None:
        try:
            with open(path, "w") as fh:
                json.dump(self.to_dict(), fh, indent=2, default=float)
        except OSError as e:
            raise ArtifactIOError(f"Cannot write trace JSON {path}: {e}") from e
