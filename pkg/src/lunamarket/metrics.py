"""Summary statistics computed from a run's event log."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from lunamarket.events import EventLog


@dataclass(frozen=True)
class SeriesStats:
    n: int
    mean: float
    median: float
    stddev: float  # population

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "mean": self.mean, "median": self.median, "stddev": self.stddev}


def series_stats(values: Sequence[float]) -> SeriesStats | None:
    """Mean, median and population standard deviation; ``None`` for an empty series."""
    if not values:
        return None
    return SeriesStats(len(values), statistics.fmean(values), float(statistics.median(values)),
                       statistics.pstdev(values))


@dataclass
class MetricsSummary:
    per_tx_bytes: SeriesStats | None
    tx_duration_ms: SeriesStats | None
    coverage_curve: list[tuple[int, float]]
    total_distance_by_robot: dict[str, float]
    total_payments_by_account: dict[str, int]
    time_to_full_coverage_ms: int | None
    total_cells: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def total_distance_m(self) -> float:
        return sum(self.total_distance_by_robot.values())

    def to_dict(self) -> dict[str, Any]:
        def stats(s: SeriesStats | None) -> dict[str, Any] | None:
            return None if s is None else s.to_dict()

        return {
            "perTxBytes": stats(self.per_tx_bytes),
            "txDurationMs": stats(self.tx_duration_ms),
            "coverageCurve": [[t, f] for t, f in self.coverage_curve],
            "totalDistanceByRobot": dict(sorted(self.total_distance_by_robot.items())),
            "totalDistanceM": self.total_distance_m,
            "totalPaymentsByAccount": dict(sorted(self.total_payments_by_account.items())),
            "timeToFullCoverageMs": self.time_to_full_coverage_ms,
            "totalCells": self.total_cells,
            **self.extra,
        }


def compute_metrics(log: EventLog | Iterable) -> MetricsSummary:
    """Derive the summary from the event log alone.

    perTxBytes sums delivered envelope bytes per job; txDurationMs is the
    settlement time minus the escrow-lock time per contract.
    """
    bytes_by_job: dict[str, int] = {}
    locked_at: dict[str, int] = {}
    durations: list[int] = []
    curve: list[tuple[int, float]] = []
    mapped: set[str] = set()
    total_cells = 0
    distance: dict[str, float] = {}
    payments: dict[str, int] = {}
    full_at: int | None = None

    for rec in log:
        d = rec.to_dict() if hasattr(rec, "to_dict") else rec
        kind, t = d["kind"], d["timeMs"]
        if kind == "run_start":
            total_cells = d["totalCells"]
            for r in d.get("robots", ()):
                distance.setdefault(r, 0.0)
        elif kind == "net_deliver" and d.get("jobId"):
            bytes_by_job[d["jobId"]] = bytes_by_job.get(d["jobId"], 0) + d["sizeBytes"]
        elif kind == "escrow_locked":
            locked_at[d["contractId"]] = t
        elif kind == "settled":
            cid = d["contractId"]
            if cid in locked_at:
                durations.append(t - locked_at[cid])
            det = d["detail"]
            payments[det["winner"]] = payments.get(det["winner"], 0) + det["price"]
        elif kind == "resale":
            det = d["detail"]
            for acct, amount in det["payouts"].items():
                payments[acct] = payments.get(acct, 0) + amount
            seller = d["actor"]
            payments[seller] = payments.get(seller, 0) + det["price"] - sum(det["payouts"].values())
        elif kind == "robot_move":
            distance[d["robot"]] = distance.get(d["robot"], 0.0) + d["distanceM"]
        elif kind == "cell_mapped":
            if d["cell"] not in mapped:
                mapped.add(d["cell"])
                frac = len(mapped) / total_cells if total_cells else 0.0
                curve.append((t, frac))
                if total_cells and len(mapped) >= total_cells and full_at is None:
                    full_at = t

    return MetricsSummary(
        per_tx_bytes=series_stats([bytes_by_job[k] for k in sorted(bytes_by_job)]),
        tx_duration_ms=series_stats(durations),
        coverage_curve=curve,
        total_distance_by_robot=distance,
        total_payments_by_account=payments,
        time_to_full_coverage_ms=full_at,
        total_cells=total_cells,
    )


def coverage_csv(summary: MetricsSummary) -> str:
    lines = ["timeMs,fractionMapped"]
    lines += [f"{t},{f!r}" for t, f in summary.coverage_curve]
    return "\n".join(lines) + "\n"
