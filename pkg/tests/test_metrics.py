import math

import pytest

from lunamarket.events import EventLog
from lunamarket.metrics import compute_metrics, coverage_csv, series_stats


def test_median_of_transaction_durations():
    s = series_stats([8000, 9000, 12000])
    assert s.median == 9000
    assert s.mean == pytest.approx(29000 / 3)


def test_empty_and_constant_series():
    assert series_stats([]) is None
    s = series_stats([4.7, 4.7, 4.7, 4.7])
    assert s.stddev == 0 and s.median == 4.7


def test_hand_computed_population_stddev():
    # mean 5, squared deviations 9+1+1+1+0+0+4+16 = 32, /8 = 4
    s = series_stats([2, 4, 4, 4, 5, 5, 7, 9])
    assert (s.n, s.mean, s.median, s.stddev) == (8, 5.0, 4.5, 2.0)


def test_even_length_median_and_irrational_stddev():
    s = series_stats([1, 2, 3, 4])
    assert s.median == 2.5
    assert s.stddev == pytest.approx(math.sqrt(1.25), rel=0, abs=1e-15)


def synthetic_log() -> EventLog:
    log = EventLog()
    log.emit(0, "run_start", totalCells=2, robots=["R1", "R2"])
    log.emit(10, "net_deliver", jobId="J1", sizeBytes=300)
    log.emit(11, "net_deliver", jobId="J2", sizeBytes=500)
    log.emit(12, "net_deliver", jobId="J1", sizeBytes=700)
    log.emit(13, "net_deliver", jobId=None, sizeBytes=10_000)
    log.emit(20, "escrow_locked", contractId="C1", jobId="J1", actor="SO", detail={})
    log.emit(25, "escrow_locked", contractId="C2", jobId="J2", actor="SO", detail={})
    log.emit(30, "robot_move", robot="R1", distanceM=5.0)
    log.emit(31, "robot_move", robot="R1", distanceM=2.5)
    log.emit(40, "cell_mapped", cell="a")
    log.emit(41, "cell_mapped", cell="a")
    log.emit(9020, "settled", contractId="C1", jobId="J1", actor="SP",
             detail={"winner": "R1", "price": 10})
    log.emit(12025, "settled", contractId="C2", jobId="J2", actor="SP",
             detail={"winner": "R2", "price": 7})
    log.emit(13000, "cell_mapped", cell="b")
    log.emit(14000, "resale", contractId=None, jobId=None, actor="seller",
             detail={"price": 100, "payouts": {"SO": 5}})
    return log


def test_compute_metrics_from_log():
    m = compute_metrics(synthetic_log())
    assert m.per_tx_bytes.n == 2 and m.per_tx_bytes.median == 750  # J1 = 1000, J2 = 500
    assert (m.tx_duration_ms.median, m.tx_duration_ms.stddev) == (10_500, 1500)  # 9000 and 12000
    assert m.total_distance_by_robot == {"R1": 7.5, "R2": 0.0}
    assert m.coverage_curve == [(40, 0.5), (13000, 1.0)]
    assert m.time_to_full_coverage_ms == 13000
    assert m.total_payments_by_account == {"R1": 10, "R2": 7, "SO": 5, "seller": 95}


def test_metrics_accept_plain_dicts_and_csv():
    log = synthetic_log()
    assert compute_metrics([r.to_dict() for r in log]).to_dict() == compute_metrics(log).to_dict()
    csv = coverage_csv(compute_metrics(log)).splitlines()
    assert csv == ["timeMs,fractionMapped", "40,0.5", "13000,1.0"]


def test_incomplete_coverage_has_no_finish_time():
    log = EventLog()
    log.emit(0, "run_start", totalCells=3, robots=[])
    log.emit(5, "cell_mapped", cell="x")
    m = compute_metrics(log)
    assert m.time_to_full_coverage_ms is None
    assert m.per_tx_bytes is None and m.tx_duration_ms is None
    assert m.to_dict()["perTxBytes"] is None
