"""Evaluation metrics and their recomputation from a run's event log."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .energy import EnergyLedger


class ZeroDuration(ValueError):
    pass


class NoPacketsSent(ValueError):
    pass


@dataclass
class DetectionLedger:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be >= 0")

    @classmethod
    def from_labels(cls, vetted: Mapping[int, bool], flagged: Iterable[int]) -> "DetectionLedger":
        """``vetted`` maps node id to its ground-truth attacker label."""
        flagged = set(flagged)
        led = cls()
        for node, bad in vetted.items():
            hit = node in flagged
            if bad:
                led.tp += hit
                led.fn += not hit
            else:
                led.fp += hit
                led.tn += not hit
        return led


@dataclass
class MetricsReport:
    throughput_kbps: float = 0.0
    pdr_percent: float = 0.0
    detection_rate_percent: float = 100.0
    residual_energy_percent: float = 100.0
    network_lifetime_s: float = 0.0
    rounds_completed: int = 0
    received: dict = field(default_factory=dict)  # X_i: packets from node i accepted at the sink
    sent: dict = field(default_factory=dict)  # Y_i: data packets node i sent
    detection: DetectionLedger = field(default_factory=DetectionLedger)
    duration_s: float = 0.0

    def headline(self) -> tuple:
        return (self.throughput_kbps, self.pdr_percent, self.detection_rate_percent,
                self.residual_energy_percent, self.network_lifetime_s, self.rounds_completed)


def throughput(x: Sequence[int], p_s: float, s_p: float, s_r: float, n: int = 1) -> float:
    """Mean received payload rate in kbit/s over ``n`` experiments."""
    if s_p <= s_r:
        raise ZeroDuration("arrival window must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    window = s_p - s_r
    total = 0.0
    for xi in x:
        total += xi * p_s / window
    return total / n * 8.0 / 1000.0


def pdr(x: Sequence[int], y: Sequence[int], n: int = 1) -> float:
    sx, sy = sum(x), sum(y)
    if sy <= 0:
        raise NoPacketsSent("no data packets were sent")
    return sx / sy * 100.0 / n


def network_lifetime(ch_lifetimes: Iterable[float]) -> float:
    total = 0.0
    for d in ch_lifetimes:
        total += d
    return total


def residual_energy_percent(ledgers: Iterable[EnergyLedger]) -> float:
    ledgers = list(ledgers)
    if not ledgers:
        raise ValueError("need at least one ledger")
    res = 0.0
    init = 0.0
    for led in ledgers:
        res += led.residual
        init += led.initial
    return 100.0 * res / init


def detection_rate(ledger: DetectionLedger) -> float:
    if ledger.tp + ledger.fn == 0:
        return 100.0
    return ledger.tp / (ledger.tp + ledger.fn) * 100.0


def build_report(*, received: dict, sent: dict, ledgers: Sequence[EnergyLedger],
                 episodes: Sequence[float], vetted: Mapping[int, bool], flagged: Iterable[int],
                 packet_size: int, duration: float, rounds: int) -> MetricsReport:
    """Assemble a report from raw counters; shared by the engine and the log replay."""
    x = sum(received.values())
    y = sum(sent.values())
    det = DetectionLedger.from_labels(vetted, flagged)
    return MetricsReport(
        throughput_kbps=throughput([x], packet_size, duration, 0.0) if duration > 0 else 0.0,
        pdr_percent=pdr([x], [y]) if y > 0 else 0.0,
        detection_rate_percent=detection_rate(det),
        residual_energy_percent=residual_energy_percent(ledgers),
        network_lifetime_s=network_lifetime(episodes),
        rounds_completed=rounds,
        received=dict(received),
        sent=dict(sent),
        detection=det,
        duration_s=duration,
    )


def metrics_from_event_log(records: Iterable[Mapping]) -> MetricsReport:
    """Recompute every metric from event-log records alone.

    Energy events are replayed into fresh ledgers in log order, which
    reproduces the engine's clamping and float accumulation exactly.
    """
    ledgers: dict[int, EnergyLedger] = {}
    labels: dict[int, bool] = {}
    vetted: dict[int, bool] = {}
    flagged: list[int] = []
    received: dict[int, int] = {}
    sent: dict[int, int] = {}
    episodes: list[float] = []
    duration, rounds, packet_size = 0.0, 0, 1
    for rec in records:
        kind, node, det = rec["kind"], rec["node"], rec.get("detail") or {}
        if kind == "Deploy":
            ledgers[node] = EnergyLedger(node, det["energy"])
            labels[node] = det["attacker"]
        elif kind == "Energy":
            ledgers[node].debit(det["bucket"], det["joules"])
        elif kind == "DataSent":
            sent[node] = sent.get(node, 0) + 1
        elif kind == "SinkReport" and det["verdict"] == "Accepted":
            for src, k in det["origins"]:
                received[src] = received.get(src, 0) + k
        elif kind == "Vetted":
            vetted[node] = labels[node]
        elif kind == "Flagged":
            flagged.append(node)
        elif kind == "ChService":
            episodes.append(det["end"] - det["start"])
        elif kind == "End":
            duration = rec["time"]
            rounds = det["rounds"]
            packet_size = det["packet_size"]
            if det.get("all_vetted"):
                vetted = dict(labels)
    return build_report(received=received, sent=sent, ledgers=[ledgers[k] for k in sorted(ledgers)],
                        episodes=episodes, vetted=vetted, flagged=flagged,
                        packet_size=packet_size, duration=duration, rounds=rounds)
