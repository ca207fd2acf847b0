"""First-order radio energy model and per-node energy ledgers.

Packet transmissions and receptions are charged per bit. Time a radio spends
awake or asleep between packets is charged at the configured state power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import NetworkConfig, RadioState

BUCKETS = ("tx", "rx", "idle", "sleep", "sensing", "sys")


def crossover_distance(params: NetworkConfig) -> float:
    return math.sqrt(params.eps_fs / params.eps_mp)


def tx_energy(bits: int, distance: float, params: NetworkConfig) -> float:
    if distance < crossover_distance(params):
        return bits * params.e_elec + bits * params.eps_fs * distance**2
    return bits * params.e_elec + bits * params.eps_mp * distance**4


def rx_energy(bits: int, params: NetworkConfig) -> float:
    return bits * params.e_elec


def airtime(bits: int, params: NetworkConfig) -> float:
    return bits / params.ch_data_rate


def packet_tx_energy(bits: int, distance: float, params: NetworkConfig) -> float:
    """Transmit cost honouring ``tx_power_mode``: per-bit model or fixed radio power."""
    if params.tx_power_mode == "fixed":
        return params.tx_power * airtime(bits, params)
    return tx_energy(bits, distance, params)


def state_power(state: RadioState, params: NetworkConfig) -> float:
    return {
        RadioState.IDLE: params.idle_power,
        RadioState.RX: params.rx_power,
        RadioState.TX: params.tx_power,
        RadioState.SLEEP: params.sleep_power,
    }[state]


_STATE_BUCKET = {
    RadioState.IDLE: "idle",
    RadioState.SLEEP: "sleep",
    RadioState.RX: "rx",
    RadioState.TX: "tx",
}


@dataclass
class EnergyLedger:
    node_id: int
    initial: float
    spent_tx: float = 0.0
    spent_rx: float = 0.0
    spent_idle: float = 0.0
    spent_sleep: float = 0.0
    spent_sensing: float = 0.0
    spent_sys: float = 0.0
    dead: bool = field(default=False)

    @property
    def spent(self) -> float:
        return (self.spent_tx + self.spent_rx + self.spent_idle + self.spent_sleep
                + self.spent_sensing + self.spent_sys)

    @property
    def residual(self) -> float:
        if self.dead:
            return 0.0
        return max(self.initial - self.spent, 0.0)

    @property
    def alive(self) -> bool:
        return not self.dead

    def debit(self, bucket: str, joules: float) -> float:
        """Charge ``joules`` to ``bucket``; returns the amount actually taken.

        The charge is clamped so residual never goes below zero, and the
        ledger is marked dead once it reaches zero. Dead ledgers ignore debits.
        """
        if self.dead or joules <= 0.0:
            return 0.0
        available = self.initial - self.spent
        if available <= 0.0:
            self.dead = True
            return 0.0
        take = joules if joules < available else available
        attr = "spent_" + bucket
        setattr(self, attr, getattr(self, attr) + take)
        if take >= available:
            self.dead = True
        return take


def charge_state(ledger: EnergyLedger, state: RadioState, duration: float,
                 params: NetworkConfig) -> EnergyLedger:
    if duration < 0:
        raise ValueError("duration must be >= 0")
    ledger.debit(_STATE_BUCKET[state], state_power(state, params) * duration)
    return ledger
