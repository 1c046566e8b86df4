"""Display slot pool with leases.

Each verification run exclusively leases one slot for its duration.
Leases carry a deadline; a crashed holder never strands a slot because
expired leases are reclaimed by the next acquirer. All transitions are
recorded in an event log so schedules can be audited for double-leases.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable


class SlotState(str, Enum):
    FREE = "free"
    LEASED = "leased"


class PoolExhaustedTimeout(TimeoutError):
    """No slot became free within the timeout; caller re-queues the run."""


class NotLeaseHolder(RuntimeError):
    pass


@dataclass
class Lease:
    run_id: str
    acquired_at: float
    deadline: float


@dataclass
class DisplaySlot:
    slot_id: str
    state: SlotState = SlotState.FREE
    lease: Lease | None = None


class SlotPool:
    def __init__(
        self,
        size: int,
        lease_ttl_seconds: float = 600.0,
        clock: Callable[[], float] = time.monotonic,
    ):
        if size < 1:
            raise ValueError("pool needs at least one slot")
        self.lease_ttl_seconds = lease_ttl_seconds
        self._clock = clock
        self._cond = threading.Condition()
        self._slots = [DisplaySlot(slot_id=f"slot-{i + 1}") for i in range(size)]
        # (event, slot_id, run_id, timestamp); events: acquire, release, reclaim
        self.events: list[tuple[str, str, str, float]] = []

    def __len__(self) -> int:
        return len(self._slots)

    def slots(self) -> list[DisplaySlot]:
        with self._cond:
            return [DisplaySlot(s.slot_id, s.state, s.lease) for s in self._slots]

    def free_count(self) -> int:
        with self._cond:
            self._reclaim_expired_locked()
            return sum(1 for s in self._slots if s.state is SlotState.FREE)

    def _reclaim_expired_locked(self) -> None:
        now = self._clock()
        for slot in self._slots:
            if slot.state is SlotState.LEASED and slot.lease.deadline <= now:
                self.events.append(("reclaim", slot.slot_id, slot.lease.run_id, now))
                slot.state = SlotState.FREE
                slot.lease = None

    def acquire(self, run_id: str, timeout: float) -> DisplaySlot:
        deadline = self._clock() + timeout
        with self._cond:
            while True:
                self._reclaim_expired_locked()
                for slot in self._slots:
                    if slot.state is SlotState.FREE:
                        now = self._clock()
                        slot.state = SlotState.LEASED
                        slot.lease = Lease(
                            run_id=run_id,
                            acquired_at=now,
                            deadline=now + self.lease_ttl_seconds,
                        )
                        self.events.append(("acquire", slot.slot_id, run_id, now))
                        return slot
                remaining = deadline - self._clock()
                if remaining <= 0:
                    raise PoolExhaustedTimeout(
                        f"no free slot for {run_id!r} within {timeout}s"
                    )
                # bounded wait so expired leases are reclaimed promptly even
                # when nobody calls notify
                self._cond.wait(min(remaining, 0.05))

    def release(self, slot: DisplaySlot, run_id: str) -> None:
        with self._cond:
            live = next((s for s in self._slots if s.slot_id == slot.slot_id), None)
            if live is None or live.state is not SlotState.LEASED or live.lease.run_id != run_id:
                raise NotLeaseHolder(f"{run_id!r} does not hold {slot.slot_id!r}")
            self.events.append(("release", live.slot_id, run_id, self._clock()))
            live.state = SlotState.FREE
            live.lease = None
            self._cond.notify_all()


def acquire_slot(pool: SlotPool, run_id: str, timeout: float) -> DisplaySlot:
    return pool.acquire(run_id, timeout)


def release_slot(pool: SlotPool, slot: DisplaySlot, run_id: str) -> None:
    pool.release(slot, run_id)
