"""Central fault-injection interface: targets, applies, tracks, reverts.

An injector owns one model.  It records a baseline SHA-256 of all parameter
bytes at construction, keeps applied-fault receipts in order, reverts them
LIFO, and can cheaply prove the model is back in its pristine state.
"""

from __future__ import annotations

from .faults import FaultReceipt, apply_fault, revert
from .model import TransformerModel
from .rng import SeededRng

__all__ = ["FaultInjector"]


class FaultInjector:
    """Applies faults transactionally and restores the model bit-exactly."""

    def __init__(self, model: TransformerModel):
        self.model = model
        self.baseline_hash = model.param_bytes_hash()
        self._receipts: list[FaultReceipt] = []
        self._next_id = 1

    @property
    def active_receipts(self) -> tuple[FaultReceipt, ...]:
        return tuple(self._receipts)

    def inject(self, spec, rng: SeededRng) -> int:
        """Apply a fault spec; returns its id.  The model is left unmodified
        if application fails (apply operations validate before mutating)."""
        receipt = apply_fault(self.model, spec, rng)
        self._receipts.append(receipt)
        fault_id = self._next_id
        self._next_id += 1
        return fault_id

    def revert_all(self) -> None:
        """Revert every active fault in LIFO order (no-op when none)."""
        while self._receipts:
            revert(self.model, self._receipts.pop())

    def verify_clean(self) -> bool:
        """True iff parameter bytes hash to the baseline and no hooks remain."""
        return (
            self.model.hook_count() == 0
            and self.model.param_bytes_hash() == self.baseline_hash
        )
