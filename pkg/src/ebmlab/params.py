"""Flat named parameter storage.

A ParamVector is an ordered collection of named float64 blocks.  The
concatenation order is the insertion order and never changes, so the flat
view is stable across runs, which the stochastic-approximation learners
and the finite-difference oracle rely on.
"""

import numpy as np


class ParamVector:
    def __init__(self, blocks=None, step_multipliers=None):
        self._blocks: dict[str, np.ndarray] = {}
        self.step_multipliers: dict[str, float] = dict(step_multipliers or {})
        if blocks:
            for name, value in blocks.items():
                self.add(name, value)

    def add(self, name: str, value) -> None:
        if name in self._blocks:
            raise ValueError(f"duplicate block name {name!r}")
        self._blocks[name] = np.array(value, dtype=np.float64)

    # -- dict-like access ------------------------------------------------
    def __getitem__(self, name: str) -> np.ndarray:
        return self._blocks[name]

    def __setitem__(self, name: str, value) -> None:
        if name not in self._blocks:
            self.add(name, value)
            return
        arr = np.asarray(value, dtype=np.float64)
        if arr.shape != self._blocks[name].shape:
            raise ValueError(f"shape mismatch for block {name!r}")
        self._blocks[name] = arr.copy()

    def __contains__(self, name: str) -> bool:
        return name in self._blocks

    @property
    def names(self) -> list:
        return list(self._blocks)

    @property
    def size(self) -> int:
        return sum(b.size for b in self._blocks.values())

    def block_slices(self) -> dict:
        out, offset = {}, 0
        for name, block in self._blocks.items():
            out[name] = slice(offset, offset + block.size)
            offset += block.size
        return out

    # -- flat view -------------------------------------------------------
    def flat(self) -> np.ndarray:
        if not self._blocks:
            return np.zeros(0)
        return np.concatenate([b.ravel() for b in self._blocks.values()])

    def set_flat(self, values) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.size != self.size:
            raise ValueError(f"expected {self.size} values, got {values.size}")
        offset = 0
        for name, block in self._blocks.items():
            self._blocks[name] = values[offset:offset + block.size].reshape(block.shape).copy()
            offset += block.size

    def flat_step_multipliers(self) -> np.ndarray:
        """Per-coordinate step-size multipliers (1.0 where unset)."""
        parts = [
            np.full(block.size, self.step_multipliers.get(name, 1.0))
            for name, block in self._blocks.items()
        ]
        return np.concatenate(parts) if parts else np.zeros(0)

    def copy(self) -> "ParamVector":
        return ParamVector(
            {n: b.copy() for n, b in self._blocks.items()},
            step_multipliers=self.step_multipliers,
        )

    # -- lossless JSON checkpointing --------------------------------------
    def to_json_dict(self) -> dict:
        # repr of a Python float round-trips binary64 exactly
        return {
            name: {"shape": list(block.shape), "values": [float(v) for v in block.ravel()]}
            for name, block in self._blocks.items()
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ParamVector":
        pv = cls()
        for name, entry in data.items():
            pv.add(name, np.array(entry["values"], dtype=np.float64).reshape(entry["shape"]))
        return pv

    def __repr__(self):
        inner = ", ".join(f"{n}:{tuple(b.shape)}" for n, b in self._blocks.items())
        return f"ParamVector({inner})"
