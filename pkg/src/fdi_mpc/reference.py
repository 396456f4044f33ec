"""The self-generated reference trajectory.

At every step the controller publishes the last point of its predicted
output trajectory as the reference for ``N`` samples ahead. The buffer keeps
the window ``ytilde_k .. ytilde_{k+N}`` needed by the detector (sample ``k``)
and by the proximity constraints (samples ``k+1 .. k+N-1``).
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .dynamics import PlantModel
from .nmpc import MpcConfig, SolveResult, SolveStatus, solve


class ReferenceInitError(RuntimeError):
    """The seeding problem has no feasible solution from the initial output."""


class ReferenceBuffer:
    """Contiguous, time-indexed window of reference outputs."""

    def __init__(self, horizon: int, first_step: int, entries):
        if horizon < 1:
            raise ValueError("horizon must be positive")
        self.horizon = horizon
        self._start = first_step
        self._entries: deque[np.ndarray] = deque(np.array(e, dtype=float) for e in entries)

    @classmethod
    def init(cls, model: PlantModel, cfg: MpcConfig, y0) -> tuple["ReferenceBuffer", SolveResult]:
        """Seed ``ytilde_0 = y0`` and ``ytilde_1..N`` from the plan without proximity constraints.

        Returns the buffer and the seeding solution (useful as a warm start).
        Raises :class:`ReferenceInitError` if that plan is infeasible.
        """
        y0 = np.asarray(y0, dtype=float)
        if not cfg.state_box.contains(y0):
            raise ValueError(f"initial output {y0} lies outside the state box")
        seed = solve(cfg.without_proximity(), model, y0)
        if seed.status is SolveStatus.INFEASIBLE_RELAXED:
            raise ReferenceInitError(
                f"no feasible plan from {y0} (constraint violation "
                f"{seed.constraint_violation:.3g}); check the terminal set and state bounds"
            )
        return cls(cfg.horizon, 0, [y0, *seed.predicted_outputs]), seed

    @property
    def first(self) -> int:
        return self._start

    @property
    def last(self) -> int:
        return self._start + len(self._entries) - 1

    def __contains__(self, k: int) -> bool:
        return self.first <= k <= self.last

    def get(self, k: int) -> np.ndarray:
        if k not in self:
            raise IndexError(f"reference step {k} outside window [{self.first}, {self.last}]")
        return self._entries[k - self._start]

    def push(self, k: int, y_star) -> None:
        """Store ``ytilde_{k+N}`` and evict entries older than ``ytilde_k``.

        The window must end at ``k+N-1``. Right after :meth:`init` it ends at
        ``N`` instead, and the step-0 plan replaces the seeded ``ytilde_N``.
        """
        target = k + self.horizon
        if self.last == target and k == self._start == 0:
            self._entries[-1] = np.array(y_star, dtype=float)
        elif self.last == target - 1:
            self._entries.append(np.array(y_star, dtype=float))
        else:
            raise IndexError(
                f"push at step {k} expects the window to end at {target - 1}, "
                f"but it ends at {self.last}"
            )
        while self._start < k:
            self._entries.popleft()
            self._start += 1

    def window(self, k: int) -> np.ndarray:
        """Reference points for stages ``1..N`` of the solve at step ``k``.

        Before that solve has published ``ytilde_{k+N}``, the final row repeats
        ``ytilde_{k+N-1}``; the solver leaves the last stage unconstrained.
        """
        N = self.horizon
        rows = [self.get(k + j) for j in range(1, N)]
        last = k + N
        rows.append(self.get(last) if last in self else self.get(last - 1))
        return np.array(rows)
