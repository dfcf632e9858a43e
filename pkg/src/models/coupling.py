from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Coupling:
    """
    Transport plan between two weighted point sets.

    :ivar plan: (n, m) nonnegative matrix gamma.
    :ivar source_weights: mu, length n.
    :ivar target_weights: nu, length m.
    :ivar cost_matrix: M, (n, m) ground cost.
    :ivar iterations: solver iterations (0 for exact solvers).
    :ivar objective_trace: per-iteration objective values recorded by iterative solvers.
    """

    plan: np.ndarray
    source_weights: np.ndarray
    target_weights: np.ndarray
    cost_matrix: np.ndarray
    iterations: int = 0
    objective_trace: tuple[float, ...] = field(default=())

    @property
    def cost(self) -> float:
        """Frobenius product <gamma, M>."""
        return float(np.sum(self.plan * self.cost_matrix))

    @property
    def mass(self) -> float:
        return float(self.plan.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.plan.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.plan.sum(axis=0)

    def marginal_residual(self) -> float:
        """Largest absolute deviation of either marginal from its target weights."""
        return float(
            max(
                np.max(np.abs(self.row_sums - self.source_weights)),
                np.max(np.abs(self.col_sums - self.target_weights)),
            )
        )
