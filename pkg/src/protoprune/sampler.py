"""Epoch-to-epoch subset selection over a retained and a pruned pool."""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import BudgetExceedsPool


@dataclass(frozen=True)
class SchedulerConfig:
    """Inverse-power split of the budget between the two pools.

    ``varsigma`` is the share drawn from the retained pool at epoch 0 and
    ``decay`` the exponent with which that share shrinks to zero at
    ``total_epochs``.
    """

    varsigma: float = 0.7
    decay: float = 2.0
    total_epochs: int = 100

    def __post_init__(self):
        if not 0 < self.varsigma <= 1:
            raise ValueError(f"varsigma must be in (0, 1], got {self.varsigma}")
        if not self.decay >= 0:
            raise ValueError(f"decay must be >= 0, got {self.decay}")
        if self.total_epochs < 1:
            raise ValueError(f"total_epochs must be positive, got {self.total_epochs}")


def round_half_up(x):
    return int(math.floor(x + 0.5))


def budget_for(n_samples, remain_ratio):
    """Number of samples kept per epoch."""
    return round_half_up(remain_ratio * n_samples)


def schedule(t, budget, cfg):
    """Split ``budget`` into ``(from_retained, from_pruned)`` at epoch ``t``."""
    if not 0 <= t <= cfg.total_epochs:
        raise ValueError(f"epoch {t} outside [0, {cfg.total_epochs}]")
    share = cfg.varsigma * (1.0 - t / cfg.total_epochs) ** cfg.decay
    from_retained = min(max(round_half_up(budget * share), 0), budget)
    return from_retained, budget - from_retained


def weighted_sample_without_replacement(pool, weights, n, rng):
    """Draw ``n`` distinct ids from ``pool`` with probability proportional
    to ``weights``, one at a time without replacement.

    Uses exponential keys (``log(u) / w``, keep the ``n`` largest), which
    gives the same inclusion law as successive renormalized draws. The
    result is returned in ascending id order.
    """
    pool = np.asarray(pool, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != pool.shape:
        raise ValueError("weights must align with pool")
    if n > len(pool):
        raise BudgetExceedsPool(f"cannot draw {n} from a pool of {len(pool)}")
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    if n == len(pool):
        return np.sort(pool)
    if np.any(~(weights > 0)) or not np.all(np.isfinite(weights)):
        raise ValueError("sampling weights must be finite and positive")
    keys = np.log(rng.random(len(pool))) / weights
    chosen = np.argpartition(-keys, n - 1)[:n]
    return np.sort(pool[chosen])


@dataclass
class SelectionState:
    """Retained/pruned partition of ids ``0..n-1`` plus the last stored
    weight of every id."""

    retained: np.ndarray
    pruned: np.ndarray
    prev_weights: np.ndarray
    epoch: int = 0

    @classmethod
    def initial(cls, n_samples, budget, rng):
        """Uniform first draw; every id starts with weight 1."""
        if not 1 <= budget <= n_samples:
            raise ValueError(f"budget {budget} must lie in [1, {n_samples}]")
        ids = np.arange(n_samples)
        prev = np.ones(n_samples)
        retained = weighted_sample_without_replacement(ids, prev, budget, rng)
        return cls(retained, np.setdiff1d(ids, retained), prev)

    @property
    def budget(self):
        return len(self.retained)

    @property
    def n_samples(self):
        return len(self.retained) + len(self.pruned)


def select_next_epoch(state, new_weights, cfg, rng):
    """Draw the next retained set.

    ``new_weights`` aligns with ``state.retained`` and comes from the
    current epoch's scoring. The pruned pool is sampled with each id's last
    stored weight. If either pool is too small for its share, the shortfall
    is drawn from the other pool.
    """
    new_weights = np.asarray(new_weights, dtype=np.float64)
    if new_weights.shape != state.retained.shape:
        raise ValueError("new_weights must cover exactly the retained pool")
    budget = state.budget
    n_ret, n_pru = schedule(min(state.epoch, cfg.total_epochs), budget, cfg)
    if n_pru > len(state.pruned):
        n_ret += n_pru - len(state.pruned)
        n_pru = len(state.pruned)
    if n_ret > len(state.retained):
        n_pru += n_ret - len(state.retained)
        n_ret = len(state.retained)

    from_ret = weighted_sample_without_replacement(state.retained, new_weights, n_ret, rng)
    from_pru = weighted_sample_without_replacement(
        state.pruned, state.prev_weights[state.pruned], n_pru, rng
    )
    prev = state.prev_weights.copy()
    prev[state.retained] = new_weights

    retained = np.sort(np.concatenate([from_ret, from_pru]))
    pruned = np.setdiff1d(np.arange(state.n_samples), retained)
    return SelectionState(retained, pruned, prev, state.epoch + 1)
