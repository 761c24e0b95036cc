"""Seeded sampling of arrivals, node sets, dwell times and speeds.

Every agent draws from its own substreams, keyed by (replication seed,
agent index, purpose), so changing one agent's route never shifts another
agent's random numbers.  This keeps policy comparisons paired.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Cell, Layout

# substream purposes
ARRIVALS = 0
NODE_SET = 1
PREFERENCE = 2
DWELL = 3
SPEED = 4
COMPLIANCE = 5


@dataclass(frozen=True)
class StochasticConfig:
    arrival_rate: float = 40.0      # agents / hour
    node_probability: float = 0.3
    dwell_mean: float = 2.0         # minutes
    speed_base: float = 10.0        # m / min
    speed_span: float = 10.0        # m / min
    speed_alpha: float = 0.5
    speed_beta: float = 1.5
    horizon: float = 180.0          # minutes
    warmup: float = 60.0            # minutes
    deterministic_realization: bool = False

    def __post_init__(self):
        if not self.arrival_rate > 0:
            raise ValueError("arrival_rate must be positive")
        if not 0 < self.node_probability <= 1:
            raise ValueError("node_probability must lie in (0, 1]")
        if not self.dwell_mean > 0:
            raise ValueError("dwell_mean must be positive")
        if not self.speed_base > 0 or self.speed_span < 0:
            raise ValueError("speed_base must be positive and speed_span non-negative")
        if not (self.speed_alpha > 0 and self.speed_beta > 0):
            raise ValueError("speed shape parameters must be positive")
        if self.warmup < 0 or not self.warmup < self.horizon:
            raise ValueError("need 0 <= warmup < horizon")

    @property
    def expected_speed(self) -> float:
        a, b = self.speed_alpha, self.speed_beta
        return self.speed_base + self.speed_span * a / (a + b)

    @property
    def expected_dwell(self) -> float:
        return self.dwell_mean


@dataclass
class RandomStream:
    """A PCG64 generator pinned to ``(seed, *key)``."""

    seed: int
    key: tuple[int, ...] = ()
    gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(self.key))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def substream(self, *key: int) -> "RandomStream":
        return RandomStream(self.seed, tuple(self.key) + tuple(key))

    def uniform(self) -> float:
        return float(self.gen.random())

    def integers(self, n: int) -> int:
        return int(self.gen.integers(n))


def sample_arrivals(cfg: StochasticConfig, rng: RandomStream,
                    horizon: float | None = None) -> list[float]:
    """Poisson arrival times in minutes; the first one past the horizon is dropped."""
    horizon = cfg.horizon if horizon is None else horizon
    mean_gap = 60.0 / cfg.arrival_rate
    times = []
    t = 0.0
    while True:
        t += float(rng.gen.exponential(mean_gap))
        if t > horizon:
            return times
        times.append(t)


def sample_node_set(cfg: StochasticConfig, layout: Layout, rng: RandomStream) -> frozenset[Cell]:
    candidates = layout.non_entry_nodes
    if not candidates:
        raise ValueError("layout has no visitable nodes")
    while True:
        keep = rng.gen.random(len(candidates)) < cfg.node_probability
        if keep.any():
            return frozenset(c for c, k in zip(candidates, keep) if k)


def sample_dwell(cfg: StochasticConfig, rng: RandomStream) -> float:
    if cfg.deterministic_realization:
        return cfg.dwell_mean
    while True:
        b = float(rng.gen.exponential(cfg.dwell_mean))
        if b > 0:
            return b


def sample_speed(cfg: StochasticConfig, rng: RandomStream) -> float:
    # numpy's beta sampler is exact (Johnk for both shapes <= 1, gamma ratio otherwise)
    if cfg.deterministic_realization:
        return cfg.expected_speed
    x = float(rng.gen.beta(cfg.speed_alpha, cfg.speed_beta))
    return cfg.speed_base + cfg.speed_span * x
