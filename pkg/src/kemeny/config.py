"""Estimator configuration and result records."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs shared by all Monte Carlo estimators.

    ``None`` means "derive from the graph": ``failure_prob_delta`` defaults to
    1/n, ``dynamic_threshold`` to 0.0005 n, ``tree_trunc_len`` to the rule in
    :func:`kemeny.trees.resolve_phi_trunc_len`.
    """

    epsilon: float = 0.2
    seed: int = 0
    threads: int = 1
    lambda_override: float | None = None
    tau_override: int | None = None
    max_trunc_len: int = 100_000
    max_walks_per_node: int = 10_000_000
    max_tree_samples: int = 100_000
    subset_override: int | None = None
    failure_prob_delta: float | None = None
    strict_sup: bool = False
    conservative_stop: bool = False
    early_stop: bool = True
    strict_caps: bool = False
    combine: str = "corrected"
    root: int | None = None
    tree_trunc_len: int | None = None
    tree_trunc_rule: str = "auto"
    dynamic_threshold: float | None = None
    dynamic_walks: int | None = None
    dynamic_start_len: int = 4
    dynamic_noise_stop: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        for name in ("max_trunc_len", "max_walks_per_node", "max_tree_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lambda_override is not None and not 0.0 < self.lambda_override < 1.0:
            raise ValueError("lambda_override must lie in (0, 1)")
        if self.failure_prob_delta is not None and not 0.0 < self.failure_prob_delta < 1.0:
            raise ValueError("failure_prob_delta must lie in (0, 1)")
        if self.combine not in ("corrected", "as-printed"):
            raise ValueError("combine must be 'corrected' or 'as-printed'")
        if self.tree_trunc_rule not in ("auto", "diameter", "spectral"):
            raise ValueError("tree_trunc_rule must be 'auto', 'diameter' or 'spectral'")
        for name in ("subset_override", "tree_trunc_len", "dynamic_walks", "tau_override"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")

    def replace(self, **changes) -> "EstimatorConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


class CapExhausted(RuntimeError):
    """A theoretical sample size or length hit its cap while ``strict_caps`` is set."""


@dataclass
class WalkStats:
    """Per-start-node return-count accumulators for truncated walks."""

    nodes: np.ndarray
    walks: np.ndarray
    sum_returns: np.ndarray
    sum_sq: np.ndarray
    steps: int

    @property
    def means(self) -> np.ndarray:
        return self.sum_returns / self.walks

    @property
    def variances(self) -> np.ndarray:
        m = self.means
        return np.maximum(self.sum_sq / self.walks - m * m, 0.0)


@dataclass
class TreeSampleStats:
    """Passage-count sums over ``r`` sampled in-trees rooted at ``root``.

    Arrays have length n; the root's entries stay zero and are excluded from
    ``means`` / ``trace``.
    """

    root: int
    r: int
    sum_passages: np.ndarray
    sum_sq: np.ndarray
    total_steps: int

    @property
    def means(self) -> np.ndarray:
        m = self.sum_passages / self.r
        return np.delete(m, self.root)

    @property
    def variances(self) -> np.ndarray:
        m = self.sum_passages / self.r
        v = np.maximum(self.sum_sq / self.r - m * m, 0.0)
        return np.delete(v, self.root)

    @property
    def trace(self) -> float:
        return float(self.means.sum())

    @property
    def mean_steps(self) -> float:
        return self.total_steps / self.r


@dataclass
class EstimateReport:
    algorithm: str
    estimate: float
    params: dict
    total_steps: int
    elapsed: float
    seed: int
    threads: int
    early_stops: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "estimate": self.estimate,
            "params": self.params,
            "total_steps": self.total_steps,
            "elapsed": self.elapsed,
            "seed": self.seed,
            "threads": self.threads,
            "early_stops": self.early_stops,
            "warnings": list(self.warnings),
        }
