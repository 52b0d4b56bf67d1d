"""Synthetic mixture data following the benchmark protocol.

Cluster centers come from a unit normal, biases from a normal with scale
sigma_beta, precision matrices from a Wishart with mean I/sigma^2 and
D + 5 degrees of freedom, and normalities from an inverse Gaussian with
mean lambda_star and shape 5. Points are drawn per cluster and shuffled
with the labels kept aligned.
"""

from dataclasses import dataclass

import numpy as np

from .distributions import (
    InverseGaussianParams,
    NigParams,
    sample_inverse_gaussian,
    sample_mvn,
    sample_nig,
    sample_wishart,
)

POPULATIONS = ("uniform", "nonuniform")

# the benchmark's unbalanced split: two large clusters and eight small ones
_NONUNIFORM_COUNTS = (400, 200) + (50,) * 8


@dataclass(frozen=True)
class GenConfig:
    n_clusters: int = 10
    dim: int = 3
    n_points: int = 1000
    sigma: float = 0.3
    sigma_beta: float = 0.5
    lambda_star: float = 1.0
    population: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1 or self.n_points < self.n_clusters:
            raise ValueError("need n_points >= n_clusters >= 1")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.sigma <= 0.0 or self.lambda_star <= 0.0:
            raise ValueError("sigma and lambda_star must be positive")
        if self.sigma_beta < 0.0:
            raise ValueError("sigma_beta must be nonnegative")
        if self.population not in POPULATIONS:
            raise ValueError(f"population must be one of {POPULATIONS}")


@dataclass(frozen=True)
class LabeledDataset:
    data: np.ndarray
    labels: np.ndarray
    true_params: list
    counts: np.ndarray


def cluster_counts(config):
    """Points per cluster for the configured population scheme."""
    if config.population == "nonuniform":
        if config.n_points != 1000 or config.n_clusters != 10:
            raise ValueError(
                "the nonuniform split is defined only for N = 1000, M = 10"
            )
        return np.array(_NONUNIFORM_COUNTS)
    if config.n_points % config.n_clusters != 0:
        raise ValueError("uniform population requires n_points divisible by n_clusters")
    return np.full(config.n_clusters, config.n_points // config.n_clusters)


def generate(config):
    """Draw one labeled dataset; deterministic in the seed."""
    rng = np.random.default_rng(config.seed)
    d = config.dim
    counts = cluster_counts(config)

    centers = [sample_mvn(np.zeros(d), np.eye(d), rng) for _ in range(config.n_clusters)]
    if config.sigma_beta > 0.0:
        biases = [
            sample_mvn(np.zeros(d), config.sigma_beta**2 * np.eye(d), rng)
            for _ in range(config.n_clusters)
        ]
    else:
        biases = [np.zeros(d) for _ in range(config.n_clusters)]
    precisions = [
        sample_wishart(d + 5.0, np.eye(d) / config.sigma**2, rng)
        for _ in range(config.n_clusters)
    ]
    ig = InverseGaussianParams(config.lambda_star, 5.0)
    normalities = [sample_inverse_gaussian(ig, rng) for _ in range(config.n_clusters)]

    params = [
        NigParams(mu=centers[j], beta=biases[j], tau=precisions[j], lam=normalities[j])
        for j in range(config.n_clusters)
    ]
    rows = np.empty((config.n_points, d))
    labels = np.empty(config.n_points, dtype=int)
    pos = 0
    for j, count in enumerate(counts):
        for _ in range(count):
            rows[pos] = sample_nig(params[j], rng)
            labels[pos] = j
            pos += 1
    perm = rng.permutation(config.n_points)
    return LabeledDataset(
        data=rows[perm], labels=labels[perm], true_params=params, counts=counts
    )
