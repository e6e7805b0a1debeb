"""Seeded generation of the benchmark problem and reproducibility digests."""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ConfigurationError
from .losses import FederatedProblem, QuadraticRisk
from .rng import SplitMix64


def gen_data(num_clients: int, samples_per_client: int, dim: int,
             lo: float, hi: float, seed: int) -> FederatedProblem:
    """Quadratic-risk problem with target entries uniform on [lo, hi).

    Draw order is fixed: clients outermost, then samples, then
    dimensions, one SplitMix64 double each, so a seed pins the data set
    bit-exactly on every platform.
    """
    if lo > hi:
        raise ConfigurationError(f"data range is empty: lo={lo} > hi={hi}")
    if num_clients < 1 or samples_per_client < 1 or dim < 1:
        raise ConfigurationError("num_clients, samples_per_client, dim must be >= 1")
    rng = SplitMix64(seed)
    losses = []
    for _ in range(num_clients):
        targets = np.empty((samples_per_client, dim))
        for j in range(samples_per_client):
            for k in range(dim):
                targets[j, k] = rng.uniform(lo, hi)
        losses.append(QuadraticRisk(targets))
    return FederatedProblem(losses, dim=dim)


def vector_digest(x) -> str:
    """sha256 over the 17-significant-digit decimal form of the entries."""
    text = ",".join(format(v, ".17g") for v in np.asarray(x, dtype=float).ravel())
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def problem_digest(problem: FederatedProblem) -> str:
    """Digest of all client targets, client-major, for seed-reuse checks."""
    h = hashlib.sha256()
    for loss in problem.losses:
        if not isinstance(loss, QuadraticRisk):
            raise ConfigurationError("problem digest is defined for quadratic risks")
        text = ",".join(format(v, ".17g") for v in loss.targets.ravel())
        h.update(text.encode("ascii"))
        h.update(b";")
    return h.hexdigest()
