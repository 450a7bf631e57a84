"""Non-cooperative, centralized, consensus and diffusion (ATC) updates.

Estimates are stored as arrays of shape ``(..., N, M)``; any leading axes
index independent Monte Carlo runs that advance in lock-step.  Each step
either draws one fresh sample per node from ``rng`` or consumes the
``samples=(h, y)`` it is handed, so several strategies can share a stream.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .netgraph import CombinationMatrix


@dataclass(frozen=True)
class StepSchedule:
    """mu(i) = mu / i."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")


def step_size(s: StepSchedule, i: int) -> float:
    if i < 1:
        raise ValueError("the step-size schedule starts at i = 1")
    return s.mu / i


class StrategyKind(enum.Enum):
    NONCOOP = "noncoop"
    CENTRALIZED = "centralized"
    CONSENSUS = "consensus"
    DIFFUSION = "diffusion"

    @classmethod
    def parse(cls, name: str) -> "StrategyKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown strategy {name!r}; choose from "
                             + ", ".join(k.value for k in cls)) from None


@dataclass
class NetworkState:
    estimates: np.ndarray  # (..., N, M)
    psi_buffer: np.ndarray | None = None
    iteration: int = 0
    grad_evals: int = 0
    combine_macs: int = 0

    @classmethod
    def zeros(cls, n_nodes: int, dim: int, batch=()) -> "NetworkState":
        return cls(np.zeros(tuple(batch) + (n_nodes, dim)))

    @property
    def n_nodes(self) -> int:
        return self.estimates.shape[-2]

    @property
    def dim(self) -> int:
        return self.estimates.shape[-1]

    def errors(self, w_opt) -> np.ndarray:
        """w_opt - w_{k,i} for every node."""
        return np.asarray(w_opt) - self.estimates


def _draw(model, rng, samples, lead_shape):
    if samples is not None:
        return samples
    if rng is None:
        raise ValueError("pass either rng or samples")
    return model.sample(rng, lead_shape)


def _combine(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """out[..., k, :] = sum_l a[..., l, k] x[..., l, :], l ascending."""
    acc = a[..., 0, :, None] * x[..., 0, None, :]
    for l in range(1, x.shape[-2]):
        acc = acc + a[..., l, :, None] * x[..., l, None, :]
    return acc


def _matrix(a) -> np.ndarray:
    return a.a if isinstance(a, CombinationMatrix) else np.asarray(a, dtype=float)


def _check_dims(a: np.ndarray, state: NetworkState) -> None:
    n = state.n_nodes
    if a.shape[-2:] != (n, n):
        raise ValueError(f"combination matrix is {a.shape[-2:]} but the network has {n} nodes")


def _macs(a: np.ndarray, dim: int) -> int:
    # nonzero weights of one matrix times the vector length
    return int(np.count_nonzero(a.reshape(-1, *a.shape[-2:])[0])) * dim


def noncoop_step(state: NetworkState, model, schedule: StepSchedule, rng=None, *, samples=None):
    mu_i = step_size(schedule, state.iteration + 1)
    h, y = _draw(model, rng, samples, state.estimates.shape[:-1])
    g = model.gradient(state.estimates, h, y)
    state.estimates = state.estimates - mu_i * g
    state.iteration += 1
    state.grad_evals += state.n_nodes
    return state


def centralized_step(w, model, schedule: StepSchedule, n_virtual: int, rng=None, *,
                     samples=None, iteration: int | None = None):
    """One fusion-center update using N fresh samples; returns the new w.

    ``w`` has shape ``(..., M)``; ``iteration`` is the index i of this update.
    """
    if n_virtual < 1:
        raise ValueError("n_virtual must be >= 1")
    if iteration is None:
        raise ValueError("centralized_step needs the iteration index i")
    w = np.asarray(w, dtype=float)
    mu_i = step_size(schedule, iteration)
    h, y = _draw(model, rng, samples, w.shape[:-1] + (n_virtual,))
    g = model.gradient(w[..., None, :], h, y)
    acc = g[..., 0, :]
    for k in range(1, n_virtual):
        acc = acc + g[..., k, :]
    return w - (mu_i / n_virtual) * acc


def diffusion_step(state: NetworkState, a, model, schedule: StepSchedule, rng=None, *, samples=None):
    """Adapt at every node, then combine the intermediate estimates."""
    a = _matrix(a)
    _check_dims(a, state)
    mu_i = step_size(schedule, state.iteration + 1)
    h, y = _draw(model, rng, samples, state.estimates.shape[:-1])
    g = model.gradient(state.estimates, h, y)
    state.psi_buffer = state.estimates - mu_i * g
    state.estimates = _combine(a, state.psi_buffer)
    state.iteration += 1
    state.grad_evals += state.n_nodes
    state.combine_macs += _macs(a, state.dim)
    return state


def consensus_step(state: NetworkState, a, model, schedule: StepSchedule, rng=None, *, samples=None):
    """Combine previous estimates and subtract the gradient taken at w_{k,i-1}."""
    a = _matrix(a)
    _check_dims(a, state)
    mu_i = step_size(schedule, state.iteration + 1)
    h, y = _draw(model, rng, samples, state.estimates.shape[:-1])
    g = model.gradient(state.estimates, h, y)
    state.estimates = _combine(a, state.estimates) - mu_i * g
    state.iteration += 1
    state.grad_evals += state.n_nodes
    state.combine_macs += _macs(a, state.dim)
    return state
