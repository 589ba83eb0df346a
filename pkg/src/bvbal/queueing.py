"""Single-server queue transient simulator and its derivative oracles.

The measure of interest is the expected average system time of the first
``num_customers`` customers of an M/M/1 queue that starts empty and idle.
Waiting times follow the Lindley recursion

    W_1 = 0,    W_j = max(W_{j-1} + S_{j-1} - A_j, 0),

with A_j the j-th interarrival time and S_j the j-th service time; the
j-th system time is T_j = W_j + S_j, and one replication reports
mean(T_1..T_k).

Derivative oracles perturb a rate by +-delta and form a central
difference of two replications, giving a biased-noisy estimate of the
derivative of the transient measure with bias order q1 = 2 and noise
order q2 = 1; the simultaneous-perturbation variant perturbs both rates
along a random +-1 direction and estimates the full gradient from the
same two replications.

All randomness enters through uniform blocks drawn from a StreamKey in
one row-major block per call, so a path's prefix is reproducible and two
oracles sharing a key consume identical variates.  Inverse-transform
sampling (-log1p(-U) / rate) keeps a uniform block's meaning fixed when
only rates change, which is what makes common random numbers and
coupling-based tests exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .oracles import StreamKey

__all__ = [
    "QueueParams",
    "TransientSample",
    "MM1DerivativeOracle",
    "MM1GradientOracleSP",
    "mm1_transient_sample",
    "mm1_derivative_oracle",
    "mm1_gradient_oracle_sp",
    "MM1_TRUE_ARRIVAL_DERIVATIVE",
    "MM1_TRUE_SERVICE_DERIVATIVE",
]

# Reference derivatives of the expected average system time of the first
# 10 customers at arrival rate = service rate = 4 (critically loaded).
# Cross-checked in the test suite against a long common-random-number
# central-difference run before anything downstream trusts them.
MM1_TRUE_ARRIVAL_DERIVATIVE = 0.0946
MM1_TRUE_SERVICE_DERIVATIVE = -0.2501


@dataclass(frozen=True, slots=True)
class QueueParams:
    """M/M/1 configuration: arrival and service rates and the number of
    customers in the transient horizon."""

    arrival_rate: float
    service_rate: float
    num_customers: int = 10

    def __post_init__(self) -> None:
        if not (self.arrival_rate > 0 and math.isfinite(self.arrival_rate)):
            raise ValueError(f"arrival_rate must be positive, got {self.arrival_rate}")
        if not (self.service_rate > 0 and math.isfinite(self.service_rate)):
            raise ValueError(f"service_rate must be positive, got {self.service_rate}")
        if int(self.num_customers) != self.num_customers or self.num_customers < 1:
            raise ValueError(
                f"num_customers must be a positive integer, got {self.num_customers}"
            )
        object.__setattr__(self, "num_customers", int(self.num_customers))


@dataclass(frozen=True, slots=True)
class TransientSample:
    """One replication: the averaged system time and the per-customer
    system times it was averaged from."""

    avg_system_time: float
    per_customer_times: np.ndarray


def _exponential(u: np.ndarray, rate) -> np.ndarray:
    # -log1p(-u) maps u in [0, 1) to a finite exponential variate
    return -np.log1p(-u) / rate


def _system_times(u_arrivals: np.ndarray, u_services: np.ndarray,
                  arrival_rate, service_rate) -> np.ndarray:
    """System times T_1..T_k from uniform blocks of shape (..., k).

    Rates are scalars or arrays broadcastable against the leading axes
    (shape (..., 1)), so one call can run many perturbed replications.
    The first interarrival is consumed but cannot affect system times
    (the system starts empty).
    """
    a = _exponential(u_arrivals, arrival_rate)
    s = _exponential(u_services, service_rate)
    k = a.shape[-1]
    times = np.empty_like(s)
    times[..., 0] = s[..., 0]
    wait = np.zeros_like(s[..., 0])
    for j in range(1, k):
        wait = np.maximum(wait + s[..., j - 1] - a[..., j], 0.0)
        times[..., j] = wait + s[..., j]
    return times


def mm1_transient_sample(params: QueueParams, stream: StreamKey) -> TransientSample:
    """One replication of the transient measure from a fresh stream."""
    k = params.num_customers
    u = stream.generator().random((2, k))
    times = _system_times(u[0], u[1], params.arrival_rate, params.service_rate)
    return TransientSample(float(times.mean()), times)


def _check_deltas(deltas, limit: float, what: str) -> np.ndarray:
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim != 1:
        raise ValueError(f"deltas must be 1-d, got shape {deltas.shape}")
    if not np.all(deltas > 0):
        raise ValueError("all deltas must be strictly positive")
    if not np.all(deltas < limit):
        raise ValueError(
            f"delta must stay below the {what} ({limit!r}); a perturbed rate "
            "would not be positive"
        )
    return deltas


@dataclass(frozen=True, slots=True)
class MM1DerivativeOracle:
    """Central-difference oracle for one rate derivative of the transient
    measure; bias order q1 = 2, noise order q2 = 1.

    Each draw runs the queue at rate + delta and rate - delta.  With
    ``crn`` the two runs share their uniform block (variance reduction);
    by default they are independent.
    """

    params: QueueParams
    target: str = "arrival"
    crn: bool = False

    def __post_init__(self) -> None:
        if self.target not in ("arrival", "service"):
            raise ValueError(f"target must be 'arrival' or 'service', got {self.target!r}")

    @property
    def dim(self) -> int:
        return 1

    def sample_path(self, deltas, stream: StreamKey) -> np.ndarray:
        """One central-difference draw per delta; draw j consumes row j of
        a single row-major uniform block of shape (n, 2, 2, k): evaluation
        slot (+delta first), then process (arrivals, services)."""
        rate = (self.params.arrival_rate if self.target == "arrival"
                else self.params.service_rate)
        deltas = _check_deltas(deltas, rate, f"{self.target} rate")
        n = deltas.shape[0]
        k = self.params.num_customers
        u = stream.generator().random((n, 2, 2, k))
        if self.crn:
            u[:, 1] = u[:, 0]
        d = deltas[:, None]
        lam, mu = self.params.arrival_rate, self.params.service_rate
        if self.target == "arrival":
            up = _system_times(u[:, 0, 0], u[:, 0, 1], lam + d, mu)
            down = _system_times(u[:, 1, 0], u[:, 1, 1], lam - d, mu)
        else:
            up = _system_times(u[:, 0, 0], u[:, 0, 1], lam, mu + d)
            down = _system_times(u[:, 1, 0], u[:, 1, 1], lam, mu - d)
        value = (up.mean(axis=-1) - down.mean(axis=-1)) / (2.0 * deltas)
        return value[:, None]

    def sample(self, delta: float, stream: StreamKey) -> np.ndarray:
        return self.sample_path(np.asarray([float(delta)]), stream)[0]


def mm1_derivative_oracle(params: QueueParams, target: str, delta: float,
                          stream: StreamKey, crn: bool = False) -> float:
    """One central-difference draw of d(transient measure)/d(rate)."""
    oracle = MM1DerivativeOracle(params=params, target=target, crn=crn)
    return float(oracle.sample(delta, stream)[0])


@dataclass(frozen=True, slots=True)
class MM1GradientOracleSP:
    """Simultaneous-perturbation gradient oracle over (arrival, service):
    both rates move +-delta along a random +-1 direction and the same two
    replications feed every gradient component; q1 = 2, q2 = 1."""

    params: QueueParams

    @property
    def dim(self) -> int:
        return 2

    def sample_path(self, deltas, stream: StreamKey) -> np.ndarray:
        """Draw j consumes row j of one uniform block of shape
        (n, 2 + 4 k): two direction uniforms, then the (+) replication's
        arrival and service columns, then the (-) replication's."""
        limit = min(self.params.arrival_rate, self.params.service_rate)
        deltas = _check_deltas(deltas, limit, "smaller rate")
        n = deltas.shape[0]
        k = self.params.num_customers
        block = stream.generator().random((n, 2 + 4 * k))
        h = np.where(block[:, :2] < 0.5, -1.0, 1.0)
        u = block[:, 2:].reshape(n, 2, 2, k)
        lam, mu = self.params.arrival_rate, self.params.service_rate
        d = deltas[:, None]
        dh = d * h
        up = _system_times(u[:, 0, 0], u[:, 0, 1],
                           lam + dh[:, :1], mu + dh[:, 1:])
        down = _system_times(u[:, 1, 0], u[:, 1, 1],
                             lam - dh[:, :1], mu - dh[:, 1:])
        diff = up.mean(axis=-1) - down.mean(axis=-1)
        return diff[:, None] / (2.0 * dh)

    def sample(self, delta: float, stream: StreamKey) -> np.ndarray:
        return self.sample_path(np.asarray([float(delta)]), stream)[0]


def mm1_gradient_oracle_sp(params: QueueParams, delta: float,
                           stream: StreamKey) -> np.ndarray:
    """One simultaneous-perturbation draw of the transient measure's
    gradient with respect to (arrival_rate, service_rate)."""
    return MM1GradientOracleSP(params=params).sample(delta, stream)
