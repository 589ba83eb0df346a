"""Shared test utilities.

The event-driven queue simulator here is the independent cross-check for
the package's waiting-time recursion: it processes an explicit
arrival/departure event heap and deliberately shares no code with
bvbal.queueing beyond the raw variates.
"""

import heapq

import numpy as np

from bvbal import BiasOrder, StreamKey, SyntheticOracleSpec


def unit_spec(q1=2.0, q2=1.0, theta=0.0, B=1.0, sigma=1.0, hob=None) -> SyntheticOracleSpec:
    """One-dimensional synthetic spec with scalar constants."""
    return SyntheticOracleSpec(
        theta=np.array([float(theta)]),
        B=np.array([float(B)]),
        noise_scale=np.array([float(sigma)]),
        order=BiasOrder(q1, q2),
        higher_order_bias=None if hob is None else np.array([float(hob)]),
    )


def queue_variates(key: StreamKey, k: int, arrival_rate: float, service_rate: float):
    """Interarrival and service times exactly as the queueing module draws
    them from this key: one (2, k) uniform block, inverse transform."""
    u = key.generator().random((2, k))
    return -np.log1p(-u[0]) / arrival_rate, -np.log1p(-u[1]) / service_rate


def event_driven_times(arrivals, services) -> np.ndarray:
    """Per-customer system times of a single-server FIFO queue via an
    explicit event loop (no waiting-time recursion).

    ``arrivals`` are interarrival times, ``services`` service times.
    """
    arrivals = np.asarray(arrivals, dtype=float)
    services = np.asarray(services, dtype=float)
    k = arrivals.shape[0]
    arrive = np.cumsum(arrivals)
    events = [(float(arrive[j]), 0, j) for j in range(k)]  # 0 arrival, 1 departure
    heapq.heapify(events)
    waiting: list[int] = []
    in_service = None
    done = np.empty(k)
    while events:
        t, kind, j = heapq.heappop(events)
        if kind == 0:
            waiting.append(j)
        else:
            done[j] = t - arrive[j]
            in_service = None
        if in_service is None and waiting:
            nxt = waiting.pop(0)
            in_service = nxt
            heapq.heappush(events, (t + float(services[nxt]), 1, nxt))
    return done
