"""Shared exception types.

Domain errors on otherwise-valid calls (bad delta, bad coordinate, n too
small) raise plain ``ValueError``; the types below mark the two failure
modes callers are expected to branch on.
"""

from __future__ import annotations


class ConfigurationError(ValueError):
    """An estimator or experiment configuration is self-inconsistent.

    Examples: a recursive step size exceeding 1 with no burn-in offset to
    absorb it, an averaged run asked to use beta >= 1, or a weight vector
    whose length does not match the sample budget.
    """


class InfeasibleError(RuntimeError):
    """The constrained weight problem has an empty feasible region.

    Raised by the calibration solver when no weight vector satisfies the
    inflation cap for the requested (n, K); the message names both.
    """
