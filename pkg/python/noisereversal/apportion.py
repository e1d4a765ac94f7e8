"""
largest-remainder quantization

turns real shares into nonnegative integers with an exact total: floor every
share, then hand the leftover units to the largest fractional parts, lower
index first on ties. shares may be floats or fractions.Fraction; the latter
keep proportional splits exact.
"""

from fractions import Fraction
import math

import numpy as np

from .errors import ContractViolation


__all__ = ["largest_remainder", "exact_shares"]


def largest_remainder(shares, total):
    """quantize `shares` to integers summing to `total`

    :param shares: nonnegative reals (floats or Fractions) summing to about
        `total`
    :param int total: the exact sum required of the output

    :returns: int64 numpy array
    """
    n = len(shares)
    if n == 0:
        if total:
            raise ContractViolation("no units to apportion %d over" % total)
        return np.zeros(0, dtype=np.int64)

    if any(isinstance(s, Fraction) for s in shares):
        floors = [math.floor(s) for s in shares]
        fracs = [s - f for s, f in zip(shares, floors)]
        order = sorted(range(n), key=lambda i: (-fracs[i], i))
        floors = np.array(floors, dtype=np.int64)
    else:
        values = np.asarray(shares, dtype=np.float64)
        floors = np.floor(values)
        fracs = values - floors
        # stable sort on negated remainders keeps lower indices first on ties
        order = np.argsort(-fracs, kind="stable")
        floors = floors.astype(np.int64)

    if (floors < 0).any():
        raise ContractViolation("negative share")

    leftover = int(total) - int(floors.sum())
    if not 0 <= leftover <= n:
        raise ContractViolation(
                "shares sum to %s, too far from the total %d" %
                (floors.sum(), total))

    result = floors.copy()
    for i in order[:leftover]:
        result[i] += 1
    return result


def exact_shares(weights, total):
    "split `total` in proportion to integer `weights`, as exact Fractions"
    weights = [int(w) for w in weights]
    denom = sum(weights)
    return [Fraction(w * int(total), denom) for w in weights]
