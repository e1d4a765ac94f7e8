"""
the nearest-neighbor smoothness cost as a sum-constrained polynomial

for measured counts M and a noise assignment N the cost is

    C(N) = sum_i (x_i - (x_(i-1) + x_(i+1)) / 2) ** 2,    x = M - N

build_cost_form() expands every squared residual mechanically into constant,
linear and quadratic monomials, so the polynomial equals C everywhere,
including at the edges. interior_coefficients() gives the textbook closed
forms (D_i, 3/2, -1, 1/4) that hold away from the edges and is only meant to
cross-check the expansion.
"""

from dataclasses import dataclass, field
import enum
from typing import NamedTuple, Optional

import numpy as np

from .errors import ContractViolation, InputError
from .polynomial import SumConstrainedPolynomial


__all__ = ["MeasuredFrame", "BoundaryPolicy", "CrossColumnContext",
        "build_cost_form", "residual_cost", "interior_coefficients",
        "augment_cross_column", "augment_block_edges", "MIN_FRAME"]


# one full residual term needs i-1, i and i+1
MIN_FRAME = 3
# the closed forms reach from i-2 to i+2
MIN_CLOSED_FORM = 5

_STENCIL = ((-1, -0.5), (0, 1.0), (1, -0.5))


class BoundaryPolicy(enum.Enum):
    PERIODIC = "periodic"
    INTERIOR = "interior"


@dataclass(frozen=True, eq=False)
class MeasuredFrame:
    "photon counts of one row of pixels"
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise InputError("a frame is one-dimensional, got shape %s" %
                    (counts.shape,))
        if counts.size and not np.array_equal(counts, np.round(counts)):
            raise InputError("frame counts must be integers")
        counts = counts.astype(np.int64)
        if counts.size < MIN_FRAME:
            raise InputError("a frame needs at least %d pixels, got %d" %
                    (MIN_FRAME, counts.size))
        if (counts < 0).any():
            raise InputError("frame counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return self.counts.size


@dataclass(frozen=True)
class CrossColumnContext:
    """recovered estimates of the neighboring columns

    each present vector supplies one reference value per row; the cross term
    pulls every pixel toward the average of the present references.
    """
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None
    weight: float = 1.0

    def reference(self, length):
        present = [np.asarray(v, dtype=np.float64)
                for v in (self.left, self.right) if v is not None]
        if not present:
            raise InputError("cross-column context has no neighbors")
        for v in present:
            if v.shape != (length,):
                raise ContractViolation("neighbor estimate has shape %s, "
                        "column has %d rows" % (v.shape, length))
        return sum(present) / len(present)


def _centers(P, boundary):
    if boundary is BoundaryPolicy.PERIODIC:
        centers = np.arange(P)
    else:
        centers = np.arange(1, P - 1)
    index = np.stack([(centers + off) % P for off, _ in _STENCIL], axis=1)
    return index


def build_cost_form(frame, boundary, noise_total):
    """expand the smoothness cost of `frame` into a polynomial in the noise

    :param MeasuredFrame frame: measured counts
    :param BoundaryPolicy boundary: wrap around, or only score pixels with
        both neighbors
    :param int noise_total: the sum budget of the result

    :returns: SumConstrainedPolynomial equal to the cost, constant included
    """
    boundary = BoundaryPolicy(boundary)
    P = len(frame)
    if P < MIN_FRAME:
        raise InputError("%s boundary needs %d pixels, got %d" %
                (boundary.value, MIN_FRAME, P))
    if noise_total < 0:
        raise InputError("noise total must be nonnegative")

    M = frame.counts.astype(np.float64)
    index = _centers(P, boundary)
    coeffs = np.array([a for _, a in _STENCIL])

    # residual_t = m_t - sum_s a_s N_(index[t, s])
    m = (M[index] * coeffs).sum(axis=1)

    linear = np.zeros(P)
    for s, a in enumerate(coeffs):
        np.add.at(linear, index[:, s], -2.0 * a * m)

    quadratic = []
    for s in range(3):
        for t in range(s, 3):
            w = coeffs[s] * coeffs[t] * (1.0 if s == t else 2.0)
            quadratic.extend(zip(index[:, s].tolist(), index[:, t].tolist(),
                    [w] * len(index)))

    return SumConstrainedPolynomial.from_terms(
            P, int(noise_total), float((m * m).sum()), linear, quadratic)


def residual_cost(frame, boundary, noise):
    "the smoothness cost of frame - noise, evaluated directly"
    boundary = BoundaryPolicy(boundary)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != frame.counts.shape:
        raise ContractViolation("noise has shape %s, frame has %d pixels" %
                (noise.shape, len(frame)))
    x = frame.counts - noise
    if boundary is BoundaryPolicy.PERIODIC:
        r = x - (np.roll(x, 1) + np.roll(x, -1)) / 2.0
    else:
        r = x[1:-1] - (x[:-2] + x[2:]) / 2.0
    return float(r @ r)


class ClosedForm(NamedTuple):
    indices: np.ndarray
    D: np.ndarray
    diag: float
    off1: float
    off2: float


def interior_coefficients(frame, boundary=BoundaryPolicy.INTERIOR):
    """the closed-form coefficients of the expanded cost

    D_i = 3 M_i - 2 M_(i+1) - 2 M_(i-1) + M_(i+2) / 2 + M_(i-2) / 2 for every
    index with a full i-2..i+2 stencil (every index, wrapped, under periodic),
    together with the symmetric-pair values J_ii = 3/2, J_(i,i+-1) = -1 and
    J_(i,i+-2) = 1/4. the canonical monomial weights of build_cost_form()
    are J_ii, 2 J_(i,i+1) and 2 J_(i,i+2), and its linear term is -D.
    """
    boundary = BoundaryPolicy(boundary)
    P = len(frame)
    if P < MIN_CLOSED_FORM:
        raise InputError("closed forms need %d pixels, got %d" %
                (MIN_CLOSED_FORM, P))
    M = frame.counts.astype(np.float64)
    if boundary is BoundaryPolicy.PERIODIC:
        indices = np.arange(P)
    else:
        indices = np.arange(2, P - 2)

    def at(off):
        return M[(indices + off) % P]

    D = 3 * at(0) - 2 * at(1) - 2 * at(-1) + at(2) / 2 + at(-2) / 2
    return ClosedForm(indices, D, 1.5, -1.0, 0.25)


def augment_cross_column(poly, frame, ctx):
    """add weight * sum_i (M_i - N_i - A_i) ** 2 to `poly`

    A_i is the average of the neighbor estimates present in `ctx`.
    """
    P = len(frame)
    if poly.num_vars != P:
        raise ContractViolation("polynomial has %d variables, frame has %d "
                "pixels" % (poly.num_vars, P))
    if not np.isfinite(ctx.weight) or ctx.weight < 0:
        raise InputError("cross-column weight must be finite and >= 0")
    reference = ctx.reference(P)
    if ctx.weight == 0:
        return poly

    w = float(ctx.weight)
    b = frame.counts - reference
    return poly.add_terms(
            constant=w * float(b @ b),
            linear=-2.0 * w * b,
            quadratic=[(i, i, w) for i in range(P)])


def augment_block_edges(poly, frame, noise, start, stop):
    """add the residual terms of `frame` that straddle the block [start, stop)

    `poly` is the interior cost of the block, one variable per block pixel.
    pixels outside the block stay at frame - noise. the result plus the terms
    that don't touch the block is the interior cost of the whole frame.
    """
    P = len(frame)
    if poly.num_vars != stop - start:
        raise ContractViolation("polynomial has %d variables, block has %d "
                "pixels" % (poly.num_vars, stop - start))
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (P,):
        raise ContractViolation("noise has shape %s, frame has %d pixels" %
                (noise.shape, P))

    centers = [t for t in range(max(1, start - 1), min(P - 2, stop) + 1)
            if not start + 1 <= t <= stop - 2]
    if not centers:
        return poly

    M = frame.counts.astype(np.float64)
    x = M - noise
    constant = 0.0
    linear = np.zeros(poly.num_vars)
    quadratic = []
    for t in centers:
        m, inside = 0.0, []
        for off, a in _STENCIL:
            i = t + off
            if start <= i < stop:
                m += a * M[i]
                inside.append((i - start, a))
            else:
                m += a * x[i]
        constant += m * m
        for i, a in inside:
            linear[i] -= 2.0 * a * m
        for s, (i, a) in enumerate(inside):
            for j, b in inside[s:]:
                quadratic.append((i, j, a * b * (1.0 if i == j else 2.0)))

    return poly.add_terms(constant=constant, linear=linear,
            quadratic=quadratic)
