"""
sum-constrained polynomial energies

    H(v) = constant + sum_i C_i v_i + sum_(i<=j) J_ij v_i v_j
                    + sum_(i<=j<=k) T_ijk v_i v_j v_k

over P nonnegative variables with sum(v) == sum_budget.

quadratic and cubic terms are stored once per monomial, in canonical index
order, and the stored weight is the full coefficient of that monomial. so a
symmetric pair J_ij = J_ji = -1 written the matrix way becomes the single
entry (i, j, -2).

instances are immutable. evaluate() and gradient() are pure and safe to call
from any number of threads.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
from scipy import sparse

from .errors import ContractViolation, NumericOverflow
from .schemas import Message, FINITE, NONNEGATIVE_INT, OPTIONAL, RULE


__all__ = ["SumConstrainedPolynomial", "evaluate", "gradient", "validate",
        "PolynomialMessage"]


def _canonical_terms(entries, arity):
    merged = {}
    for entry in entries:
        idx = tuple(sorted(int(i) for i in entry[:arity]))
        merged[idx] = merged.get(idx, 0.0) + float(entry[arity])
    keys = sorted(merged)
    index = np.array(keys, dtype=np.int64).reshape(len(keys), arity)
    weights = np.array([merged[k] for k in keys], dtype=np.float64)
    return index, weights


@dataclass(frozen=True, eq=False)
class SumConstrainedPolynomial:
    num_vars: int
    sum_budget: int
    constant: float
    linear: np.ndarray
    quad_index: np.ndarray = field(default=None)
    quad_weight: np.ndarray = field(default=None)
    cubic_index: np.ndarray = field(default=None)
    cubic_weight: np.ndarray = field(default=None)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "linear", np.asarray(self.linear, dtype=np.float64))
        for name, arity in (("quad", 2), ("cubic", 3)):
            index = getattr(self, name + "_index")
            weight = getattr(self, name + "_weight")
            if index is None:
                index = np.zeros((0, arity), dtype=np.int64)
                weight = np.zeros(0, dtype=np.float64)
            set_(self, name + "_index",
                    np.asarray(index, dtype=np.int64).reshape(-1, arity))
            set_(self, name + "_weight", np.asarray(weight, dtype=np.float64))
        for arr in (self.linear, self.quad_index, self.quad_weight,
                self.cubic_index, self.cubic_weight):
            arr.setflags(write=False)

    @classmethod
    def from_terms(cls, num_vars, sum_budget, constant=0.0, linear=None,
            quadratic=(), cubic=()):
        """build a polynomial from loose terms

        `quadratic` holds (i, j, w) and `cubic` holds (i, j, k, w) entries in
        any index order; entries naming the same monomial are summed into one
        canonical entry.
        """
        if linear is None:
            linear = np.zeros(num_vars)
        qi, qw = _canonical_terms(quadratic, 2)
        ci, cw = _canonical_terms(cubic, 3)
        return cls(int(num_vars), int(sum_budget), float(constant),
                np.array(linear, dtype=np.float64), qi, qw, ci, cw)

    @property
    def quadratic(self):
        "canonical (i, j, w) entries"
        return [(int(i), int(j), float(w)) for (i, j), w in
                zip(self.quad_index, self.quad_weight)]

    @property
    def cubic(self):
        "canonical (i, j, k, w) entries"
        return [(int(i), int(j), int(k), float(w)) for (i, j, k), w in
                zip(self.cubic_index, self.cubic_weight)]

    @cached_property
    def coupling(self):
        """symmetric CSR matrix S with v.S.v / 2 equal to the quadratic part

        a stored diagonal weight w lands as 2w on the diagonal, an off-diagonal
        weight w lands as w in both (i, j) and (j, i).
        """
        i, j = self.quad_index[:, 0], self.quad_index[:, 1]
        rows = np.concatenate((i, j))
        cols = np.concatenate((j, i))
        data = np.concatenate((self.quad_weight, self.quad_weight))
        return sparse.csr_matrix((data, (rows, cols)),
                shape=(self.num_vars, self.num_vars))

    @cached_property
    def coupling_diagonal(self):
        return self.coupling.diagonal()

    @cached_property
    def coupling_dense(self):
        return self.coupling.toarray()

    @cached_property
    def _cubic_incidence(self):
        count = len(self.cubic_weight)
        return [sparse.csr_matrix(
                    (np.ones(count), (np.arange(count), self.cubic_index[:, a])),
                    shape=(count, self.num_vars))
                for a in range(3)]

    @property
    def has_cubic(self):
        return len(self.cubic_weight) > 0

    def combine(self, other, a=1.0, b=1.0):
        "the coefficient-wise combination a*self + b*other"
        if (other.num_vars != self.num_vars or
                other.sum_budget != self.sum_budget):
            raise ContractViolation("can only combine polynomials over the "
                    "same variables and budget")
        return self.add_terms(
                constant=b * other.constant,
                linear=b * other.linear,
                quadratic=[(i, j, b * w) for i, j, w in other.quadratic],
                cubic=[(i, j, k, b * w) for i, j, k, w in other.cubic],
                scale=a)

    def add_terms(self, constant=0.0, linear=None, quadratic=(), cubic=(),
            scale=1.0):
        "a new polynomial: scale*self plus the given loose terms"
        lin = scale * self.linear
        if linear is not None:
            lin = lin + np.asarray(linear, dtype=np.float64)
        return self.from_terms(
                self.num_vars, self.sum_budget,
                scale * self.constant + constant, lin,
                [(i, j, scale * w) for i, j, w in self.quadratic] +
                    list(quadratic),
                [(i, j, k, scale * w) for i, j, k, w in self.cubic] +
                    list(cubic))

    ##
    ## batched kernels, one assignment per row
    ##

    def energies(self, points):
        V = np.atleast_2d(np.asarray(points, dtype=np.float64))
        E = self.constant + V @ self.linear
        if len(self.quad_weight):
            E = E + (V[:, self.quad_index[:, 0]] *
                    V[:, self.quad_index[:, 1]]) @ self.quad_weight
        if self.has_cubic:
            c = self.cubic_index
            E = E + (V[:, c[:, 0]] * V[:, c[:, 1]] * V[:, c[:, 2]]) @ \
                    self.cubic_weight
        return E

    def gradients(self, points):
        V = np.atleast_2d(np.asarray(points, dtype=np.float64))
        G = self.linear + (self.coupling @ V.T).T
        if self.has_cubic:
            c, w = self.cubic_index, self.cubic_weight
            inc = self._cubic_incidence
            for a, (b, d) in enumerate(((1, 2), (0, 2), (0, 1))):
                terms = w * V[:, c[:, b]] * V[:, c[:, d]]
                G = G + (inc[a].T @ terms.T).T
        return G


def _check_point(poly, point):
    point = np.asarray(point, dtype=np.float64)
    if point.ndim != 1 or point.shape[0] != poly.num_vars:
        raise ContractViolation("assignment has shape %s, polynomial has %d "
                "variables" % (point.shape, poly.num_vars))
    if (point < 0).any():
        raise ContractViolation("assignment has negative entries")
    return point


def evaluate(poly, point):
    """energy of `point` under `poly`

    :raises ContractViolation: wrong length or negative entries
    :raises NumericOverflow: the energy is not finite
    """
    point = _check_point(poly, point)
    energy = float(poly.energies(point)[0])
    if not math.isfinite(energy):
        raise NumericOverflow("energy is not finite")
    return energy


def gradient(poly, point):
    "the vector of partial derivatives dH/dv_i at `point`"
    point = _check_point(poly, point)
    grad = poly.gradients(point)[0]
    if not np.isfinite(grad).all():
        raise NumericOverflow("gradient is not finite")
    return grad


def validate(poly):
    """check every structural invariant of `poly`

    :returns: a list of human-readable violations, empty when well-formed
    """
    problems = []
    P = poly.num_vars
    if not isinstance(P, (int, np.integer)) or P < 1:
        problems.append("num_vars must be a positive integer")
        P = 0
    if not isinstance(poly.sum_budget, (int, np.integer)) or poly.sum_budget < 0:
        problems.append("sum_budget must be a nonnegative integer")
    if not math.isfinite(poly.constant):
        problems.append("non-finite coefficient: constant")
    if poly.linear.shape != (P,):
        problems.append("linear has length %d, expected %d" %
                (poly.linear.size, P))
    if not np.isfinite(poly.linear).all():
        problems.append("non-finite coefficient: linear")

    for name, index, weight in (
            ("quadratic", poly.quad_index, poly.quad_weight),
            ("cubic", poly.cubic_index, poly.cubic_weight)):
        if len(index) != len(weight):
            problems.append("%s indices and weights differ in length" % name)
            continue
        if not np.isfinite(weight).all():
            problems.append("non-finite coefficient: %s" % name)
        if len(index) and ((index < 0) | (index >= P)).any():
            problems.append("index out of range: %s" % name)
        if len(index) and (np.diff(index, axis=1) < 0).any():
            problems.append("non-canonical index order: %s" % name)
        if len({tuple(row) for row in index.tolist()}) != len(index):
            problems.append("duplicate monomial: %s" % name)

    return problems


class PolynomialMessage(Message):
    "the JSON document written by ``denoise --dump-energy``"
    SCHEMA = {
        'num_vars': RULE(lambda n: isinstance(n, int) and n >= 1,
            "positive integer"),
        'sum_budget': NONNEGATIVE_INT,
        'constant': FINITE,
        'linear': [FINITE],
        'quadratic': [OPTIONAL((NONNEGATIVE_INT, NONNEGATIVE_INT, FINITE))],
        'cubic': [OPTIONAL(
            (NONNEGATIVE_INT, NONNEGATIVE_INT, NONNEGATIVE_INT, FINITE))],
    }


def to_document(poly):
    return {
        'num_vars': int(poly.num_vars),
        'sum_budget': int(poly.sum_budget),
        'constant': float(poly.constant),
        'linear': [float(c) for c in poly.linear],
        'quadratic': [[i, j, w] for i, j, w in poly.quadratic],
        'cubic': [[i, j, k, w] for i, j, k, w in poly.cubic],
    }


def from_document(doc):
    PolynomialMessage(doc).validate()
    return SumConstrainedPolynomial.from_terms(
            doc['num_vars'], doc['sum_budget'], doc['constant'],
            doc['linear'], doc['quadratic'], doc['cubic'])
