"""
minimizers for sum-constrained polynomials over nonnegative integers

mean_field_solve() emulates a gain/loss photon loop: every restart holds a
continuous intensity per variable, the intensities are pushed down where the
energy gradient is high and up where it is low (a multiplicative update on the
simplex scaled to the photon budget, with annealed log-domain noise), and the
settled point is quantized with round_to_integers() and polished with
integer_local_search().

brute_force() enumerates every weak composition of the budget and is the
exact oracle for small instances.
"""

from dataclasses import dataclass, field, replace
import itertools
import logging
import math
import time
from typing import List, NamedTuple, Optional

import numpy as np

from .apportion import largest_remainder
from .errors import ContractViolation, InputError, SolverError
from .polynomial import evaluate
from .schemas import (Message, ANY, FINITE, NONNEGATIVE_INT, OPTIONAL,
        RULE)


__all__ = ["SolverConfig", "RestartOutcome", "SolveReport", "Optimum",
        "mean_field_solve", "round_to_integers", "integer_local_search",
        "brute_force", "restart_stream", "BRUTE_FORCE_CAP"]

log = logging.getLogger(__name__)

BRUTE_FORCE_CAP = 5000000

# normals drawn per restart per refill
_NOISE_CHUNK = 64

# above this many variables local search scans one donor row at a time
_DENSE_MOVES = 512


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 32
    max_iterations: int = 2000
    step_size: float = 0.05
    noise_initial: float = 0.2
    noise_decay: float = 0.995
    convergence_tol: float = 1e-9
    convergence_window: int = 50
    seed: int = 0
    local_search_moves: Optional[int] = None
    dirichlet_concentration: float = 1.0
    step_normalization: bool = True

    def validate(self):
        def positive_int(name):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or \
                    value < 1:
                raise InputError("%s must be a positive integer" % name)

        positive_int("restarts")
        positive_int("max_iterations")
        positive_int("convergence_window")
        if not self.step_size > 0:
            raise InputError("step_size must be positive")
        if not self.noise_initial >= 0:
            raise InputError("noise_initial must be >= 0")
        if not 0 < self.noise_decay <= 1:
            raise InputError("noise_decay must lie in (0, 1]")
        if not self.convergence_tol >= 0:
            raise InputError("convergence_tol must be >= 0")
        if not self.dirichlet_concentration > 0:
            raise InputError("dirichlet_concentration must be positive")
        if not 0 <= self.seed < 1 << 64:
            raise InputError("seed must be an unsigned 64-bit integer")
        if self.local_search_moves is not None and self.local_search_moves < 0:
            raise InputError("local_search_moves must be >= 0")
        return self

    def moves_for(self, num_vars):
        if self.local_search_moves is None:
            return 10 * num_vars
        return self.local_search_moves

    def derive(self, *key):
        "the same config with a seed derived from this seed and `key`"
        seq = np.random.SeedSequence(self.seed, spawn_key=tuple(key))
        return replace(self, seed=int(seq.generate_state(1, np.uint64)[0]))


@dataclass
class RestartOutcome:
    final_energy: float
    iterations_used: int
    converged: bool
    aborted: bool = False


@dataclass
class SolveReport:
    best: np.ndarray
    best_energy: float
    per_restart: List[RestartOutcome] = field(default_factory=list)
    energy_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    wall_time: float = 0.0
    seed: int = 0


class Optimum(NamedTuple):
    assignment: np.ndarray
    energy: float
    count: int


def restart_stream(seed, restart):
    "the Generator owned by one restart"
    return np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(restart,)))


##
## quantization and polishing
##

def round_to_integers(point, total):
    """largest-remainder rounding of a real assignment

    floors every entry and gives the leftover units to the largest fractional
    parts, lower index first on ties. the output sums to `total` exactly and
    no entry moves by a full unit.
    """
    point = np.asarray(point, dtype=np.float64)
    if (point < 0).any():
        raise ContractViolation("assignment has negative entries")
    if abs(point.sum() - total) > 1e-6 * max(1.0, total):
        raise ContractViolation("assignment sums to %r, expected %d" %
                (point.sum(), total))
    return largest_remainder(point, total)


def _check_feasible(poly, x):
    x = np.asarray(x)
    if x.shape != (poly.num_vars,):
        raise ContractViolation("infeasible start: shape %s for %d variables"
                % (x.shape, poly.num_vars))
    if not np.array_equal(x, np.round(x)) or (x < 0).any():
        raise ContractViolation(
                "infeasible start: entries must be nonnegative integers")
    x = x.astype(np.int64)
    if x.sum() != poly.sum_budget:
        raise ContractViolation("infeasible start: sums to %d, budget is %d" %
                (x.sum(), poly.sum_budget))
    return x


def _coupling_row(S, i, P):
    row = np.zeros(P)
    lo, hi = S.indptr[i], S.indptr[i + 1]
    row[S.indices[lo:hi]] = S.data[lo:hi]
    return row


def _move_deltas(poly, x, i, grad, energy):
    "energy change of moving one unit from i to every j"
    P = poly.num_vars
    if poly.has_cubic:
        candidates = np.tile(x.astype(np.float64), (P, 1))
        candidates[:, i] -= 1
        candidates[np.arange(P), np.arange(P)] += 1
        return poly.energies(candidates) - energy
    d = poly.coupling_diagonal
    row = _coupling_row(poly.coupling, i, P)
    return grad - grad[i] + 0.5 * (d + d[i]) - row


def _first_improvement(poly, x, grad, energy):
    """the first (i, j) in row-major order whose unit move lowers the energy

    returns None at a local minimum.
    """
    tol = 1e-9 * max(1.0, abs(energy))
    donors = np.flatnonzero(x >= 1)
    if poly.has_cubic or poly.num_vars > _DENSE_MOVES:
        for i in donors:
            deltas = _move_deltas(poly, x, i, grad, energy)
            deltas[i] = np.inf
            better = np.flatnonzero(deltas < -tol)
            if better.size:
                return i, better[0]
        return None

    # delta[k, j] for a move from donors[k] to j
    d = poly.coupling_diagonal
    delta = (grad + 0.5 * d) - (grad - 0.5 * d)[donors, None] - \
            poly.coupling_dense[donors]
    delta[np.arange(donors.size), donors] = np.inf
    hits = (delta < -tol).ravel()
    if not hits.any():
        return None
    k, j = divmod(int(hits.argmax()), poly.num_vars)
    return donors[k], j


def integer_local_search(poly, start, max_moves):
    """single-unit hill climbing

    scans ordered pairs (i, j), i != j, row-major and applies the first move
    of one unit from i to j that strictly lowers the energy, then scans again.
    stops when a full scan finds nothing or after `max_moves` moves.
    """
    x = _check_feasible(poly, start).copy()
    P = poly.num_vars
    if P < 2 or poly.sum_budget == 0:
        return x

    energy = evaluate(poly, x)
    grad = poly.gradients(x)[0]
    moves = 0
    while moves < max_moves:
        move = _first_improvement(poly, x, grad, energy)
        if move is None:
            break
        i, j = move
        x[i] -= 1
        x[j] += 1
        energy = evaluate(poly, x)
        grad = poly.gradients(x)[0]
        moves += 1

    return x


##
## the mean-field loop
##

def _relax(poly, config):
    """run every restart's continuous dynamics as one batch

    returns (points, outcomes, traces): row r of points is the settled
    intensity vector of restart r, column r of traces its energy per
    iteration. every reduction runs along a row, so a restart's trajectory
    doesn't depend on which other restarts are still running.
    """
    P, N = poly.num_vars, float(poly.sum_budget)
    R = config.restarts
    rngs = [restart_stream(config.seed, r) for r in range(R)]

    alpha = np.full(P, config.dirichlet_concentration)
    V = np.stack([rng.dirichlet(alpha) for rng in rngs])
    # a zero intensity can never grow back under multiplicative updates
    V = np.maximum(V, 1e-300)
    V = N * V / V.sum(axis=1, keepdims=True)
    L = np.log(V)

    aborted = np.zeros(R, dtype=bool)
    converged = np.zeros(R, dtype=bool)
    used = np.zeros(R, dtype=np.int64)
    traces = np.full((config.max_iterations, R), np.nan)
    noise = np.empty((_NOISE_CHUNK, R, P))
    window = config.convergence_window
    tol = config.convergence_tol
    rows = np.arange(R)

    sigma = config.noise_initial
    for t in range(config.max_iterations):
        if not rows.size:
            break
        slot = t % _NOISE_CHUNK
        if slot == 0:
            for r in rows:
                noise[:, r] = rngs[r].standard_normal((_NOISE_CHUNK, P))

        whole = rows.size == R
        Vr = V if whole else V[rows]
        with np.errstate(over="ignore", invalid="ignore"):
            G = np.ascontiguousarray(poly.gradients(Vr))
            # v.g counts the quadratic part twice and the cubic part thrice
            E = poly.constant + 0.5 * (Vr * (G + poly.linear)).sum(axis=1)
            if poly.has_cubic:
                c = poly.cubic_index
                E -= 0.5 * (Vr[:, c[:, 0]] * Vr[:, c[:, 1]] * Vr[:, c[:, 2]]
                        * poly.cubic_weight).sum(axis=1)
            bad = ~(np.isfinite(E) & np.isfinite(G).all(axis=1))
        if bad.any():
            for r in rows[bad]:
                log.warning("restart %d aborted at iteration %d: non-finite "
                        "energy", r, t)
            aborted[rows[bad]] = True
            used[rows[bad]] = t
            keep = ~bad
            rows, Vr, E, G = rows[keep], Vr[keep], E[keep], G[keep]
            whole = False
            if not rows.size:
                continue

        traces[t, rows] = E
        used[rows] = t + 1
        if t >= window:
            done = np.abs(E - traces[t - window, rows]) <= \
                    tol * np.maximum(1.0, np.abs(E))
            if done.any():
                converged[rows[done]] = True
                keep = ~done
                rows, Vr, G = rows[keep], Vr[keep], G[keep]
                whole = False
                if not rows.size:
                    continue

        centered = G - (Vr * G).sum(axis=1, keepdims=True) / N
        if config.step_normalization:
            eta = config.step_size / np.maximum(1.0,
                    np.abs(centered).max(axis=1, keepdims=True))
        else:
            eta = config.step_size
        if whole:
            logits = L - eta * centered + sigma * noise[slot]
        else:
            logits = L[rows] - eta * centered + sigma * noise[slot, rows]
        logits -= logits.max(axis=1, keepdims=True)
        W = np.exp(logits)
        W *= N / W.sum(axis=1, keepdims=True)
        if whole:
            L, V = logits, W
        else:
            L[rows] = logits
            V[rows] = W
        sigma *= config.noise_decay

    outcomes = [RestartOutcome(float("nan"), int(used[r]), bool(converged[r]),
            bool(aborted[r])) for r in range(R)]
    return V, outcomes, traces


def mean_field_solve(poly, config=None):
    """minimize `poly` over nonnegative integer points summing to its budget

    :param SumConstrainedPolynomial poly: the energy
    :param SolverConfig config: dynamics and restart settings

    :returns: SolveReport with the best integer assignment over all restarts
        (lowest restart index on ties)
    :raises SolverError: every restart aborted
    """
    config = (config or SolverConfig()).validate()
    started = time.perf_counter()
    P, N = poly.num_vars, poly.sum_budget

    if N == 0:
        best = np.zeros(P, dtype=np.int64)
        energy = evaluate(poly, best)
        return SolveReport(best, energy, [], np.array([energy]),
                time.perf_counter() - started, config.seed)

    points, outcomes, traces = _relax(poly, config)
    moves = config.moves_for(P)

    # restarts often settle on the same rounded point
    polished = {}
    best, best_energy, best_restart = None, math.inf, -1
    for r, outcome in enumerate(outcomes):
        if outcome.aborted:
            continue
        start = round_to_integers(points[r], N)
        key = start.tobytes()
        if key not in polished:
            x = integer_local_search(poly, start, moves)
            polished[key] = (x, evaluate(poly, x))
        x, outcome.final_energy = polished[key]
        log.debug("restart %d: energy %.6g after %d iterations%s", r,
                outcome.final_energy, outcome.iterations_used,
                " (converged)" if outcome.converged else "")
        if outcome.final_energy < best_energy:
            best, best_energy, best_restart = x, outcome.final_energy, r

    if best is None:
        raise SolverError("all %d restarts aborted" % len(outcomes))

    trace = traces[:outcomes[best_restart].iterations_used, best_restart]
    return SolveReport(best.copy(), best_energy, outcomes, trace,
            time.perf_counter() - started, config.seed)


##
## exhaustive oracle
##

def _compositions(total, parts, chunk=65536):
    "weak compositions of `total` into `parts`, lexicographic, in blocks"
    if parts == 1:
        yield np.array([[total]], dtype=np.int64)
        return
    slots = total + parts - 1
    bars = itertools.combinations(range(slots), parts - 1)
    while True:
        block = np.array(list(itertools.islice(bars, chunk)), dtype=np.int64)
        if not block.size:
            return
        block = block.reshape(-1, parts - 1)
        edges = np.concatenate((
            np.full((len(block), 1), -1), block,
            np.full((len(block), 1), slots)), axis=1)
        yield np.diff(edges, axis=1) - 1


def brute_force(poly, cap=BRUTE_FORCE_CAP):
    """exact minimum by enumerating every weak composition of the budget

    ties go to the lexicographically smallest assignment.

    :raises InputError: more than `cap` compositions
    """
    P, N = poly.num_vars, poly.sum_budget
    count = math.comb(N + P - 1, P - 1)
    if count > cap:
        raise InputError("%d compositions exceed the brute-force cap of %d" %
                (count, cap))

    best, best_energy = None, math.inf
    for block in _compositions(N, P):
        energies = poly.energies(block)
        low = energies.min()
        tol = 1e-9 * max(1.0, abs(low))
        if best is None or low < best_energy - tol:
            first = np.flatnonzero(energies <= low + tol)[0]
            best, best_energy = block[first].copy(), float(energies[first])

    return Optimum(best, evaluate(poly, best), count)


##
## JSON documents
##

class SolveReportMessage(Message):
    SCHEMA = {
        'best': [OPTIONAL(NONNEGATIVE_INT)],
        'best_energy': FINITE,
        'per_restart': [OPTIONAL({
            'final_energy': ANY,
            'iterations_used': NONNEGATIVE_INT,
            'converged': bool,
            'aborted': bool,
        })],
        'energy_trace': [OPTIONAL(ANY)],
        OPTIONAL('wall_time'): RULE(lambda t: t >= 0, "nonnegative time"),
        'seed': NONNEGATIVE_INT,
    }


def report_to_document(report, with_timing=False):
    doc = {
        'best': [int(v) for v in report.best],
        'best_energy': float(report.best_energy),
        'per_restart': [{
            'final_energy': float(o.final_energy),
            'iterations_used': int(o.iterations_used),
            'converged': bool(o.converged),
            'aborted': bool(o.aborted),
        } for o in report.per_restart],
        'energy_trace': [float(e) for e in report.energy_trace],
        'seed': int(report.seed),
    }
    if with_timing:
        doc['wall_time'] = float(report.wall_time)
    return doc


def report_from_document(doc):
    SolveReportMessage(doc).validate()
    return SolveReport(
            np.array(doc['best'], dtype=np.int64),
            float(doc['best_energy']),
            [RestartOutcome(float(o['final_energy']), o['iterations_used'],
                o['converged'], o['aborted']) for o in doc['per_restart']],
            np.array(doc['energy_trace'], dtype=np.float64),
            float(doc.get('wall_time', 0.0)),
            doc['seed'])
