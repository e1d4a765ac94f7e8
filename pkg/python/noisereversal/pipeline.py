"""
end-to-end noise reversal

denoise_1d()          one frame, one solve
denoise_1d_blocked()  long frames cut into blocks, re-solved on shifted blocks
denoise_2d()          images, column by column, with a cross-column term
                      pulling each column toward its neighbors' recovery

every operation conserves the noise budget exactly: the returned noise field
sums to the requested total at every pass and sweep, and recovered + noise
always equals the measured counts. recovered values are not clamped at zero.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import enum
import logging
import os
from typing import List

import numpy as np

from .apportion import largest_remainder, exact_shares
from .errors import ContractViolation, InputError
from .polynomial import evaluate
from .smoothness import (MeasuredFrame, BoundaryPolicy, CrossColumnContext,
        build_cost_form, residual_cost, augment_cross_column,
        augment_block_edges, MIN_FRAME)
from .solver import SolverConfig, mean_field_solve


__all__ = ["Image2D", "DenoiseResult", "BudgetPolicy", "HardwareProfile",
        "denoise_1d", "denoise_1d_blocked", "denoise_2d", "allocate_budget",
        "check_hardware_profile", "block_layout", "worker_count"]

log = logging.getLogger(__name__)

MIN_BLOCK = 5


class BudgetPolicy(enum.Enum):
    UNIFORM = "uniform"
    PROPORTIONAL = "proportional"


@dataclass(frozen=True, eq=False)
class Image2D:
    "photon counts on a rows x cols grid; each column is a MeasuredFrame"
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise InputError("an image is two-dimensional, got shape %s" %
                    (counts.shape,))
        if counts.size and not np.array_equal(counts, np.round(counts)):
            raise InputError("image counts must be integers")
        counts = counts.astype(np.int64)
        if counts.shape[1] < 1:
            raise InputError("an image needs at least one column")
        if counts.shape[0] < MIN_FRAME:
            raise InputError("an image needs at least %d rows, got %d" %
                    (MIN_FRAME, counts.shape[0]))
        if (counts < 0).any():
            raise InputError("image counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def rows(self):
        return self.counts.shape[0]

    @property
    def cols(self):
        return self.counts.shape[1]

    def column(self, c):
        return MeasuredFrame(self.counts[:, c])


@dataclass
class DenoiseResult:
    noise_field: np.ndarray
    recovered: np.ndarray
    final_cost: float
    diagnostics: List[dict] = field(default_factory=list)
    passes_completed: int = 0
    objective_trace: List[float] = field(default_factory=list)
    last_report: object = None


@dataclass(frozen=True)
class HardwareProfile:
    max_modes: int = 5000
    max_photons_per_mode: int = 100


def worker_count():
    """the NR_THREADS environment variable, 0 or unset meaning every cpu"""
    raw = os.environ.get("NR_THREADS", "0").strip() or "0"
    try:
        count = int(raw)
    except ValueError:
        raise InputError("NR_THREADS must be an integer, got %r" % raw)
    if count < 0:
        raise InputError("NR_THREADS must be >= 0")
    return count or os.cpu_count() or 1


def allocate_budget(totals, grand_total, policy=BudgetPolicy.PROPORTIONAL):
    """split `grand_total` over units

    uniform gives every unit an equal share, proportional shares follow
    `totals` (falling back to uniform when they are all zero). shares are
    quantized by largest remainder, lower index first on ties.
    """
    policy = BudgetPolicy(policy)
    totals = [int(t) for t in totals]
    if grand_total < 0:
        raise InputError("budget must be nonnegative")
    if not totals:
        raise InputError("no units to allocate over")
    if policy is BudgetPolicy.PROPORTIONAL and sum(totals) > 0:
        shares = exact_shares(totals, grand_total)
    else:
        shares = exact_shares([1] * len(totals), grand_total)
    return largest_remainder(shares, grand_total)


def _unit_config(config, step, unit):
    # the first unit of the first pass keeps the caller's seed
    if step == 0 and unit == 0:
        return config
    return config.derive(step, unit)


def _result(frame, boundary, noise, diagnostics, passes, trace, report=None):
    recovered = frame.counts - noise
    return DenoiseResult(noise, recovered,
            residual_cost(frame, boundary, noise), diagnostics, passes, trace,
            report)


def denoise_1d(frame, noise_total, boundary=BoundaryPolicy.INTERIOR,
        solver_config=None):
    """find the noise field of `frame` that makes frame - noise smoothest

    :param MeasuredFrame frame: measured counts
    :param int noise_total: total background photons
    :param BoundaryPolicy boundary: edge treatment of the smoothness cost
    :param SolverConfig solver_config: mean-field settings

    :returns: DenoiseResult
    """
    boundary = BoundaryPolicy(boundary)
    config = solver_config or SolverConfig()
    poly = build_cost_form(frame, boundary, noise_total)
    report = mean_field_solve(poly, config)
    log.info("1d denoise of %d pixels, budget %d: cost %.6g", len(frame),
            noise_total, report.best_energy)
    diag = [{'start': 0, 'size': len(frame), 'budget': int(noise_total),
        'energy': report.best_energy,
        'iterations': sum(o.iterations_used for o in report.per_restart)}]
    return _result(frame, boundary, report.best, diag, 1,
            [report.best_energy], report)


def block_layout(length, block_size, offset=0):
    """[start, stop) segments covering range(length)

    boundaries fall at offset + k * block_size; segments shorter than
    MIN_BLOCK merge into a neighbor (the first into its successor, the rest
    into their predecessor).
    """
    cuts = sorted({0, length} |
            set(range(offset % block_size or block_size, length, block_size)))
    segments = [[a, b] for a, b in zip(cuts, cuts[1:])]

    while len(segments) > 1 and segments[0][1] - segments[0][0] < MIN_BLOCK:
        segments[1][0] = segments[0][0]
        del segments[0]
    merged = [segments[0]]
    for seg in segments[1:]:
        if seg[1] - seg[0] < MIN_BLOCK:
            merged[-1][1] = seg[1]
        else:
            merged.append(seg)
    return [tuple(s) for s in merged]


def denoise_1d_blocked(frame, noise_total, block_size, passes=1,
        solver_config=None, budget_policy=BudgetPolicy.PROPORTIONAL):
    """noise reversal on blocks, repeated on shifted blocks

    the first pass splits the budget over blocks by `budget_policy` and
    starts every block from a uniform noise estimate; every later pass shifts
    the block boundaries by half a block and uses the current noise field's
    sums over the new blocks as their budgets.

    a block's energy carries the residual terms straddling its edges, with
    the pixels outside held at their current estimate. even-numbered blocks
    are solved concurrently, then odd-numbered ones against the updated
    field. after the first pass a block's result is only kept when it lowers
    that energy, so the frame cost never rises from one pass to the next.
    """
    if block_size < MIN_BLOCK:
        raise InputError("block size must be at least %d" % MIN_BLOCK)
    if passes < 1:
        raise InputError("passes must be at least 1")
    config = solver_config or SolverConfig()
    P = len(frame)
    noise = None
    diagnostics = []
    trace = []

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        for p in range(passes):
            layout = block_layout(P, block_size, p * (block_size // 2))
            guarded = noise is not None
            if not guarded:
                budgets = allocate_budget(
                        [frame.counts[a:b].sum() for a, b in layout],
                        noise_total, budget_policy)
                noise = np.concatenate([largest_remainder(
                    np.full(b - a, budget / (b - a)), int(budget))
                    for (a, b), budget in zip(layout, budgets)])
            else:
                budgets = [int(noise[a:b].sum()) for a, b in layout]

            def solve(k):
                a, b = layout[k]
                poly = build_cost_form(MeasuredFrame(frame.counts[a:b]),
                        BoundaryPolicy.INTERIOR, int(budgets[k]))
                poly = augment_block_edges(poly, frame, noise, a, b)
                report = mean_field_solve(poly, _unit_config(config, p, k))
                return report, evaluate(poly, noise[a:b])

            outcomes = [None] * len(layout)
            for parity in (0, 1):
                units = range(parity, len(layout), 2)
                for k, (report, current) in zip(units,
                        pool.map(solve, units)):
                    a, b = layout[k]
                    accepted = not guarded or report.best_energy < current
                    if accepted:
                        noise[a:b] = report.best
                    outcomes[k] = report, current, accepted

            for (a, b), budget, (report, current, accepted) in zip(layout,
                    budgets, outcomes):
                diagnostics.append({'pass': p, 'start': a, 'size': b - a,
                    'budget': int(budget),
                    'energy': report.best_energy if accepted else current,
                    'accepted': accepted,
                    'iterations': sum(o.iterations_used
                        for o in report.per_restart)})

            cost = residual_cost(frame, BoundaryPolicy.INTERIOR, noise)
            trace.append(cost)
            log.info("blocked pass %d: %d blocks, cost %.6g", p, len(layout),
                    cost)

    return _result(frame, BoundaryPolicy.INTERIOR, noise, diagnostics,
            passes, trace, outcomes[-1][0])


def _neighbor_context(recovered, c, weight):
    cols = recovered.shape[1]
    return CrossColumnContext(
            recovered[:, c - 1] if c > 0 else None,
            recovered[:, c + 1] if c + 1 < cols else None,
            weight)


def _cross_term(recovered, c, weight):
    ref = _neighbor_context(recovered, c, weight).reference(recovered.shape[0])
    diff = recovered[:, c] - ref
    return weight * float(diff @ diff)


def _cross_terms(image, recovered, weight):
    if image.cols < 2 or weight == 0:
        return 0.0
    return sum(_cross_term(recovered, c, weight) for c in range(image.cols))


def _touching(image, noise, recovered, c, boundary, weight):
    "the objective terms that depend on column c"
    total = residual_cost(image.column(c), boundary, noise[:, c])
    if weight:
        total += sum(_cross_term(recovered, k, weight)
                for k in (c - 1, c, c + 1) if 0 <= k < image.cols)
    return total


def _objective(image, noise, boundary, weight):
    recovered = image.counts - noise
    columns = sum(residual_cost(image.column(c), boundary, noise[:, c])
            for c in range(image.cols))
    return columns + _cross_terms(image, recovered, weight)


def denoise_2d(image, noise_total, sweeps=3,
        budget_policy=BudgetPolicy.PROPORTIONAL, cross_column_weight=1.0,
        solver_config=None, boundary=BoundaryPolicy.INTERIOR):
    """column-by-column noise reversal of an image

    per-column budgets are fixed up front by `budget_policy`; each column
    starts from a uniform noise estimate. a sweep visits columns left to
    right, re-solving each against the current recovered estimates of its
    neighbors (already updated on the left, from the previous sweep on the
    right). a re-solve is only kept when it lowers the objective terms that
    involve the column, its residual and the cross terms of it and its
    neighbors, so the objective never rises from one sweep to the next.
    """
    if sweeps < 1:
        raise InputError("sweeps must be at least 1")
    if not np.isfinite(cross_column_weight) or cross_column_weight < 0:
        raise InputError("cross-column weight must be finite and >= 0")
    boundary = BoundaryPolicy(boundary)
    config = solver_config or SolverConfig()
    R, Q = image.rows, image.cols

    if Q == 1:
        # no neighbors, nothing for further sweeps to change
        single = denoise_1d(image.column(0), noise_total, boundary, config)
        return DenoiseResult(single.noise_field.reshape(R, 1),
                single.recovered.reshape(R, 1), single.final_cost,
                single.diagnostics, 1, single.objective_trace,
                single.last_report)

    budgets = allocate_budget(image.counts.sum(axis=0), noise_total,
            budget_policy)
    noise = np.zeros((R, Q), dtype=np.int64)
    for c in range(Q):
        noise[:, c] = largest_remainder(
                np.full(R, budgets[c] / R), int(budgets[c]))
    recovered = image.counts - noise

    trace = [_objective(image, noise, boundary, cross_column_weight)]
    diagnostics = []
    report = None
    for s in range(sweeps):
        for c in range(Q):
            column = image.column(c)
            poly = build_cost_form(column, boundary, int(budgets[c]))
            poly = augment_cross_column(poly, column, _neighbor_context(
                    recovered, c, cross_column_weight))
            report = mean_field_solve(poly, _unit_config(config, s, c))
            before = _touching(image, noise, recovered, c, boundary,
                    cross_column_weight)
            kept = noise[:, c].copy()
            noise[:, c] = report.best
            recovered[:, c] = image.counts[:, c] - report.best
            after = _touching(image, noise, recovered, c, boundary,
                    cross_column_weight)
            accepted = after < before
            if not accepted:
                noise[:, c] = kept
                recovered[:, c] = image.counts[:, c] - kept
            diagnostics.append({'sweep': s, 'column': c,
                'size': R, 'budget': int(budgets[c]),
                'energy': report.best_energy, 'accepted': accepted,
                'iterations': sum(o.iterations_used
                    for o in report.per_restart)})
        trace.append(_objective(image, noise, boundary, cross_column_weight))
        log.info("sweep %d of %d: objective %.6g", s + 1, sweeps, trace[-1])

    if int(noise.sum()) != noise_total:
        raise ContractViolation("noise field lost budget: %d != %d" %
                (noise.sum(), noise_total))
    return DenoiseResult(noise, image.counts - noise, trace[-1], diagnostics,
            sweeps, trace, report)


def check_hardware_profile(target, profile=HardwareProfile()):
    """warnings for instances the photonic machine couldn't take as is

    `target` is a SumConstrainedPolynomial or a DenoiseResult. modes are the
    variables of one solve; photons per mode are the noise counts.

    :returns: list of warning strings, empty when the instance fits
    """
    warnings = []
    if isinstance(target, DenoiseResult):
        modes = max((d['size'] for d in target.diagnostics),
                default=target.noise_field.shape[0])
        field_ = np.asarray(target.noise_field)
    else:
        modes = target.num_vars
        field_ = None
        if target.sum_budget > profile.max_photons_per_mode * modes:
            warnings.append("budget %d cannot fit %d modes of %d photons" %
                    (target.sum_budget, modes, profile.max_photons_per_mode))

    if modes > profile.max_modes:
        warnings.append("%d modes exceeds %d modes" %
                (modes, profile.max_modes))
    if field_ is not None:
        for pixel in np.argwhere(field_ > profile.max_photons_per_mode):
            where = tuple(int(i) for i in pixel)
            warnings.append("pixel %s holds %d photons, more than %d" % (
                where[0] if len(where) == 1 else where,
                field_[tuple(pixel)], profile.max_photons_per_mode))

    for w in warnings:
        log.warning("hardware profile: %s", w)
    return warnings
