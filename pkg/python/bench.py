#!/usr/bin/env python

"""
desk-scale acceptance runs

    python bench.py            every check
    python bench.py 3 5        just checks 3 and 5

each check prints one line with its verdict, its figure of merit and the
wall time against its time limit. exits non-zero if any check fails.
checks in KNOWN_GAPS print "gap" instead of failing.
"""

import statistics
import string
import sys
import time

import numpy as np
from scipy import stats

from noisereversal import (datagen, metrics, pipeline, smoothness, solver)
from noisereversal.smoothness import BoundaryPolicy, MeasuredFrame
from noisereversal.solver import SolverConfig


PERIODIC = BoundaryPolicy.PERIODIC
INTERIOR = BoundaryPolicy.INTERIOR


def mapping_equivalence():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        frame = MeasuredFrame(rng.integers(0, 101, 50))
        N = int(rng.integers(0, 1000))
        poly = smoothness.build_cost_form(frame, PERIODIC, N)
        noise = rng.multinomial(N, np.full(50, 1 / 50), size=100)
        mapped = poly.energies(noise)
        for row, energy in zip(noise, mapped):
            direct = smoothness.residual_cost(frame, PERIODIC, row)
            worst = max(worst, abs(energy - direct) / max(1.0, abs(direct)))
    return worst <= 1e-9, "worst relative error %.2e" % worst


def closed_form():
    rng = np.random.default_rng(2)
    ok = True
    for _ in range(50):
        P = int(rng.integers(5, 40))
        frame = MeasuredFrame(rng.integers(0, 101, P))
        poly = smoothness.build_cost_form(frame, PERIODIC, 0)
        closed = smoothness.interior_coefficients(frame, PERIODIC)
        ok &= bool(np.allclose(poly.linear, -closed.D, rtol=0, atol=1e-9))
        weights = dict(((i, j), w) for i, j, w in poly.quadratic)
        for i in range(P):
            for off, w in ((0, 1.5), (1, -2.0), (2, 0.5)):
                key = tuple(sorted((i, (i + off) % P)))
                ok &= weights.get(key) == w
    return ok, "50 frames"


def _shifted_gap(found, best):
    "relative gap once both energies are shifted so the optimum is >= 1"
    shift = max(0.0, 1.0 - best)
    return (found + shift) / (best + shift) - 1.0


def oracle_optimality():
    rng = np.random.default_rng(3)
    hits, worst = 0, 0.0
    for _ in range(100):
        P, N = int(rng.integers(4, 9)), int(rng.integers(4, 11))
        poly = smoothness.build_cost_form(
                MeasuredFrame(rng.integers(0, 21, P)), INTERIOR, N)
        exact = solver.brute_force(poly)
        found = solver.mean_field_solve(poly, SolverConfig())
        if found.best_energy <= exact.energy + 1e-9:
            hits += 1
        worst = max(worst, _shifted_gap(found.best_energy, exact.energy))
    return hits >= 90 and worst <= 0.05, \
            "%d/100 optimal, worst gap %.3f" % (hits, worst)


def _factor_1d(fraction, seed):
    truth = datagen.decaying_sinusoid_1d(200, 100, 0.4, 0.02)
    record = datagen.poisson_corrupt(truth,
            datagen.CorruptionSpec(fraction, seed))
    result = pipeline.denoise_1d(record.measured, record.true_total,
            INTERIOR, SolverConfig(seed=seed))
    assert int(result.noise_field.sum()) == record.true_total
    true_cost = smoothness.residual_cost(record.measured, INTERIOR,
            record.true_noise)
    return metrics.compute_metrics(truth, record.measured,
            result).improvement_factor, result.final_cost, true_cost


def recovery_1d():
    floors = {0.1: 2.0, 0.2: 2.0, 0.4: 1.5, 0.8: 1.1}
    runs = dict((f, [_factor_1d(f, s) for s in range(10)]) for f in floors)
    medians = dict((f, statistics.median(r[0] for r in runs[f]))
            for f in floors)
    ok = all(medians[f] >= floors[f] for f in floors)
    found, true = runs[0.1][0][1:]
    return ok, " ".join("%s:%.2f" % (f, medians[f]) for f in sorted(medians)) \
            + "; seed 0 at 0.1: found cost %.1f, true-noise cost %.1f" % (
                found, true)


def _scores_2d(fraction, seed, trim=0):
    truth = datagen.decaying_sinusoid_2d(50, 100, 100, 0.4, 0.2, 0.02, 0.01)
    record = datagen.poisson_corrupt(truth,
            datagen.CorruptionSpec(fraction, seed))
    result = pipeline.denoise_2d(record.measured, record.true_total, 3,
            pipeline.BudgetPolicy.PROPORTIONAL, 1.0, SolverConfig(seed=seed))
    assert int(result.noise_field.sum()) == record.true_total
    return [metrics.compute_metrics(truth, record.measured, result,
        k).improvement_factor for k in (0, trim)]


def recovery_2d():
    median = statistics.median(_scores_2d(0.5, s)[0] for s in range(5))
    return median >= 2.0, "median factor %.2f" % median


def extreme_noise():
    scores = [_scores_2d(2.0, s, trim=5) for s in range(5)]
    whole = statistics.median(s[0] for s in scores)
    inner = statistics.median(s[1] for s in scores)
    return whole >= 1.0 and inner >= 1.2, \
            "median factor %.2f, trimmed %.2f" % (whole, inner)


def conservation_and_determinism():
    frame = datagen.decaying_sinusoid_1d(60, 100, 0.4, 0.02)
    record = datagen.poisson_corrupt(frame, datagen.CorruptionSpec(0.2, 4))
    config = SolverConfig(seed=4)
    runs = [pipeline.denoise_1d_blocked(record.measured, record.true_total,
        20, 2, config) for _ in range(2)]
    same = np.array_equal(runs[0].noise_field, runs[1].noise_field)
    kept = int(runs[0].noise_field.sum()) == record.true_total
    return same and kept, "blocked rerun identical, budget kept"


def poisson_validity():
    worst_p, worst_d = 1.0, 0.0
    for lam in (1, 5, 20):
        draws = datagen.noise_stream(lam).poisson(lam, 10000)
        worst_d = max(worst_d, abs(draws.var() / draws.mean() - 1))
        lo = int(stats.poisson.ppf(0.001, lam))
        hi = int(stats.poisson.ppf(0.999, lam))
        ks = np.arange(lo + 1, hi)
        expected = np.concatenate(([stats.poisson.cdf(lo, lam)],
            stats.poisson.pmf(ks, lam), [stats.poisson.sf(hi - 1, lam)]))
        observed = np.concatenate(([(draws <= lo).sum()],
            [(draws == k).sum() for k in ks], [(draws >= hi).sum()]))
        expected = expected / expected.sum() * observed.sum()
        worst_p = min(worst_p, stats.chisquare(observed, expected).pvalue)
    return worst_d <= 0.1 and worst_p > 0.001, \
            "dispersion off by %.3f, min p %.3g" % (worst_d, worst_p)


def blocked_consistency():
    ratios = []
    truth = datagen.decaying_sinusoid_1d(100, 100, 0.4, 0.02)
    for seed in range(10):
        record = datagen.poisson_corrupt(truth,
                datagen.CorruptionSpec(0.2, seed))
        config = SolverConfig(seed=seed)
        whole = pipeline.denoise_1d(record.measured, record.true_total,
                INTERIOR, config)
        blocked = pipeline.denoise_1d_blocked(record.measured,
                record.true_total, 50, 2, config)
        ratios.append(blocked.final_cost / max(whole.final_cost, 1e-12))
    median = statistics.median(ratios)
    return median <= 1.25, "median cost ratio %.3f" % median


checks = [
    (1, "mapping equivalence", mapping_equivalence, 10),
    (2, "closed-form coefficients", closed_form, 1),
    (3, "oracle optimality", oracle_optimality, 60),
    (4, "1d recovery", recovery_1d, 300),
    (5, "2d recovery", recovery_2d, 600),
    (6, "extreme noise", extreme_noise, 600),
    (7, "conservation and determinism", conservation_and_determinism, 60),
    (8, "poisson sampler", poisson_validity, 5),
    (9, "blocked consistency", blocked_consistency, 120),
]


# the smoothness optimum flattens the sinusoid peaks, see DESIGN.md
KNOWN_GAPS = {4}


def padright(s, upto, padchar=" "):
    return s + (padchar * (upto - len(s)))


if __name__ == '__main__':
    wanted = set(int(a) for a in sys.argv[1:])
    tmpl = string.Template(
        "$num $name $verdict  $detail  ($elapsed s of $limit s)")
    failed = 0
    for num, name, check, limit in checks:
        if wanted and num not in wanted:
            continue
        start = time.time()
        ok, detail = check()
        elapsed = time.time() - start
        ok = ok and elapsed < limit
        gap = not ok and num in KNOWN_GAPS
        failed += not ok and not gap
        print(tmpl.substitute(
            num=num,
            name=padright(name, 30),
            verdict="ok  " if ok else "gap " if gap else "FAIL",
            detail=detail,
            elapsed="%.1f" % elapsed,
            limit=limit,
        ))
    sys.exit(1 if failed else 0)
