#!/usr/bin/env python

import contextlib
from dataclasses import replace
import io
import itertools
import json
import math
import os
import shutil
import tempfile
import unittest
from unittest import mock

import numpy as np
from scipy import stats

import noisereversal
from noisereversal import (apportion, cli, datagen, metrics, pipeline,
        polynomial, schemas, serialization, smoothness, solver)
from noisereversal.errors import (ContractViolation, InputError,
        InvalidDocument, NumericOverflow, SolverError)
from noisereversal.pipeline import (Image2D, DenoiseResult, BudgetPolicy,
        HardwareProfile)
from noisereversal.polynomial import SumConstrainedPolynomial
from noisereversal.smoothness import (MeasuredFrame, BoundaryPolicy,
        CrossColumnContext)
from noisereversal.solver import SolverConfig


PERIODIC = BoundaryPolicy.PERIODIC
INTERIOR = BoundaryPolicy.INTERIOR

FAST = SolverConfig(restarts=8, max_iterations=300)


def random_poly(rng, P, N, cubic=False):
    quadratic = [(i, j, rng.uniform(-1, 1))
            for i in range(P) for j in range(i, P) if rng.random() < 0.6]
    cubes = []
    if cubic:
        cubes = [(rng.integers(P), rng.integers(P), rng.integers(P),
            rng.uniform(-0.5, 0.5)) for _ in range(P)]
    return SumConstrainedPolynomial.from_terms(P, N, rng.uniform(-3, 3),
            rng.uniform(-2, 2, P), quadratic, cubes)


def random_frame(rng, P, high=100):
    return MeasuredFrame(rng.integers(0, high + 1, P))


class NoiseReversalTestCase(unittest.TestCase):
    def assertClose(self, a, b, rel=1e-9):
        tol = rel * max(1.0, abs(a), abs(b))
        self.assertTrue(abs(a - b) <= tol, "%r != %r" % (a, b))


##
## table-driven energy examples
##

def _make_test(name, build, point, expected):
    def test_evaluate(self):
        self.assertClose(polynomial.evaluate(build(), point), expected)

    def test_batched_matches(self):
        poly = build()
        batch = poly.energies(np.array([point, point], dtype=float))
        self.assertClose(float(batch[0]), expected)
        self.assertClose(float(batch[1]), expected)

    return type(name + 'Test', (NoiseReversalTestCase,), {
        'test_evaluate': test_evaluate,
        'test_batched_matches': test_batched_matches,
    })


def generate(targets):
    globals()['energy_examples'] = targets
    for title, (build, point, expected) in targets.items():
        globals()[title + 'Test'] = _make_test(title, build, point, expected)


def _poly(*args, **kwargs):
    return lambda: SumConstrainedPolynomial.from_terms(*args, **kwargs)


def _mapped(counts, boundary, total):
    return lambda: smoothness.build_cost_form(
            MeasuredFrame(counts), boundary, total)


generate({
    'EmptyEnergy': (_poly(3, 4, constant=2.5), [1, 2, 1], 2.5),
    'LinearAndPair': (_poly(2, 7, linear=[1, 2], quadratic=[(0, 1, 1)]),
        [3, 4], 23.0),
    'SwappedPairIndices': (_poly(2, 7, linear=[1, 2], quadratic=[(1, 0, 1)]),
        [3, 4], 23.0),
    'DiagonalSquare': (_poly(2, 2, quadratic=[(0, 0, 1.5)]), [2, 0], 6.0),
    'CubicMonomial': (_poly(3, 6, cubic=[(2, 0, 1, 0.5)]), [1, 2, 3], 3.0),
    'FlatPeriodicFrame': (_mapped([2, 2, 2, 2, 2], PERIODIC, 5),
        [1, 1, 1, 1, 1], 0.0),
    'SingleInteriorTermSmooth': (_mapped([0, 2, 0], INTERIOR, 2),
        [0, 2, 0], 0.0),
    'SingleInteriorTermRough': (_mapped([0, 2, 0], INTERIOR, 2),
        [1, 0, 1], 9.0),
})


##
## polynomial core
##

class PolynomialTest(NoiseReversalTestCase):
    def test_gradient_examples(self):
        poly = SumConstrainedPolynomial.from_terms(2, 2,
                quadratic=[(0, 0, 1.5)])
        np.testing.assert_allclose(polynomial.gradient(poly, [2, 0]), [6, 0])
        zero = SumConstrainedPolynomial.from_terms(4, 3)
        np.testing.assert_array_equal(
                polynomial.gradient(zero, [1, 1, 1, 0]), np.zeros(4))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        for cubic in (False, True):
            poly = random_poly(rng, 6, 10, cubic)
            point = rng.uniform(0.5, 4, 6)
            h = 1e-5
            numeric = []
            for i in range(6):
                up, down = point.copy(), point.copy()
                up[i] += h
                down[i] -= h
                numeric.append((polynomial.evaluate(poly, up) -
                    polynomial.evaluate(poly, down)) / (2 * h))
            np.testing.assert_allclose(polynomial.gradient(poly, point),
                    numeric, rtol=1e-6, atol=1e-5)

    def test_contract_violations(self):
        poly = SumConstrainedPolynomial.from_terms(3, 2)
        self.assertRaises(ContractViolation, polynomial.evaluate, poly, [1, 1])
        self.assertRaises(ContractViolation, polynomial.evaluate, poly,
                [3, -1, 0])
        self.assertRaises(ContractViolation, polynomial.gradient, poly,
                [[1, 1, 0]])

    def test_overflow(self):
        poly = SumConstrainedPolynomial.from_terms(1, 1, linear=[1e308])
        with np.errstate(over="ignore"):
            self.assertRaises(NumericOverflow, polynomial.evaluate, poly,
                    [1e10])

    def test_entry_order_does_not_matter(self):
        rng = np.random.default_rng(8)
        poly = random_poly(rng, 5, 6, cubic=True)
        quadratic = [(j, i, w) for i, j, w in reversed(poly.quadratic)]
        cubic = [(k, i, j, w) for i, j, k, w in reversed(poly.cubic)]
        shuffled = SumConstrainedPolynomial.from_terms(5, 6, poly.constant,
                poly.linear, quadratic, cubic)
        point = [1, 0, 2, 3, 0]
        self.assertClose(polynomial.evaluate(poly, point),
                polynomial.evaluate(shuffled, point))

    def test_duplicate_entries_merge(self):
        poly = SumConstrainedPolynomial.from_terms(3, 0,
                quadratic=[(1, 0, 1.0), (0, 1, 2.0)])
        self.assertEqual(poly.quadratic, [(0, 1, 3.0)])
        self.assertEqual(polynomial.validate(poly), [])

    def test_combine_is_linear(self):
        rng = np.random.default_rng(11)
        a, b = random_poly(rng, 4, 5), random_poly(rng, 4, 5, cubic=True)
        mixed = a.combine(b, 2.0, -3.0)
        for point in ([5, 0, 0, 0], [1, 2, 1, 1], [0, 0, 2, 3]):
            self.assertClose(polynomial.evaluate(mixed, point),
                    2 * polynomial.evaluate(a, point) -
                    3 * polynomial.evaluate(b, point))
        other = SumConstrainedPolynomial.from_terms(4, 6)
        self.assertRaises(ContractViolation, a.combine, other)

    def test_validate_well_formed(self):
        rng = np.random.default_rng(1)
        self.assertEqual(polynomial.validate(random_poly(rng, 5, 3, True)),
                [])

    def test_validate_index_out_of_range(self):
        poly = SumConstrainedPolynomial(2, 1, 0.0, np.zeros(2),
                np.array([[0, 2]]), np.array([1.0]))
        problems = polynomial.validate(poly)
        self.assertTrue(any(p.startswith("index out of range")
            for p in problems), problems)

    def test_validate_non_finite(self):
        poly = SumConstrainedPolynomial(2, 1, 0.0, np.array([np.nan, 0.0]))
        problems = polynomial.validate(poly)
        self.assertTrue(any(p.startswith("non-finite coefficient")
            for p in problems), problems)

    def test_validate_order_and_duplicates(self):
        poly = SumConstrainedPolynomial(3, 1, 0.0, np.zeros(3),
                np.array([[1, 0], [1, 0]]), np.array([1.0, 2.0]))
        problems = polynomial.validate(poly)
        self.assertIn("non-canonical index order: quadratic", problems)
        self.assertIn("duplicate monomial: quadratic", problems)

    def test_immutable(self):
        poly = SumConstrainedPolynomial.from_terms(2, 1, linear=[1, 2])
        with self.assertRaises(ValueError):
            poly.linear[0] = 5.0

    def test_document(self):
        rng = np.random.default_rng(5)
        poly = random_poly(rng, 4, 6, cubic=True)
        text = serialization.dumps(poly)
        again = serialization.loads(text, "polynomial")
        point = [2, 1, 0, 3]
        self.assertClose(polynomial.evaluate(again, point),
                polynomial.evaluate(poly, point))

        doc = polynomial.to_document(poly)
        doc['quadratic'][0] = [0, "one", 1.0]
        with self.assertRaises(InvalidDocument) as cm:
            polynomial.from_document(doc)
        self.assertEqual(cm.exception.path, "quadratic[0][1]")


##
## smoothness mapping
##

class SmoothnessTest(NoiseReversalTestCase):
    def test_residual_cost_examples(self):
        flat = MeasuredFrame([7] * 6)
        self.assertEqual(smoothness.residual_cost(flat, PERIODIC,
            np.zeros(6)), 0.0)
        spike = MeasuredFrame([0, 2, 0])
        self.assertEqual(smoothness.residual_cost(spike, INTERIOR,
            [0, 2, 0]), 0.0)
        self.assertEqual(smoothness.residual_cost(spike, INTERIOR,
            [1, 0, 1]), 9.0)

    def test_zero_noise_matches_residual(self):
        rng = np.random.default_rng(2)
        for boundary in (PERIODIC, INTERIOR):
            frame = random_frame(rng, 20)
            poly = smoothness.build_cost_form(frame, boundary, 0)
            self.assertClose(polynomial.evaluate(poly, np.zeros(20)),
                    smoothness.residual_cost(frame, boundary, np.zeros(20)))

    def test_mapping_equivalence(self):
        rng = np.random.default_rng(20)
        for boundary in (PERIODIC, INTERIOR):
            for _ in range(20):
                frame = random_frame(rng, 50)
                N = int(rng.integers(0, 500))
                poly = smoothness.build_cost_form(frame, boundary, N)
                for _ in range(20):
                    noise = rng.multinomial(N, np.full(50, 1 / 50))
                    self.assertClose(polynomial.evaluate(poly, noise),
                            smoothness.residual_cost(frame, boundary, noise))

    def test_small_periodic_frame(self):
        frame = MeasuredFrame([4, 1, 3])
        poly = smoothness.build_cost_form(frame, PERIODIC, 2)
        for noise in ([2, 0, 0], [0, 1, 1], [1, 0, 1]):
            self.assertClose(polynomial.evaluate(poly, noise),
                    smoothness.residual_cost(frame, PERIODIC, noise))

    def test_frames_need_three_pixels(self):
        self.assertRaises(InputError, MeasuredFrame, [1, 2])
        self.assertRaises(InputError, MeasuredFrame, [1, -2, 3])
        self.assertRaises(InputError, MeasuredFrame, [[1, 2, 3]])

    def test_closed_form_periodic(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            frame = random_frame(rng, 12)
            poly = smoothness.build_cost_form(frame, PERIODIC, 10)
            closed = smoothness.interior_coefficients(frame, PERIODIC)
            np.testing.assert_allclose(poly.linear[closed.indices],
                    -closed.D, rtol=1e-12, atol=1e-9)

            expected = {}
            for i in range(12):
                for off, w in ((0, closed.diag), (1, 2 * closed.off1),
                        (2, 2 * closed.off2)):
                    key = tuple(sorted((i, (i + off) % 12)))
                    expected[key] = w
            got = dict(((i, j), w) for i, j, w in poly.quadratic)
            self.assertEqual(sorted(got), sorted(expected))
            for key, w in expected.items():
                self.assertAlmostEqual(got[key], w, places=12)
            self.assertEqual(expected[(0, 0)], 1.5)
            self.assertEqual(expected[(0, 1)], -2.0)
            self.assertEqual(expected[(0, 2)], 0.5)

    def test_closed_form_interior(self):
        rng = np.random.default_rng(10)
        frame = random_frame(rng, 15)
        poly = smoothness.build_cost_form(frame, INTERIOR, 3)
        closed = smoothness.interior_coefficients(frame)
        np.testing.assert_array_equal(closed.indices, np.arange(2, 13))
        np.testing.assert_allclose(poly.linear[2:13], -closed.D, atol=1e-9)

    def test_closed_form_examples(self):
        closed = smoothness.interior_coefficients(MeasuredFrame([0, 0, 4, 0, 0]))
        np.testing.assert_array_equal(closed.indices, [2])
        self.assertEqual(closed.D[0], 12.0)
        flat = smoothness.interior_coefficients(MeasuredFrame([9] * 8))
        np.testing.assert_array_equal(flat.D, np.zeros(4))
        self.assertRaises(InputError, smoothness.interior_coefficients,
                MeasuredFrame([1, 2, 3, 4]))

    def test_translation_invariance(self):
        rng = np.random.default_rng(4)
        counts = rng.integers(0, 50, 16)
        for boundary in (PERIODIC, INTERIOR):
            base = smoothness.build_cost_form(MeasuredFrame(counts),
                    boundary, 4)
            shifted = smoothness.build_cost_form(MeasuredFrame(counts + 37),
                    boundary, 4)
            np.testing.assert_allclose(base.linear, shifted.linear,
                    atol=1e-9)
            self.assertEqual(base.quadratic, shifted.quadratic)

    def test_augment_weight_zero(self):
        frame = MeasuredFrame([3, 5, 4, 6])
        poly = smoothness.build_cost_form(frame, INTERIOR, 2)
        ctx = CrossColumnContext(np.array([1, 1, 1, 1]), None, 0.0)
        self.assertIs(smoothness.augment_cross_column(poly, frame, ctx), poly)

    def test_augment_adds_cross_term(self):
        frame = MeasuredFrame([3, 5, 4, 6, 2])
        poly = smoothness.build_cost_form(frame, INTERIOR, 4)
        left = np.array([2, 4, 4, 5, 1])
        right = np.array([4, 4, 2, 5, 3])
        ctx = CrossColumnContext(left, right, 0.75)
        augmented = smoothness.augment_cross_column(poly, frame, ctx)
        reference = (left + right) / 2.0
        for noise in ([4, 0, 0, 0, 0], [1, 1, 1, 1, 0], [0, 0, 2, 0, 2]):
            diff = frame.counts - np.array(noise) - reference
            self.assertClose(polynomial.evaluate(augmented, noise),
                    polynomial.evaluate(poly, noise) +
                    0.75 * float(diff @ diff))

    def test_context_needs_a_neighbor(self):
        frame = MeasuredFrame([1, 2, 3])
        poly = smoothness.build_cost_form(frame, INTERIOR, 0)
        self.assertRaises(InputError, smoothness.augment_cross_column, poly,
                frame, CrossColumnContext())
        self.assertRaises(ContractViolation, smoothness.augment_cross_column,
                poly, frame, CrossColumnContext(np.zeros(4)))

    def test_block_edges_complete_the_frame(self):
        rng = np.random.default_rng(5)
        frame = random_frame(rng, 23, 60)
        noise = rng.multinomial(40, np.full(23, 1 / 23))
        for start, stop in ((0, 7), (7, 15), (15, 23), (4, 20)):
            block = MeasuredFrame(frame.counts[start:stop])
            budget = int(noise[start:stop].sum())
            poly = smoothness.augment_block_edges(
                    smoothness.build_cost_form(block, INTERIOR, budget),
                    frame, noise, start, stop)
            for _ in range(3):
                local = rng.multinomial(budget,
                        np.full(stop - start, 1 / (stop - start)))
                full = noise.copy()
                full[start:stop] = local
                x = frame.counts - full
                r = x[1:-1] - (x[:-2] + x[2:]) / 2.0
                # residual t sits at r[t - 1] and touches t - 1, t, t + 1
                touching = r[max(0, start - 2):stop]
                self.assertClose(polynomial.evaluate(poly, local),
                        float(touching @ touching))

    def test_whole_frame_block_unchanged(self):
        frame = MeasuredFrame([3, 5, 4, 6, 2, 7])
        poly = smoothness.build_cost_form(frame, INTERIOR, 5)
        self.assertIs(smoothness.augment_block_edges(poly, frame,
            np.zeros(6), 0, 6), poly)
        self.assertRaises(ContractViolation, smoothness.augment_block_edges,
                poly, frame, np.zeros(6), 0, 5)


##
## solvers
##

class RoundingTest(NoiseReversalTestCase):
    def test_largest_remainder_tie_break(self):
        np.testing.assert_array_equal(
                solver.round_to_integers([1.6, 1.6, 0.8], 4), [2, 1, 1])

    def test_integers_unchanged(self):
        np.testing.assert_array_equal(
                solver.round_to_integers([3.0, 0.0, 2.0], 5), [3, 0, 2])

    def test_wrong_total(self):
        self.assertRaises(ContractViolation, solver.round_to_integers,
                [1.0, 1.0], 5)
        self.assertRaises(ContractViolation, solver.round_to_integers,
                [-1.0, 3.0], 2)

    def test_exact_fractions(self):
        shares = apportion.exact_shares([1, 1, 1], 10)
        np.testing.assert_array_equal(
                apportion.largest_remainder(shares, 10), [4, 3, 3])

    def test_sums_hold(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            total = int(rng.integers(0, 100))
            point = rng.dirichlet(np.ones(7)) * total
            rounded = solver.round_to_integers(point, total)
            self.assertEqual(int(rounded.sum()), total)
            self.assertTrue((np.abs(rounded - point) < 1).all())


class LocalSearchTest(NoiseReversalTestCase):
    def test_single_move(self):
        poly = SumConstrainedPolynomial.from_terms(2, 1, linear=[0, -1])
        np.testing.assert_array_equal(
                solver.integer_local_search(poly, [1, 0], 10), [0, 1])

    def test_local_optimum_unchanged(self):
        poly = SumConstrainedPolynomial.from_terms(2, 1, linear=[0, -1])
        np.testing.assert_array_equal(
                solver.integer_local_search(poly, [0, 1], 10), [0, 1])

    def test_move_limit(self):
        poly = SumConstrainedPolynomial.from_terms(3, 4, linear=[0, 0, -1])
        out = solver.integer_local_search(poly, [4, 0, 0], 2)
        self.assertEqual(int(out.sum()), 4)
        self.assertEqual(int(out[2]), 2)

    def test_never_worse(self):
        rng = np.random.default_rng(12)
        for cubic in (False, True):
            poly = random_poly(rng, 6, 9, cubic)
            start = rng.multinomial(9, np.full(6, 1 / 6))
            out = solver.integer_local_search(poly, start, 100)
            self.assertEqual(int(out.sum()), 9)
            self.assertLessEqual(polynomial.evaluate(poly, out),
                    polynomial.evaluate(poly, start) + 1e-12)

    def test_infeasible_start(self):
        poly = SumConstrainedPolynomial.from_terms(2, 3)
        with self.assertRaises(ContractViolation) as cm:
            solver.integer_local_search(poly, [1, 1], 5)
        self.assertIn("infeasible start", str(cm.exception))

    def test_dense_scan_matches_row_scan(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            poly = random_poly(rng, 7, 12)
            start = rng.multinomial(12, np.full(7, 1 / 7))
            dense = solver.integer_local_search(poly, start, 50)
            with mock.patch.object(solver, "_DENSE_MOVES", 0):
                rows = solver.integer_local_search(poly, start, 50)
            np.testing.assert_array_equal(dense, rows)


class BruteForceTest(NoiseReversalTestCase):
    def test_spike(self):
        poly = smoothness.build_cost_form(MeasuredFrame([0, 2, 0]),
                INTERIOR, 2)
        best = solver.brute_force(poly)
        np.testing.assert_array_equal(best.assignment, [0, 2, 0])
        self.assertEqual(best.energy, 0.0)
        self.assertEqual(best.count, 6)

    def test_zero_budget(self):
        poly = SumConstrainedPolynomial.from_terms(4, 0, constant=1.25,
                linear=[1, 2, 3, 4])
        best = solver.brute_force(poly)
        np.testing.assert_array_equal(best.assignment, np.zeros(4))
        self.assertEqual(best.energy, 1.25)

    def test_matches_nested_loops(self):
        rng = np.random.default_rng(13)
        poly = random_poly(rng, 5, 6)
        best = solver.brute_force(poly)
        self.assertEqual(best.count, 210)

        naive, naive_energy, seen = None, math.inf, 0
        for point in itertools.product(range(7), repeat=5):
            if sum(point) != 6:
                continue
            seen += 1
            energy = polynomial.evaluate(poly, point)
            if energy < naive_energy:
                naive, naive_energy = point, energy
        self.assertEqual(seen, 210)
        self.assertEqual(tuple(best.assignment.tolist()), naive)
        self.assertClose(best.energy, naive_energy)

    def test_lexicographic_ties(self):
        poly = SumConstrainedPolynomial.from_terms(3, 2)
        best = solver.brute_force(poly)
        np.testing.assert_array_equal(best.assignment, [0, 0, 2])

    def test_cap(self):
        poly = SumConstrainedPolynomial.from_terms(10, 10)
        with self.assertRaises(InputError) as cm:
            solver.brute_force(poly, cap=1000)
        self.assertIn("92378", str(cm.exception))


class MeanFieldTest(NoiseReversalTestCase):
    def test_linear_vertex(self):
        poly = SumConstrainedPolynomial.from_terms(3, 5, linear=[0, -1, 0])
        report = solver.mean_field_solve(poly, FAST)
        np.testing.assert_array_equal(report.best, [0, 5, 0])
        self.assertEqual(report.best_energy, -5.0)

    def test_flat_landscape(self):
        poly = SumConstrainedPolynomial.from_terms(4, 7, constant=3.0)
        report = solver.mean_field_solve(poly, FAST)
        self.assertEqual(report.best_energy, 3.0)
        self.assertEqual(int(report.best.sum()), 7)

    def test_zero_budget(self):
        poly = SumConstrainedPolynomial.from_terms(4, 0, constant=-2.0,
                linear=[1, 1, 1, 1])
        report = solver.mean_field_solve(poly, FAST)
        np.testing.assert_array_equal(report.best, np.zeros(4))
        self.assertEqual(report.best_energy, -2.0)
        self.assertEqual(report.per_restart, [])

    def test_deterministic(self):
        rng = np.random.default_rng(14)
        poly = smoothness.build_cost_form(random_frame(rng, 10, 20),
                INTERIOR, 8)
        first = solver.mean_field_solve(poly, FAST)
        second = solver.mean_field_solve(poly, FAST)
        self.assertEqual(solver.report_to_document(first),
                solver.report_to_document(second))
        other = solver.mean_field_solve(poly, FAST.derive(1))
        self.assertEqual(int(other.best.sum()), 8)

    def test_restart_bookkeeping(self):
        poly = SumConstrainedPolynomial.from_terms(4, 6,
                linear=[1, 0, 2, 1], quadratic=[(1, 1, 0.5)])
        report = solver.mean_field_solve(poly, FAST)
        self.assertEqual(len(report.per_restart), FAST.restarts)
        self.assertEqual(report.best_energy,
                min(o.final_energy for o in report.per_restart))
        for outcome in report.per_restart:
            self.assertLessEqual(outcome.iterations_used, FAST.max_iterations)
            self.assertFalse(outcome.aborted)
        self.assertTrue(len(report.energy_trace) >= 1)

    def test_relax_stays_on_simplex(self):
        rng = np.random.default_rng(24)
        poly = smoothness.build_cost_form(random_frame(rng, 9, 30), INTERIOR,
                13)
        for iterations in (1, 7, 64, 65, 200):
            points, outcomes, traces = solver._relax(poly,
                    SolverConfig(restarts=5, max_iterations=iterations))
            self.assertEqual(traces.shape, (iterations, 5))
            np.testing.assert_allclose(points.sum(axis=1), np.full(5, 13.0),
                    rtol=1e-9)
            self.assertTrue((points >= 0).all())

    def test_more_restarts_never_worse(self):
        rng = np.random.default_rng(25)
        for _ in range(5):
            poly = smoothness.build_cost_form(random_frame(rng, 8, 20),
                    INTERIOR, 9)
            few = solver.mean_field_solve(poly,
                    SolverConfig(restarts=4, max_iterations=300, seed=5))
            many = solver.mean_field_solve(poly,
                    SolverConfig(restarts=8, max_iterations=300, seed=5))
            self.assertEqual(
                    [(o.final_energy, o.iterations_used)
                        for o in few.per_restart],
                    [(o.final_energy, o.iterations_used)
                        for o in many.per_restart[:4]])
            self.assertLessEqual(many.best_energy, few.best_energy)

    def test_raw_step(self):
        config = replace(FAST, step_normalization=False)
        poly = SumConstrainedPolynomial.from_terms(3, 5, linear=[0, -1, 0])
        report = solver.mean_field_solve(poly, config)
        np.testing.assert_array_equal(report.best, [0, 5, 0])
        points, _, _ = solver._relax(poly, config)
        np.testing.assert_allclose(points.sum(axis=1), np.full(8, 5.0),
                rtol=1e-9)

    def test_agrees_with_brute_force(self):
        rng = np.random.default_rng(15)
        hits = 0
        for _ in range(20):
            P, N = int(rng.integers(4, 7)), int(rng.integers(4, 9))
            poly = smoothness.build_cost_form(random_frame(rng, P, 20),
                    INTERIOR, N)
            exact = solver.brute_force(poly)
            found = solver.mean_field_solve(poly, SolverConfig())
            self.assertGreaterEqual(found.best_energy, exact.energy - 1e-9)
            if found.best_energy <= exact.energy + 1e-9:
                hits += 1
        self.assertGreaterEqual(hits, 17)

    def test_every_restart_aborts(self):
        poly = SumConstrainedPolynomial.from_terms(2, 10,
                linear=[1e308, 1e308])
        with self.assertLogs("noisereversal.solver", "WARNING"):
            self.assertRaises(SolverError, solver.mean_field_solve, poly,
                    SolverConfig(restarts=2, max_iterations=10))

    def test_config_validation(self):
        self.assertRaises(InputError, SolverConfig(restarts=0).validate)
        self.assertRaises(InputError, SolverConfig(noise_decay=1.5).validate)
        self.assertRaises(InputError, SolverConfig(step_size=0).validate)
        self.assertRaises(InputError, SolverConfig(seed=-1).validate)
        self.assertEqual(SolverConfig().moves_for(7), 70)
        self.assertEqual(SolverConfig(seed=3).derive(1, 2),
                SolverConfig(seed=3).derive(1, 2))
        self.assertNotEqual(SolverConfig(seed=3).derive(1, 2).seed, 3)

    def test_report_document(self):
        poly = SumConstrainedPolynomial.from_terms(3, 2, linear=[1, 0, 1])
        report = solver.mean_field_solve(poly, FAST)
        doc = solver.report_to_document(report)
        self.assertNotIn('wall_time', doc)
        self.assertIn('wall_time',
                solver.report_to_document(report, with_timing=True))
        again = serialization.loads(serialization.dumps(report),
                "solve_report")
        np.testing.assert_array_equal(again.best, report.best)
        self.assertEqual(again.best_energy, report.best_energy)


##
## pipeline
##

def _allocation_test(name, totals, grand_total, policy, expected):
    def test_allocation(self):
        got = pipeline.allocate_budget(totals, grand_total, policy)
        self.assertEqual(got.tolist(), expected)
    return type(name + 'Test', (NoiseReversalTestCase,),
            {'test_allocation': test_allocation})


for _title, _case in {
    'UniformSplit': ([5, 9, 1], 6, BudgetPolicy.UNIFORM, [2, 2, 2]),
    'UniformRemainder': ([5, 9, 1], 7, BudgetPolicy.UNIFORM, [3, 2, 2]),
    'ProportionalSplit': ([30, 10], 4, BudgetPolicy.PROPORTIONAL, [3, 1]),
    'ProportionalZeroUnit': ([40, 0], 9, BudgetPolicy.PROPORTIONAL, [9, 0]),
    'ProportionalAllZero': ([0, 0, 0], 4, BudgetPolicy.PROPORTIONAL,
        [2, 1, 1]),
}.items():
    globals()[_title + 'Test'] = _allocation_test(_title, *_case)


class AllocationTest(NoiseReversalTestCase):
    def test_sums_exactly(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            totals = rng.integers(0, 1000, int(rng.integers(1, 12)))
            N = int(rng.integers(0, 10000))
            for policy in BudgetPolicy:
                got = pipeline.allocate_budget(totals, N, policy)
                self.assertEqual(int(got.sum()), N)
                self.assertTrue((got >= 0).all())

    def test_bad_input(self):
        self.assertRaises(InputError, pipeline.allocate_budget, [1], -1)
        self.assertRaises(InputError, pipeline.allocate_budget, [], 3)


class BlockLayoutTest(NoiseReversalTestCase):
    def test_layouts(self):
        self.assertEqual(pipeline.block_layout(100, 50),
                [(0, 50), (50, 100)])
        self.assertEqual(pipeline.block_layout(100, 50, 25),
                [(0, 25), (25, 75), (75, 100)])
        self.assertEqual(pipeline.block_layout(12, 5), [(0, 5), (5, 12)])
        self.assertEqual(pipeline.block_layout(12, 5, 2), [(0, 7), (7, 12)])
        self.assertEqual(pipeline.block_layout(30, 50), [(0, 30)])

    def test_covers_everything(self):
        for length in range(5, 60):
            for size in (5, 7, 10):
                for offset in (0, size // 2):
                    layout = pipeline.block_layout(length, size, offset)
                    self.assertEqual(layout[0][0], 0)
                    self.assertEqual(layout[-1][1], length)
                    for (a, b), (c, d) in zip(layout, layout[1:]):
                        self.assertEqual(b, c)
                    if length >= pipeline.MIN_BLOCK:
                        self.assertTrue(all(b - a >= pipeline.MIN_BLOCK
                            for a, b in layout))


class Denoise1DTest(NoiseReversalTestCase):
    def test_zero_budget(self):
        frame = MeasuredFrame([5, 3, 8, 1, 0, 4])
        result = pipeline.denoise_1d(frame, 0, INTERIOR, FAST)
        np.testing.assert_array_equal(result.noise_field, np.zeros(6))
        np.testing.assert_array_equal(result.recovered, frame.counts)

    def test_flat_frame(self):
        frame = MeasuredFrame([10] * 5)
        result = pipeline.denoise_1d(frame, 5, PERIODIC)
        np.testing.assert_array_equal(result.noise_field, np.ones(5))
        self.assertEqual(result.final_cost, 0.0)
        exact = solver.brute_force(
                smoothness.build_cost_form(frame, PERIODIC, 5))
        np.testing.assert_array_equal(exact.assignment, np.ones(5))

    def test_result_invariants(self):
        rng = np.random.default_rng(17)
        frame = random_frame(rng, 12, 30)
        result = pipeline.denoise_1d(frame, 20, INTERIOR, FAST)
        self.assertEqual(int(result.noise_field.sum()), 20)
        self.assertTrue((result.noise_field >= 0).all())
        np.testing.assert_array_equal(result.recovered,
                frame.counts - result.noise_field)
        self.assertClose(result.final_cost, smoothness.residual_cost(
            frame, INTERIOR, result.noise_field))

    def test_single_block_is_unblocked(self):
        rng = np.random.default_rng(18)
        frame = random_frame(rng, 14, 30)
        whole = pipeline.denoise_1d(frame, 9, INTERIOR, FAST)
        blocked = pipeline.denoise_1d_blocked(frame, 9, 20, 1, FAST)
        np.testing.assert_array_equal(whole.noise_field, blocked.noise_field)
        self.assertEqual(whole.final_cost, blocked.final_cost)

    def test_empty_block_gets_nothing(self):
        counts = [5] * 10 + [0] * 10
        result = pipeline.denoise_1d_blocked(MeasuredFrame(counts), 8, 10,
                1, FAST)
        np.testing.assert_array_equal(result.noise_field[10:], np.zeros(10))
        self.assertEqual(int(result.noise_field.sum()), 8)
        self.assertEqual([d['budget'] for d in result.diagnostics], [8, 0])

    def test_blocked_passes_conserve(self):
        rng = np.random.default_rng(19)
        frame = random_frame(rng, 40, 50)
        result = pipeline.denoise_1d_blocked(frame, 60, 10, 3, FAST)
        self.assertEqual(int(result.noise_field.sum()), 60)
        self.assertEqual(result.passes_completed, 3)
        self.assertEqual(len(result.objective_trace), 3)

    def test_thread_count_irrelevant(self):
        rng = np.random.default_rng(21)
        frame = random_frame(rng, 30, 40)
        runs = []
        for threads in ("1", "4"):
            with mock.patch.dict(os.environ, {"NR_THREADS": threads}):
                runs.append(pipeline.denoise_1d_blocked(frame, 25, 10, 2,
                    FAST).noise_field)
        np.testing.assert_array_equal(runs[0], runs[1])

    def test_blocked_trace_never_rises(self):
        rng = np.random.default_rng(26)
        for _ in range(4):
            frame = random_frame(rng, 40, 60)
            result = pipeline.denoise_1d_blocked(frame, 50, 10, 4, FAST)
            for before, after in zip(result.objective_trace,
                    result.objective_trace[1:]):
                self.assertLessEqual(after, before + 1e-9 * max(1.0, before))
            self.assertTrue(all(d['accepted'] for d in result.diagnostics
                if d['pass'] == 0))

    def test_blocked_close_to_whole(self):
        truth = datagen.decaying_sinusoid_1d(100, 100, 0.4, 0.02)
        ratios = []
        for seed in range(3):
            record = datagen.poisson_corrupt(truth,
                    datagen.CorruptionSpec(0.2, seed))
            config = SolverConfig(seed=seed)
            whole = pipeline.denoise_1d(record.measured, record.true_total,
                    INTERIOR, config)
            blocked = pipeline.denoise_1d_blocked(record.measured,
                    record.true_total, 50, 2, config)
            ratios.append(blocked.final_cost / max(whole.final_cost, 1e-12))
        self.assertLessEqual(sorted(ratios)[1], 1.25)

    def test_smoothest_field_beats_true_noise(self):
        # the smoothness minimum lies below the true field's cost
        truth = datagen.decaying_sinusoid_1d(200, 100, 0.4, 0.02)
        record = datagen.poisson_corrupt(truth,
                datagen.CorruptionSpec(0.1, 0))
        result = pipeline.denoise_1d(record.measured, record.true_total,
                INTERIOR, SolverConfig(seed=0))
        true_cost = smoothness.residual_cost(record.measured, INTERIOR,
                record.true_noise)
        self.assertLess(result.final_cost, true_cost)

    def test_bad_blocks(self):
        frame = MeasuredFrame([1] * 10)
        self.assertRaises(InputError, pipeline.denoise_1d_blocked, frame, 2,
                4)
        self.assertRaises(InputError, pipeline.denoise_1d_blocked, frame, 2,
                5, 0)
        with mock.patch.dict(os.environ, {"NR_THREADS": "many"}):
            self.assertRaises(InputError, pipeline.worker_count)


class Denoise2DTest(NoiseReversalTestCase):
    def image(self, seed=22, rows=8, cols=5):
        truth = datagen.decaying_sinusoid_2d(rows, cols, 40, 0.6, 0.5, 0.05,
                0.05)
        return datagen.poisson_corrupt(truth,
                datagen.CorruptionSpec(0.3, seed)).measured

    def test_single_column(self):
        column = np.array([4, 9, 3, 7, 6, 2])
        image = Image2D(column.reshape(-1, 1))
        flat = pipeline.denoise_1d(MeasuredFrame(column), 7, INTERIOR, FAST)
        tall = pipeline.denoise_2d(image, 7, 3, solver_config=FAST)
        np.testing.assert_array_equal(tall.noise_field[:, 0],
                flat.noise_field)
        self.assertEqual(tall.final_cost, flat.final_cost)

    def test_zero_budget(self):
        image = self.image()
        result = pipeline.denoise_2d(image, 0, 2, solver_config=FAST)
        np.testing.assert_array_equal(result.recovered, image.counts)
        columns = sum(smoothness.residual_cost(image.column(c), INTERIOR,
            np.zeros(image.rows)) for c in range(image.cols))
        counts = image.counts.astype(float)
        cross = 0.0
        for c in range(image.cols):
            neighbors = [counts[:, k] for k in (c - 1, c + 1)
                    if 0 <= k < image.cols]
            diff = counts[:, c] - sum(neighbors) / len(neighbors)
            cross += float(diff @ diff)
        self.assertClose(result.final_cost, columns + cross)

    def test_conservation_and_trace(self):
        image = self.image()
        result = pipeline.denoise_2d(image, 50, 3, solver_config=FAST)
        self.assertEqual(int(result.noise_field.sum()), 50)
        self.assertTrue((result.noise_field >= 0).all())
        np.testing.assert_array_equal(result.recovered,
                image.counts - result.noise_field)
        self.assertEqual(len(result.objective_trace), 4)
        self.assertEqual(result.final_cost, result.objective_trace[-1])
        self.assertLessEqual(result.objective_trace[-1],
                result.objective_trace[0] + 1e-9)
        self.assertEqual(len(result.diagnostics), 3 * image.cols)

    def test_sweeps_never_raise_objective(self):
        for seed in (30, 31, 32, 33):
            result = pipeline.denoise_2d(self.image(seed), 40, 3,
                    solver_config=FAST.derive(seed))
            for before, after in zip(result.objective_trace,
                    result.objective_trace[1:]):
                self.assertLessEqual(after, before + 1e-9 * max(1.0, before))

    def test_uniform_budgets(self):
        image = self.image(cols=4)
        result = pipeline.denoise_2d(image, 10, 1, BudgetPolicy.UNIFORM,
                solver_config=FAST)
        self.assertEqual(result.noise_field.sum(axis=0).tolist(),
                [3, 3, 2, 2])

    def test_bad_arguments(self):
        image = self.image()
        self.assertRaises(InputError, pipeline.denoise_2d, image, 5, 0)
        self.assertRaises(InputError, pipeline.denoise_2d, image, 5, 1,
                cross_column_weight=-1.0)
        self.assertRaises(InputError, Image2D, np.zeros((2, 4)))
        self.assertRaises(InputError, Image2D, np.zeros(6))


class HardwareProfileTest(NoiseReversalTestCase):
    def result(self, noise):
        noise = np.asarray(noise)
        return DenoiseResult(noise, -noise, 0.0,
                [{'size': noise.size}])

    def test_fits(self):
        self.assertEqual(pipeline.check_hardware_profile(
            self.result(np.full(100, 100))), [])

    def test_too_many_modes(self):
        poly = SumConstrainedPolynomial.from_terms(6000, 0)
        with self.assertLogs("noisereversal.pipeline", "WARNING"):
            warnings = pipeline.check_hardware_profile(poly)
        self.assertTrue(any("exceeds 5000 modes" in w for w in warnings))

    def test_crowded_pixel(self):
        noise = np.zeros(10, dtype=np.int64)
        noise[3] = 101
        with self.assertLogs("noisereversal.pipeline", "WARNING"):
            warnings = pipeline.check_hardware_profile(self.result(noise))
        self.assertEqual(len(warnings), 1)
        self.assertIn("pixel 3", warnings[0])

    def test_custom_profile(self):
        poly = SumConstrainedPolynomial.from_terms(4, 50)
        with self.assertLogs("noisereversal.pipeline", "WARNING"):
            warnings = pipeline.check_hardware_profile(poly,
                    HardwareProfile(max_modes=3, max_photons_per_mode=10))
        self.assertEqual(len(warnings), 2)


##
## synthetic data
##

class GeneratorTest(NoiseReversalTestCase):
    def test_flat_truths(self):
        frame = datagen.decaying_sinusoid_1d(20, 0, 0.4, 0.02, floor=3)
        np.testing.assert_array_equal(frame.counts, np.full(20, 3))
        frame = datagen.decaying_sinusoid_1d(10, 9, 0.0, 0.0, floor=1)
        np.testing.assert_array_equal(frame.counts, np.full(10, 6))
        image = datagen.decaying_sinusoid_2d(6, 4, 0, 0.4, 0.2, 0.02, 0.01,
                floor=2)
        np.testing.assert_array_equal(image.counts, np.full((6, 4), 2))

    def test_first_peak(self):
        frame = datagen.decaying_sinusoid_1d(200, 100, 0.4, 0.02)
        self.assertLessEqual(int(frame.counts.max()), 100)
        self.assertIn(int(np.argmax(frame.counts)), (3, 4, 5))
        self.assertEqual(frame.meta['parameters']['omega'], 0.4)
        self.assertIn('formula', frame.meta)

    def test_separable(self):
        image = datagen.decaying_sinusoid_2d(7, 9, 80, 0.3, 0.7, 0.01, 0.03)
        grid = 80 * np.outer(datagen.sinusoid_profile(7, 0.3, 0.01),
                datagen.sinusoid_profile(9, 0.7, 0.03))
        np.testing.assert_array_equal(image.counts,
                np.floor(grid + 0.5).astype(np.int64))

    def test_bad_parameters(self):
        self.assertRaises(InputError, datagen.decaying_sinusoid_1d, 4, 1, 0,
                0)
        self.assertRaises(InputError, datagen.decaying_sinusoid_1d, 10, -1,
                0, 0)
        self.assertRaises(InputError, datagen.decaying_sinusoid_2d, 10, 10,
                1, 0, 0, -0.1, 0)


class CorruptionTest(NoiseReversalTestCase):
    def peak_100(self, n=10000):
        counts = np.full(n, 50)
        counts[0] = 100
        return MeasuredFrame(counts)

    def test_zero_fraction(self):
        truth = self.peak_100(50)
        record = datagen.poisson_corrupt(truth, datagen.CorruptionSpec(0.0))
        np.testing.assert_array_equal(record.measured.counts, truth.counts)
        self.assertEqual(record.true_total, 0)

    def test_noise_mean(self):
        record = datagen.poisson_corrupt(self.peak_100(),
                datagen.CorruptionSpec(0.2, seed=31))
        self.assertEqual(record.lambda_used, 20.0)
        bound = 5 * math.sqrt(20 / 10000)
        self.assertLess(abs(record.true_noise.mean() - 20), bound)
        self.assertEqual(record.true_total, int(record.true_noise.sum()))
        np.testing.assert_array_equal(record.measured.counts,
                self.peak_100().counts + record.true_noise)

    def test_relative_to_mean(self):
        truth = MeasuredFrame([0, 10, 20, 30])
        spec = datagen.CorruptionSpec(2.0, relative_to=datagen.RelativeTo.MEAN)
        self.assertEqual(spec.lam(truth.counts), 30.0)

    def test_seeded(self):
        truth = self.peak_100(500)
        spec = datagen.CorruptionSpec(0.4, seed=5)
        first = datagen.poisson_corrupt(truth, spec)
        second = datagen.poisson_corrupt(truth, spec)
        np.testing.assert_array_equal(first.true_noise, second.true_noise)
        self.assertEqual(first.meta(), second.meta())

    def test_images_stay_images(self):
        truth = datagen.decaying_sinusoid_2d(6, 3, 20, 0.4, 0.2, 0.0, 0.0)
        record = datagen.poisson_corrupt(truth, datagen.CorruptionSpec(0.5))
        self.assertIsInstance(record.measured, Image2D)
        self.assertEqual(record.pixels, 18)

    def test_overflow(self):
        self.assertRaises(InputError, datagen.poisson_corrupt,
                self.peak_100(10), datagen.CorruptionSpec(1e20))

    def test_estimates(self):
        record = datagen.poisson_corrupt(self.peak_100(100),
                datagen.CorruptionSpec(0.2, seed=2))
        self.assertEqual(datagen.estimate_noise_total(record),
                record.true_total)
        estimate = datagen.estimate_noise_total(record, "off_period", 10000)
        self.assertLess(abs(estimate - 2000),
                5 * 100 * math.sqrt(20 / 10000))
        self.assertEqual(datagen.estimate_from_off_period(0.0, 100, 10, 0),
                0)
        self.assertRaises(InputError, datagen.estimate_noise_total, record,
                "off_period", 0)
        self.assertRaises(InputError, datagen.estimate_noise_total, record,
                "guess")


class PoissonSamplerTest(NoiseReversalTestCase):
    def test_dispersion_and_fit(self):
        for lam in (1, 5, 20):
            draws = datagen.noise_stream(100 + lam).poisson(lam, 10000)
            dispersion = draws.var() / draws.mean()
            self.assertTrue(0.9 <= dispersion <= 1.1, (lam, dispersion))

            lo = int(stats.poisson.ppf(0.001, lam))
            hi = int(stats.poisson.ppf(0.999, lam))
            ks = np.arange(lo + 1, hi)
            expected = np.concatenate(([stats.poisson.cdf(lo, lam)],
                stats.poisson.pmf(ks, lam), [stats.poisson.sf(hi - 1, lam)]))
            observed = np.concatenate(([(draws <= lo).sum()],
                [(draws == k).sum() for k in ks], [(draws >= hi).sum()]))
            expected = expected / expected.sum() * observed.sum()
            p = stats.chisquare(observed, expected).pvalue
            self.assertGreater(p, 0.001, (lam, p))

    def test_streams_disjoint(self):
        a = datagen.noise_stream(9, 0).poisson(5.0, 100)
        b = datagen.noise_stream(9, 1).poisson(5.0, 100)
        self.assertFalse(np.array_equal(a, b))


##
## metrics and documents
##

class MetricsTest(NoiseReversalTestCase):
    def test_rmse(self):
        self.assertEqual(metrics.rmse([1, 2, 3], [1, 2, 3]), 0.0)
        self.assertClose(metrics.rmse([0, 0], [3, 4]), math.sqrt(25 / 2))
        self.assertRaises(ContractViolation, metrics.rmse, [1], [1, 2])

    def scored(self, truth, measured, recovered, trim=0):
        measured = np.asarray(measured)
        recovered = np.asarray(recovered)
        result = DenoiseResult(measured - recovered, recovered, 1.5)
        return metrics.compute_metrics(truth, measured, result, trim)

    def test_perfect_recovery(self):
        scores = self.scored([1, 2, 3, 4], [2, 3, 3, 5], [1, 2, 3, 4])
        self.assertEqual(scores.improvement_factor, math.inf)
        self.assertEqual(scores.budget_used, 3)
        self.assertIn('"inf"', serialization.dumps(scores))

    def test_no_recovery(self):
        scores = self.scored([1, 2, 3, 4], [2, 3, 3, 5], [2, 3, 3, 5])
        self.assertEqual(scores.improvement_factor, 1.0)

    def test_clean_measurement(self):
        scores = self.scored([1, 2, 3], [1, 2, 3], [1, 2, 3])
        self.assertEqual(scores.rmse_recovered, 0.0)
        self.assertEqual(scores.improvement_factor, 1.0)

    def test_metrics_document(self):
        scores = self.scored([1, 2, 3, 4], [2, 3, 3, 5], [1, 2, 3, 4])
        again = serialization.loads(serialization.dumps(scores), "metrics")
        self.assertEqual(again, scores)
        self.assertRaises(InvalidDocument, serialization.loads,
                '{"rmse_noisy": 1}', "metrics")

    def test_trim(self):
        truth = np.zeros((6, 6), dtype=int)
        measured = truth + 1
        recovered = truth.copy()
        recovered[0, 0] = 10
        whole = self.scored(truth, measured, recovered)
        inner = self.scored(truth, measured, recovered, trim=1)
        self.assertLess(whole.improvement_factor, 1.0)
        self.assertEqual(inner.improvement_factor, math.inf)
        self.assertRaises(InputError, metrics.trim_border, truth, 3)

    def test_report(self):
        scores = self.scored([1, 2, 3, 4], [2, 3, 3, 5], [1, 2, 3, 4])
        report = metrics.build_report("sin1d-f0.2", 4, {'generator': 'x'},
                {'lambda': 1.0}, SolverConfig(), scores)
        self.assertNotIn('timings', report)
        again = serialization.loads(serialization.dumps(report), "report")
        self.assertEqual(again['metrics']['improvement_factor'], "inf")
        report['surprise'] = 1
        self.assertRaises(InvalidDocument, metrics.ReportMessage(
            report).validate)


class SchemaTest(NoiseReversalTestCase):
    class Point(schemas.Message):
        SCHEMA = {
            'x': float,
            'n': int,
            schemas.OPTIONAL('label'): str,
            'tags': [schemas.OPTIONAL(str)],
            'box': {str: (int, int)},
        }

    def good(self):
        return {'x': 1, 'n': 2, 'tags': [], 'box': {'a': [1, 2]}}

    def test_valid(self):
        self.Point(self.good()).validate()
        self.Point(dict(self.good(), label="p")).validate()

    def test_unknown_key(self):
        with self.assertRaises(self.Point.InvalidMessage) as cm:
            self.Point(dict(self.good(), z=0)).validate()
        self.assertEqual(cm.exception.path, "z")
        self.assertIsInstance(cm.exception, InvalidDocument)

    def test_missing_key(self):
        doc = self.good()
        del doc['n']
        with self.assertRaises(InvalidDocument) as cm:
            self.Point(doc).validate()
        self.assertIn("missing key", str(cm.exception))

    def test_nested_path(self):
        doc = dict(self.good(), box={'a': [1, "2"]})
        with self.assertRaises(InvalidDocument) as cm:
            self.Point(doc).validate()
        self.assertEqual(cm.exception.path, "box.a[1]")

    def test_bool_is_not_int(self):
        self.assertRaises(InvalidDocument, schemas.validate, int, True)
        schemas.validate(float, 3)

    def test_bad_schema(self):
        with self.assertRaises(schemas.InvalidSchema):
            class Broken(schemas.Message):
                SCHEMA = {'x': object()}


class SerializationTest(NoiseReversalTestCase):
    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def path(self, name):
        return os.path.join(self.dir, name)

    def test_stable_text(self):
        doc = {'b': np.int64(3), 'a': [np.float64(0.5), BoundaryPolicy.PERIODIC],
                'c': float("-inf")}
        text = serialization.dumps(doc)
        self.assertEqual(text, serialization.dumps(doc))
        self.assertEqual(json.loads(text),
                {'a': [0.5, "periodic"], 'b': 3, 'c': "-inf"})
        self.assertTrue(text.endswith("\n"))

    def test_unserializable(self):
        self.assertRaises(TypeError, serialization.dumps, object())
        text = serialization.dumps(object(), lambda o: "object")
        self.assertEqual(json.loads(text), "object")

    def test_recursion_depth(self):
        l = []
        l.append(l)
        self.assertRaises(ValueError, serialization.dumps, l)

    def test_csv_grids(self):
        serialization.dump_csv(self.path("a.csv"), [3, 0, 12])
        with open(self.path("a.csv")) as fp:
            self.assertEqual(fp.read(), "3\n0\n12\n")
        np.testing.assert_array_equal(serialization.load_csv(
            self.path("a.csv")), [3, 0, 12])

        grid = np.array([[1, -2], [3, 4], [5, 6]])
        serialization.dump_csv(self.path("b.csv"), grid)
        np.testing.assert_array_equal(serialization.load_csv(
            self.path("b.csv")), grid)

    def test_single_column_grid(self):
        grid = np.array([[4], [5], [6]])
        serialization.dump_csv(self.path("c.csv"), grid)
        self.assertEqual(serialization.load_csv(self.path("c.csv")).shape,
                (3,))
        serialization.dump_meta(self.path("c.csv"), {'shape': [3, 1]})
        np.testing.assert_array_equal(serialization.load_csv(
            self.path("c.csv")), grid)

    def test_bad_csv(self):
        with open(self.path("r.csv"), "w") as fp:
            fp.write("1,2\n3\n")
        self.assertRaises(InputError, serialization.load_csv,
                self.path("r.csv"))
        with open(self.path("f.csv"), "w") as fp:
            fp.write("1.5\n2\n")
        self.assertRaises(InputError, serialization.load_csv,
                self.path("f.csv"))

    def test_meta_sidecar(self):
        serialization.dump_meta(self.path("x.csv"), {'seed': 4})
        self.assertTrue(os.path.exists(self.path("x.csv.meta.json")))
        self.assertEqual(serialization.load_meta(self.path("x.csv")),
                {'seed': 4})
        self.assertEqual(serialization.load_meta(
            self.path("x.csv.meta.json")), {'seed': 4})

    def test_trace_csv(self):
        serialization.dump_trace_csv(self.path("t.csv"), [3.0, 2.5])
        with open(self.path("t.csv")) as fp:
            self.assertEqual(fp.read(), "iteration,energy\n0,3.0\n1,2.5\n")

    def test_pgm(self):
        clamped = serialization.dump_pgm(self.path("i.pgm"),
                [[0, -3], [7, 2]])
        self.assertEqual(clamped, 1)
        with open(self.path("i.pgm")) as fp:
            self.assertEqual(fp.read().split(),
                    ["P2", "2", "2", "7", "0", "0", "7", "2"])


##
## command line
##

class CLITest(NoiseReversalTestCase):
    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def path(self, *names):
        return os.path.join(self.dir, *names)

    def run_cli(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            try:
                code = cli.main(["-q"] + [str(a) for a in argv])
            except SystemExit as exc:
                code = exc.code
        return code, out.getvalue(), err.getvalue()

    def read(self, *names):
        with open(self.path(*names)) as fp:
            return fp.read()

    def make_noisy(self, length=30):
        self.assertEqual(self.run_cli("generate", "--kind", "sin1d",
            "--len", length, "--amp", 40, "--omega", 0.4, "--gamma", 0.02,
            "--seed", 7, "-o", self.path("truth.csv"))[0], 0)
        self.assertEqual(self.run_cli("corrupt", "-i", self.path("truth.csv"),
            "--noise-frac", 0.2, "--relative-to", "peak", "--seed", 11,
            "-o", self.path("noisy.csv"))[0], 0)

    def test_generate(self):
        code, _, _ = self.run_cli("generate", "--kind", "sin1d", "--len", 200,
                "--amp", 100, "--omega", 0.4, "--gamma", 0.02, "--seed", 7,
                "-o", self.path("truth.csv"))
        self.assertEqual(code, 0)
        self.assertEqual(len(self.read("truth.csv").splitlines()), 200)
        meta = serialization.load_meta(self.path("truth.csv"))
        self.assertEqual(meta['seed'], 7)
        self.assertEqual(meta['generator'], 'decaying_sinusoid_1d')

    def test_generate_image(self):
        code, _, _ = self.run_cli("generate", "--kind", "sin2d", "--rows", 10,
                "--cols", 20, "-o", self.path("img.csv"))
        self.assertEqual(code, 0)
        self.assertEqual(serialization.load_csv(self.path("img.csv")).shape,
                (10, 20))

    def test_missing_flag(self):
        code, _, err = self.run_cli("generate", "--kind", "sin1d")
        self.assertEqual(code, 2)
        self.assertIn("usage", err)

    def test_bad_parameters(self):
        code, _, err = self.run_cli("generate", "--len", 3,
                "-o", self.path("t.csv"))
        self.assertEqual(code, 2)
        self.assertIn("error", err)

    def test_corrupt(self):
        self.make_noisy()
        truth = serialization.load_csv(self.path("truth.csv"))
        noisy = serialization.load_csv(self.path("noisy.csv"))
        meta = serialization.load_meta(self.path("noisy.csv"))
        self.assertEqual(meta['true_total'], int(noisy.sum() - truth.sum()))
        self.assertEqual(meta['seed'], 11)

    def test_corrupt_nothing(self):
        self.run_cli("generate", "--len", 20, "-o", self.path("truth.csv"))
        code, _, _ = self.run_cli("corrupt", "-i", self.path("truth.csv"),
                "--noise-frac", 0, "-o", self.path("noisy.csv"))
        self.assertEqual(code, 0)
        self.assertEqual(self.read("truth.csv"), self.read("noisy.csv"))

    def test_missing_input(self):
        code, _, _ = self.run_cli("corrupt", "-i", self.path("nope.csv"),
                "--noise-frac", 0.1, "-o", self.path("noisy.csv"))
        self.assertEqual(code, 3)

    def test_denoise_zero_budget(self):
        self.make_noisy()
        code, _, _ = self.run_cli("denoise", "-i", self.path("noisy.csv"),
                "--noise-total", 0, "-o", self.path("out"))
        self.assertEqual(code, 0)
        self.assertEqual(self.read("out", "recovered.csv"),
                self.read("noisy.csv"))

    def test_denoise_reruns_identically(self):
        self.make_noisy()
        for out in ("one", "two"):
            code, _, _ = self.run_cli("denoise", "-i", self.path("noisy.csv"),
                    "--from-meta", self.path("noisy.csv.meta.json"),
                    "--restarts", 4, "--max-iterations", 200, "--seed", 5,
                    "-o", self.path(out), "--dump-energy",
                    self.path(out, "energy.json"))
            self.assertEqual(code, 0)
        for name in ("recovered.csv", "noise.csv", "solve_report.json",
                "recovered.csv.meta.json", "energy.json"):
            self.assertEqual(self.read("one", name), self.read("two", name))

        poly = serialization.loads(self.read("one", "energy.json"),
                "polynomial")
        self.assertEqual(poly.num_vars, 30)
        meta = serialization.load_meta(self.path("noisy.csv"))
        noise = serialization.load_csv(self.path("one", "noise.csv"))
        self.assertEqual(int(noise.sum()), meta['true_total'])
        report = serialization.loads(self.read("one", "solve_report.json"),
                "solve_report")
        self.assertEqual(report.seed, 5)

    def test_denoise_needs_a_budget(self):
        self.make_noisy()
        code, _, _ = self.run_cli("denoise", "-i", self.path("noisy.csv"),
                "-o", self.path("out"))
        self.assertEqual(code, 2)

    def test_denoise_estimate(self):
        self.make_noisy()
        code, _, _ = self.run_cli("denoise", "-i", self.path("noisy.csv"),
                "--from-meta", self.path("noisy.csv"),
                "--estimate", "off-period:1000", "--restarts", 2,
                "--max-iterations", 50, "--trace-csv", self.path("trace.csv"),
                "-o", self.path("out"))
        self.assertEqual(code, 0)
        self.assertTrue(self.read("trace.csv").startswith("iteration,energy"))
        code, _, _ = self.run_cli("denoise", "-i", self.path("noisy.csv"),
                "--from-meta", self.path("noisy.csv"),
                "--estimate", "on-period", "-o", self.path("out"))
        self.assertEqual(code, 2)

    def test_config_file(self):
        self.make_noisy()
        with open(self.path("config.json"), "w") as fp:
            json.dump({'restarts': 2, 'max_iterations': 50,
                'block_size': 10, 'passes': 2}, fp)
        code, _, _ = self.run_cli("denoise", "--config",
                self.path("config.json"), "-i", self.path("noisy.csv"),
                "--noise-total", 12, "-o", self.path("out"))
        self.assertEqual(code, 0)
        meta = serialization.load_meta(self.path("out", "recovered.csv"))
        self.assertEqual(meta['passes_completed'], 2)
        self.assertEqual(meta['solver_config']['restarts'], 2)

        with open(self.path("bad.json"), "w") as fp:
            json.dump({'restarts': 2, 'colour': 'blue'}, fp)
        code, _, err = self.run_cli("denoise", "--config",
                self.path("bad.json"), "-i", self.path("noisy.csv"),
                "--noise-total", 12, "-o", self.path("out"))
        self.assertEqual(code, 2)
        self.assertIn("colour", err)

    def test_config_supplies_paths(self):
        with open(self.path("gen.json"), "w") as fp:
            json.dump({'kind': 'sin2d', 'rows': 6, 'cols': 1,
                'output': self.path("column.csv")}, fp)
        with open(self.path("corrupt.json"), "w") as fp:
            json.dump({'input': self.path("column.csv"), 'noise_frac': 0.5,
                'output': self.path("noisy.csv")}, fp)
        self.assertEqual(self.run_cli("generate", "--config",
            self.path("gen.json"))[0], 0)
        self.assertEqual(self.run_cli("corrupt", "--config",
            self.path("corrupt.json"))[0], 0)
        self.assertEqual(serialization.load_csv(self.path("column.csv")).shape,
                (6, 1))
        self.assertEqual(serialization.load_csv(self.path("noisy.csv")).shape,
                (6, 1))

    def test_evaluate(self):
        self.make_noisy()
        code, out, _ = self.run_cli("evaluate", "--truth",
                self.path("truth.csv"), "--measured", self.path("noisy.csv"),
                "--recovered", self.path("truth.csv"))
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)['improvement_factor'], "inf")

        code, out, _ = self.run_cli("evaluate", "--truth",
                self.path("truth.csv"), "--measured", self.path("noisy.csv"),
                "--recovered", self.path("noisy.csv"))
        self.assertEqual(json.loads(out)['improvement_factor'], 1.0)

    def test_evaluate_shape_mismatch(self):
        self.make_noisy()
        serialization.dump_csv(self.path("short.csv"), [1, 2, 3])
        code, _, _ = self.run_cli("evaluate", "--truth",
                self.path("truth.csv"), "--measured", self.path("noisy.csv"),
                "--recovered", self.path("short.csv"))
        self.assertEqual(code, 2)

    def test_sweep(self):
        args = ("sweep", "--fractions", "0.1,0.2", "--seeds", 2, "--len", 20,
                "--restarts", 2, "--max-iterations", 50)
        for out in ("a", "b"):
            code, _, _ = self.run_cli(*(args + ("-o", self.path(out))))
            self.assertEqual(code, 0)
        aggregate = self.read("a", "aggregate.csv")
        self.assertEqual(aggregate, self.read("b", "aggregate.csv"))
        lines = aggregate.splitlines()
        self.assertEqual(lines[0], "fraction,seed,rmse_noisy,rmse_recovered,"
                "improvement_factor,wall_time,status")
        self.assertEqual([l.split(",")[:2] for l in lines[1:]],
                [["0.1", "0"], ["0.1", "1"], ["0.2", "0"], ["0.2", "1"]])
        self.assertTrue(all(l.endswith(",ok") for l in lines[1:]))
        report = serialization.loads(self.read("a", "f0.2_s1",
            "report.json"), "report")
        self.assertEqual(report['seed'], 1)

    def test_sweep_without_fractions(self):
        code, _, _ = self.run_cli("sweep", "--fractions", "", "--seeds", 2,
                "-o", self.path("out"))
        self.assertEqual(code, 2)


class PackageTest(unittest.TestCase):
    def test_exports(self):
        for name in noisereversal.__all__:
            self.assertTrue(hasattr(noisereversal, name), name)
        self.assertEqual(noisereversal.__version__, "0.1.0")


if __name__ == '__main__':
    unittest.main()
