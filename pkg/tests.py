#!/usr/bin/env python3

import csv
import io
import json
import logging
import logging.handlers
import math
import os
import sys
import tempfile
import unittest
from unittest import mock

import numpy as np
import yaml
from scipy import stats

import rotsync
from rotsync import (analysis, bases, cli, csv_utils, diffchain,
                     displacement, experiments, filters, logger, rds, sets,
                     torus)
from rotsync.errors import (CapacityError, DegenerateFitError,
                            InvalidConfigError, InvalidInputError,
                            InvalidProbabilityError, NotIntegrableError,
                            UnderpoweredTestError, UnrepresentableDepthError)

JUMP = math.sqrt(2) - 1

# the long-run checks take minutes
SLOW = unittest.skipUnless(os.environ.get("ROTSYNC_SLOW"),
                           "set ROTSYNC_SLOW=1 to run the long simulations")


def interval_system(v=JUMP):
    return rds.SystemConfig(sets.canonicalize([(0.0, 0.3)]), [v])


class TestTorus(unittest.TestCase):
    def test_wrap(self):
        np.testing.assert_allclose(torus.wrap(1.25), [0.25])
        np.testing.assert_allclose(torus.wrap(-0.1), [0.9])
        np.testing.assert_array_equal(torus.wrap(-1e-18), [0.0])
        self.assertRaises(InvalidInputError, torus.wrap, math.nan)

    def test_translate_and_diff(self):
        np.testing.assert_allclose(torus.translate(0.9, 0.2), [0.1])
        np.testing.assert_allclose(torus.diff((0.2, 0.7), (0.5, 0.9)),
                                   [0.7, 0.8])
        p, q = np.array([0.3, 0.95]), np.array([0.8, 0.1])
        np.testing.assert_allclose(torus.translate(q, torus.diff(p, q)), p)
        np.testing.assert_allclose(torus.negate(0.25), [0.75])
        self.assertRaises(InvalidInputError, torus.diff, (0.1, 0.2), 0.3)

    def test_distance(self):
        self.assertAlmostEqual(torus.torus_dist(0.1, 0.9), 0.2)
        self.assertAlmostEqual(torus.torus_dist((0, 0), (0.5, 0.5)),
                               math.sqrt(2) / 2)
        self.assertAlmostEqual(torus.norm((0.75, 0.0)), 0.25)
        self.assertEqual(torus.max_dist(4), 1.0)

        rng = np.random.default_rng(1)
        p, q = rng.random((100, 3)), rng.random((100, 3))
        distances = torus.torus_dist(p, q)
        np.testing.assert_allclose(distances, torus.torus_dist(q, p))
        self.assertTrue(np.all(distances <= torus.max_dist(3)))

        u = rng.random((100, 3))
        np.testing.assert_allclose(
            torus.torus_dist(torus.translate(p, u), torus.translate(q, u)),
            distances, atol=1e-9)

    def test_points(self):
        self.assertEqual(torus.TorusPoint.of((1.5, -0.25)), (0.5, 0.75))
        self.assertRaises(InvalidInputError, torus.TorusPoint, (1.0,))
        self.assertRaises(InvalidInputError, torus.TorusPoint, ())
        self.assertTrue(torus.TranslationVector((0.0, 0.0)).is_zero())
        self.assertFalse(torus.TranslationVector((0.0, 0.1)).is_zero())


class TestSets(unittest.TestCase):
    def test_canonicalize(self):
        union = sets.canonicalize([(0.1, 0.3), (0.2, 0.4)])
        self.assertEqual(len(union), 1)
        np.testing.assert_allclose(union.arcs, [(0.1, 0.4)])

        wrapped = sets.canonicalize([(0.8, 1.0), (0.0, 0.1)])
        self.assertEqual(wrapped.component_count, 1)
        self.assertAlmostEqual(sets.measure(wrapped), 0.3)
        self.assertEqual(sets.canonicalize([(0.8, 0.1)]).component_count, 1)

        self.assertEqual(len(sets.canonicalize([(0.2, 0.2)])), 0)
        self.assertRaises(InvalidInputError, sets.canonicalize, [(0.1, 1.5)])

    def test_contains(self):
        A = sets.canonicalize([(0.0, 0.3)])
        self.assertTrue(sets.contains(A, 0.0))
        self.assertTrue(sets.contains(A, 0.29))
        self.assertFalse(sets.contains(A, 0.3))
        np.testing.assert_array_equal(
            sets.contains(A, [[0.1], [0.5], [0.99]]), [True, False, False])

        wrapped = sets.canonicalize([(0.9, 0.1)])
        self.assertTrue(sets.contains(wrapped, 0.95))
        self.assertTrue(sets.contains(wrapped, 0.05))
        self.assertFalse(sets.contains(wrapped, 0.5))

    def test_translate(self):
        A = sets.canonicalize([(0.0, 0.3)])
        moved = sets.translate_set(A, 0.9)
        self.assertAlmostEqual(sets.measure(moved), 0.3)
        self.assertEqual(moved.component_count, 1)
        self.assertTrue(sets.contains(moved, 0.95))
        self.assertTrue(sets.contains(moved, 0.15))

        box = sets.BoxUnion.from_boxes([[[0.0, 0.5], [0.0, 0.5]]])
        moved = sets.translate_set(box, (0.75, 0.0))
        self.assertAlmostEqual(sets.measure(moved), 0.25)
        self.assertTrue(sets.contains(moved, (0.9, 0.1)))
        self.assertTrue(sets.contains(moved, (0.1, 0.1)))

    def test_boolean_operations(self):
        A = sets.canonicalize([(0.0, 0.3)])
        B = sets.canonicalize([(0.1, 0.4)])
        self.assertAlmostEqual(sets.symm_diff_measure(A, B), 0.2)
        self.assertAlmostEqual(sets.measure(sets.intersect(A, B)), 0.2)
        self.assertAlmostEqual(sets.measure(sets.union(A, B)), 0.4)
        self.assertAlmostEqual(sets.measure(sets.difference(A, B)), 0.1)
        self.assertAlmostEqual(sets.measure(sets.complement(A)), 0.7)
        self.assertTrue(sets.is_subset(sets.intersect(A, B), A))
        self.assertFalse(sets.is_subset(A, B))
        self.assertEqual(sets.symm_diff_measure(A, A), 0.0)

    def test_random_oracle(self):
        rng = np.random.default_rng(7)
        points = rng.random((100_000, 1))
        for _ in range(100):
            A = sets.random_arcs(rng, int(rng.integers(1, 6)))
            B = sets.random_arcs(rng, int(rng.integers(1, 6)))
            inside_a = sets.contains(A, points)
            inside_b = sets.contains(B, points)
            self.assertAlmostEqual(sets.symm_diff_measure(A, B),
                                   np.mean(inside_a != inside_b),
                                   delta=0.01)
            self.assertAlmostEqual(sets.measure(A), np.mean(inside_a),
                                   delta=0.01)

    def test_translation_invariance(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            A, B = sets.random_arcs(rng, 4), sets.random_arcs(rng, 3)
            u = rng.random()
            self.assertAlmostEqual(
                sets.symm_diff_measure(sets.translate_set(A, u),
                                       sets.translate_set(B, u)),
                sets.symm_diff_measure(A, B), delta=1e-12)

        boxes = sets.BoxUnion.from_boxes([[[0.0, 0.5], [0.0, 0.5]]])
        other = sets.BoxUnion.from_boxes([[[0.25, 0.75], [0.1, 0.3]]])
        u = (0.8, 0.35)
        self.assertAlmostEqual(
            sets.symm_diff_measure(sets.translate_set(boxes, u),
                                   sets.translate_set(other, u)),
            sets.symm_diff_measure(boxes, other), delta=1e-12)

    def test_boxes(self):
        boxes = sets.BoxUnion.from_boxes([[[0.0, 0.5], [0.0, 0.5]],
                                          [[0.25, 0.75], [0.25, 0.75]]])
        self.assertAlmostEqual(sets.measure(boxes), 0.4375)
        self.assertTrue(sets.contains(boxes, (0.6, 0.6)))
        self.assertFalse(sets.contains(boxes, (0.1, 0.6)))
        self.assertRaises(InvalidInputError, sets.contains, boxes, 0.1)

    def test_cantor(self):
        first = sets.realize_cantor(sets.CantorSpec(1))
        np.testing.assert_allclose(first.arcs, [(0.0, 0.4375),
                                                (0.5625, 1.0)])
        self.assertAlmostEqual(sets.measure(first), 7 / 8)

        second = sets.realize_cantor(sets.CantorSpec(2))
        self.assertEqual(len(second), 4)
        self.assertAlmostEqual(sets.measure(second), 27 / 32)

        for depth in range(6):
            spec = sets.CantorSpec(depth)
            self.assertAlmostEqual(spec.remainder, 4.0 ** -depth / 6)
            self.assertAlmostEqual(
                sets.measure(sets.realize_cantor(spec)),
                spec.approximant_measure)
        self.assertAlmostEqual(sets.CantorSpec(0).limit_measure, 5 / 6)
        self.assertAlmostEqual(sets.CantorSpec(0).predicted_alpha, 2 / 3)

    def test_cantor_contains(self):
        self.assertFalse(sets.cantor_contains(0.5, 1))
        for depth in (1, 5, 20):
            self.assertTrue(sets.cantor_contains(0.0, depth))

        union = sets.realize_cantor(sets.CantorSpec(6))
        points = np.random.default_rng(3).random(5000)
        np.testing.assert_array_equal(sets.cantor_contains(points, 6),
                                      sets.contains(union, points[:, None]))

    def test_cantor_limits(self):
        with self.assertRaises(CapacityError):
            sets.realize_cantor(sets.CantorSpec(10), max_arcs=100)
        with self.assertRaises(UnrepresentableDepthError):
            sets.realize_cantor(sets.CantorSpec(2000))
        with self.assertRaises(UnrepresentableDepthError):
            sets.cantor_contains(0.1, 2000)
        self.assertRaises(InvalidInputError, sets.CantorSpec, -1)
        self.assertRaises(InvalidInputError, sets.CantorSpec, 3, 2)

    def test_product(self):
        half = sets.canonicalize([(0.0, 0.5)])
        product = sets.product_set([half, half])
        self.assertEqual(product.dimension, 2)
        self.assertAlmostEqual(sets.measure(product), 0.25)
        self.assertEqual(sets.to_descriptor(product)["kind"], "product")

    def test_descriptors(self):
        descriptor = {"kind": "intervals", "arcs": [[0.0, 0.3]]}
        A = sets.from_descriptor(descriptor)
        self.assertEqual(sets.to_descriptor(A), descriptor)

        cantor = sets.from_descriptor({"kind": "cantor", "depth": 3})
        self.assertEqual(len(cantor), 8)
        self.assertEqual(sets.to_descriptor(cantor)["kind"], "cantor")

        self.assertRaises(InvalidInputError, sets.from_descriptor,
                          {"kind": "fractal"})
        self.assertRaises(InvalidInputError, sets.from_descriptor,
                          {"kind": "boxes"})


class TestDisplacement(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.interval_profile = displacement.phi_profile(
            sets.canonicalize([(0.0, 0.3)]))
        cls.cantor_profile = displacement.phi_profile(
            {"kind": "cantor", "depth": 8, "base": 8})

    def test_phi_interval(self):
        A = sets.canonicalize([(0.0, 0.3)])
        self.assertAlmostEqual(displacement.phi(A, 0.1), 0.2)
        self.assertEqual(displacement.phi(A, 0.0), 0.0)
        self.assertEqual(displacement.phi(A, 1.0), 0.0)
        self.assertAlmostEqual(displacement.phi(A, 0.5), 0.6)
        np.testing.assert_allclose(
            displacement.phi_many(A, [[0.0], [0.1], [0.9], [0.5]]),
            [0.0, 0.2, 0.2, 0.6], atol=1e-12)

    def test_phi_small_translations(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            A = sets.random_arcs(rng, int(rng.integers(1, 6)))
            eps = rng.random() * min(A.component_lengths().min(),
                                     A.gap_lengths().min()) / 2
            self.assertAlmostEqual(displacement.phi(A, eps),
                                   2 * A.component_count * eps,
                                   delta=1e-12)

    def test_phi_against_monte_carlo(self):
        rng = np.random.default_rng(19)
        scores = []
        for _ in range(100):
            A = sets.random_arcs(rng, int(rng.integers(1, 6)))
            eps = rng.random()
            estimate, stderr = displacement.phi_mc(
                sets.membership_oracle(A), eps, 100_000,
                seed=int(rng.integers(2 ** 32)))
            exact = displacement.phi(A, eps)
            self.assertAlmostEqual(exact, displacement.phi_many(A, [eps])[0],
                                   delta=1e-12)
            scores.append(abs(estimate - exact) / max(stderr, 1e-12))

        # 3 standard errors for the bulk, 4.5 for the rare outlier
        scores = np.array(scores)
        self.assertGreaterEqual(np.mean(scores <= 3), 0.95)
        self.assertTrue(np.all(scores <= 4.5), scores.max())

    def test_phi_properties(self):
        rng = np.random.default_rng(5)
        for name in ("interval", "cantor8", "box2d"):
            system = experiments.PRESETS[name]["system"]
            A = sets.from_descriptor(dict(system["set"]))
            u = rng.random((1000, system["dimension"]))
            w = rng.random((1000, system["dimension"]))
            phi_u = displacement.phi_many(A, u)
            np.testing.assert_allclose(
                displacement.phi_many(A, torus.negate(u)), phi_u,
                rtol=0, atol=1e-12, err_msg=name)
            self.assertTrue(np.all(
                displacement.phi_many(A, torus.translate(u, w)) <=
                phi_u + displacement.phi_many(A, w) + 1e-12), name)

        A = sets.random_arcs(rng, 4)
        u = rng.random()
        self.assertAlmostEqual(displacement.phi(A, u),
                               displacement.phi_many(A, [u])[0],
                               delta=1e-12)

    def test_phi_boxes(self):
        box = sets.BoxUnion.from_boxes([[[0.0, 0.5], [0.0, 0.5]]])
        self.assertAlmostEqual(displacement.phi(box, (0.1, 0.1)), 0.18)
        half = sets.canonicalize([(0.0, 0.5)])
        self.assertAlmostEqual(
            displacement.phi_product([half, half], (0.1, 0.1)), 0.18)
        self.assertAlmostEqual(
            displacement.phi_product(
                [lambda e: 2 * min(e, 1 - e), half], (0.1, 0.1),
                measures=[0.5, 0.5]), 0.18)

    def test_phi_mc(self):
        A = sets.canonicalize([(0.0, 0.3)])
        estimate, stderr = displacement.phi_mc(
            sets.membership_oracle(A), 0.1, 100_000, seed=2)
        self.assertLess(abs(estimate - 0.2), 4 * stderr)
        self.assertEqual(displacement.phi_mc(
            sets.membership_oracle(A), 0.0, 100, seed=2), (0.0, 0.0))
        self.assertRaises(InvalidInputError, displacement.phi_mc,
                          sets.membership_oracle(A), 0.1, 10)

    def test_interval_diverges(self):
        profile = self.interval_profile
        self.assertAlmostEqual(profile.exponent_fit.alpha, 1.0, places=6)
        self.assertEqual(profile.verdict, displacement.DIVERGES)
        self.assertAlmostEqual(displacement.alpha_lower_bound(profile), 1.2,
                               places=6)
        self.assertAlmostEqual(
            displacement.lower_bound_near_zero(profile, 0.01), 2.0,
            places=6)
        with self.assertRaises(NotIntegrableError):
            displacement.z_constant(profile)

    def test_cantor_converges(self):
        profile = self.cantor_profile
        fit = profile.exponent_fit
        self.assertGreaterEqual(fit.alpha, 0.6)
        self.assertLessEqual(fit.alpha, 0.75)
        self.assertEqual(profile.verdict, displacement.CONVERGES)
        self.assertAlmostEqual(displacement.cantor_predicted_alpha(),
                               2 / 3)

        z, error = displacement.z_constant(profile)
        self.assertTrue(math.isfinite(z))
        self.assertGreater(z, 1.0)
        self.assertLessEqual(error / z, 0.05)

        mass = displacement.mu_bar_mass(profile, 0.05)
        self.assertGreater(mass, 0.0)
        self.assertLessEqual(mass, 1.0)
        self.assertLessEqual(mass, displacement.mu_bar_mass(profile, 0.2))

    def test_box_converges(self):
        profile = displacement.phi_profile(
            sets.BoxUnion.from_boxes([[[0.0, 0.5], [0.0, 0.5]]]))
        self.assertEqual(profile.verdict, displacement.CONVERGES)
        self.assertTrue(displacement.symmetry_check(profile))
        z, _ = displacement.z_constant(profile)
        self.assertTrue(math.isfinite(z))

    def test_box_lower_bound_refinement(self):
        box = sets.BoxUnion.from_boxes([[[0.0, 0.5], [0.0, 0.5]]])
        coarse = displacement.alpha_lower_bound(displacement.phi_profile(
            box, displacement.GridSpec(size=64)))
        fine = displacement.alpha_lower_bound(displacement.phi_profile(
            box, displacement.GridSpec(size=128)))
        # φ(u)/|u| is smallest at (1/2, 1/2), which both grids contain
        self.assertAlmostEqual(fine, 1 / math.sqrt(2), places=9)
        self.assertAlmostEqual(coarse, fine, places=9)

    def test_symmetry_check(self):
        profile = displacement.phi_profile(
            sets.canonicalize([(0.0, 0.25), (0.5, 0.75)]))
        check = displacement.symmetry_check(profile)
        self.assertFalse(check)
        self.assertAlmostEqual(check.witness[0], 0.5)
        self.assertTrue(displacement.symmetry_check(self.interval_profile))

    def test_degenerate_fit(self):
        full = sets.IntervalUnion.full()
        with self.assertRaises(DegenerateFitError):
            displacement.phi_profile(full, displacement.GridSpec(size=16))

    def test_oracle_profile(self):
        A = sets.canonicalize([(0.0, 0.3)])
        spec = displacement.GridSpec(size=8, levels=6, mc_samples=2000,
                                     fit_window=(2 ** -6, 2 ** -2))
        with self.assertRaises(InvalidInputError):
            displacement.phi_profile(sets.membership_oracle(A), spec)

        profile = displacement.phi_profile(sets.membership_oracle(A), spec,
                                           dimension=1)
        self.assertFalse(profile.exact)
        self.assertAlmostEqual(profile.measure, 0.3, delta=0.05)
        self.assertTrue(np.all(profile.stderr[1:8] > 0))


class TestRds(unittest.TestCase):
    def test_apply_f(self):
        cfg = interval_system()
        np.testing.assert_allclose(rds.apply_f(cfg, 0.1), [0.1 + JUMP])
        np.testing.assert_allclose(rds.apply_f(cfg, 0.5), [0.5])
        np.testing.assert_allclose(rds.apply_f(cfg, [[0.1], [0.5]]),
                                   [[0.1 + JUMP], [0.5]])

        cfg = rds.SystemConfig.from_double_rotation(
            sets.canonicalize([(0.0, 0.3)]), 0.5, 0.2)
        self.assertAlmostEqual(cfg.v[0], 0.3)
        np.testing.assert_allclose(rds.apply_double_rotation(cfg, 0.1),
                                   [0.6])
        np.testing.assert_allclose(rds.apply_double_rotation(cfg, 0.5),
                                   [0.7])

    def test_config(self):
        self.assertRaises(InvalidInputError, interval_system, 0.0)
        cfg = rds.SystemConfig({"kind": "intervals", "arcs": [[0.0, 0.3]]},
                               [JUMP])
        self.assertEqual(cfg.descriptor()["set"]["kind"], "intervals")
        self.assertEqual(cfg.validate(), [])

        with self.assertLogs("rotsync", level="WARNING"):
            warnings = rds.SystemConfig(
                sets.canonicalize([(0.0, 0.25), (0.5, 0.75)]),
                [0.25]).validate()
        self.assertEqual(len(warnings), 2)

    def test_noise(self):
        noise = rds.NoiseStream(42)
        np.testing.assert_array_equal(noise.increments(10, 2),
                                      noise.increments(20, 2)[:10])
        self.assertFalse(np.array_equal(
            noise.increments(10, 1), noise.substream(0).increments(10, 1)))
        self.assertFalse(np.array_equal(
            noise.generator("maps").random(5),
            noise.generator("chain").random(5)))
        self.assertRaises(InvalidInputError, rds.NoiseStream, -1)
        self.assertRaises(InvalidInputError, noise.generator, "other")

    def test_forward_orbit(self):
        cfg = interval_system()
        orbit = rds.forward_orbit(cfg, 0.1, 100, rds.NoiseStream(1))
        self.assertEqual(orbit.shape, (101, 1))
        np.testing.assert_array_equal(
            orbit, rds.forward_orbit(cfg, 0.1, 100, rds.NoiseStream(1)))
        np.testing.assert_array_equal(
            orbit[:51], rds.forward_orbit(cfg, 0.1, 50, rds.NoiseStream(1)))
        self.assertRaises(InvalidInputError, rds.forward_orbit, cfg, 0.1, 0,
                          rds.NoiseStream(1))

    def test_forward_orbit_uniform(self):
        uniform = analysis.Histogram.from_masses(np.full(32, 1 / 32))
        for name in ("interval", "cantor8"):
            cfg = experiments.ExperimentConfig.from_dict(
                experiments.PRESETS[name]).system_config
            orbit = rds.forward_orbit(cfg, 0.1, 10 ** 5, rds.NoiseStream(21))
            occupation = analysis.Histogram.from_points(orbit[1:], 32)
            self.assertLessEqual(
                analysis.histogram_distance(occupation, uniform), 0.05,
                name)

        cfg = experiments.ExperimentConfig.from_dict(
            experiments.PRESETS["box2d"]).system_config
        orbit = rds.forward_orbit(cfg, (0.1, 0.2), 10 ** 5,
                                  rds.NoiseStream(21))
        occupation = analysis.Histogram.from_points(orbit[1:], 8)
        self.assertLessEqual(analysis.histogram_distance(
            occupation, analysis.Histogram.from_masses(
                np.full((8, 8), 1 / 64))), 0.05)

    def test_two_point_orbit(self):
        cfg = interval_system()
        same = rds.two_point_orbit(cfg, 0.3, 0.3, 200, rds.NoiseStream(2))
        np.testing.assert_array_equal(same.distances, 0.0)
        np.testing.assert_array_equal(same.lattice, 0)

        trace = rds.two_point_orbit(cfg, 0.1, 0.6, 2000, rds.NoiseStream(2))
        self.assertTrue(set(np.diff(trace.lattice)) <= {-1, 0, 1})
        np.testing.assert_array_less(
            torus.circle_delta(trace.differences(),
                               torus.diff(trace.x, trace.y)), 1e-9)
        np.testing.assert_allclose(trace.distances,
                                   torus.norm(trace.differences()),
                                   atol=1e-9)
        self.assertEqual(trace.length, 2000)

        lean = rds.two_point_orbit(cfg, 0.1, 0.6, 2000, rds.NoiseStream(2),
                                   keep_positions=False)
        self.assertIsNone(lean.x)
        np.testing.assert_array_equal(lean.lattice, trace.lattice)

    def test_jump_frequencies(self):
        cfg = interval_system()
        trace = rds.two_point_orbit(cfg, 0.1, 0.6, 200_000,
                                    rds.NoiseStream(3), keep_positions=False)
        rows = rds.jump_frequencies(trace, cfg, 8, min_visits=5000)
        self.assertTrue(rows)
        for row in rows:
            self.assertGreaterEqual(row["visits"], 5000)
            observed = (row["plus_jumps"] + row["minus_jumps"]) / \
                (2 * row["visits"])
            self.assertLess(abs(observed - row["predicted"]),
                            3 * row["stderr"])

    @SLOW
    def test_jump_frequencies_long_run(self):
        cfg = interval_system()
        trace = rds.two_point_orbit(cfg, 0.1, 0.6, 10 ** 6,
                                    rds.NoiseStream(3), keep_positions=False)
        rows = rds.jump_frequencies(trace, cfg, 16, min_visits=10 ** 4)
        self.assertTrue(rows)
        for row in rows:
            observed = (row["plus_jumps"] + row["minus_jumps"]) / \
                (2 * row["visits"])
            self.assertLess(abs(observed - row["predicted"]),
                            3 * row["stderr"])

    def test_lattice_samples(self):
        cfg = interval_system()
        samples = rds.two_point_lattice_samples(cfg, 0.5, 10, 1000,
                                                rds.NoiseStream(4))
        self.assertEqual(samples.shape, (1000,))
        self.assertTrue(np.all(np.abs(samples) <= 10))

    def test_ensembles(self):
        cfg = interval_system()
        single = rds.ensemble_forward(cfg, 1, 10, rds.NoiseStream(5),
                                      [0, 10])
        self.assertEqual([s.d_value for s in single], [0.0, 0.0])

        uniform = rds.ParticleEnsemble.uniform(
            10_000, 1, np.random.default_rng(0))
        self.assertAlmostEqual(analysis.d_functional(uniform), 0.25,
                               delta=1e-3)

        snapshots = rds.ensemble_forward(cfg, 500, 64, rds.NoiseStream(5),
                                         [0, 8, 64])
        self.assertEqual([s.step for s in snapshots], [0, 8, 64])
        self.assertAlmostEqual(snapshots[0].d_value, 0.25, delta=0.01)
        with self.assertRaises(InvalidInputError):
            rds.ensemble_forward(cfg, 10, 5, rds.NoiseStream(5), [6])

    def test_reversed_ensemble(self):
        cfg = interval_system()
        series = rds.reversed_series(cfg, 200, [0, 4, 16],
                                     rds.NoiseStream(6))
        self.assertEqual([s.step for s in series], [4, 16])
        ensemble = rds.reversed_ensemble(cfg, 200, 16, rds.NoiseStream(6))
        np.testing.assert_array_equal(ensemble.positions,
                                      series[-1].ensemble.positions)

    def test_forward_and_reversed_laws(self):
        cfg = interval_system()
        forward = [rds.ensemble_forward(cfg, 200, 16, rds.NoiseStream(seed),
                                        [16])[0].d_value
                   for seed in range(60)]
        backward = [analysis.d_functional(rds.reversed_ensemble(
            cfg, 200, 16, rds.NoiseStream(1000 + seed)))
            for seed in range(60)]
        self.assertGreater(stats.ks_2samp(forward, backward).pvalue, 0.001)

    @SLOW
    def test_reversed_collapse_long_run(self):
        cfg = interval_system()
        forward = [rds.ensemble_forward(cfg, 10 ** 4, 100,
                                        rds.NoiseStream(seed),
                                        [100])[0].d_value
                   for seed in range(200)]
        backward = [analysis.d_functional(rds.reversed_ensemble(
            cfg, 10 ** 4, 100, rds.NoiseStream(1000 + seed)))
            for seed in range(200)]
        self.assertGreater(stats.ks_2samp(forward, backward).pvalue, 0.001)

        collapsed = [analysis.d_functional(rds.reversed_ensemble(
            cfg, 10 ** 4, 2000, rds.NoiseStream(seed))) <= 0.01
            for seed in range(20)]
        self.assertGreaterEqual(np.mean(collapsed), 0.9)

    def test_estimate_limit_point(self):
        point = rds.estimate_limit_point(rds.ParticleEnsemble.dirac(0.7, 5))
        self.assertAlmostEqual(point[0], 0.7)

        atoms = rds.ParticleEnsemble([[0.1], [0.3]])
        point = rds.estimate_limit_point(atoms)
        self.assertTrue(0.1 - 1e-12 <= point[0] <= 0.3 + 1e-12)

        rng = np.random.default_rng(8)
        cluster = torus.wrap(0.98 + 0.01 * rng.standard_normal(1001))
        point = rds.estimate_limit_point(rds.ParticleEnsemble(cluster))
        angles = 2 * math.pi * cluster
        mean = (math.atan2(np.sin(angles).mean(), np.cos(angles).mean()) /
                (2 * math.pi)) % 1.0
        self.assertLess(torus.torus_dist(point[0], mean), 0.005)

    def test_images(self):
        cfg = interval_system(0.45)
        image = rds.image_f(cfg, sets.IntervalUnion.full())
        np.testing.assert_allclose(image.arcs, [(0.3, 1.0)])
        self.assertAlmostEqual(sets.measure(image), 0.7)

        self.assertTrue(rds.reversed_image_exact(
            cfg, 0, rds.NoiseStream(1)).is_full)

        cfg = interval_system()
        for seed in range(10):
            noise = rds.NoiseStream(seed)
            previous = rds.reversed_image_exact(cfg, 5, noise)
            current = rds.reversed_image_exact(cfg, 6, noise)
            self.assertTrue(sets.is_subset(current, previous))
            self.assertLessEqual(sets.measure(current),
                                 sets.measure(previous) + 1e-12)

    def test_image_measure_mc(self):
        cfg = interval_system()
        noise = rds.NoiseStream(9)
        exact = sets.measure(rds.reversed_image_exact(cfg, 10, noise))
        estimate, stderr = rds.image_measure_mc(cfg, 10, noise, 20_000)
        self.assertLessEqual(abs(estimate - exact), 4 * stderr + 1e-12)

    def test_image_capacity(self):
        cfg = interval_system()
        with self.assertRaises(CapacityError) as context:
            rds.reversed_image_exact(cfg, 50, rds.NoiseStream(1),
                                     max_components=1)
        self.assertIsInstance(context.exception.partial, sets.IntervalUnion)
        self.assertLessEqual(context.exception.step, 50)

        with self.assertRaises(InvalidInputError):
            rds.reversed_image_exact(
                rds.SystemConfig(sets.BoxUnion.from_boxes(
                    [[[0.0, 0.5], [0.0, 0.5]]]), [JUMP, 0.1]),
                5, rds.NoiseStream(1))

    def test_attractor_report(self):
        report = rds.attractor_report(interval_system(), 64,
                                      rds.NoiseStream(10))
        self.assertEqual([c.step for c in report.checkpoints],
                         [1, 2, 4, 8, 16, 32, 64])
        self.assertTrue(report.nested)
        measures = report.measures
        self.assertTrue(all(a >= b - 1e-12
                            for a, b in zip(measures, measures[1:])))
        self.assertIn("arcs", report.to_dict()["checkpoints"][0])
        self.assertEqual(rds.geometric_schedule(100, ratio=10, start=1),
                         [1, 10, 100])

    @SLOW
    def test_attractor_long_run(self):
        for seed in range(5):
            report = rds.attractor_report(interval_system(), 10 ** 4,
                                          rds.NoiseStream(seed))
            self.assertTrue(report.nested)


class TestDiffChain(unittest.TestCase):
    def setUp(self):
        self.A = sets.canonicalize([(0.0, 0.3)])

    def test_lattice_phi(self):
        provider = diffchain.LatticePhi(self.A, 0.5, JUMP)
        np.testing.assert_allclose(
            provider.values([-2, 0, 3]),
            displacement.phi_many(self.A, provider.positions([-2, 0, 3])))
        self.assertAlmostEqual(provider.value(1000),
                               displacement.phi(self.A, 0.5 + 1000 * JUMP))

        bad = diffchain.LatticePhi(lambda eps: np.full(len(eps), 1.5), 0.5,
                                   JUMP)
        with self.assertRaises(InvalidProbabilityError):
            bad.value(0)
        with self.assertRaises(InvalidProbabilityError):
            diffchain.chain_orbit(0.5, 10, bad, rds.NoiseStream(1))

    def test_chain_orbit(self):
        orbit = diffchain.chain_orbit(0.5, 5000, self.A, rds.NoiseStream(1),
                                      v=JUMP, bins=16)
        self.assertEqual(orbit.length, 5000)
        self.assertEqual(orbit.plus + orbit.minus + orbit.hold, 5000)
        self.assertTrue(set(np.diff(orbit.lattice)) <= {-1, 0, 1})
        self.assertEqual(orbit.histogram.total, 5000)
        self.assertRaises(InvalidInputError, diffchain.chain_orbit, 0.5,
                          10, self.A, rds.NoiseStream(1))

        again = diffchain.chain_orbit(0.5, 5000, self.A, rds.NoiseStream(1),
                                      v=JUMP, bins=16)
        np.testing.assert_array_equal(orbit.lattice, again.lattice)

    def test_chain_matches_two_points(self):
        cfg = interval_system()
        trace = rds.two_point_orbit(cfg, 0.1, 0.6, 2000, rds.NoiseStream(2))
        orbit = diffchain.chain_orbit(trace.z0, 2000, cfg.A,
                                      rds.NoiseStream(2), v=cfg.v)
        self.assertEqual(orbit.z0.tolist(), trace.z0.tolist())

        # x_n stays uniform and independent of x_n − y_n, so the lattice
        # index of the pair follows the chain in law
        pairs = rds.two_point_lattice_samples(cfg, 0.5, 10, 20_000,
                                              rds.NoiseStream(11))
        chain = diffchain.chain_lattice_samples(0.5, 10, 20_000, cfg.A,
                                                rds.NoiseStream(12), v=cfg.v)
        _, table = diffchain.pooled_table(pairs, chain)
        self.assertGreater(table.shape[1], 2)
        _, p_value, _, _ = stats.chi2_contingency(table, correction=False)
        self.assertGreater(p_value, 0.01)

    def test_slowed_orbit_unit_phi(self):
        ones = diffchain.LatticePhi(lambda eps: np.ones(len(eps)), 0.5, JUMP)
        orbit, walk = diffchain.slowed_orbit(0.5, 500, ones,
                                             rds.NoiseStream(3))
        np.testing.assert_array_equal(walk.holding_times, 1)
        self.assertEqual(orbit.hold, 0)
        self.assertTrue(set(np.abs(np.diff(orbit.lattice))) == {1})
        np.testing.assert_array_equal(orbit.lattice, walk.sites[:501])

    def test_slowed_orbit(self):
        orbit, walk = diffchain.slowed_orbit(0.5, 5000, self.A,
                                             rds.NoiseStream(3), v=JUMP)
        self.assertEqual(orbit.length, 5000)
        self.assertGreaterEqual(walk.arrival_times()[-1], 5000)
        self.assertEqual(walk.J(0), 0)
        np.testing.assert_array_equal(
            orbit.lattice, walk.sites[walk.J(np.arange(5001))])

        summary = diffchain.holding_time_summary(walk, 0.05)
        self.assertEqual(summary["steps"], len(walk.holding_times))
        self.assertGreaterEqual(summary["mean_holding_time"], 1.0)
        self.assertGreaterEqual(summary["outside_fraction"], 0.0)
        self.assertLessEqual(summary["outside_fraction"], 1.0)
        self.assertFalse(summary["stalled"])

    def test_geometric_holding_times(self):
        rng = np.random.default_rng(4)
        times = diffchain._geometric(rng.random(10_000), 0.25)
        stderr = times.std(ddof=1) / math.sqrt(len(times))
        self.assertLess(abs(times.mean() - 4.0), 3 * stderr)
        self.assertTrue(np.all(times >= 1))
        self.assertEqual(float(diffchain._geometric(0.3, 0.0)), math.inf)

    def test_law_equivalence(self):
        result = diffchain.law_equivalence_test(
            0.5, 10, 10_000, rds.NoiseStream(5), self.A, v=JUMP)
        self.assertGreater(result.p_value, 0.001)
        self.assertGreaterEqual(result.dof, 1)
        self.assertTrue(all(min(row) >= 0 for row in result.counts))

        trivial = diffchain.law_equivalence_test(
            0.5, 0, 10_000, rds.NoiseStream(5), self.A, v=JUMP)
        self.assertEqual(trivial.statistic, 0.0)
        self.assertEqual(trivial.states, (0,))

        with self.assertRaises(UnderpoweredTestError):
            diffchain.law_equivalence_test(0.5, 10, 9999, rds.NoiseStream(5),
                                           self.A, v=JUMP)

    def test_law_equivalence_slower_walk(self):
        result = diffchain.law_equivalence_test(
            0.5, 30, 20_000, rds.NoiseStream(5), self.A, v=JUMP,
            hold_scale=2.0)
        self.assertLess(result.p_value, 1e-6)

        _, slower = diffchain.slowed_orbit(0.5, 5000, self.A,
                                           rds.NoiseStream(3), v=JUMP,
                                           hold_scale=2.0)
        _, regular = diffchain.slowed_orbit(0.5, 5000, self.A,
                                            rds.NoiseStream(3), v=JUMP)
        # same sites, every completed holding time at least as long
        steps = len(slower.holding_times) - 1
        self.assertLessEqual(steps, len(regular.holding_times) - 1)
        np.testing.assert_array_equal(slower.sites[:steps + 1],
                                      regular.sites[:steps + 1])
        self.assertTrue(np.all(slower.holding_times[:steps] >=
                               regular.holding_times[:steps]))
        self.assertGreater(np.sum(slower.holding_times[:steps]),
                           np.sum(regular.holding_times[:steps]))

    @SLOW
    def test_law_equivalence_long_run(self):
        result = diffchain.law_equivalence_test(
            0.5, 30, 10 ** 5, rds.NoiseStream(6), self.A, v=JUMP)
        self.assertGreater(result.p_value, 0.001)

        corrupted = diffchain.law_equivalence_test(
            0.5, 30, 10 ** 5, rds.NoiseStream(6), self.A, v=JUMP,
            hold_scale=2.0)
        self.assertLess(corrupted.p_value, 1e-6)

    def test_pooled_table(self):
        starts, table = diffchain.pooled_table(
            np.array([0] * 50 + [1] * 3 + [2] * 50),
            np.array([0] * 50 + [1] * 2 + [2] * 50))
        self.assertEqual(table.shape[0], 2)
        self.assertEqual(table.sum(), 205)
        self.assertEqual(starts[0], 0)
        expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0) / \
            table.sum()
        self.assertTrue(np.all(expected >= diffchain.MIN_EXPECTED))

    def test_predicted_density(self):
        interval = displacement.phi_profile(self.A)
        with self.assertRaises(NotIntegrableError):
            diffchain.predicted_density(interval, 16)

        profile = displacement.phi_profile(
            {"kind": "cantor", "depth": 8, "base": 8})
        predicted = diffchain.predicted_density(profile, 64)
        self.assertAlmostEqual(predicted.total, 1.0, places=12)
        self.assertTrue(predicted.centered)
        masses = predicted.masses
        self.assertGreater(masses[1], masses[32])
        self.assertGreater(masses[-1], masses[32])

    def test_occupation_compare(self):
        orbit = diffchain.chain_orbit(0.5, 1000, self.A, rds.NoiseStream(7),
                                      v=JUMP, bins=16)
        self.assertEqual(
            diffchain.occupation_compare(orbit, orbit.histogram), 0.0)

        zeros = diffchain.LatticePhi(lambda eps: np.zeros(len(eps)), 0.5,
                                     JUMP)
        frozen = diffchain.chain_orbit(0.5, 100, zeros, rds.NoiseStream(7),
                                       bins=16)
        elsewhere = np.zeros(16)
        elsewhere[0] = 1.0
        predicted = analysis.Histogram.from_masses(elsewhere, centered=True)
        self.assertEqual(diffchain.occupation_compare(frozen, predicted), 1.0)

        with self.assertRaises(InvalidInputError):
            diffchain.occupation_compare(
                orbit, analysis.Histogram.from_masses(np.ones(8) / 8,
                                                      centered=True))


class TestAnalysis(unittest.TestCase):
    def test_d_functional(self):
        rng = np.random.default_rng(12)
        weights = rng.random(300)
        ensemble = rds.ParticleEnsemble(rng.random((300, 1)),
                                        weights / weights.sum())
        self.assertAlmostEqual(analysis.d_functional(ensemble),
                               analysis.d_functional_pairwise(ensemble),
                               places=12)
        for u in rng.random(10):
            moved = rds.ParticleEnsemble(
                torus.translate(ensemble.positions, u), ensemble.weights)
            self.assertAlmostEqual(analysis.d_functional(moved),
                                   analysis.d_functional(ensemble),
                                   places=12)

        self.assertAlmostEqual(
            analysis.d_functional(np.array([[0.1], [0.3]])), 0.1)
        self.assertAlmostEqual(
            analysis.d_functional(np.array([[0.05], [0.95]])), 0.05)
        self.assertAlmostEqual(
            analysis.d_functional(np.array([[0.4]] * 3)), 0.0)

        planar = rds.ParticleEnsemble(rng.random((50, 2)))
        self.assertAlmostEqual(analysis.d_functional(planar),
                               analysis.d_functional_pairwise(planar))
        self.assertRaises(InvalidInputError, analysis.d_functional,
                          np.empty((0, 1)))

    def test_sync_fraction(self):
        cfg = interval_system()
        same = rds.two_point_orbit(cfg, 0.2, 0.2, 100, rds.NoiseStream(1))
        self.assertEqual(analysis.sync_fraction(same, 0.01), 1.0)
        self.assertEqual(analysis.cesaro_distance(same), 0.0)

        trace = rds.two_point_orbit(cfg, 0.1, 0.6, 5000, rds.NoiseStream(1),
                                    keep_positions=False)
        self.assertEqual(analysis.sync_fraction(trace, 0.5), 1.0)
        for delta in (0.01, 0.05, 0.1):
            fraction = analysis.sync_fraction(trace, delta)
            self.assertLessEqual(
                analysis.cesaro_distance(trace),
                (1 - fraction) * 0.5 + delta + 1e-12)

        self.assertRaises(InvalidInputError, analysis.sync_fraction, trace,
                          0.0)
        self.assertRaises(InvalidInputError, analysis.sync_fraction, trace,
                          0.1, 6000)

        rows = list(analysis.sync_fraction_table(trace, [0.05, 1.0],
                                                 [100, 5000]))
        self.assertEqual([(r["N"], r["delta"]) for r in rows],
                         [(100, 0.05), (100, 1.0), (5000, 0.05),
                          (5000, 1.0)])
        self.assertAlmostEqual(rows[2]["sync_fraction"],
                               analysis.sync_fraction(trace, 0.05))
        self.assertEqual(rows[3]["sync_fraction"], 1.0)
        self.assertAlmostEqual(rows[0]["cesaro_distance"],
                               analysis.cesaro_distance(trace, 100))

    @SLOW
    def test_synchronization_grows(self):
        cfg = interval_system()
        early, late, early_distance, late_distance = [], [], [], []
        for seed in range(20):
            trace = rds.two_point_orbit(cfg, 0.1, 0.6, 10 ** 6,
                                        rds.NoiseStream(seed),
                                        keep_positions=False)
            early.append(analysis.sync_fraction(trace, 0.05, 10 ** 4))
            late.append(analysis.sync_fraction(trace, 0.05))
            early_distance.append(analysis.cesaro_distance(trace, 10 ** 4))
            late_distance.append(analysis.cesaro_distance(trace))
        self.assertGreater(analysis.median_over_seeds(late),
                           analysis.median_over_seeds(early))
        self.assertGreater(analysis.median_over_seeds(late), 0.9)
        self.assertLess(analysis.median_over_seeds(late_distance),
                        analysis.median_over_seeds(early_distance))

    @SLOW
    def test_no_synchronization_on_the_torus(self):
        box = sets.BoxUnion.from_boxes([[[0.0, 0.5], [0.0, 0.5]]])
        cfg = rds.SystemConfig(box, [JUMP, math.sqrt(3) - 1])
        profile = displacement.phi_profile(box)
        N = 10 ** 7
        trace = rds.two_point_orbit(cfg, (0.1, 0.2), (0.6, 0.7), N,
                                    rds.NoiseStream(1), keep_positions=False)

        predicted = diffchain.predicted_density(profile, 16)
        self.assertLessEqual(
            analysis.histogram_distance(trace.occupancy(16), predicted), 0.1)

        fraction = analysis.sync_fraction(trace, 0.05)
        mass = displacement.mu_bar_mass(profile, 0.05)
        stderr = math.sqrt(mass * (1 - mass) / N)
        self.assertLess(abs(fraction - mass), 3 * stderr)
        self.assertLess(fraction, 0.5)

    def test_histograms(self):
        points = np.array([[0.01], [0.99], [0.5], [0.26]])
        plain = analysis.Histogram.from_points(points, 4)
        np.testing.assert_array_equal(plain.counts, [1, 1, 1, 1])
        centered = analysis.Histogram.from_points(points, 4, centered=True)
        np.testing.assert_array_equal(centered.counts, [2, 1, 1, 0])
        np.testing.assert_allclose(centered.bin_centers()[:, 0],
                                   [0, 0.25, 0.5, 0.75])
        self.assertEqual(centered.without_zero_bin().total, 2)
        self.assertEqual(plain.merge(plain).total, 8)
        self.assertAlmostEqual(sum(r["mass"] for r in plain.rows()), 1.0)

        planar = analysis.Histogram.from_points(np.random.default_rng(
            1).random((100, 2)), 4)
        self.assertEqual(planar.bins, (4, 4))
        self.assertRaises(InvalidInputError, analysis.Histogram,
                          np.array([-1.0]))

    def test_histogram_distance(self):
        rng = np.random.default_rng(13)
        h1 = analysis.Histogram.from_points(rng.random(10 ** 6), 64)
        h2 = analysis.Histogram.from_points(rng.random(10 ** 6), 64)
        self.assertEqual(analysis.histogram_distance(h1, h1), 0.0)
        self.assertLess(analysis.histogram_distance(h1, h2), 0.01)
        self.assertLess(analysis.histogram_distance(h1, h2, analysis.KS),
                        0.01)

        left = analysis.Histogram.from_masses([1.0, 0.0])
        right = analysis.Histogram.from_masses([0.0, 1.0])
        self.assertEqual(analysis.histogram_distance(left, right), 1.0)
        self.assertEqual(
            analysis.histogram_distance(left, right, analysis.KS), 1.0)

        with self.assertRaises(InvalidInputError):
            analysis.histogram_distance(h1, left)
        with self.assertRaises(InvalidInputError):
            analysis.histogram_distance(left, right, "L2")
        planar = analysis.Histogram.from_masses(np.ones((2, 2)) / 4)
        with self.assertRaises(InvalidInputError):
            analysis.histogram_distance(planar, planar, analysis.KS)

    def test_median_over_seeds(self):
        self.assertEqual(analysis.median_over_seeds([3, None, 1, 2]), 2.0)
        self.assertTrue(math.isnan(analysis.median_over_seeds([None])))


class TestRunMessage(unittest.TestCase):
    def test_message(self):
        message = logger.RunMessage(Experiment="twopoint", Seed=3)
        self.assertEqual(list(message)[:5],
                         ["RunID", "Iteration", "StartTime", "Experiment",
                          "Seed"])
        self.assertEqual(message.Seed, 3)
        self.assertIsNone(message.Missing)
        self.assertEqual(message.iteration, 0)

        message.advance(D=0.25)
        message.advance(D=0.125)
        self.assertEqual(message.iteration, 2)
        message.finalize()
        self.assertEqual(message["Iteration"], "final(2)")
        self.assertTrue(message.final)
        self.assertEqual(message.iteration, sys.maxsize)
        self.assertRaises(ValueError, message.advance)

        fresh = logger.RunMessage()
        fresh.finalize()
        self.assertEqual(fresh["Iteration"], "final")

    def test_representations(self):
        message = logger.RunMessage(RunID="abc", Experiment="ensemble",
                                    Seed=1, D=0.123456, Nested=True,
                                    LimitPoint=[0.5])
        message.default_keys = ("Experiment", "D", "Nested")
        self.assertEqual(str(message),
                         "Experiment='ensemble' D=0.1235 Nested=true")
        self.assertIn("D=0.123456", message.full)
        self.assertIn("LimitPoint='[0.5]'", message.full)

        row = next(csv.reader(io.StringIO(message.csv)))
        self.assertEqual(row[0], "abc")
        self.assertEqual(row[3:], ["ensemble", "1", "0.123456", "true",
                                   "[0.5]"])
        self.assertEqual(logger.RunMessage.csv_columns()[0], "RunID")

    def test_emitter(self):
        message = logger.RunMessage(Experiment="phi")
        with self.assertLogs("rotsync.experiments.phi", level="INFO") as cm:
            logger.log("rotsync.experiments.phi", message)
        self.assertIs(cm.records[0].run, message)
        self.assertIs(logger.get_log_emitter(), logger.get_log_emitter())

    def test_expression_filter(self):
        record = logging.LogRecord("rotsync", logging.INFO, __file__, 1,
                                   "msg", None, None)
        record.run = logger.RunMessage(Experiment="diffchain", TV=0.1)
        record.run.finalize()

        self.assertTrue(filters.ExpressionFilter(
            "Iteration == 'final'").filter(record))
        self.assertTrue(filters.ExpressionFilter(
            "Experiment == 'diffchain' and TV > 0.05").filter(record))
        self.assertFalse(filters.ExpressionFilter("TV > 1").filter(record))
        self.assertFalse(filters.ExpressionFilter("Nope > 1").filter(record))
        self.assertTrue(filters.ExpressionFilter(
            "Nope > 1", exception_result=True).filter(record))


class TestConfiguration(unittest.TestCase):
    def setUp(self):
        class Sample(bases.BaseExperiment):
            kind = "sample"
            all_fields = ("Experiment", "Seed", "D")
        self.Sample = Sample

    def test_experiment_levels(self):
        self.Sample.dictConfig({
            "levels": {"quiet": "WARNING"},
            "experiments": {
                "global": {"log_level": {"final": "cfg://levels.quiet"}},
                "sample": {"log_level": {"first": "INFO", "update": "bad"},
                           "default_fields": ["Seed", "D", "Unknown"]},
            }}, sub_section="sample")
        self.assertEqual(self.Sample._log_level_final, logging.WARNING)
        self.assertEqual(self.Sample._log_level_first, logging.INFO)
        self.assertEqual(self.Sample._log_level_update, logging.DEBUG)
        self.assertEqual(self.Sample.default_fields, ("Seed", "D"))
        self.assertEqual(bases.BaseExperiment._log_level_final, logging.INFO)

    def test_lifecycle_logs(self):
        experiment = self.Sample()
        with self.assertLogs("rotsync.experiments.sample",
                             level="DEBUG") as cm:
            message = experiment.start_message(Seed=1)
            experiment.update_message(message, D=0.5)
            experiment.final_message(message, D=0.25)
        self.assertEqual([r.levelno for r in cm.records],
                         [logging.DEBUG, logging.DEBUG, logging.INFO])
        self.assertEqual(message["Iteration"], "final(1)")
        self.assertEqual(message.D, 0.25)

    def test_csv_headers(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "runs.csv")
            self.Sample.dictConfig({
                "handlers": {"file": {"filename": path}},
                "experiments": {"global": {"csv": [{
                    "file": "cfg://handlers.file.filename",
                    "add_headers_if_empty": "{run.csv},Extra"}]}}})
            with open(path) as fp:
                self.assertEqual(
                    fp.read(),
                    ",".join(logger.RunMessage.csv_columns()) + ",Extra\n")

    def test_resolve(self):
        configurator = bases.ExperimentConfigurator({
            "systems": {"a": {"v": [0.25]}},
            "system": "cfg://systems.a"})
        self.assertEqual(configurator.resolve(
            configurator.config["system"]), {"v": [0.25]})
        self.assertEqual(configurator.resolve(["ext://math.pi", 1]),
                         [math.pi, 1])

    def test_queue_handler(self):
        backend = logging.NullHandler()
        handler = rotsync.setup_queue_handler(backend, register_atexit=False)
        try:
            self.assertIsInstance(handler, logging.handlers.QueueHandler)
        finally:
            rotsync.queue_listeners.pop().stop()

    @mock.patch("rotsync.setup_queue_handler")
    def test_add_logging_handlers(self, mock_setup):
        target = logging.getLogger("rotsync.tests")
        handler = logging.NullHandler()
        mock_setup.return_value = handler
        try:
            rotsync.add_logging_handlers(handler, logger_name="rotsync.tests",
                                         level=logging.DEBUG)
            mock_setup.assert_called_once_with(handler, register_atexit=True)
            self.assertIn(handler, target.handlers)
            self.assertEqual(target.level, logging.DEBUG)
        finally:
            target.removeHandler(handler)


class TestExperiments(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def config(self, preset, **experiment):
        document = experiments.merge_config(
            experiments.PRESETS[preset],
            {"experiment": experiment, "output": {"dir": self.tmp.name}})
        return experiments.ExperimentConfig.from_dict(document)

    def test_config(self):
        config = self.config("interval", seeds=[1, 2], N=500)
        self.assertEqual(config.seeds, (1, 2))
        self.assertEqual(config.params["N"], 500)
        self.assertEqual(config.params["M"], experiments.DEFAULT_PARAMS["M"])
        self.assertEqual(config.name, "interval")
        self.assertEqual(config.to_dict()["experiment"]["seeds"], [1, 2])

        document = {"systems": {"mine": experiments.PRESETS["box2d"][
            "system"]}, "system": "cfg://systems.mine"}
        config = experiments.ExperimentConfig.from_dict(document)
        self.assertEqual(config.system_config.dimension, 2)
        self.assertEqual(config.seeds, (0,))

    def test_system_warnings(self):
        with self.assertLogs("rotsync", level="WARNING") as cm:
            config = experiments.ExperimentConfig.from_dict({"system": {
                "set": {"kind": "intervals",
                        "arcs": [[0.0, 0.25], [0.5, 0.75]]}}})
        self.assertEqual(config.system_config.dimension, 1)
        self.assertEqual(len(cm.records), 1)
        self.assertIn("invariant under the translation by [0.5]",
                      cm.output[0])

        with self.assertLogs("rotsync.rds", level="WARNING") as cm:
            experiments.ExperimentConfig.from_dict({"system": {
                "set": {"kind": "intervals", "arcs": [[0.0, 0.3]]},
                "v": [0.25]}})
        self.assertIn("close to the rational 1/4", cm.output[0])

        with mock.patch.object(rds._logger, "warning") as mock_warning:
            for preset in experiments.PRESETS.values():
                experiments.ExperimentConfig.from_dict(preset)
        mock_warning.assert_not_called()

    def test_invalid_config(self):
        for experiment in ({"bogus": 1}, {"N": 0}, {"deltas": []},
                           {"seeds": [-1]}, {"threads": 0},
                           {"exclusion_radius": 0.5},
                           {"horizons": [10], "N": 5},
                           {"law_test": "yes"}):
            with self.assertRaises(InvalidConfigError, msg=experiment):
                self.config("interval", **experiment)

        for document in ({}, {"system": {"set": {"kind": "fractal"}}},
                         {"system": {"dimension": 2, "set": {
                             "kind": "intervals", "arcs": [[0, 0.3]]}}},
                         {"system": {"set": {"kind": "intervals", "arcs": [
                             [0, 0.3]]}, "v": [0]}}):
            with self.assertRaises(InvalidConfigError, msg=document):
                experiments.ExperimentConfig.from_dict(document)

    def test_merge_config(self):
        self.assertEqual(
            experiments.merge_config({"a": {"b": 1, "c": 2}, "d": 3},
                                     {"a": {"c": 4}, "d": [5]}),
            {"a": {"b": 1, "c": 4}, "d": [5]})

    def test_classify(self):
        result = experiments.ClassifyExperiment(
            self.config("interval", seeds=[1, 2])).run()
        self.assertEqual(len(result.runs), 1)
        self.assertEqual(result.runs[0].summary["Verdict"], "diverges")
        self.assertIsNone(result.runs[0].summary["Z"])

        with self.assertRaises(NotIntegrableError):
            experiments.ClassifyExperiment(
                self.config("interval", require_integrable=True)).run()

        result = experiments.ClassifyExperiment(self.config("cantor8")).run()
        summary = result.runs[0].summary
        self.assertEqual(summary["Verdict"], "converges")
        self.assertGreater(summary["Z"], 0)
        self.assertIn("cantor", result.runs[0].data)

        result = experiments.ClassifyExperiment(self.config("box2d")).run()
        self.assertEqual(result.runs[0].summary["Verdict"], "converges")

    def test_phi(self):
        result = experiments.PhiExperiment(self.config(
            "interval", grid_size=16, levels=8)).run()
        rows = list(result.rows())
        requested = [r for r in rows if r["point"] == "requested"]
        self.assertEqual([r["eps_1"] for r in requested], [0.1, 0.25, 0.5])
        self.assertAlmostEqual(requested[0]["phi"], 0.2)
        self.assertEqual(len(rows), 16 + 8 * 2 + 3)

    def test_twopoint(self):
        config = self.config("interval", seeds=[1, 2, 3], N=1000, threads=2)
        result = experiments.TwoPointExperiment(config).run()
        self.assertEqual([run.seed for run in result.runs], [1, 2, 3])
        self.assertEqual(result.fields()[:3], ["seed", "N", "delta"])
        medians = result.summary["medians"]
        self.assertEqual(len(medians), 2 * 3)
        self.assertIn("jump_frequencies", result.runs[0].data)

        serial = experiments.TwoPointExperiment(
            self.config("interval", seeds=[1, 2, 3], N=1000)).run()
        self.assertEqual(list(serial.rows()), list(result.rows()))

    def test_twopoint_stationary_mass(self):
        result = experiments.TwoPointExperiment(self.config(
            "box2d", N=500, deltas=[0.05, 0.1])).run()
        masses = result.summary["stationary_mass"]
        self.assertEqual([m["delta"] for m in masses], [0.05, 0.1])
        self.assertLessEqual(masses[0]["mass"], masses[1]["mass"])
        self.assertGreater(masses[0]["mass"], 0.0)
        self.assertLess(masses[0]["mass"], 0.5)

    def test_ensembles(self):
        result = experiments.EnsembleExperiment(self.config(
            "interval", M=200, n=16)).run()
        self.assertEqual([r["step"] for r in result.runs[0].rows],
                         [0, 1, 2, 4, 8, 16])

        result = experiments.ReversedExperiment(self.config(
            "interval", M=200, n=16, seeds=[1, 2])).run()
        self.assertEqual([r["step"] for r in result.runs[0].rows],
                         [1, 2, 4, 8, 16])
        self.assertIn("limit_1", result.runs[0].rows[0])
        self.assertEqual(result.summary["collapsed_fraction"], 0.0)

        finals = [run.summary["D"] for run in result.runs]
        result = experiments.ReversedExperiment(self.config(
            "interval", M=200, n=16, seeds=[1, 2],
            collapse_threshold=min(finals))).run()
        self.assertEqual(result.summary["collapsed_fraction"], 0.5)

    @SLOW
    def test_reversed_collapse(self):
        result = experiments.ReversedExperiment(self.config(
            "interval", M=10 ** 4, n=2000, checkpoints=[2000],
            seeds=list(range(20)), collapse_threshold=0.01)).run()
        self.assertGreaterEqual(result.summary["collapsed_fraction"], 0.9)

    def test_attractor(self):
        result = experiments.AttractorExperiment(self.config(
            "interval", n=32, mc_steps=[0, 10, 100], probes=2000)).run()
        self.assertTrue(result.summary["nested"])
        estimates = result.runs[0].data["image_measure_mc"]
        self.assertEqual([e["step"] for e in estimates], [10])

        with self.assertRaises(InvalidConfigError):
            experiments.AttractorExperiment(self.config("box2d", n=4)).run()

    def test_diffchain(self):
        config = self.config("cantor8", N=20_000, bins=16, trials=10_000,
                             law_n=5)
        result = experiments.DiffChainExperiment(config).run()
        summary = result.runs[0].summary
        self.assertLessEqual(summary["TV"], 0.2)
        self.assertGreater(summary["LawPValue"], 0.001)
        self.assertEqual(len(result.runs[0].rows), 16)
        self.assertEqual(result.summary["verdict"], "converges")

        result = experiments.DiffChainExperiment(self.config(
            "interval", N=500, bins=8, law_test=False)).run()
        self.assertIsNone(result.runs[0].summary["TV"])
        self.assertIsNone(result.summary["min_law_p_value"])

    @SLOW
    def test_cantor_stationary_density(self):
        result = experiments.DiffChainExperiment(self.config(
            "cantor8", N=10 ** 7, bins=64, law_test=False,
            seeds=list(range(10)))).run()
        self.assertLessEqual(result.summary["median_tv"], 0.05)

    def test_report(self):
        config = self.config("interval", N=500, M=100, n=8, bins=8,
                             law_test=False, mc_steps=[4], probes=500)
        result, paths = experiments.run_experiment("report", config)
        self.assertEqual(set(result.parts),
                         {"classify", "twopoint", "ensemble", "reversed",
                          "attractor", "diffchain"})
        self.assertEqual(len(paths), 2 * 7)
        for path in paths:
            self.assertTrue(os.path.exists(path))
        self.assertTrue(any(row["metric"] == "Verdict"
                            for row in result.rows()))

    def test_write_result(self):
        config = self.config("interval", N=300)
        _, paths = experiments.run_experiment("twopoint", config)
        csv_path, json_path = paths
        self.assertEqual(csv_path, os.path.join(self.tmp.name, "twopoint",
                                                "interval.csv"))
        with open(csv_path) as fp:
            self.assertTrue(fp.readline().startswith("# config: {"))
            self.assertEqual(fp.readline().strip(),
                             "seed,N,delta,sync_fraction,cesaro_distance")
        with open(json_path) as fp:
            document = json.load(fp)
        self.assertEqual(document["metadata"]["version"],
                         rotsync.__version__)
        self.assertEqual(document["data"]["experiment"], "twopoint")

        self.assertRaises(InvalidConfigError, experiments.run_experiment,
                          "bogus", config)

    def test_run_logs(self):
        config = self.config("interval", N=200, seeds=[4])
        with self.assertLogs("rotsync.experiments.twopoint",
                             level="DEBUG") as cm:
            experiments.TwoPointExperiment(config).run()
        final = cm.records[-1].run
        self.assertEqual(final["Iteration"], "final")
        self.assertEqual(final.Seed, 4)
        self.assertEqual(final.Preset, "interval")

        with self.assertLogs("rotsync.experiments.classify") as cm:
            with self.assertRaises(NotIntegrableError):
                experiments.ClassifyExperiment(self.config(
                    "interval", require_integrable=True)).run()
        self.assertIn("NotIntegrableError", cm.records[-1].run.Error)


@mock.patch("rotsync.cli.add_logging_handlers")
class TestCli(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write_config(self, document):
        path = os.path.join(self.tmp.name, "config.yaml")
        with open(path, "w") as fp:
            yaml.safe_dump(document, fp)
        return path

    def run_cli(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with mock.patch("sys.stdout", stdout), \
                mock.patch("sys.stderr", stderr):
            code = cli.main(list(argv))
        return code, stdout.getvalue(), stderr.getvalue()

    def test_classify(self, mock_handlers):
        code, out, _ = self.run_cli("classify", "--preset", "interval",
                                    "--out", self.tmp.name)
        self.assertEqual(code, 0)
        self.assertEqual(out.split(), [
            os.path.join(self.tmp.name, "classify", "interval.csv"),
            os.path.join(self.tmp.name, "classify", "interval.json")])
        mock_handlers.assert_called_once_with(
            logger_name="rotsync", level=logging.WARNING, formatter=mock.ANY)

        with open(out.split()[0]) as fp:
            rows = list(csv.DictReader(csv_utils.uncommented(fp)))
        self.assertEqual(rows[0]["verdict"], "diverges")

    def test_exit_codes(self, mock_handlers):
        code, _, err = self.run_cli("classify", "--preset", "interval",
                                    "--require-integrable", "--out",
                                    self.tmp.name)
        self.assertEqual(code, 3)
        self.assertIn("rotsync: error:", err)

        path = self.write_config({"experiment": {"N": -5}})
        code, _, err = self.run_cli("twopoint", "--preset", "interval",
                                    "--config", path)
        self.assertEqual(code, 1)

        code, _, _ = self.run_cli("twopoint")
        self.assertEqual(code, 1)

        code, _, _ = self.run_cli("twopoint", "--config",
                                  os.path.join(self.tmp.name, "missing"))
        self.assertEqual(code, 1)

        with mock.patch("sys.stderr", io.StringIO()):
            with self.assertRaises(SystemExit):
                cli.main(["twopoint", "--seed", "-3"])

    def test_capacity_exit_code(self, mock_handlers):
        path = self.write_config({"experiment": {
            "n": 50, "max_components": 1}, "output": {"dir": self.tmp.name}})
        code, _, _ = self.run_cli("attractor", "--preset", "interval",
                                  "--config", path)
        self.assertEqual(code, 2)

    def test_deterministic_payloads(self, mock_handlers):
        path = self.write_config({"experiment": {"N": 2000, "jump_bins": 4}})
        payloads = []
        for threads in ("1", "3"):
            out = os.path.join(self.tmp.name, threads)
            code, printed, _ = self.run_cli(
                "twopoint", "-p", "interval", "-c", path, "-s", "1", "-s",
                "0x2", "-s", "3", "-t", threads, "-o", out)
            self.assertEqual(code, 0)
            csv_path, json_path = printed.split()
            with open(csv_path) as fp:
                rows = fp.read()
            with open(json_path) as fp:
                data = json.load(fp)["data"]
            data["config"]["experiment"].pop("threads")
            data["config"]["output"].pop("dir")
            payloads.append((rows.split("\n", 1)[1], data))
        self.assertEqual(payloads[0], payloads[1])

    def test_logging_sections(self, mock_handlers):
        path = self.write_config({
            "experiment": {"N": 100},
            "output": {"dir": self.tmp.name},
            "handlers": {"null": {"class": "logging.NullHandler"}},
            "loggers": {"rotsync.tests.cli": {"handlers": ["null"]}},
        })
        code, _, _ = self.run_cli("twopoint", "-p", "interval", "-c", path)
        self.assertEqual(code, 0)
        mock_handlers.assert_not_called()
        self.assertTrue(logging.getLogger("rotsync.tests.cli").handlers)

    def test_seed(self, mock_handlers):
        self.assertEqual(cli.seed("0x10"), 16)
        self.assertEqual(cli.seed(str(2 ** 64 - 1)), 2 ** 64 - 1)


class TestCsvUtils(unittest.TestCase):
    def test_aggregate(self):
        with tempfile.TemporaryDirectory() as tmp:
            inputs = []
            for seed, fraction in enumerate((0.1, 0.5, 0.3)):
                path = os.path.join(tmp, f"{seed}.csv")
                with open(path, "w") as fp:
                    fp.write("# config: {}\n")
                    fp.write("seed,N,delta,sync_fraction,verdict\n")
                    fp.write(f"{seed},100,0.05,{fraction},diverges\n")
                    fp.write(f"{seed},1000,0.05,{fraction * 2},diverges\n")
                inputs.append(path)

            output = os.path.join(tmp, "medians.csv")
            with mock.patch("sys.stderr", io.StringIO()):
                code = csv_utils.main(["aggregate", *inputs, "-k", "N,delta",
                                       "-o", output])
            self.assertEqual(code, 0)
            with open(output) as fp:
                rows = list(csv.DictReader(fp))

        self.assertEqual([(r["N"], r["seeds"]) for r in rows],
                         [("100", "3"), ("1000", "3")])
        self.assertAlmostEqual(float(rows[0]["sync_fraction"]), 0.3)
        self.assertAlmostEqual(float(rows[1]["sync_fraction"]), 0.6)
        self.assertEqual(rows[0]["verdict"], "diverges")
        self.assertNotIn("seed", rows[0])

    def test_aggregate_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "in.csv")
            with open(path, "w") as fp:
                fp.write("seed,N\n0,1\n")
            with mock.patch("sys.stderr", io.StringIO()) as err, \
                    mock.patch("sys.stdout", io.StringIO()):
                code = csv_utils.main(["aggr", path, "-k", "delta"])
            self.assertEqual(code, 1)
            self.assertIn("delta", err.getvalue())

    def test_optional_to_float(self):
        self.assertEqual(csv_utils.optional_to_float("1.5"), 1.5)
        self.assertIsNone(csv_utils.optional_to_float("converges"))
        self.assertIsNone(csv_utils.optional_to_float(None))


if __name__ == "__main__":
    unittest.main()
