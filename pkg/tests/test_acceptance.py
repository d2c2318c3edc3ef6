"""Campaign-scale checks. Minutes of runtime; set STOCHNAV_SLOW=1 to run them."""

import os
import unittest

import numpy as np

from tests.base_test import NavTestCase, slow_tests_enabled
from stochnav.analysis import (
    closed_form_bias,
    monte_carlo_bias,
    saddle_bias_decay,
    saddle_quotient_check,
    scaled_bias_decay,
)
from stochnav.descent import StepSchedule, saddle_escape_trial
from stochnav.experiments import (
    EggWorldParams,
    EllipticalWorldParams,
    compare_clearance,
    generate_egg_world,
    generate_elliptical_world,
    k_sweep,
    run_campaign,
)
from stochnav.potentials import PotentialSpec, find_critical_points
from stochnav.sensors import NoiseModel, SensorRig

WORKERS = int(os.environ.get("STOCHNAV_WORKERS", "1") or 1)
SEEDS = 100
STARTS = 5
SCHEDULE = StepSchedule(eps0=5e-2, zeta=5e-3)
CAMPAIGN_RIG = SensorRig(
    range_c=7.0,
    noise=NoiseModel(sigma_f0=1.0, sigma_grad_f0=1.0, eta=0.1),
    beta_scale=20.0,
    objective_scale=10.0,
)
# exact distances; the remaining noise enters the estimate linearly
UNBIASED_RIG = SensorRig(noise=NoiseModel(sigma_f0=1.0, sigma_grad_f0=1.0), seed=31)
DISTANCE_ONLY = SensorRig(noise=NoiseModel(eta=0.1, eta_normal=0.0, eta_curvature=0.0), seed=32)
K_LADDER = [8.0, 16.0, 32.0, 64.0]


def campaign_world():
    return generate_elliptical_world(EllipticalWorldParams(r0=20.0, L=6.0, delta=1.0, seed=0))


@unittest.skipUnless(slow_tests_enabled(), "set STOCHNAV_SLOW=1 for campaign-scale checks")
class TestCampaign(NavTestCase):
    @classmethod
    def setUpClass(cls):
        cls.world = campaign_world()
        cls.sweep = k_sweep(
            [cls.world], PotentialSpec(k=7), [7.0, 12.0], CAMPAIGN_RIG, SCHEDULE, STARTS, SEEDS,
            max_steps=1000, workers=WORKERS, baseline=True, keep_trajectories=True,
        )

    def test_no_iterate_leaves_the_free_space(self):
        for k, result in self.sweep.results.items():
            self.assertEqual(result.aggregates.failed, 0, f"k={k}")
            self.assertEqual(result.aggregates.collisions, 0, f"k={k}")
            for run in result.runs:
                clearances = np.array([r.clearance for r in run.trajectory.records])
                self.assertTrue(np.all(clearances > 0.0), run.key.id)

    def test_larger_k_stays_closer_to_the_flow(self):
        rows = {r["k"]: r for r in self.sweep.rows()}
        self.assertLess(rows[12.0]["mean_deviation"], rows[7.0]["mean_deviation"])
        test = self.sweep.compare(7.0, 12.0)
        self.assertEqual(test.pairs, SEEDS)
        self.assertLess(test.p_value, 0.01, test.to_dict())


@unittest.skipUnless(slow_tests_enabled(), "set STOCHNAV_SLOW=1 for campaign-scale checks")
class TestConvergence(NavTestCase):
    def _converges(self, world, spec):
        result = run_campaign(
            [world], spec, CAMPAIGN_RIG, SCHEDULE, 1, SEEDS,
            max_steps=5000, stop_radius=0.2, workers=WORKERS, baseline=False,
        )
        agg = result.aggregates
        self.assertEqual(agg.collisions, 0)
        self.assertEqual(agg.success_rate, 1.0, agg.to_dict())

    def test_elliptical_world(self):
        self._converges(campaign_world(), PotentialSpec(k=12))

    def test_egg_world(self):
        self._converges(generate_egg_world(EggWorldParams(r0=20.0, L=6.0, seed=0)), PotentialSpec(k=15))

    def test_log_barrier(self):
        self._converges(campaign_world(), PotentialSpec(kind="log", k=10))


@unittest.skipUnless(slow_tests_enabled(), "set STOCHNAV_SLOW=1 for campaign-scale checks")
class TestLogBarrierClearance(NavTestCase):
    def test_log_barrier_passes_closer(self):
        comparison = compare_clearance(
            [campaign_world()], PotentialSpec(kind="log", k=10), PotentialSpec(k=12), CAMPAIGN_RIG, SCHEDULE,
            1, SEEDS, max_steps=2000, workers=WORKERS,
        )
        self.assertEqual(comparison.first.aggregates.collisions, 0)
        self.assertEqual(comparison.second.aggregates.collisions, 0)
        self.assertLess(
            comparison.first.aggregates.min_clearance["median"], comparison.second.aggregates.min_clearance["median"]
        )
        self.assertLess(comparison.test.p_value, 0.01, comparison.test.to_dict())


@unittest.skipUnless(slow_tests_enabled(), "set STOCHNAV_SLOW=1 for campaign-scale checks")
class TestBiasAtScale(NavTestCase):
    def test_unbiased_with_exact_distances(self):
        world = self.two_sphere_world()
        spec = PotentialSpec(k=7)
        for x in self.sample_interior(world, 10, clearance=0.5):
            mc = monte_carlo_bias(world, UNBIASED_RIG, spec, x, draws=1_000_000, workers=WORKERS)
            self.assertTrue(mc.within(np.zeros(2)), mc.to_dict())

    def test_closed_form_matches_monte_carlo(self):
        world = campaign_world()
        spec = PotentialSpec(k=7)
        for x in self.sample_interior(world, 10, clearance=0.5):
            mc = monte_carlo_bias(world, DISTANCE_ONLY, spec, x, draws=1_000_000, workers=WORKERS)
            self.assertTrue(mc.within(closed_form_bias(world, DISTANCE_ONLY, spec, x)), mc.to_dict())

    def test_scaled_bias_decay(self):
        world = campaign_world()
        spec = PotentialSpec(k=8)
        for x in self.sample_interior(world, 10, clearance=1.0):
            scaled, _ = scaled_bias_decay(world, DISTANCE_ONLY, spec, x, K_LADDER)
            if scaled.skipped:
                continue
            self.assertAlmostEqual(scaled.slope, -1.0, delta=0.15, msg=str(x))
        for index, fit in saddle_bias_decay(world, DISTANCE_ONLY, spec, K_LADDER).items():
            self.assertLessEqual(fit.slope, -1.7, f"saddle near obstacle {index}")

    def test_saddle_quotients(self):
        world = self.sphere_world()
        table = saddle_quotient_check(world, DISTANCE_ONLY, PotentialSpec(k=8), [8.0, 16.0, 32.0])
        self.assertTrue(table.fits)
        for index, (v, v_perp) in table.fits.items():
            self.assertAlmostEqual(v.slope, -1.0, delta=0.3, msg=f"obstacle {index}")
            self.assertAlmostEqual(v_perp.slope, -1.0, delta=0.3, msg=f"obstacle {index}")


@unittest.skipUnless(slow_tests_enabled(), "set STOCHNAV_SLOW=1 for campaign-scale checks")
class TestSaddleEscapeAtScale(NavTestCase):
    def setUp(self):
        super().setUp()
        self.world = campaign_world()
        self.spec = PotentialSpec(k=12)
        self.saddle = find_critical_points(self.world, self.spec).saddles[0]

    def test_every_noisy_run_escapes(self):
        stats = saddle_escape_trial(
            self.world, self.spec, CAMPAIGN_RIG.with_seed(5), SCHEDULE, self.saddle, trials=100,
            max_steps=5000, stop_radius=0.2,
        )
        self.assertEqual(stats.converged, 100, stats.to_dict())

    def test_exact_run_stays_put(self):
        rig = SensorRig(estimator="exact", beta_scale=20.0, objective_scale=10.0)
        stats = saddle_escape_trial(
            self.world, self.spec, rig, SCHEDULE, self.saddle, trials=1, max_steps=10_000, linger_radius=1e-6,
        )
        self.assertEqual(stats.lingering, 1)
