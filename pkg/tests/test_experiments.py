import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from tests.base_test import NavTestCase
from stochnav.descent import StepSchedule
from stochnav.errors import ConfigError, InfeasibleParametersError
from stochnav.experiments import (
    EggWorldParams,
    EllipticalWorldParams,
    RunKey,
    compare_clearance,
    generate_egg_world,
    generate_elliptical_world,
    k_sweep,
    paired_sign_test,
    random_rotation,
    run_campaign,
    run_seed,
    sample_start_positions,
    start_seed,
)
from stochnav.experiments.generators import egg_objective_matrix
from stochnav.geometry.world import validate_world
from stochnav.potentials import PotentialSpec, check_condition
from stochnav.sensors import NoiseModel, SensorRig

RK7 = PotentialSpec(kind="rk", k=7)
RIG = SensorRig(noise=NoiseModel(eta=0.1), beta_scale=20.0, objective_scale=10.0)
STARTS = [[(-6.0, 2.0), (3.0, -5.0)]]


class TestEllipticalWorlds(NavTestCase):
    def test_default_world_is_valid(self):
        world = generate_elliptical_world(EllipticalWorldParams(seed=0))
        self.assertEqual(world.m, 4)
        self.assertEqual(world.workspace.radius, 20.0)
        self.assertTrue(validate_world(world).passed)
        self.assertTrue(check_condition(world).passed)

    def test_obstacles_sit_in_their_quadrants(self):
        world = generate_elliptical_world(EllipticalWorldParams(seed=3))
        signs = {tuple(np.sign(o.center)) for o in world.obstacles}
        self.assertEqual(signs, {(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)})
        for o in world.obstacles:
            self.assertLessEqual(float(np.max(np.abs(np.abs(o.center) - 6.0))), 1.0)

    def test_same_seed_same_world(self):
        a = generate_elliptical_world(EllipticalWorldParams(seed=5))
        b = generate_elliptical_world(EllipticalWorldParams(seed=5))
        self.assertEqual(a.to_dict(), b.to_dict())
        c = generate_elliptical_world(EllipticalWorldParams(seed=6))
        self.assertNotEqual(a.to_dict(), c.to_dict())

    def test_several_seeds(self):
        for seed in range(1, 4):
            world = generate_elliptical_world(EllipticalWorldParams(seed=seed))
            self.assertTrue(check_condition(world).passed, f"seed {seed}")

    def test_bad_parameters(self):
        with self.assertRaises(ConfigError) as ctx:
            EllipticalWorldParams(delta=7.0)
        self.assertEqual(ctx.exception.field, "delta")
        with self.assertRaises(ConfigError):
            EllipticalWorldParams(radius_range=(3.0, 2.0))
        with self.assertRaises(ConfigError):
            EllipticalWorldParams(r0=0.0)

    def test_infeasible(self):
        # the quadrant obstacles cannot fit inside a workspace of radius 5
        with self.assertRaises(InfeasibleParametersError):
            generate_elliptical_world(EllipticalWorldParams(r0=5.0, radius_range=(1.0, 1.5), max_rejections=5))


class TestEggWorlds(NavTestCase):
    def test_default_world(self):
        world = generate_egg_world(EggWorldParams(seed=0))
        self.assertEqual(world.m, 4)
        self.assertTrue(validate_world(world).passed)
        report = check_condition(world)
        if report.n_cond > 1:
            self.assertLess(world.objective.condition_number, report.n_cond)
            self.assertTrue(report.passed, report.to_dict())
        else:
            assert_allclose(world.objective.matrix, world.objective.matrix[0, 0] * np.eye(2))

    def test_objective_matrix_follows_the_admissible_condition(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = egg_objective_matrix(3.0, 4.0, rng)
            eig = np.linalg.eigvalsh(q)
            self.assertLess(eig[-1] / eig[0], 3.0)
            self.assertTrue(np.all((eig >= 1.0 - 1e-12) & (eig <= 4.0 + 1e-12)))
        anisotropic = [egg_objective_matrix(3.0, 4.0, rng) for _ in range(20)]
        self.assertTrue(any(abs(q[0, 0] - q[1, 1]) > 1e-6 or abs(q[0, 1]) > 1e-6 for q in anisotropic))
        for n_cond in (1.0, 0.2):
            q = egg_objective_matrix(n_cond, 4.0, rng)
            assert_allclose(q, q[0, 0] * np.eye(2))
            self.assertTrue(1.0 <= q[0, 0] <= 2.0)

    def test_orientation(self):
        world = generate_egg_world(EggWorldParams(seed=1, m=2, L=20.0, horizontal_probability=1.0))
        self.assertTrue(all(o.axis == "horizontal" for o in world.obstacles))
        world = generate_egg_world(EggWorldParams(seed=1, m=2, L=20.0, horizontal_probability=0.0))
        self.assertTrue(all(o.axis == "vertical" for o in world.obstacles))

    def test_bad_parameters(self):
        with self.assertRaises(ConfigError):
            EggWorldParams(m=0)
        with self.assertRaises(ConfigError):
            EggWorldParams(horizontal_probability=1.5)
        with self.assertRaises(ConfigError):
            EggWorldParams(condition_cap=0.5)


class TestSeeds(NavTestCase):
    def test_rotation(self):
        r = random_rotation(self.rng)
        assert_allclose(r @ r.T, np.eye(2), atol=1e-12)

    def test_run_seeds_are_distinct(self):
        seeds = {run_seed(0, RunKey(w, s, r)) for w in range(3) for s in range(3) for r in range(10)}
        self.assertEqual(len(seeds), 90)
        self.assertEqual(run_seed(7, RunKey(1, 2, 3)), run_seed(7, RunKey(1, 2, 3)))
        self.assertNotEqual(start_seed(0, 0), start_seed(0, 1))
        self.assertEqual(RunKey(1, 2, 3).id, "w01-s02-r003")

    def test_start_positions(self):
        world = self.two_sphere_world()
        starts = sample_start_positions(world, 20, seed=4)
        self.assertEqual(starts.shape, (20, 2))
        self.assertTrue(all(world.clearance(x) >= 0.1 for x in starts))
        assert_array_equal(starts, sample_start_positions(world, 20, seed=4))
        self.assertEqual(sample_start_positions(world, 0, seed=4).shape[0], 0)
        with self.assertRaises(ValueError):
            sample_start_positions(world, -1, seed=4)


class TestSignTest(NavTestCase):
    def test_all_wins(self):
        result = paired_sign_test([1.0] * 10, [2.0] * 10)
        self.assertEqual((result.wins, result.losses, result.ties), (10, 0, 0))
        self.assertAlmostEqual(result.p_value, 0.5 ** 10)

    def test_ties_and_nan(self):
        result = paired_sign_test([1.0, 2.0, float("nan"), 3.0], [1.0, 1.0, 0.0, 4.0])
        self.assertEqual(result.pairs, 3)
        self.assertEqual((result.wins, result.losses, result.ties), (1, 1, 1))

    def test_no_pairs(self):
        self.assertEqual(paired_sign_test([], []).p_value, 1.0)

    def test_size_mismatch(self):
        with self.assertRaises(ValueError):
            paired_sign_test([1.0], [1.0, 2.0])


class TestCampaign(NavTestCase):
    def _campaign(self, **kwargs):
        return run_campaign([self.sphere_world()], RK7, RIG, StepSchedule(), STARTS, seeds=3, max_steps=150, **kwargs)

    def test_layout(self):
        result = self._campaign(master_seed=9)
        self.assertEqual(len(result), 6)
        self.assertEqual([r.key.id for r in result.runs[:3]], ["w00-s00-r000", "w00-s00-r001", "w00-s00-r002"])
        self.assertEqual(set(result.baselines), {(0, 0), (0, 1)})
        self.assertTrue(all(r.seed == run_seed(9, r.key) for r in result.runs))
        self.assertTrue(all(r.error is None for r in result.runs))
        agg = result.aggregates
        self.assertEqual(agg.runs, 6)
        self.assertEqual(agg.completed, 6)
        self.assertIsNotNone(agg.mean_deviation)

    def test_deterministic(self):
        self.assertEqual(self._campaign(master_seed=2).to_dict(), self._campaign(master_seed=2).to_dict())
        self.assertNotEqual(self._campaign(master_seed=2).to_dict(), self._campaign(master_seed=3).to_dict())

    def test_workers_do_not_change_results(self):
        self.assertEqual(self._campaign(master_seed=2, workers=1).to_dict(), self._campaign(master_seed=2, workers=2).to_dict())

    def test_empty_campaign(self):
        result = run_campaign([self.sphere_world()], RK7, RIG, StepSchedule(), STARTS, seeds=0)
        self.assertEqual(len(result), 0)
        self.assertIsNone(result.aggregates.success_rate)
        self.assertIsNone(result.aggregates.mean_final_distance)

    def test_random_starts(self):
        result = run_campaign([self.sphere_world()], RK7, RIG, StepSchedule(), 2, seeds=1, max_steps=10, baseline=False)
        assert_array_equal(result.params["starts"][0], sample_start_positions(self.sphere_world(), 2, start_seed(0, 0)))
        self.assertTrue(all(np.isnan(r.deviation) for r in result.runs))

    def test_start_lists_must_match_worlds(self):
        with self.assertRaises(ValueError):
            run_campaign([self.sphere_world()], RK7, RIG, StepSchedule(), STARTS * 2, seeds=1)

    def test_k_sweep(self):
        sweep = k_sweep([self.sphere_world()], RK7, [7, 12], RIG, StepSchedule(), STARTS, seeds=2, max_steps=50)
        rows = sweep.rows()
        self.assertEqual([r["k"] for r in rows], [7.0, 12.0])
        self.assertEqual(sweep.to_dict()["sign_test"]["pairs"], 2)

    def test_clearance_comparison(self):
        comparison = compare_clearance(
            [self.sphere_world()], RK7, PotentialSpec(kind="log", k=10), RIG, StepSchedule(), STARTS, seeds=2, max_steps=50,
        )
        data = comparison.to_dict()
        self.assertEqual(data["first"]["potential"]["kind"], "rk")
        self.assertEqual(data["second"]["potential"]["kind"], "log")
        self.assertEqual(data["sign_test"]["pairs"], 2)
