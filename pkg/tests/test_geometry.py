import json
import math
import os

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from tests.base_test import NavTestCase, make_world
from stochnav.errors import CollisionQueryError, ConfigError, InvariantViolation
from stochnav.geometry.obstacles import (
    EggObstacle,
    EllipseObstacle,
    SphereObstacle,
    boundary_curvature_radius,
    obstacle_gradient,
    obstacle_hessian_min_eigenvalue,
    obstacle_value,
    project_to_obstacle,
)
from stochnav.geometry.world import beta_product, beta_product_gradient, validate_world
from stochnav.geometry.worldfile import dumps_world, load_world, loads_world, world_from_dict


class TestObstacleQueries(NavTestCase):
    def test_values(self):
        self.assertAlmostEqual(obstacle_value(SphereObstacle(center=(0, 0), radius=2), (5, 0)), 21.0)
        self.assertAlmostEqual(obstacle_value(EllipseObstacle(center=(0, 0), matrix=np.eye(2), radius=2), (3, 0)), 5.0)
        egg = EggObstacle(center=(0, 0), tip=1.0, axis="horizontal")
        self.assertAlmostEqual(obstacle_value(egg, (2, 0)), 0.0)
        self.assertAlmostEqual(obstacle_value(egg, (1, 0)), -1.0)

    def test_gradients(self):
        assert_allclose(obstacle_gradient(SphereObstacle(center=(0, 0), radius=2), (5, 0)), [10.0, 0.0])
        ellipse = EllipseObstacle(center=(0, 0), matrix=np.diag([1.0, 2.0]), radius=1.0)
        assert_allclose(obstacle_gradient(ellipse, (1, 1)), [2.0, 4.0])

    def test_gradients_match_finite_differences(self):
        obstacles = [
            SphereObstacle(center=(1.0, -2.0), radius=1.5),
            EllipseObstacle(center=(0.5, 0.5), matrix=[[2.0, 0.4], [0.4, 1.0]], radius=1.2),
            EggObstacle(center=(0.0, 0.0), tip=1.0, axis="horizontal"),
            EggObstacle(center=(0.0, 0.0), tip=1.0, axis="vertical"),
        ]
        for ob in obstacles:
            checked = 0
            while checked < 200:
                x = ob.anchor + self.rng.uniform(-4.0, 4.0, size=2)
                if ob.value(x) <= 0.1 * ob.value_scale:
                    continue
                numeric = self.finite_difference(ob.value, x, 1e-5 * ob.scale)
                self.assertRelClose(ob.gradient(x), numeric, 1e-6, f"{ob.kind} at {x}")
                checked += 1

    def test_hessian_min_eigenvalue(self):
        self.assertEqual(obstacle_hessian_min_eigenvalue(SphereObstacle(center=(0, 0), radius=2), (3, 0)), 2.0)
        ellipse = EllipseObstacle(center=(0, 0), matrix=np.diag([1.0, 3.0]), radius=1.0)
        self.assertAlmostEqual(obstacle_hessian_min_eigenvalue(ellipse, (3, 0)), 2.0)
        egg = EggObstacle(center=(0, 0), tip=1.0)
        for p in egg.boundary_points(2000):
            self.assertGreaterEqual(obstacle_hessian_min_eigenvalue(egg, p), -1e-9)
        self.assertGreaterEqual(egg.mu_min, -1e-9)

    def test_egg_hessian_inside_is_flagged(self):
        egg = EggObstacle(center=(0, 0), tip=1.0)
        with self.assertRaises(CollisionQueryError):
            obstacle_hessian_min_eigenvalue(egg, (1.0, 0.0))

    def test_invalid_obstacles(self):
        with self.assertRaises(InvariantViolation):
            SphereObstacle(center=(0, 0), radius=0.0)
        with self.assertRaises(InvariantViolation):
            EllipseObstacle(center=(0, 0), matrix=[[1.0, 0.5], [0.0, 1.0]], radius=1.0)
        with self.assertRaises(InvariantViolation):
            EllipseObstacle(center=(0, 0), matrix=np.diag([1.0, -1.0]), radius=1.0)
        with self.assertRaises(InvariantViolation):
            EggObstacle(center=(0, 0), tip=1.0, axis="diagonal")


class TestProjection(NavTestCase):
    def test_sphere(self):
        p = project_to_obstacle(SphereObstacle(center=(0, 0), radius=2), (5, 0))
        assert_allclose(p.point, [2.0, 0.0])
        self.assertAlmostEqual(p.distance, 3.0)
        assert_allclose(p.normal, [1.0, 0.0])

    def test_ellipse_on_axis(self):
        ellipse = EllipseObstacle(center=(0, 0), matrix=np.diag([1.0, 4.0]), radius=2.0)
        p = project_to_obstacle(ellipse, (10, 0))
        assert_allclose(p.point, [2.0, 0.0], atol=1e-9)
        self.assertAlmostEqual(p.distance, 8.0)
        assert_allclose(p.normal, [1.0, 0.0], atol=1e-9)

    def test_inside_query_raises(self):
        with self.assertRaises(CollisionQueryError):
            project_to_obstacle(SphereObstacle(center=(0, 0), radius=2), (1, 0))

    def test_projection_is_on_boundary_and_kkt(self):
        obstacles = [
            EllipseObstacle(center=(0.0, 0.0), matrix=[[3.0, 1.0], [1.0, 1.0]], radius=1.0),
            EggObstacle(center=(0.0, 0.0), tip=1.0, axis="horizontal"),
            EggObstacle(center=(0.0, 0.0), tip=1.0, axis="vertical"),
        ]
        for ob in obstacles:
            for _ in range(50):
                x = ob.anchor + self.rng.uniform(-5.0, 5.0, size=2)
                if ob.value(x) <= 1e-3 * ob.value_scale:
                    continue
                if ob.kind == "egg" and (x - ob.center) @ ob.axis_vector < 0.5:
                    # the bottom point of an egg is singular
                    continue
                p = project_to_obstacle(ob, x)
                self.assertLess(abs(ob.value(p.point)), 1e-10 * max(1.0, ob.value_scale))
                g = ob.gradient(p.point)
                cross = (x - p.point)[0] * g[1] - (x - p.point)[1] * g[0]
                self.assertLess(abs(cross), 1e-8 * np.linalg.norm(g) * max(p.distance, 1.0))

    def test_egg_projection_matches_brute_force(self):
        egg = EggObstacle(center=(0.0, 0.0), tip=1.0)
        boundary = egg.boundary_points(100_000)
        for x in ([3.0, 1.5], [0.8, -2.0], [1.0, 1.5]):
            brute = float(np.min(np.linalg.norm(boundary - np.asarray(x), axis=1)))
            self.assertAlmostEqual(project_to_obstacle(egg, x).distance, brute, delta=1e-4)

    def test_egg_projection_behind_the_bottom_point(self):
        egg = EggObstacle(center=(3.0, 2.0), tip=1.0, axis="horizontal")
        boundary = np.vstack([egg.boundary_points(100_000), egg.center])
        rng = np.random.default_rng(7)
        checked = 0
        for x in egg.center + rng.uniform(-4.0, 4.0, size=(2000, 2)):
            if egg.value(x) <= 1e-3 * egg.value_scale:
                continue
            p = project_to_obstacle(egg, x)
            self.assertTrue(np.isfinite(p.distance))
            self.assertLess(abs(egg.value(p.point)), 1e-9 * max(1.0, egg.value_scale))
            brute = float(np.min(np.linalg.norm(boundary - x, axis=1)))
            self.assertAlmostEqual(p.distance, brute, delta=1e-4)
            assert_allclose(np.linalg.norm(p.normal), 1.0, atol=1e-12)
            checked += 1
        self.assertGreater(checked, 1000)

    def test_egg_bottom_point_projection(self):
        egg = EggObstacle(center=(3.0, 2.0), tip=1.0, axis="horizontal")
        p = project_to_obstacle(egg, (1.0, 2.0))
        assert_allclose(p.point, [3.0, 2.0], atol=1e-12)
        self.assertAlmostEqual(p.distance, 2.0)
        self.assertEqual(boundary_curvature_radius(egg, p.point), 0.0)

    def test_distance_is_one_lipschitz(self):
        ob = EllipseObstacle(center=(0.0, 0.0), matrix=[[2.0, 0.5], [0.5, 1.0]], radius=1.0)
        for _ in range(100):
            x, y = self.rng.uniform(2.0, 6.0, size=(2, 2))
            dx, dy = ob.project(x).distance, ob.project(y).distance
            self.assertLessEqual(abs(dx - dy), np.linalg.norm(x - y) + 1e-9)


class TestCurvature(NavTestCase):
    def test_sphere_radius(self):
        sphere = SphereObstacle(center=(1, 1), radius=2)
        for p in sphere.boundary_points(8):
            self.assertEqual(boundary_curvature_radius(sphere, p), 2.0)

    def test_ellipse_vertex(self):
        ellipse = EllipseObstacle(center=(0, 0), matrix=np.diag([1.0, 4.0]), radius=2.0)
        self.assertAlmostEqual(boundary_curvature_radius(ellipse, (2.0, 0.0)), 0.5, places=9)

    def test_egg_matches_three_point_circle(self):
        egg = EggObstacle(center=(0.0, 0.0), tip=1.0)
        theta = np.array([0.3 - 1e-3, 0.3, 0.3 + 1e-3])
        rho = 2.0 * np.cos(theta) ** 3
        a, b, c = np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=1)
        # circumradius of the triangle abc
        ab, bc, ca = np.linalg.norm(a - b), np.linalg.norm(b - c), np.linalg.norm(c - a)
        area = 0.5 * abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0])
        expected = ab * bc * ca / (4.0 * area)
        self.assertAlmostEqual(boundary_curvature_radius(egg, b), expected, delta=1e-3 * expected)


class TestWorld(NavTestCase):
    def test_beta_product(self):
        world = self.sphere_world()
        self.assertAlmostEqual(beta_product(world, (0.0, 0.0)), 400.0 * 15.0)
        self.assertEqual(beta_product(world, (5.0, 0.0)), 0.0)
        self.assertAlmostEqual(beta_product(world, (20.0, 0.0)), 0.0)

    def test_beta_gradient_matches_finite_differences(self):
        for world in (self.two_sphere_world(), self.ellipse_world(), self.egg_world()):
            for x in self.sample_interior(world, 100, clearance=0.1):
                numeric = self.finite_difference(world.beta, x, 1e-6 * world.length_scale)
                self.assertRelClose(beta_product_gradient(world, x), numeric, 1e-6, f"{world.name} at {x}")

    def test_membership_signs(self):
        world = self.two_sphere_world()
        self.assertTrue(world.in_interior((0.0, 0.0)))
        self.assertTrue(world.collided((5.0, 0.0)))
        self.assertTrue(world.in_free_space((6.0, 0.0)))
        self.assertFalse(world.in_interior((6.0, 0.0)))
        self.assertTrue(world.collided((11.0, 0.0)))

    def test_dimension_mismatch(self):
        with self.assertRaises(InvariantViolation):
            make_world([SphereObstacle(center=(0, 0, 0), radius=1.0)])

    def test_validate_two_spheres(self):
        apart = make_world(
            [SphereObstacle(center=(0, 0), radius=2), SphereObstacle(center=(5, 0), radius=2)],
            xstar=(0.0, 6.0),
        )
        report = validate_world(apart)
        self.assertTrue(report.passed, report.issues)
        self.assertAlmostEqual(report.pair_margins[(1, 2)], 1.0, places=3)

        touching = make_world(
            [SphereObstacle(center=(0, 0), radius=2), SphereObstacle(center=(3, 0), radius=2)],
            xstar=(0.0, 6.0),
        )
        report = validate_world(touching)
        self.assertFalse(report.passed)
        self.assertIn("obstacles intersect: 1 and 2", report.issues)

    def test_validate_xstar_inside_obstacle(self):
        report = validate_world(make_world([SphereObstacle(center=(0, 0), radius=2)]))
        self.assertFalse(report.passed)
        self.assertIn("x* is not in the interior of the free space", report.issues)

    def test_validate_needs_samples(self):
        with self.assertRaises(ValueError):
            validate_world(self.sphere_world(), samples=10)


class TestWorldFile(NavTestCase):
    def test_dump_and_load(self):
        world = self.egg_world()
        loaded = loads_world(dumps_world(world))
        self.assertEqual(loaded.name, world.name)
        self.assertEqual([o.kind for o in loaded.obstacles], ["egg", "egg"])
        assert_array_equal(loaded.objective.matrix, world.objective.matrix)
        self.assertEqual(dumps_world(loaded), dumps_world(world))

    def test_load_from_disk_uses_stem(self):
        data = json.loads(dumps_world(self.sphere_world()))
        del data["name"]
        path = os.path.join(self.workdir(), "arena.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh)
        self.assertEqual(load_world(path).name, "arena")

    def test_errors_name_the_field(self):
        data = json.loads(dumps_world(self.sphere_world()))
        del data["obstacles"][0]["radius"]
        with self.assertRaises(ConfigError) as ctx:
            world_from_dict(data)
        self.assertIn("obstacles[0].radius", str(ctx.exception))

        data = json.loads(dumps_world(self.sphere_world()))
        data["obstacles"][0]["kind"] = "torus"
        with self.assertRaises(ConfigError) as ctx:
            world_from_dict(data)
        self.assertIn("obstacles[0].kind", str(ctx.exception))

    def test_malformed_json_reports_line(self):
        with self.assertRaises(ConfigError) as ctx:
            loads_world('{\n  "workspace": \n}')
        self.assertEqual(ctx.exception.line, 3)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_world(os.path.join(self.workdir(), "missing.json"))

    def test_nonfinite_values_never_written(self):
        text = dumps_world(self.ellipse_world())
        self.assertNotIn("NaN", text)
        self.assertNotIn("Infinity", text)
        self.assertTrue(math.isfinite(json.loads(text)["workspace"]["radius"]))
