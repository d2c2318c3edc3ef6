import contextlib
import io
import json
import os

import numpy as np

from tests.base_test import NavTestCase, make_world
from stochnav.__main__ import main
from stochnav.cli import (
    App,
    ExitCode,
    LocalOutputStore,
    MemoryOutputStore,
    NavigationCommands,
    command,
    config_from_dict,
    loads_config,
    render_svg,
    to_json,
)
from stochnav.cli.config import apply_overrides, load_config
from stochnav.cli.svg import contour_levels, potential_grid
from stochnav.errors import ConfigError, InfeasibleParametersError
from stochnav.geometry.obstacles import SphereObstacle
from stochnav.geometry.worldfile import dumps_world, loads_world
from stochnav.potentials import PotentialSpec

SCALED_RIG = {"noise": {"eta": 0.1}, "beta_scale": 20.0, "objective_scale": 10.0}


class CliTestCase(NavTestCase):
    def setUp(self) -> None:
        super().setUp()
        self.dir = self.workdir()

    def write(self, name, text):
        path = os.path.join(self.dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        return path

    def world_file(self, world=None, name="sphere.json"):
        return self.write(name, dumps_world(world or self.sphere_world()))

    def config(self, **entries):
        data = {"world": {"file": os.path.basename(self.world_file())}, "rig": SCALED_RIG}
        data.update(entries)
        return data

    def run_main(self, argv):
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            code = main(argv)
        return code, json.loads(out.getvalue())

    def dispatch(self, name, data):
        store = MemoryOutputStore()
        out = io.StringIO()
        app = App(out=out)
        app.register(NavigationCommands())
        code = app.dispatch(name, config_from_dict(data, self.dir), store)
        return code, store, json.loads(out.getvalue())


class TestOutputStore(NavTestCase):
    def test_memory_store(self):
        store = MemoryOutputStore()
        store.write_text("a/b.csv", "x\n")
        store.write_json("./a/c.json", {"v": float("nan")})
        self.assertEqual(store.read_text("a/b.csv"), "x\n")
        self.assertEqual(json.loads(store.read_text("a/c.json")), {"v": None})
        self.assertTrue(store.exists("a"))
        self.assertEqual(list(store.listdir("a")), ["b.csv", "c.json"])
        self.assertEqual(list(store.listdir()), ["a"])
        with self.assertRaises(FileNotFoundError):
            store.read_text("missing.txt")

    def test_local_store_stays_under_its_base(self):
        base = os.path.join(self.workdir(), "out")
        store = LocalOutputStore(base)
        store.write_text("/runs/a.csv", "x\n")
        self.assertTrue(os.path.exists(os.path.join(base, "runs", "a.csv")))
        store.write_text("runs/../b.csv", "y\n")
        self.assertEqual(store.read_text("b.csv"), "y\n")
        for path in ("../x", "runs/../../x", "../out-sibling/x"):
            with self.assertRaises(ConfigError):
                store.write_text(path, "z\n")
        self.assertFalse(os.path.exists(os.path.join(os.path.dirname(base), "x")))

    def test_memory_store_rejects_parent_paths(self):
        with self.assertRaises(ConfigError):
            MemoryOutputStore().write_text("a/../../x", "z\n")

    def test_json(self):
        text = to_json({"x": np.array([1.0, np.inf]), "n": np.int64(3), "ok": np.bool_(True)})
        self.assertEqual(json.loads(text), {"x": [1.0, None], "n": 3, "ok": True})


CONFIGS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "configs")


class TestConfig(CliTestCase):
    def test_defaults(self):
        config = config_from_dict(self.config(), self.dir)
        self.assertEqual(config.potential.k, 7.0)
        self.assertEqual(config.schedule.eps0, 5e-2)
        self.assertEqual(config.rig.beta_scale, 20.0)
        self.assertEqual(config.starts, 5)
        self.assertEqual(config.montecarlo.mode, "campaign")
        self.assertEqual(len(config.worlds()), 1)
        self.assertIsNone(config.calibration)
        self.assertEqual(config_from_dict(self.config(calibration={"draws": 5}), self.dir).calibration.draws, 5)

    def test_malformed_json_names_the_line(self):
        with self.assertRaises(ConfigError) as ctx:
            loads_config('{\n  "seeds": 3,\n  "seeds" 4\n}')
        self.assertEqual(ctx.exception.line, 3)

    def test_field_errors(self):
        cases = [
            ({"seeds": 0}, "seeds"),
            ({"potential": {"k": -1}}, "potential.k"),
            ({"rig": {"noise": {"eta": -1.0}}}, "rig"),
            ({"schedule": {"eps0": 0}}, "schedule.eps0"),
            ({"starts": [[1.0, 2.0], [3.0]]}, "starts"),
            ({"montecarlo": {"mode": "clearance"}}, "montecarlo.compare"),
            ({"calibration": {"samples": 0}}, "calibration.samples"),
            ({"colour": "red"}, "colour"),
        ]
        for entries, field in cases:
            with self.assertRaises(ConfigError, msg=field) as ctx:
                config_from_dict(self.config(**entries), self.dir)
            self.assertEqual(ctx.exception.field, field)

    def test_world_source(self):
        with self.assertRaises(ConfigError) as ctx:
            config_from_dict({"seeds": 1}, self.dir)
        self.assertEqual(ctx.exception.field, "world")
        with self.assertRaises(ConfigError) as ctx:
            config_from_dict({"world": {"file": "nope.json"}}, self.dir)
        self.assertEqual(ctx.exception.field, "world.file")
        with self.assertRaises(ConfigError):
            config_from_dict({"world": {"file": "a.json", "generator": "egg"}}, self.dir)

    def test_sample_configs_load(self):
        names = sorted(n for n in os.listdir(CONFIGS) if n.endswith(".json"))
        self.assertIn("simulate.json", names)
        for name in names:
            config = load_config(os.path.join(CONFIGS, name))
            self.assertEqual(config_from_dict(json.loads(json.dumps(config.to_dict())), CONFIGS).to_dict(), config.to_dict(), name)

    def test_overrides(self):
        data = apply_overrides({"potential": {"k": 7}}, {"potential.k": 12.0, "seed": None, "plot.levels": 3})
        self.assertEqual(data, {"potential": {"k": 12.0}, "plot": {"levels": 3}})
        text = json.dumps(self.config(workers=2))
        config = loads_config(text, self.dir, overrides={"max_steps": 9}, defaults={"workers": 4, "seed": 5})
        self.assertEqual(config.max_steps, 9)
        self.assertEqual(config.workers, 2)
        self.assertEqual(config.seed, 5)


class TestDispatch(NavTestCase):
    def _app(self, handler):
        out = io.StringIO()
        app = App(out=out)
        app.command("probe")(handler)
        return app, out

    def test_exit_codes(self):
        def raise_config():
            raise ConfigError("bad", field="x")

        def raise_domain():
            raise InfeasibleParametersError("parameters infeasible")

        app, out = self._app(raise_config)
        self.assertEqual(app.dispatch("probe"), ExitCode.USAGE)
        self.assertEqual(json.loads(out.getvalue())["message"], "bad (field 'x')")
        app, out = self._app(raise_domain)
        self.assertEqual(app.dispatch("probe"), ExitCode.FAIL)
        app, out = self._app(lambda: None)
        self.assertEqual(app.dispatch("probe"), ExitCode.OK)
        self.assertEqual(app.dispatch("missing"), ExitCode.USAGE)

    def test_unexpected_errors_are_logged(self):
        def crash():
            raise RuntimeError("boom")

        app, out = self._app(crash)
        with self.assertLogs("stochnav.cli.routing", level="ERROR"):
            self.assertEqual(app.dispatch("probe"), ExitCode.FAIL)
        self.assertEqual(json.loads(out.getvalue())["message"], "internal error")

    def test_register(self):
        class Commands:
            @command("hello", help="say hello")
            def hello(self):
                return None

        app = App(out=io.StringIO())
        app.register(Commands())
        self.assertEqual(app.commands, [("hello", "say hello")])


class TestValidate(CliTestCase):
    def test_sphere_world_passes(self):
        path = self.write("run.json", json.dumps(self.config(potential={"kind": "rk", "k": 16})))
        out = os.path.join(self.dir, "out")
        code, report = self.run_main(["validate", path, "--output", out, "-q"])
        self.assertEqual(code, 0, report)
        with open(os.path.join(out, "validate.json"), encoding="utf-8") as fh:
            saved = json.load(fh)
        entry = saved["worlds"][0]
        self.assertTrue(entry["validation"]["passed"])
        self.assertTrue(entry["critical_points"]["is_navigation"])

    def test_intersecting_spheres_fail(self):
        world = make_world([SphereObstacle(center=(0.0, 5.0), radius=1.0), SphereObstacle(center=(0.0, 6.5), radius=1.0)])
        self.world_file(world, "clash.json")
        path = self.write("run.json", json.dumps({"world": {"file": "clash.json"}}))
        code, report = self.run_main(["validate", path, "--output", os.path.join(self.dir, "out"), "-q"])
        self.assertEqual(code, 1)
        self.assertIn("obstacles intersect: 1 and 2", report["message"])

    def test_unreadable_config(self):
        code, report = self.run_main(["validate", os.path.join(self.dir, "missing.json"), "-q"])
        self.assertEqual(code, 2)
        self.assertEqual(report["exit"], 2)

    def test_zero_seeds_is_a_usage_error(self):
        path = self.write("run.json", json.dumps(self.config(seeds=0)))
        code, report = self.run_main(["montecarlo", path, "-q"])
        self.assertEqual(code, 2)
        self.assertIn("seeds", report["message"])


class TestSimulate(CliTestCase):
    def test_outputs_and_rerun(self):
        data = self.config(starts=[[-6.0, 2.0], [3.0, -5.0]], max_steps=80, seed=3)
        code, store, report = self.dispatch("simulate", data)
        self.assertIn(code, (ExitCode.OK, ExitCode.FAIL))
        for name in ("world.json", "plot.svg", "summary.json", "trajectories/sgd-s00.csv",
                     "trajectories/baseline-s00.csv", "trajectories/sgd-s01.csv"):
            self.assertTrue(store.exists(name), name)
        self.assertEqual(loads_world(store.read_text("world.json")).to_dict(), self.sphere_world().to_dict())
        summary = json.loads(store.read_text("summary.json"))
        self.assertEqual([r["label"] for r in summary["runs"]], ["sgd-s00", "sgd-s01"])
        _, again, _ = self.dispatch("simulate", data)
        self.assertEqual(store.files, again.files)

    def test_seed_changes_the_runs(self):
        a = self.dispatch("simulate", self.config(starts=[[-6.0, 2.0]], max_steps=40, seed=3, baseline=False))[1]
        b = self.dispatch("simulate", self.config(starts=[[-6.0, 2.0]], max_steps=40, seed=4, baseline=False))[1]
        self.assertNotEqual(a.read_text("trajectories/sgd-s00.csv"), b.read_text("trajectories/sgd-s00.csv"))

    def test_calibration_report(self):
        data = self.config(
            starts=[[-6.0, 2.0]], max_steps=10, baseline=False, calibration={"samples": 50, "probes": 4, "draws": 5}
        )
        _, store, report = self.dispatch("simulate", data)
        entry = report["calibration"]["sphere"]
        self.assertEqual(entry["eps0"], 5e-2)
        self.assertGreater(entry["bound"], 0.0)
        self.assertIn("1", entry["gammas"])
        self.assertIsInstance(entry["eps0_admissible"], bool)
        self.assertEqual(json.loads(store.read_text("summary.json"))["calibration"], report["calibration"])


class TestMonteCarloCommand(CliTestCase):
    def test_campaign(self):
        code, store, report = self.dispatch("montecarlo", self.config(starts=[[-6.0, 2.0]], seeds=2, max_steps=30))
        self.assertIn(code, (ExitCode.OK, ExitCode.FAIL))
        self.assertTrue(store.exists("campaign.json"))
        self.assertTrue(store.exists("runs/w00-s00-r001.csv"))
        self.assertTrue(store.exists("baselines/w00-s00.csv"))
        self.assertTrue(store.exists("worlds/sphere.json"))
        self.assertEqual(report["aggregates"]["runs"], 2)

    def test_k_sweep_table(self):
        data = self.config(starts=[[-6.0, 2.0]], seeds=2, max_steps=30, montecarlo={"mode": "k-sweep", "k_values": [7, 12]})
        code, store, _ = self.dispatch("montecarlo", data)
        lines = store.read_text("k_sweep.csv").splitlines()
        self.assertEqual(lines[0], "k,mean_deviation,success_rate,runs")
        self.assertEqual([line.split(",")[0] for line in lines[1:]], ["7.0", "12.0"])
        self.assertTrue(store.exists("k7/campaign.json"))
        self.assertTrue(store.exists("k12/campaign.json"))

    def test_clearance(self):
        data = self.config(
            starts=[[-6.0, 2.0]], seeds=2, max_steps=30,
            montecarlo={"mode": "clearance", "compare": {"kind": "log", "k": 10}},
        )
        _, store, report = self.dispatch("montecarlo", data)
        self.assertTrue(store.exists("first/campaign.json"))
        self.assertTrue(store.exists("second/campaign.json"))
        self.assertEqual(report["comparison"]["second"]["potential"]["kind"], "log")


class TestBiasCommand(CliTestCase):
    def test_points(self):
        data = self.config(
            bias={"points": [[2.0, 1.0], [-3.0, 2.0]], "k_values": [8, 16], "quotients": False, "bracket_samples": 200}
        )
        code, store, report = self.dispatch("bias-diag", data)
        self.assertEqual(code, ExitCode.OK, report)
        self.assertEqual(report["points"], 2)
        rows = store.read_text("bias_grid.csv").splitlines()
        self.assertEqual(len(rows), 3)
        self.assertTrue(rows[0].startswith("x1,x2,k,awareness,b1,b2,b_norm"))
        self.assertTrue(store.exists("decay.csv"))
        self.assertFalse(store.exists("quotients.csv"))
        document = json.loads(store.read_text("bias.json"))
        self.assertIn("saddle_decay", document)
        self.assertGreater(document["bracket_bound"], 0.0)

    def test_ellipse_closed_form_is_a_usage_error(self):
        data = self.config(rig={"estimator": "ellipse"})
        code, store, report = self.dispatch("bias-diag", data)
        self.assertEqual(code, ExitCode.USAGE)
        self.assertFalse(store.files)

    def test_exact_closed_form_is_a_usage_error(self):
        code, store, report = self.dispatch("bias-diag", self.config(rig={"estimator": "exact"}))
        self.assertEqual(code, ExitCode.USAGE)
        self.assertIn("circle-fit", report["message"])
        self.assertFalse(store.files)

    def test_exact_monte_carlo_only(self):
        data = self.config(rig={"estimator": "exact"}, bias={"closed_form": False, "points": [[2.0, 1.0]]})
        code, store, report = self.dispatch("bias-diag", data)
        self.assertEqual(code, ExitCode.OK, report)
        document = json.loads(store.read_text("bias.json"))
        self.assertIsNone(document["points"][0]["closed_form"])

    def test_too_few_draws(self):
        code, _, report = self.dispatch("bias-diag", self.config(bias={"draws": 500}))
        self.assertEqual(code, ExitCode.USAGE)
        self.assertIn("bias.draws", report["message"])

    def test_point_inside_an_obstacle(self):
        code, _, report = self.dispatch("bias-diag", self.config(bias={"points": [[4.0, 0.0]]}))
        self.assertEqual(code, ExitCode.USAGE)
        self.assertIn("bias.points[0]", report["message"])


class TestPlot(CliTestCase):
    def test_render(self):
        world = self.sphere_world()
        svg = render_svg(world, [("run", np.array([[-6.0, 2.0], [-3.0, 1.0], [0.0, 0.0]]))])
        self.assertIn("<svg", svg)
        self.assertIn('id="obstacle-1"', svg)
        self.assertIn('id="trajectory-run"', svg)
        self.assertIn('id="xstar"', svg)
        self.assertNotIn('id="contour"', svg)
        self.assertNotIn('id="trajectory-', render_svg(world, []))

    def test_render_is_repeatable(self):
        world = self.sphere_world()
        runs = [("run", np.array([[-6.0, 2.0], [0.0, 0.0]]))]
        self.assertEqual(render_svg(world, runs), render_svg(world, runs))

    def test_contours(self):
        svg = render_svg(self.sphere_world(), [], PotentialSpec(k=7), levels=3, grid=40)
        self.assertIn('id="contour"', svg)

    def test_contour_levels(self):
        xs, ys, values = potential_grid(self.sphere_world(), PotentialSpec(kind="log", k=7), 20)
        self.assertEqual(values.shape, (20, 20))
        self.assertTrue(np.isnan(values[0, 0]))
        levels = contour_levels(PotentialSpec(kind="log", k=7), values, 4)
        self.assertTrue(np.all(np.diff(levels) > 0))
        np.testing.assert_allclose(contour_levels(PotentialSpec(k=7), values, 3), [0.25, 0.5, 0.75])

    def test_plot_command(self):
        csv_path = self.write("run.csv", "t,x1,x2,eps,gnorm,beta,phi,clearance\n0,-6.0,2.0,,,,,\n1,-5.0,1.5,,,,,\n")
        data = self.config(plot={"trajectories": [os.path.basename(csv_path)]})
        code, store, report = self.dispatch("plot", data)
        self.assertEqual(code, ExitCode.OK)
        self.assertEqual(report["trajectories"], 1)
        self.assertIn('id="trajectory-run"', store.read_text("plot.svg"))

    def test_missing_trajectory(self):
        code, _, report = self.dispatch("plot", self.config(plot={"trajectories": ["gone.csv"]}))
        self.assertEqual(code, ExitCode.USAGE)
        self.assertIn("plot.trajectories[0]", report["message"])


class TestGenerateWorld(CliTestCase):
    def test_writes_world_files(self):
        data = {"world": {"generator": "elliptical", "params": {"seed": 1}, "count": 2}}
        code, store, report = self.dispatch("generate-world", data)
        self.assertEqual(code, ExitCode.OK)
        self.assertEqual(sorted(store.files), ["elliptical-1.json", "elliptical-2.json"])
        world = loads_world(store.read_text("elliptical-1.json"))
        self.assertEqual(world.m, 4)

    def test_needs_a_generator(self):
        code, _, _ = self.dispatch("generate-world", self.config())
        self.assertEqual(code, ExitCode.USAGE)
