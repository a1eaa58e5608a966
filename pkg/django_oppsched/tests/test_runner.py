import csv
import io
import json
import math
from dataclasses import replace
from pathlib import Path
from tempfile import TemporaryDirectory
from unittest.mock import patch

from django.test import SimpleTestCase, override_settings

from django_oppsched.choices import (
    ReportFormat,
    ReportScheme,
    SimScheme,
    ThresholdRule,
)
from django_oppsched.exceptions import ScenarioError
from django_oppsched.forms import Sweep, Target
from django_oppsched.runner import (
    REL_EPSILON,
    ResultRecord,
    analytic_report_for,
    compare,
    emit_report,
    load_report,
    plan_sweep,
    relative_error,
    render_report,
    run_sweep,
)
from testproject.factories import (
    homogeneous_spec,
    make_config,
    non_uniform_spec,
)

K_SWEEP = Sweep("k", tuple(Target("fixed", k) for k in (0.5, 1.0, 1.5, 2.0)))


class TestRelativeError(SimpleTestCase):
    def test_values(self):
        self.assertAlmostEqual(relative_error(1.1, 1.0), 0.1)
        self.assertEqual(relative_error(1e-12, 0.0), 1e-12 / REL_EPSILON)
        self.assertIsNone(relative_error(None, 1.0))
        self.assertIsNone(relative_error(1.0, None))


class TestAnalyticReportFor(SimpleTestCase):
    def test_homogeneous(self):
        config = make_config(1000, k_target=1.0)
        report = analytic_report_for(config)
        self.assertEqual(report.scheme, ReportScheme.HOMOGENEOUS)
        self.assertAlmostEqual(report.p_utilized, math.exp(-1))

    def test_heterogeneous(self):
        config = make_config(
            250,
            non_uniform_spec(),
            threshold_rule=ThresholdRule.RATE_MATCH,
            k_target=1.0,
        )
        report = analytic_report_for(config)
        self.assertEqual(report.scheme, ReportScheme.HETEROGENEOUS)

    def test_per_user_thresholds(self):
        config = make_config(
            100,
            non_uniform_spec(qos=("equal",)),
            threshold_rule=ThresholdRule.PER_USER_QOS,
        )
        self.assertEqual(analytic_report_for(config).scheme, ReportScheme.QOS)
        capture = replace(config, scheme=SimScheme.CAPTURE)
        with self.assertLogs("django_oppsched.runner", "WARNING"):
            self.assertIsNone(analytic_report_for(capture))

    def test_enhanced(self):
        config = make_config(
            1000, scheme=SimScheme.ENHANCED, k_target=7.0, bins=49
        )
        report = analytic_report_for(config)
        self.assertEqual(report.scheme, ReportScheme.ENHANCED)
        self.assertIsNotNone(report.expected_delay_minislots)
        mixed = make_config(
            100,
            non_uniform_spec(),
            scheme=SimScheme.ENHANCED,
            threshold_rule=ThresholdRule.RATE_MATCH,
            k_target=3.0,
            bins=9,
        )
        with self.assertLogs("django_oppsched.runner", "WARNING"):
            self.assertIsNone(analytic_report_for(mixed))

    def test_threshold_out_of_reach(self):
        for threshold in (40.0, -math.inf):
            with self.subTest(threshold=threshold):
                config = make_config(
                    100,
                    threshold_rule=ThresholdRule.EXPLICIT,
                    threshold=threshold,
                    slots=200,
                )
                with self.assertLogs("django_oppsched.runner", "WARNING"):
                    record = compare(config)
                self.assertIsNone(record.analytic_capacity)
                self.assertIsNone(record.rel_err_capacity)
        enhanced = make_config(
            100,
            scheme=SimScheme.ENHANCED,
            threshold_rule=ThresholdRule.EXPLICIT,
            threshold=40.0,
            bins=4,
        )
        with self.assertLogs("django_oppsched.runner", "WARNING"):
            self.assertIsNone(analytic_report_for(enhanced))

    def test_negative_capacity(self):
        config = make_config(
            100,
            homogeneous_spec(mu=-5.0),
            threshold_rule=ThresholdRule.EXPLICIT,
            threshold=-3.0,
        )
        with self.assertLogs("django_oppsched.runner", "WARNING") as logs:
            self.assertIsNone(analytic_report_for(config))
        self.assertIn("nonnegative", logs.output[0])


class TestSweep(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.config = make_config(
            1000, k_target=1.0, slots=2000, seed=5, scenario_id="sweep"
        )
        cls.records = run_sweep(cls.config, K_SWEEP)

    def test_axis_order(self):
        self.assertEqual([r.k for r in self.records], [0.5, 1.0, 1.5, 2.0])
        for record in self.records:
            self.assertEqual(record.scenario_id, "sweep")
            self.assertEqual(record.slots, 2000)
            self.assertIsNone(record.l)
            self.assertIsNone(record.sim_delay)

    def test_optimal_target(self):
        best = max(self.records, key=lambda r: r.analytic_capacity)
        self.assertEqual(best.k, 1.0)

    def test_record_values(self):
        record = self.records[1]
        self.assertAlmostEqual(
            record.sim_p_idle + record.sim_p_collision + record.sim_p_utilized,
            1.0,
        )
        self.assertGreater(record.sim_capacity_hw, 0)
        self.assertAlmostEqual(
            record.rel_err_capacity,
            abs(record.sim_capacity - record.analytic_capacity)
            / record.analytic_capacity,
        )
        self.assertGreater(record.expected_max, record.analytic_capacity)

    def test_no_sweep(self):
        self.assertEqual(len(plan_sweep(self.config)), 1)
        self.assertEqual(len(plan_sweep(self.config, None)), 1)

    def test_K_sweep(self):
        configs = plan_sweep(self.config, Sweep("K", (100, 200)))
        self.assertEqual([c.K for c in configs], [100, 200])
        self.assertEqual(len(configs[1].profiles), 200)

    def test_scheme_sweep(self):
        sweep = Sweep("scheme", ("baseline", "capture"))
        configs = plan_sweep(self.config, sweep)
        self.assertEqual([c.scheme for c in configs], ["baseline", "capture"])

    def test_fail_fast(self):
        sweep = Sweep("k", (Target("fixed", 1.0), Target("fixed", 5000.0)))
        with patch("django_oppsched.runner.simulate") as simulate:
            with self.assertRaises(ScenarioError):
                run_sweep(self.config, sweep)
        simulate.assert_not_called()

    def test_repeatable(self):
        again = run_sweep(self.config, K_SWEEP)
        self.assertEqual(
            render_report(again, timing=False),
            render_report(self.records, timing=False),
        )


class TestReports(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        config = make_config(
            100,
            homogeneous_spec(),
            scheme=SimScheme.ENHANCED,
            k_target=3.0,
            bins=9,
            slots=1000,
            scenario_id="report",
        )
        bins = tuple(Target("fixed", n) for n in (4, 9, 16))
        cls.records = run_sweep(config, Sweep("l", bins))

    def test_csv(self):
        text = render_report(self.records)
        rows = list(csv.reader(io.StringIO(text)))
        self.assertEqual(len(rows), 4)
        header = rows[0]
        self.assertEqual(header[:3], ["scenario_id", "scheme", "K"])
        self.assertNotIn("runtime_seconds", header)
        column = header.index("l")
        self.assertEqual([row[column] for row in rows[1:]], ["4", "9", "16"])
        self.assertTrue(text.endswith("\n"))
        self.assertNotIn("\r", text)

    def test_timing_column(self):
        header = render_report(self.records, timing=True).splitlines()[0]
        self.assertTrue(header.endswith(",runtime_seconds"))

    @override_settings(OPPSCHED_REPORT_TIMING=True)
    def test_timing_setting(self):
        header = render_report(self.records).splitlines()[0]
        self.assertIn("runtime_seconds", header)

    @override_settings(OPPSCHED_REPORT_DIGITS=3)
    def test_digits(self):
        objects = json.loads(render_report(self.records, ReportFormat.JSON))
        capacity = objects[0]["sim_capacity"]
        self.assertEqual(capacity, float(f"{capacity:.3g}"))

    def test_json(self):
        objects = json.loads(render_report(self.records, ReportFormat.JSON))
        self.assertEqual(len(objects), 3)
        self.assertEqual([o["l"] for o in objects], [4, 9, 16])
        self.assertNotIn("runtime_seconds", objects[0])
        self.assertIsNotNone(objects[0]["sim_delay"])

    def test_missing_values(self):
        record = ResultRecord(
            scenario_id="x",
            scheme="capture",
            K=10,
            k=1.0,
            l=None,
            threshold_rule="per_user_qos",
            seed=0,
            slots=1,
        )
        row = render_report([record]).splitlines()[1].split(",")
        self.assertEqual(row[4], "")
        objects = json.loads(render_report([record], ReportFormat.JSON))
        self.assertIsNone(objects[0]["analytic_capacity"])

    def test_unknown_format(self):
        with self.assertRaises(ScenarioError):
            render_report(self.records, "xml")
        with self.assertRaises(ScenarioError):
            render_report([])

    def test_emit_and_load(self):
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / "report.json"
            emit_report(self.records, ReportFormat.JSON, path)
            loaded = load_report(path)
            self.assertEqual(list(Path(tmp).iterdir()), [path])
        self.assertEqual(len(loaded), 3)
        for record, original in zip(loaded, self.records):
            self.assertEqual(record.l, original.l)
            self.assertEqual(record.slots, original.slots)
            self.assertAlmostEqual(
                record.sim_capacity, original.sim_capacity, places=9
            )

    def test_no_partial_file(self):
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / "report.csv"
            with patch(
                "django_oppsched.runner.os.replace",
                side_effect=OSError("disk full"),
            ):
                with self.assertRaises(OSError):
                    emit_report(self.records, ReportFormat.CSV, path)
            self.assertEqual(list(Path(tmp).iterdir()), [])

    def test_compare_single(self):
        config = make_config(50, k_target=1.0, slots=500)
        record = compare(config)
        self.assertEqual(record.K, 50)
        self.assertGreaterEqual(record.runtime_seconds, 0)
