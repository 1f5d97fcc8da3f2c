# CovapSim.Experiment test suite

"""Unit test for CovapSim.Experiment"""

import json
import os
import shutil
import unittest

from TLib import VGG_BUCKET_NUMELS, make_temp_dir

from CovapSim.Config import ConfigError, parse_config
from CovapSim.Experiment import build_plan, report_json, run_experiment, \
    run_sweep, sweep_tasks, write_report


RESNET_DOC = {"name": "resnet101",
              "cluster": {"workers": 64, "bandwidth_gbps": 30},
              "phases": {"t_before": 55, "t_comp": 135, "t_comm": 280},
              "compressor": {"scheme": "covap"}}


def resnet_config(**sections):
    """ResNet-101 phases on the default 8 tensor model"""
    doc = dict(RESNET_DOC)
    doc.update(sections)
    return parse_config(doc)


class ExperimentPlanTest(unittest.TestCase):

    def test_000_default_model(self):
        """test the generated model has one bucket per tensor"""
        plan, model, interval = build_plan(resnet_config())
        self.assertEqual(len(model), 8)
        self.assertEqual(plan.num_tensors, 8)
        self.assertEqual(interval, 3)

    def test_001_vgg_buckets(self):
        """test sharding of the VGG-19 buckets"""
        config = parse_config({
            "model": {"layers": [{"param_count": numel}
                                 for numel in VGG_BUCKET_NUMELS]},
            "covap": {"interval": 19}})
        report = run_experiment(config, 'plan')
        self.assertEqual(report.command, 'plan')
        self.assertEqual(report.plan["effective_tensors"], 26)
        self.assertEqual(report.plan["median_numel"], 5590260.0)
        self.assertEqual(len(report.plan["buckets"]), 6)
        self.assertEqual(len(report.plan["buckets"][2]["shards"]), 19)

    def test_002_auto_without_phases(self):
        """test an auto interval needs computation times"""
        self.assertRaises(ConfigError, build_plan,
                          parse_config({"compressor": {"scheme": "covap"}}))

    def test_003_unknown_command(self):
        """test unknown commands"""
        self.assertRaises(ValueError, run_experiment, resnet_config(), 'fly')


class ExperimentSimulateTest(unittest.TestCase):

    def test_000_breakdown(self):
        """test the simulated COVAP window"""
        report = run_experiment(resnet_config(), 'simulate')
        self.assertEqual(report.breakdown["interval"], 3)
        self.assertEqual(report.breakdown["t_iteration"], 190.0)
        self.assertEqual(report.breakdown["speedup"], 64.0)
        self.assertEqual(report.breakdown["t_comm"], 280.0)
        self.assertEqual(len(report.timelines), 3)
        self.assertAlmostEqual(report.speedup["s_ovlp"], 1.403, places=3)
        self.assertEqual(report.speedup["interval"], 3)
        self.assertEqual(report.sweep, [])

    def test_001_dense(self):
        """test the dense baseline is communication bound"""
        report = run_experiment(resnet_config(compressor={"scheme": "none"}))
        self.assertEqual(report.breakdown["t_iteration"], 335.0)
        self.assertEqual(report.breakdown["unoverlapped_comm"], 145.0)
        self.assertEqual(len(report.timelines), 1)

    def test_002_sweep_flattens(self):
        """test speedup stops growing past the CCR"""
        config = resnet_config(sweep={"ratios": {"from": 1, "to": 6}})
        report = run_experiment(config)
        speedups = [pt.speedup for pt in report.sweep]
        self.assertEqual(len(speedups), 6)
        self.assertAlmostEqual(speedups[0], 64 * 190.0 / 335)
        # I=2 is below the CCR of 2.074 and keeps its tail
        self.assertAlmostEqual(speedups[1], 64 * 190.0 / 203.4375)
        self.assertEqual(report.sweep[1].deferred_comm, 0.0)
        self.assertEqual(speedups[2:], [64.0] * 4)
        self.assertEqual(speedups.index(max(speedups)), 2)
        gain = speedups[2] - speedups[0]
        self.assertTrue(speedups[3] - speedups[2] < 0.02 * gain)
        curve = report.curves()["covap"]["64"]
        self.assertEqual([pair[0] for pair in curve], [1, 2, 3, 4, 5, 6])
        self.assertEqual(report.scaling_table(), {"covap": {"64": 64.0}})

    def test_003_sweep_workers(self):
        """test given communication times are rescaled per cluster size"""
        config = resnet_config(sweep={"ratios": [1, 3], "workers": [8, 64],
                                      "schemes": ["covap", "fp16"]})
        points = run_experiment(config).sweep
        self.assertEqual([(pt.scheme, pt.workers, pt.ratio)
                          for pt in points],
                         [("covap", 8, 1), ("covap", 8, 3),
                          ("covap", 64, 1), ("covap", 64, 3),
                          ("fp16", 8, 2), ("fp16", 64, 2)])
        factor = (2.0 * 7 / 8) / (2.0 * 63 / 64)
        self.assertAlmostEqual(points[0].t_iteration, 55 + 280 * factor)
        self.assertAlmostEqual(points[2].t_iteration, 335.0)
        self.assertTrue(points[4].t_iteration < points[0].t_iteration)

    def test_004_parallel_sweep(self):
        """test parallel sweeps keep order and values"""
        config = resnet_config(sweep={"ratios": {"from": 1, "to": 4},
                                      "workers": [16, 32, 64]})
        plan, _, interval = build_plan(config)
        serial = [pt.as_dict() for pt in run_sweep(config, plan, interval)]
        parallel = [pt.as_dict() for pt in run_sweep(config, plan, interval,
                                                     parallel=4)]
        self.assertEqual(serial, parallel)

    def test_005_deterministic(self):
        """test identical configs give identical reports"""
        doc = dict(RESNET_DOC, sweep={"ratios": [1, 2, 3]})
        text1 = report_json(run_experiment(parse_config(doc)))
        text2 = report_json(run_experiment(parse_config(doc)))
        self.assertEqual(text1, text2)
        report = json.loads(text1)
        self.assertEqual(report["provenance"]["command"], "simulate")
        self.assertEqual(len(report["provenance"]["config_sha256"]), 64)
        self.assertEqual(len(report["sweep"]["points"]), 3)

    def test_006_sweep_reshards(self):
        """test COVAP sweep points are sharded for their own ratio"""
        config = parse_config({
            "model": {"layers": [{"param_count": numel}
                                 for numel in VGG_BUCKET_NUMELS]},
            "cluster": {"workers": 64},
            "phases": {"t_before": 105, "t_comp": 210, "t_comm": 842},
            "compressor": {"scheme": "covap"},
            "covap": {"interval": 2},
            "sweep": {"ratios": [2, 19]}})
        plan, _, interval = build_plan(config)
        tasks = sweep_tasks(config, plan, interval)
        self.assertEqual([(task[4], task[0].num_tensors) for task in tasks],
                         [(2, 8), (19, 26)])
        self.assertTrue(tasks[0][0] is plan)
        points = run_sweep(config, plan, interval)
        self.assertEqual([pt.ratio for pt in points], [2, 19])
        self.assertTrue(points[0].speedup < 64.0)
        self.assertAlmostEqual(points[1].t_iteration, 315.0)
        self.assertAlmostEqual(points[1].speedup, 64.0)

    def test_007_write_report(self):
        """test output files"""
        tmpdir = make_temp_dir()
        try:
            out_dir = os.path.join(tmpdir, "out")
            config = resnet_config(sweep={"ratios": [1, 2]})
            written = write_report(run_experiment(config), out_dir)
            self.assertEqual(written, ["report.json", "sweep.csv",
                                       "iterations.csv", "trace.csv",
                                       "trace.json"])
            with open(os.path.join(out_dir, "sweep.csv")) as stream:
                lines = stream.read().splitlines()
            self.assertEqual(lines[0], "scheme,ratio,workers,t_iteration_ms,"
                             "speedup,unoverlapped_comm_ms,deferred_comm_ms")
            self.assertEqual(len(lines), 3)
            with open(os.path.join(out_dir, "iterations.csv")) as stream:
                self.assertEqual(len(stream.read().splitlines()), 4)
        finally:
            shutil.rmtree(tmpdir)


class ExperimentProfileTest(unittest.TestCase):

    def test_000_skewed_profile(self):
        """test aligned and naive profiles of a skewed cluster"""
        config = parse_config({
            "model": {"uniform_layers": {"count": 1, "param_count": 1024}},
            "cluster": {"workers": 3, "skew_ms": [0, 40, 0]},
            "phases": {"t_before": 10, "t_comp": 50, "t_comm": 100},
            "covap": {"interval": 1}})
        report = run_experiment(config, 'profile')
        self.assertEqual(report.profile["ccr"], 2.0)
        self.assertAlmostEqual(report.profile["naive_ccr"], 2.8)
        self.assertEqual(report.profile["interval"], 2)
        self.assertEqual(report.profile["t_comm"], 100.0)
        self.assertEqual(len(report.timelines), 3)


class ExperimentTrainTest(unittest.TestCase):

    def test_000_train(self):
        """test a short COVAP training per seed"""
        config = parse_config({
            "compressor": {"scheme": "covap"},
            "covap": {"interval": 2},
            "train": {"features": 16, "samples": 64, "workers": 2,
                      "steps": 10, "seeds": [0, 1]}})
        report = run_experiment(config, 'train')
        self.assertEqual(len(report.train_rows), 20)
        self.assertEqual(report.train_rows[0][:2], (0, 0))
        self.assertEqual(report.train_rows[10][:2], (1, 0))
        runs = report.training["runs"]
        self.assertEqual([run["seed"] for run in runs], [0, 1])
        self.assertEqual(runs[0]["interval"], 2)
        self.assertEqual(runs[0]["audit"]["expected"], 0.5)
        self.assertFalse(report.training["diverged"])

    def test_001_missing_section(self):
        """test train needs a train section"""
        self.assertRaises(ConfigError, run_experiment, parse_config({}),
                          'train')

    def test_002_divergence(self):
        """test a too large learning rate is reported"""
        config = parse_config({"train": {"features": 16, "samples": 64,
                                         "workers": 2, "steps": 300,
                                         "lr": 100.0}})
        report = run_experiment(config, 'train')
        self.assertTrue(report.training["diverged"])
        self.assertTrue(len(report.train_rows) < 300)
