# CovapSim.PerfModel test suite

"""Unit test for CovapSim.PerfModel"""

import unittest

from CovapSim.Baseline import compression_cost
from CovapSim.PerfModel import PerfModelError, PhaseTimes, \
    UndefinedRatioError, ccr, check_reference, choose_interval, \
    overlap_schedule, ready_times, reference_phases, settle_tail, \
    speedup_fraction, speedup_report, t_dp, t_dp_ls, t_gc, t_gc_ovlp, \
    t_ovlp


class PerfModelPhaseTimesTest(unittest.TestCase):

    def test_000_totals(self):
        """test totals reconcile with per-tensor lists"""
        phases = PhaseTimes(10, comp=[1, 2, 3], comm=[4, 4, 4])
        self.assertEqual(phases.t_comp, 6)
        self.assertEqual(phases.t_comm, 12)
        self.assertEqual(phases.t_compress, 0.0)
        self.assertEqual(phases.count, 3)
        self.assertTrue(phases.has_per_tensor)
        self.assertEqual(phases.ccr, 2.0)

    def test_001_invalid(self):
        """test inconsistent or negative phases"""
        self.assertRaises(PerfModelError, PhaseTimes, 10, 7, None, [1, 2, 3])
        self.assertRaises(PerfModelError, PhaseTimes, -1, 1, 1)
        self.assertRaises(PerfModelError, PhaseTimes, 1, comp=[1, -1],
                          comm=[1, 1])
        self.assertRaises(PerfModelError, PhaseTimes, 1, comp=[1, 1],
                          comm=[1, 1, 1])

    def test_002_uniform(self):
        """test uniform split"""
        phases = PhaseTimes.uniform(55, 135, 280, 8)
        self.assertEqual(phases.comp, [16.875] * 8)
        self.assertEqual(phases.comm, [35.0] * 8)
        self.assertEqual(phases.compress, [0.0] * 8)

    def test_003_compressed(self):
        """test compressed phases"""
        phases = PhaseTimes(105, 210, 842)
        overhead, reduction = compression_cost('topk', 143652544)
        gc_phases = phases.compressed(overhead, reduction)
        self.assertEqual(gc_phases.t_comm, 239.0)
        self.assertEqual(gc_phases.t_compress, 1560.0)
        self.assertEqual(t_gc(gc_phases), 2114.0)
        overhead, reduction = compression_cost('fp16', 143652544)
        self.assertEqual(t_gc(phases.compressed(overhead, reduction)), 739.0)
        # never below zero
        self.assertEqual(phases.compressed(0, 10000).t_comm, 0.0)

    def test_004_compressed_per_tensor(self):
        """test per-tensor lists are rescaled"""
        phases = PhaseTimes(0, comp=[10, 30], comm=[20, 20])
        gc_phases = phases.compressed(8, 20)
        self.assertEqual(gc_phases.comm, [10.0, 10.0])
        self.assertEqual(gc_phases.compress, [2.0, 6.0])
        self.assertEqual(gc_phases.t_compress, 8.0)


class PerfModelOverlapTest(unittest.TestCase):

    def test_000_ready_times_compute(self):
        """test readiness with compression on the compute stream"""
        ready, end = ready_times(10, [5, 5], [3, 3], 'compute')
        self.assertEqual(ready, [13, 21])
        self.assertEqual(end, 26)

    def test_001_ready_times_side(self):
        """test readiness with compression on a side stream"""
        ready, end = ready_times(10, [5, 5], [3, 3], 'side')
        self.assertEqual(ready, [13, 18])
        self.assertEqual(end, 20)
        self.assertRaises(PerfModelError, ready_times, 10, [1], [0], 'gpu')

    def test_002_comm_bound(self):
        """test overlap of a communication bound iteration"""
        phases = PhaseTimes.uniform(55, 135, 280, 8)
        sched = overlap_schedule(phases)
        self.assertEqual(sched.t_total, 335.0)
        self.assertEqual(sched.compute_end, 190.0)
        self.assertEqual(sched.bubbles, [])
        self.assertEqual(sched.comm_starts[0], 55.0)
        self.assertEqual(t_ovlp(phases), t_ovlp(PhaseTimes(55, 135, 280)))

    def test_003_compute_bound(self):
        """test overlap with idle gaps when CCR is 0.5"""
        phases = PhaseTimes.uniform(10, 100, 50, 4)
        sched = overlap_schedule(phases)
        self.assertEqual(sched.ready, [10.0, 35.0, 60.0, 85.0])
        self.assertEqual(sched.comm_ends, [22.5, 47.5, 72.5, 97.5])
        self.assertEqual(sched.bubbles, [(0, 12.5), (1, 12.5), (2, 12.5)])
        self.assertEqual(sched.t_total, 110.0)

    def test_004_skip(self):
        """test skipped tensors are not communicated"""
        phases = PhaseTimes.uniform(0, 40, 80, 4)
        sched = overlap_schedule(phases, skip=(1, 3))
        self.assertEqual(sched.comm_starts, [0.0, None, 20.0, None])
        self.assertEqual(sched.comm_ends, [20.0, None, 40.0, None])
        self.assertEqual(sched.comm_end, 40.0)
        self.assertEqual(sched.t_total, 40.0)

    def test_005_totals_only(self):
        """test overlap schedule needs per-tensor times"""
        self.assertRaises(PerfModelError, overlap_schedule,
                          PhaseTimes(1, 2, 3))

    def test_006_settle_tail(self):
        """test communication tail deferral"""
        self.assertEqual(settle_tail(190, 335, 55, True), (280, 55))
        self.assertEqual(settle_tail(190, 200, 55, True), (190, 10))
        self.assertEqual(settle_tail(190, 335, 55, False), (335, 0.0))
        self.assertEqual(settle_tail(190, None, 55, True), (190, 0.0))
        self.assertEqual(settle_tail(190, 150, 55, True), (190, 0.0))


class PerfModelFormulaTest(unittest.TestCase):

    def test_000_ccr(self):
        """test CCR and interval choice"""
        self.assertAlmostEqual(ccr(280, 135), 2.074, places=3)
        self.assertRaises(UndefinedRatioError, ccr, 1, 0)
        self.assertEqual(choose_interval(2.074), 3)
        self.assertEqual(choose_interval(3.0), 3)
        self.assertEqual(choose_interval(3.0 + 1e-12), 3)
        self.assertEqual(choose_interval(0.5), 1)
        self.assertEqual(choose_interval(0), 1)
        self.assertRaises(PerfModelError, choose_interval, -1)

    def test_001_iteration_times(self):
        """test iteration time formulas"""
        phases = PhaseTimes(55, 135, 280)
        self.assertEqual(t_dp(phases), 470)
        self.assertEqual(t_dp_ls(phases), 190)
        self.assertEqual(t_ovlp(phases), 335)
        self.assertEqual(t_gc(phases), 470)
        self.assertEqual(t_gc_ovlp(phases), 335)
        self.assertEqual(t_ovlp(PhaseTimes(10, 100, 50)), 110)

    def test_002_speedup_fraction(self):
        """test predicted speedup of a CCR"""
        self.assertAlmostEqual(speedup_fraction(55, 135, 2.074, 64), 25.87,
                               places=2)
        self.assertEqual(speedup_fraction(0, 10, 0, 8), 8)
        self.assertRaises(UndefinedRatioError, speedup_fraction, 1, 0, 1, 8)

    def test_003_report_resnet(self):
        """test ResNet-101 reference report"""
        report = speedup_report(reference_phases('resnet101'), workers=64,
                                name='resnet101')
        self.assertEqual(report.interval, 3)
        self.assertEqual(report.t_ovlp, 335)
        self.assertAlmostEqual(report.s_ovlp, 1.403, places=3)
        self.assertAlmostEqual(report.s_ls, 2.474, places=3)
        self.assertTrue(1 <= report.s_ovlp <= report.s_ls)
        self.assertEqual(report.flags, [])
        self.assertEqual(report.as_dict()['interval'], 3)

    def test_004_report_bert(self):
        """test BERT reference report"""
        report = speedup_report(reference_phases('bert'), name='bert')
        self.assertEqual(report.t_ovlp, 600)
        self.assertAlmostEqual(report.s_ovlp, 1.283, places=3)
        self.assertEqual(report.interval, 4)
        self.assertEqual(report.predicted_speedup_frac, None)
        self.assertEqual(report.flags, [])

    def test_005_report_vgg_flagged(self):
        """test inconsistent VGG-19 row is flagged"""
        report = speedup_report(reference_phases('vgg19'), name='vgg19')
        self.assertAlmostEqual(report.s_ls, 3.673, places=3)
        self.assertEqual(len(report.flags), 1)
        self.assertTrue('s_ls' in report.flags[0])
        self.assertEqual(check_reference('vgg19', report), report.flags)

    def test_006_report_compressed(self):
        """test compressed speedups"""
        phases = reference_phases('vgg19')
        gc_phases = phases.compressed(*compression_cost('fp16', 143652544))
        report = speedup_report(phases, gc_phases)
        self.assertEqual(report.t_gc, 739.0)
        self.assertAlmostEqual(report.s_gc, 1157.0 / 739)
        self.assertRaises(PerfModelError, reference_phases, 'alexnet')
