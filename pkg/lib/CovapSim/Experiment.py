#
# Copyright (C) 2024-2026 The covap-sim developers
#
# This file is part of covap-sim.
#
# covap-sim is free software; you can redistribute it and/or
# modify it under the terms of the GNU Lesser General Public
# License as published by the Free Software Foundation; either
# version 2.1 of the License, or (at your option) any later version.
#
# covap-sim is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the GNU
# Lesser General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public
# License along with covap-sim; if not, write to the Free Software
# Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston, MA 02110-1301 USA

"""
Experiment runner.

Ties an ExperimentConfig to the library: bucket planning, distributed
profiling, simulation of one COVAP window, compression ratio and cluster
size sweeps, and desk-scale training. Results are gathered in a Report
that can be written as report.json and raw CSV files.
"""

from concurrent.futures import ThreadPoolExecutor
import csv
import json
import logging
import os

from CovapSim import __version__
from CovapSim.Baseline import SPARSIFIERS, compression_cost
from CovapSim.Config import ConfigError
from CovapSim.PerfModel import PhaseTimes, UndefinedRatioError, \
    choose_interval, speedup_report
from CovapSim.Profiler import naive_ccr, profile_ccr
from CovapSim.Simulator import CompressorChoice, SimulatorError, \
    dense_phases, mean_iteration_time, simulate_window, simulate_workers
from CovapSim.Topology import BucketPlan, TopologyError, \
    allocate_buckets, plan_to_dict, shard_plan, uniform_model
from CovapSim.Trace import export_chrome_trace, export_trace_csv
from CovapSim.Trainer import CompressorSpec, SGD, contraction_audit, \
    make_dataset, new_model, train, training_plan


LOGGER = logging.getLogger(__name__)

# tensors of the generated model when a config has no model section
DEFAULT_TENSORS = 8
DEFAULT_TENSOR_PARAMS = 1 << 20

SWEEP_HEADER = ('scheme', 'ratio', 'workers', 't_iteration_ms', 'speedup',
                'unoverlapped_comm_ms', 'deferred_comm_ms')
ITERATION_HEADER = ('iter', 'worker', 't_total_ms', 'duration_ms',
                    'unoverlapped_comm_ms', 'deferred_comm_ms', 'bubble_ms')
TRAIN_HEADER = ('seed', 'step', 'loss', 'bytes')

# fixed compression ratio of schemes without a ratio knob
FIXED_RATIOS = {'none': 1, 'fp16': 2}

FLOAT_FMT = '%.6f'


class SweepPoint(object):
    """One simulated (scheme, ratio, workers) point."""

    FIELDS = ('scheme', 'ratio', 'workers', 't_iteration', 'speedup',
              'unoverlapped_comm', 'deferred_comm')

    def __init__(self, scheme, ratio, workers, t_iteration, speedup,
                 unoverlapped_comm, deferred_comm):
        self.scheme = scheme
        self.ratio = ratio
        self.workers = workers
        self.t_iteration = t_iteration
        self.speedup = speedup
        self.unoverlapped_comm = unoverlapped_comm
        self.deferred_comm = deferred_comm

    def as_dict(self):
        return dict((name, getattr(self, name)) for name in self.FIELDS)

    def row(self):
        return (self.scheme, self.ratio, self.workers,
                FLOAT_FMT % self.t_iteration, FLOAT_FMT % self.speedup,
                FLOAT_FMT % self.unoverlapped_comm,
                FLOAT_FMT % self.deferred_comm)


class Report(object):
    """Results of one command run on an experiment."""

    def __init__(self, config, command):
        self.config = config
        self.command = command
        self.plan = None
        self.profile = None
        self.speedup = None
        self.breakdown = None
        self.sweep = []
        self.timelines = []
        self.training = None
        self.train_rows = []

    @property
    def provenance(self):
        return {"config_sha256": self.config.sha256,
                "config_path": self.config.path,
                "seed": self.config.seed,
                "version": __version__,
                "command": self.command}

    def curves(self):
        """Return {scheme: {workers: [[ratio, speedup], ...]}}."""
        result = {}
        for point in self.sweep:
            per_scheme = result.setdefault(point.scheme, {})
            per_scheme.setdefault(str(point.workers), []).append(
                [point.ratio, point.speedup])
        return result

    def scaling_table(self):
        """Return {scheme: {workers: best speedup over ratios}}."""
        result = {}
        for point in self.sweep:
            per_scheme = result.setdefault(point.scheme, {})
            key = str(point.workers)
            per_scheme[key] = max(per_scheme.get(key, 0.0), point.speedup)
        return result

    def iteration_rows(self):
        for timeline in self.timelines:
            yield (timeline.step, timeline.worker,
                   FLOAT_FMT % timeline.t_total, FLOAT_FMT % timeline.duration,
                   FLOAT_FMT % timeline.unoverlapped_comm,
                   FLOAT_FMT % timeline.deferred_comm,
                   FLOAT_FMT % sum(gap for _, gap in timeline.bubbles))

    def as_dict(self):
        doc = {"name": self.config.name, "provenance": self.provenance}
        for key in ('plan', 'profile', 'speedup', 'breakdown', 'training'):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        if self.sweep:
            doc["sweep"] = {"points": [pt.as_dict() for pt in self.sweep],
                            "curves": self.curves(),
                            "scaling": self.scaling_table()}
        return doc


#
# Building blocks
#
def experiment_model(config):
    """Return (ModelSpec, cap_bytes) of `config`."""
    if config.model is not None:
        return config.model, config.cap_bytes
    model = uniform_model(DEFAULT_TENSORS, DEFAULT_TENSOR_PARAMS,
                          name=config.name)
    return model, model.layers[0].nbytes


def base_phases(config):
    return config.phases if config.phases is not None else PhaseTimes(0.0)


def resolve_interval(config, plan):
    """Return the COVAP interval, choose_interval(CCR) when 'auto'."""
    if not config.covap.is_auto:
        return config.covap.interval
    dense = _dense(config, plan)
    try:
        interval = choose_interval(dense.ccr)
    except UndefinedRatioError as exc:
        raise ConfigError("covap.interval", "cannot resolve 'auto': %s"
                          % exc)
    LOGGER.info("%s: CCR %.3f, interval %d", config.name, dense.ccr,
                interval)
    return interval


def _dense(config, plan, cluster=None):
    try:
        return dense_phases(plan, cluster or config.cluster,
                            base_phases(config))
    except SimulatorError as exc:
        raise ConfigError("phases", str(exc))


def build_plan(config):
    """Return (BucketPlan, ModelSpec, interval) of `config`."""
    model, cap = experiment_model(config)
    try:
        buckets = allocate_buckets(model, cap)
        interval = resolve_interval(config, buckets)
        plan = shard_plan(buckets, interval)
    except TopologyError as exc:
        raise ConfigError("model", str(exc))
    LOGGER.info("%s: %d buckets, %d effective tensors (I=%d)", config.name,
                len(plan.buckets), plan.num_tensors, interval)
    return plan, model, interval


def compressor_choice(config, interval, scheme=None, ratio=None):
    """Return the simulator CompressorChoice of a scheme and ratio."""
    settings = config.compressor
    scheme = scheme or settings.scheme
    k_fraction = settings.k_fraction
    if scheme in SPARSIFIERS and ratio is not None:
        k_fraction = 1.0 / ratio
    if scheme == 'covap' and ratio is not None:
        interval = ratio
    return CompressorChoice(scheme, interval if scheme == 'covap' else 1,
                            k_fraction, config.covap.selection,
                            settings.compress_ms if scheme ==
                            settings.scheme else None)


def gc_phases(dense, choice, total_numel):
    """Closed-form PhaseTimes of `dense` once `choice` is applied."""
    if choice.scheme == 'none':
        return None
    if choice.scheme == 'covap':
        return PhaseTimes(dense.t_before, dense.t_comp,
                          dense.t_comm / choice.interval)
    cost, reduction = compression_cost(choice.scheme, total_numel)
    if choice.compress_ms is not None:
        cost = choice.compress_ms
    return PhaseTimes(dense.t_before, dense.t_comp, dense.t_comm).compressed(
        cost, reduction)


def scaled_phases(config, plan, workers):
    """
    Return the phases to simulate on a cluster of `workers`. Modeled
    communication times are recomputed by the simulator for each cluster
    size; given ones are rescaled by the ring allreduce volume factor of
    the new cluster size.
    """
    cluster = config.cluster
    phases = base_phases(config)
    if workers == cluster.workers or \
            (phases.comm is None and phases.t_comm is None):
        return phases
    if cluster.ring_factor == 0:
        raise ConfigError("sweep.workers", "communication times given for "
                          "a single worker cannot be rescaled")
    factor = cluster.with_workers(workers).ring_factor / cluster.ring_factor
    dense = _dense(config, plan)
    return PhaseTimes(dense.t_before, comp=dense.comp,
                      comm=[val * factor for val in dense.comm])


def evaluate_point(plan, cluster, phases, choice, ratio):
    """Simulate one window of `choice`, return a SweepPoint."""
    dense = dense_phases(plan, cluster, phases)
    timelines = simulate_window(plan, cluster, choice, phases)
    t_iter = mean_iteration_time(timelines)
    count = float(len(timelines))
    speedup = cluster.workers * (dense.t_before + dense.t_comp) / t_iter
    point = SweepPoint(choice.scheme, ratio, cluster.workers, t_iter,
                       speedup,
                       sum(t.unoverlapped_comm for t in timelines) / count,
                       sum(t.deferred_comm for t in timelines) / count)
    LOGGER.debug("sweep point %s ratio=%s P=%d: %.3f ms, speedup %.3f",
                 point.scheme, ratio, point.workers, t_iter, speedup)
    return point


def sweep_tasks(config, plan, interval):
    """
    Return the (plan, cluster, phases, choice, ratio) tasks of the sweep.
    COVAP points whose ratio differs from `interval` are simulated on the
    buckets of `plan` sharded again for that ratio.
    """
    sweep = config.sweep
    buckets = BucketPlan(plan.buckets, plan.cap_bytes)
    plans = {interval: plan}

    def _plan(scheme, ratio):
        if scheme != 'covap':
            return plan
        if ratio not in plans:
            try:
                plans[ratio] = shard_plan(buckets, ratio)
            except TopologyError as exc:
                raise ConfigError("sweep.ratios", str(exc))
            # per-tensor phase lists must fit the new shards
            _dense(config, plans[ratio])
            LOGGER.debug("ratio %d: %d effective tensors", ratio,
                         plans[ratio].num_tensors)
        return plans[ratio]

    ratios = sweep.ratios or [interval]
    workers = sweep.workers or [config.cluster.workers]
    schemes = sweep.schemes or [config.compressor.scheme]
    tasks = []
    for scheme in schemes:
        for count in workers:
            cluster = config.cluster
            if count != cluster.workers:
                cluster = cluster.with_workers(count)
            if scheme in FIXED_RATIOS:
                tasks.append((plan, cluster,
                              scaled_phases(config, plan, count),
                              compressor_choice(config, interval, scheme),
                              FIXED_RATIOS[scheme]))
                continue
            for ratio in ratios:
                point_plan = _plan(scheme, ratio)
                tasks.append((point_plan, cluster,
                              scaled_phases(config, point_plan, count),
                              compressor_choice(config, interval, scheme,
                                                ratio), ratio))
    return tasks


def run_sweep(config, plan, interval, parallel=1):
    """
    Evaluate the sweep cross product, `parallel` points at a time.
    Points are returned in config order.
    """
    tasks = sweep_tasks(config, plan, interval)
    LOGGER.info("%s: sweeping %d points (parallel=%d)", config.name,
                len(tasks), parallel)
    if parallel <= 1:
        return [evaluate_point(*task) for task in tasks]
    with ThreadPoolExecutor(max_workers=parallel) as executor:
        return list(executor.map(lambda task: evaluate_point(*task), tasks))


#
# Commands
#
def run_plan(config):
    """Bucket and shard the model of `config`."""
    report = Report(config, 'plan')
    plan, model, interval = build_plan(config)
    report.plan = plan_to_dict(plan, model)
    return report


def run_profile(config):
    """
    Simulate dense iterations on every worker (with skew when set) and
    profile them. Report the aligned and naive CCR and the recommended
    interval.
    """
    report = Report(config, 'profile')
    plan, _, _ = build_plan(config)
    phases = base_phases(config)
    choice = CompressorChoice('none')
    traces = []
    try:
        for step in range(config.iterations or 1):
            traces.extend(simulate_workers(plan, config.cluster, choice,
                                           phases, step))
    except SimulatorError as exc:
        raise ConfigError("phases", str(exc))
    ratio, profiled = profile_ccr(traces)
    try:
        naive = naive_ccr(traces)
    except UndefinedRatioError:
        naive = None
    report.profile = {"ccr": ratio, "interval": choose_interval(ratio),
                      "naive_ccr": naive, "workers": config.cluster.workers,
                      "iterations": config.iterations or 1}
    report.profile.update(profiled.as_dict())
    report.timelines = traces
    return report


def run_simulate(config, parallel=1):
    """Simulate one compressor window and run the sweep if any."""
    report = Report(config, 'simulate')
    plan, model, interval = build_plan(config)
    report.plan = plan_to_dict(plan, model)
    cluster = config.cluster
    phases = base_phases(config)
    dense = _dense(config, plan)
    choice = compressor_choice(config, interval)
    iterations = config.iterations or choice.window
    try:
        if cluster.has_skew:
            for step in range(iterations):
                report.timelines.extend(simulate_workers(plan, cluster,
                                                         choice, phases, step))
            window = [t for t in report.timelines if t.worker == 0]
        else:
            report.timelines = simulate_window(plan, cluster, choice, phases,
                                               iterations)
            window = report.timelines
    except SimulatorError as exc:
        raise ConfigError("phases", str(exc))

    try:
        speedup = speedup_report(dense, gc_phases(dense, choice,
                                                  plan.total_numel),
                                 cluster.workers, config.name)
    except UndefinedRatioError as exc:
        raise ConfigError("phases", str(exc))
    report.speedup = speedup.as_dict()
    t_iter = mean_iteration_time(window)
    report.breakdown = {
        "t_before": dense.t_before, "t_comp": dense.t_comp,
        "t_comm": dense.t_comm, "ccr": speedup.ccr, "interval": interval,
        "scheme": choice.scheme, "t_iteration": t_iter,
        "speedup": cluster.workers * (dense.t_before + dense.t_comp) /
                   t_iter,
        "unoverlapped_comm": sum(t.unoverlapped_comm for t in window) /
                             len(window),
        "deferred_comm": sum(t.deferred_comm for t in window) / len(window)}
    if config.sweep is not None:
        report.sweep = run_sweep(config, plan, interval, parallel)
    return report


def run_train(config):
    """Train the toy model of `config` once per seed."""
    settings = config.train
    if settings is None:
        raise ConfigError("train", "missing train section")
    report = Report(config, 'train')
    scheme = config.compressor.scheme
    covap = None
    if scheme == 'covap':
        interval = config.covap.interval
        if config.covap.is_auto:
            interval = resolve_interval(config, allocate_buckets(
                *experiment_model(config)))
        covap = config.covap.build(interval, settings.steps)
    k_fraction = None
    if scheme in SPARSIFIERS:
        k_fraction = config.compressor.k_fraction
    spec = CompressorSpec(scheme, covap, k_fraction, config.compressor.seed,
                          config.compressor.ef_enabled)
    runs = []
    for seed in config.train_seeds:
        model = new_model(settings.model, settings.features, settings.hidden,
                          settings.layer_sizes, settings.layers)
        data = make_dataset(settings.model, settings.samples,
                            settings.features, seed, settings.noise)
        run = train(model, data, SGD(settings.lr), spec, settings.steps,
                    settings.workers, seed, settings.batch_size,
                    training_plan(model, spec.interval, settings.cap_bytes),
                    settings.threaded)
        runs.append((seed, run))
        for step, loss, nbytes in run.rows():
            report.train_rows.append((seed, step, repr(loss), nbytes))
        LOGGER.info("seed %d: final loss %r", seed, run.final_loss)
    report.training = {
        "settings": settings.as_dict(),
        "runs": [dict(run.summary(), seed=seed,
                      audit=contraction_audit(run).as_dict())
                 for seed, run in runs],
        "diverged": any(run.diverged for _, run in runs)}
    return report


def run_experiment(config, command='simulate', parallel=1):
    """Run `command` on `config` and return its Report."""
    if command == 'plan':
        return run_plan(config)
    if command == 'profile':
        return run_profile(config)
    if command == 'simulate':
        return run_simulate(config, parallel)
    if command == 'train':
        return run_train(config)
    raise ValueError("unknown command %r" % command)


def _write_csv(path, header, rows):
    with open(path, 'w') as stream:
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)


def report_json(report):
    """Return the canonical JSON text of `report`."""
    return json.dumps(report.as_dict(), sort_keys=True, indent=2) + '\n'


def write_report(report, out_dir):
    """Write report.json and the raw CSV files of `report` to `out_dir`."""
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    written = []

    def _path(name):
        written.append(name)
        return os.path.join(out_dir, name)

    with open(_path('report.json'), 'w') as stream:
        stream.write(report_json(report))
    if report.sweep:
        _write_csv(_path('sweep.csv'), SWEEP_HEADER,
                   [point.row() for point in report.sweep])
    if report.timelines:
        _write_csv(_path('iterations.csv'), ITERATION_HEADER,
                   report.iteration_rows())
        with open(_path('trace.csv'), 'w') as stream:
            export_trace_csv(report.timelines, stream)
        with open(_path('trace.json'), 'w') as stream:
            export_chrome_trace(report.timelines, stream)
    if report.training is not None:
        _write_csv(_path('train.csv'), TRAIN_HEADER, report.train_rows)
    LOGGER.info("wrote %s to %s", ", ".join(written), out_dir)
    return written
