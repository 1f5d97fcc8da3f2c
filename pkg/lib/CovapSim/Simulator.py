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
Discrete-event simulator of data-parallel training iterations.

Each simulated worker runs its backward pass on a compute stream, may
compress gradient tensors (on the compute stream or on a side stream) and
issues one collective per communicated tensor on a single FIFO
communication channel. A collective starts when every worker has issued
it and completes after comm_time() milliseconds.

The timing convention matches :mod:`CovapSim.PerfModel`: the first
effective tensor is ready at T_before and tensor i+1 after the backward
segment c_i, which overlaps the communication of tensor i. Compute events
are labelled with the tensor whose gradient their segment produces, so
segment c_i carries index i+1 and the last segment carries the effective
tensor count. Per worker and tensor, compute events precede compress
events, which precede comm events.
"""

from collections import deque
import logging

import numpy

from CovapSim.Baseline import compression_cost, payload_bytes_model
from CovapSim.Compressor import select_tensors
from CovapSim.Defaults import DEFAULTS
from CovapSim.Engine.Engine import Engine
from CovapSim.Event import COMM_END, COMM_START, COMPRESS_END, \
    COMPRESS_START, COMPUTE_END, COMPUTE_START, Event, EventHandler
from CovapSim.PerfModel import PhaseTimes, interval_covers, settle_tail


LOGGER = logging.getLogger(__name__)

GBPS = 1.0e9


class SimulatorError(Exception):
    """Base simulator error."""

class SimulatorInputError(SimulatorError):
    """Raised when plan, phases and cluster do not fit together."""


class ClusterConfig(object):
    """
    Homogeneous cluster: worker count, link bandwidth in bits/s, fixed
    latency per collective in ms, ring allreduce efficiency and optional
    constant per-worker start offsets (skew) in ms.
    """

    def __init__(self, workers, bandwidth=None, latency_per_collective=None,
                 allreduce_efficiency=None, skew_ms=None):
        if bandwidth is None:
            bandwidth = DEFAULTS.bandwidth_gbps * GBPS
        if latency_per_collective is None:
            latency_per_collective = DEFAULTS.latency_ms
        if allreduce_efficiency is None:
            allreduce_efficiency = DEFAULTS.allreduce_efficiency
        if isinstance(workers, bool) or int(workers) != workers or \
                workers < 1:
            raise SimulatorInputError("workers must be >= 1 (got %r)"
                                      % (workers,))
        if bandwidth <= 0:
            raise SimulatorInputError("bandwidth must be > 0")
        if not 0 < allreduce_efficiency:
            raise SimulatorInputError("allreduce_efficiency must be > 0")
        if latency_per_collective < 0:
            raise SimulatorInputError("latency_per_collective must be >= 0")
        self.workers = int(workers)
        self.bandwidth = float(bandwidth)
        self.latency_per_collective = float(latency_per_collective)
        self.allreduce_efficiency = float(allreduce_efficiency)
        if skew_ms is not None:
            skew_ms = tuple(float(val) for val in skew_ms)
            if len(skew_ms) != self.workers:
                raise SimulatorInputError("skew_ms has %d entries for %d "
                                          "workers" % (len(skew_ms),
                                                       self.workers))
            if any(val < 0 for val in skew_ms):
                raise SimulatorInputError("skew_ms entries must be >= 0")
        self.skew_ms = skew_ms

    @classmethod
    def from_gbps(cls, workers, gbps, **kwargs):
        return cls(workers, gbps * GBPS, **kwargs)

    @property
    def ring_factor(self):
        """2 (P - 1) / P, the ring allreduce volume factor"""
        return 2.0 * (self.workers - 1) / self.workers

    @property
    def has_skew(self):
        return bool(self.skew_ms) and any(self.skew_ms)

    def origin(self, worker):
        """start offset of `worker` in ms"""
        return self.skew_ms[worker] if self.skew_ms else 0.0

    def with_workers(self, workers):
        """Return a copy of this cluster with another worker count."""
        return ClusterConfig(workers, self.bandwidth,
                             self.latency_per_collective,
                             self.allreduce_efficiency)

    def as_dict(self):
        return {"workers": self.workers,
                "bandwidth_gbps": self.bandwidth / GBPS,
                "latency_per_collective": self.latency_per_collective,
                "allreduce_efficiency": self.allreduce_efficiency,
                "skew_ms": list(self.skew_ms) if self.skew_ms else None}


def comm_time(nbytes, cluster):
    """
    Return the duration in ms of a ring allreduce of `nbytes` bytes:
    latency + 2 (P - 1) / P * bits / (bandwidth * efficiency).
    """
    if nbytes < 0:
        raise SimulatorInputError("negative message size")
    volume = cluster.ring_factor * nbytes * 8.0
    return cluster.latency_per_collective + 1000.0 * volume / \
        (cluster.bandwidth * cluster.allreduce_efficiency)


def calibrate(cluster, numels, measured_ms, bytes_per_elem=4):
    """
    Fit latency_per_collective and allreduce_efficiency of `cluster` to
    measured per-tensor allreduce times by least squares. Return a new
    ClusterConfig.
    """
    numels = numpy.asarray(numels, dtype=numpy.float64)
    measured = numpy.asarray(measured_ms, dtype=numpy.float64)
    if numels.shape != measured.shape or numels.shape[0] < 2:
        raise SimulatorInputError("calibration needs at least two matching "
                                  "(numel, time) pairs")
    design = numpy.vstack([numpy.ones_like(numels), numels]).T
    (latency, slope), _, _, _ = numpy.linalg.lstsq(design, measured,
                                                   rcond=None)
    if latency < 0:
        LOGGER.info("negative fitted latency %.3f ms, fitting through origin",
                    latency)
        latency = 0.0
        slope = float(numpy.dot(numels, measured) / numpy.dot(numels, numels))
    if slope <= 0:
        raise SimulatorInputError("calibration yields a non-positive slope")
    ideal = 1000.0 * cluster.ring_factor * bytes_per_elem * 8.0 / \
        cluster.bandwidth
    efficiency = ideal / slope
    LOGGER.info("calibrated latency=%.3f ms efficiency=%.4f", latency,
                efficiency)
    return ClusterConfig(cluster.workers, cluster.bandwidth, float(latency),
                         float(efficiency), cluster.skew_ms)


class CompressorChoice(object):
    """
    Compressor as seen by the simulator: its scheme, the COVAP interval
    and selection, the sparsifier fraction and an optional total
    compression time overriding the reference cost table.
    """

    def __init__(self, scheme='none', interval=1, k_fraction=None,
                 selection=None, compress_ms=None):
        if scheme not in ('none', 'covap', 'topk', 'randomk', 'fp16'):
            raise SimulatorInputError("unknown compressor scheme %r"
                                      % scheme)
        if interval < 1:
            raise SimulatorInputError("interval must be >= 1")
        self.scheme = scheme
        self.interval = int(interval)
        self.k_fraction = k_fraction
        self.selection = selection
        self.compress_ms = compress_ms

    def deferrable(self, phases):
        """
        Return whether the communication tail of an iteration with dense
        `phases` may drain into the next step: COVAP with I >= 2 whose
        interval covers the CCR.
        """
        return self.scheme == 'covap' and self.interval >= 2 and \
            interval_covers(self.interval, phases.t_comp, phases.t_comm)

    @property
    def window(self):
        """iterations after which the schedule repeats"""
        return self.interval if self.scheme == 'covap' else 1

    def __repr__(self):
        return "<CompressorChoice %s I=%d>" % (self.scheme, self.interval)


def _split(total, weights):
    whole = sum(weights)
    return [float(total) * weight / whole for weight in weights]


def dense_phases(plan, cluster, phases):
    """
    Return per-tensor PhaseTimes of `plan` without compression.

    Backward times come from `phases` (per-tensor list or T_comp split by
    element count) or from per-layer backward times of the plan.
    Communication times come from `phases` (list or T_comm split by
    bytes) or from comm_time() on the cluster.
    """
    numels = plan.numels()
    nbytes = plan.tensor_bytes()
    count = len(numels)
    if phases.comp is not None:
        if len(phases.comp) != count:
            raise SimulatorInputError("%d per-tensor compute times for %d "
                                      "effective tensors"
                                      % (len(phases.comp), count))
        comp = list(phases.comp)
    elif phases.t_comp is not None:
        comp = _split(phases.t_comp, numels)
    else:
        comp = plan.tensor_backward_ms()
        if comp is None:
            raise SimulatorInputError("no backward time for the plan")
    if phases.comm is not None:
        if len(phases.comm) != count:
            raise SimulatorInputError("%d per-tensor comm times for %d "
                                      "effective tensors"
                                      % (len(phases.comm), count))
        comm = list(phases.comm)
    elif phases.t_comm is not None:
        comm = _split(phases.t_comm, nbytes)
    else:
        comm = [comm_time(size, cluster) for size in nbytes]
    return PhaseTimes(phases.t_before, comp=comp, comm=comm)


def iteration_phases(plan, cluster, compressor, phases, step=0):
    """
    Return (PhaseTimes, skip) of iteration `step`: per-tensor times once
    `compressor` is applied and the set of tensors not communicated.
    """
    dense = dense_phases(plan, cluster, phases)
    count = dense.count
    numels = plan.numels()
    nbytes = plan.tensor_bytes()
    scheme = compressor.scheme
    skip = frozenset()
    compress = [0.0] * count
    comm = list(dense.comm)
    if scheme == 'covap':
        selected = select_tensors(step, compressor.interval, count,
                                  compressor.selection)
        skip = frozenset(range(count)) - selected
    elif scheme != 'none':
        modeled = phases.comm is None and phases.t_comm is None
        comm = []
        for idx in range(count):
            payload = payload_bytes_model(scheme, numels[idx],
                                          nbytes[idx] // numels[idx],
                                          compressor.k_fraction)
            if modeled:
                comm.append(comm_time(payload, cluster))
            else:
                comm.append(dense.comm[idx] * payload / nbytes[idx])
        total = compressor.compress_ms
        if total is None:
            total = compression_cost(scheme, plan.total_numel)[0]
        compress = _split(total, numels)
    return PhaseTimes(dense.t_before, comp=dense.comp, comm=comm,
                      compress=compress), skip


class IterationTimeline(object):
    """
    Events of one worker for one iteration, with the iteration time,
    communication bubbles (after_tensor, ms), communication not hidden by
    computation and communication deferred to the next iteration.
    """

    def __init__(self, events, t_total, bubbles, unoverlapped_comm,
                 deferred_comm=0.0, worker=0, step=0, origin=0.0,
                 t_before=0.0, compute_end=None, workers=1, selected=None):
        self.events = events
        self.t_total = t_total
        self.bubbles = bubbles
        self.unoverlapped_comm = unoverlapped_comm
        self.deferred_comm = deferred_comm
        self.worker = worker
        self.step = step
        self.origin = origin
        self.t_before = t_before
        self.compute_end = compute_end
        self.workers = workers
        self.selected = selected

    @property
    def duration(self):
        """iteration time measured from this worker's start"""
        return self.t_total - self.origin

    def intervals(self, phase):
        """Return {tensor: (start, end)} of `phase` events."""
        starts = {}
        result = {}
        for event in self.events:
            if event.phase != phase:
                continue
            if event.kind.endswith('_start'):
                starts[event.tensor] = event.time
            else:
                result[event.tensor] = (starts[event.tensor], event.time)
        return result

    def backward_segments(self):
        """
        Return durations of the backward segments c_0 .. c_(b-1) in order,
        segment c_i being labelled with tensor i+1.
        """
        compute = self.intervals('compute')
        return [compute[label][1] - compute[label][0]
                for label in sorted(compute)]


class _IterationHandler(EventHandler):
    """Event handler driving one simulated iteration on all workers."""

    def __init__(self, phases, skip, workers, origins, compress_stream):
        self.phases = phases
        self.compress = phases.compress or [0.0] * phases.count
        self.skip = skip
        self.workers = workers
        self.origins = origins
        self.side = compress_stream == 'side'
        self.engine = Engine()
        self.events = dict((worker, []) for worker in workers)
        self.queues = dict((worker, deque()) for worker in workers)
        self.busy = dict((worker, False) for worker in workers)
        self.side_queues = dict((worker, deque()) for worker in workers)
        self.side_busy = dict((worker, False) for worker in workers)
        self.arrivals = {}
        self.coll_start = {}
        self.coll_end = {}

    def run(self):
        if self.phases.count:
            if self.side:
                first, tensor = COMPUTE_START, 1
            else:
                first, tensor = COMPRESS_START, 0
            for worker in self.workers:
                self.engine.schedule(self.origins[worker] +
                                     self.phases.t_before, self, first,
                                     worker, tensor)
        self.engine.run()

    def _record(self, timer):
        self.events[timer.worker].append(Event(timer.kind, timer.tensor,
                                               timer.worker,
                                               self.engine.clock))

    def _issue(self, worker, tensor):
        if tensor in self.skip:
            return
        self.queues[worker].append(tensor)
        if not self.busy[worker]:
            self._start_next(worker)

    def _start_next(self, worker):
        tensor = self.queues[worker].popleft()
        self.busy[worker] = True
        self.engine.schedule(0.0, self, COMM_START, worker, tensor)

    def _start_side(self, worker):
        tensor = self.side_queues[worker].popleft()
        self.side_busy[worker] = True
        self.engine.schedule(0.0, self, COMPRESS_START, worker, tensor)

    def ev_compress_start(self, timer):
        self._record(timer)
        self.engine.schedule(self.compress[timer.tensor], self, COMPRESS_END,
                             timer.worker, timer.tensor)

    def ev_compress_end(self, timer):
        self._record(timer)
        self._issue(timer.worker, timer.tensor)
        if self.side:
            self.side_busy[timer.worker] = False
            if self.side_queues[timer.worker]:
                self._start_side(timer.worker)
        else:
            self.engine.schedule(0.0, self, COMPUTE_START, timer.worker,
                                 timer.tensor + 1)

    def ev_compute_start(self, timer):
        # segment tensor - 1 runs once the previous tensor is ready
        self._record(timer)
        if self.side:
            self.side_queues[timer.worker].append(timer.tensor - 1)
            if not self.side_busy[timer.worker]:
                self._start_side(timer.worker)
        self.engine.schedule(self.phases.comp[timer.tensor - 1], self,
                             COMPUTE_END, timer.worker, timer.tensor)

    def ev_compute_end(self, timer):
        self._record(timer)
        produced = timer.tensor
        if produced < self.phases.count:
            if self.side:
                self.engine.schedule(0.0, self, COMPUTE_START, timer.worker,
                                     produced + 1)
            else:
                self.engine.schedule(0.0, self, COMPRESS_START, timer.worker,
                                     produced)

    def ev_comm_start(self, timer):
        self._record(timer)
        tensor = timer.tensor
        self.arrivals[tensor] = self.arrivals.get(tensor, 0) + 1
        if self.arrivals[tensor] == len(self.workers):
            # rendezvous: the last worker has issued the collective
            self.coll_start[tensor] = self.engine.clock
            for worker in self.workers:
                end_timer = self.engine.schedule(self.phases.comm[tensor],
                                                 self, COMM_END, worker,
                                                 tensor)
            self.coll_end[tensor] = end_timer.fire_date

    def ev_comm_end(self, timer):
        self._record(timer)
        self.busy[timer.worker] = False
        if self.queues[timer.worker]:
            self._start_next(timer.worker)

    def bubbles(self):
        """Return idle gaps (after_tensor, ms) of the channel."""
        result = []
        order = sorted(self.coll_start)
        for prev, nxt in zip(order, order[1:]):
            gap = self.coll_start[nxt] - self.coll_end[prev]
            if gap > 0:
                result.append((prev, gap))
        return result

    def timeline(self, worker, step, t_before, deferrable, selected):
        events = self.events[worker]
        origin = self.origins[worker]
        stream_end = origin + t_before
        comm_end = None
        for event in events:
            if event.kind in (COMPUTE_END, COMPRESS_END):
                stream_end = max(stream_end, event.time)
            elif event.kind == COMM_END:
                comm_end = event.time if comm_end is None \
                    else max(comm_end, event.time)
        t_total, deferred = settle_tail(stream_end, comm_end, t_before,
                                        deferrable)
        return IterationTimeline(events, t_total, self.bubbles(),
                                 max(0.0, t_total - stream_end), deferred,
                                 worker, step, origin, t_before, stream_end,
                                 len(self.origins), selected)


def _simulate(plan, cluster, compressor, phases, step, compress_stream,
              defer_tail, workers):
    if compressor is None:
        compressor = CompressorChoice()
    if compress_stream is None:
        compress_stream = DEFAULTS.compress_stream
    if defer_tail is None:
        defer_tail = DEFAULTS.defer_tail
    tensor_phases, skip = iteration_phases(plan, cluster, compressor, phases,
                                           step)
    origins = dict((worker, cluster.origin(worker))
                   for worker in range(cluster.workers))
    handler = _IterationHandler(tensor_phases, skip, workers, origins,
                                compress_stream)
    handler.run()
    selected = frozenset(range(tensor_phases.count)) - skip
    deferrable = defer_tail and compressor.deferrable(tensor_phases)
    LOGGER.debug("simulated step %d of %r on %d worker(s): %d events", step,
                 compressor, len(workers), handler.engine.fired)
    return [handler.timeline(worker, step, tensor_phases.t_before,
                             deferrable, selected) for worker in workers]


def simulate_iteration(plan, cluster, compressor=None, phases=None, step=0,
                       compress_stream=None, defer_tail=None):
    """
    Simulate iteration `step` and return the IterationTimeline of worker
    0. Without skew all workers behave alike and only worker 0 is
    simulated.
    """
    if phases is None:
        phases = PhaseTimes(0.0)
    workers = list(range(cluster.workers)) if cluster.has_skew else [0]
    return _simulate(plan, cluster, compressor, phases, step,
                     compress_stream, defer_tail, workers)[0]


def simulate_workers(plan, cluster, compressor=None, phases=None, step=0,
                     compress_stream=None, defer_tail=None):
    """Simulate iteration `step` on every worker, return all timelines."""
    if phases is None:
        phases = PhaseTimes(0.0)
    return _simulate(plan, cluster, compressor, phases, step,
                     compress_stream, defer_tail,
                     list(range(cluster.workers)))


def simulate_window(plan, cluster, compressor=None, phases=None,
                    iterations=None, start_step=0, **kwargs):
    """
    Simulate consecutive iterations (a whole COVAP window by default) and
    return the list of worker 0 timelines.
    """
    if compressor is None:
        compressor = CompressorChoice()
    if iterations is None:
        iterations = compressor.window
    return [simulate_iteration(plan, cluster, compressor, phases, step,
                               **kwargs)
            for step in range(start_step, start_step + iterations)]


def mean_iteration_time(timelines):
    """Return the mean duration of `timelines`."""
    if not timelines:
        raise SimulatorInputError("no timeline")
    return sum(timeline.duration for timeline in timelines) / len(timelines)
