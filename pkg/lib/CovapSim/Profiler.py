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
Distributed profiler of simulated iterations.

Workers reach a collective at different times, so the time a worker
spends in a collective includes waiting for its slowest peer. The
profiler aligns the per-worker timelines on the end of each collective:
the communication time of a collective is measured from the last worker
issuing it to its completion, which removes the waiting time.
"""

import logging

from CovapSim.Event import COMM_END, COMM_START
from CovapSim.PerfModel import PhaseTimes, ccr


LOGGER = logging.getLogger(__name__)


class ProfileError(Exception):
    """Base profiler error."""

class IncompleteProfileError(ProfileError):
    """Raised when traces of some worker or collective are missing."""


def _group_steps(traces, workers):
    steps = {}
    for timeline in traces:
        steps.setdefault(timeline.step, {})[timeline.worker] = timeline
    if not steps:
        raise IncompleteProfileError("no trace to profile")
    for step, by_worker in sorted(steps.items()):
        missing = sorted(set(range(workers)) - set(by_worker))
        if missing:
            raise IncompleteProfileError("step %d: missing trace of "
                                         "worker(s) %s" % (step, missing))
    return [steps[step] for step in sorted(steps)]


def _comm_points(by_worker):
    """Return {tensor: ({worker: issue time}, end time)}."""
    points = {}
    for worker, timeline in sorted(by_worker.items()):
        for event in timeline.events:
            if event.kind == COMM_START:
                points.setdefault(event.tensor, ({}, {}))[0][worker] = \
                    event.time
            elif event.kind == COMM_END:
                points.setdefault(event.tensor, ({}, {}))[1][worker] = \
                    event.time
    result = {}
    for tensor, (starts, ends) in sorted(points.items()):
        if len(starts) != len(by_worker) or len(ends) != len(by_worker):
            raise IncompleteProfileError("collective of tensor %d is not "
                                         "traced on every worker" % tensor)
        result[tensor] = (starts, max(ends.values()))
    return result


def _step_phases(by_worker):
    reference = by_worker[min(by_worker)]
    comp = reference.backward_segments()
    count = len(comp)
    comm = [0.0] * count
    for tensor, (starts, end) in _comm_points(by_worker).items():
        comm[tensor] = end - max(starts.values())
    if reference.events:
        t_before = reference.events[0].time - reference.origin
    else:
        t_before = reference.t_before
    return PhaseTimes(t_before, comp=comp, comm=comm)


def profile_ccr(traces, workers=None):
    """
    Profile per-worker timelines of one or more iterations. Return
    (ccr, PhaseTimes) where communication times are aligned on the last
    worker reaching each collective. Several iterations are averaged.
    """
    traces = list(traces)
    if not traces:
        raise IncompleteProfileError("no trace to profile")
    if workers is None:
        workers = traces[0].workers
    per_step = [_step_phases(by_worker)
                for by_worker in _group_steps(traces, workers)]
    if len(per_step) == 1:
        phases = per_step[0]
    else:
        count = len(per_step)
        phases = PhaseTimes(
            sum(p.t_before for p in per_step) / count,
            comp=[sum(vals) / count for vals in zip(*[p.comp
                                                      for p in per_step])],
            comm=[sum(vals) / count for vals in zip(*[p.comm
                                                      for p in per_step])])
    ratio = ccr(phases.t_comm, phases.t_comp)
    LOGGER.info("profiled %d step(s) on %d workers: T_comp=%.3f "
                "T_comm=%.3f CCR=%.3f", len(per_step), workers,
                phases.t_comp, phases.t_comm, ratio)
    return ratio, phases


def naive_comm_times(traces, worker=0):
    """
    Return per-tensor communication times measured on `worker` alone,
    from its own issue time to the collective end (waiting included).
    """
    result = {}
    for timeline in traces:
        if timeline.worker != worker:
            continue
        for tensor, (start, end) in timeline.intervals('comm').items():
            result[tensor] = result.get(tensor, 0.0) + (end - start)
    if not result and not any(t.worker == worker for t in traces):
        raise IncompleteProfileError("no trace of worker %d" % worker)
    return result


def naive_ccr(traces, worker=0):
    """CCR measured without timeline alignment on `worker`."""
    traces = list(traces)
    comm = sum(naive_comm_times(traces, worker).values())
    comp = 0.0
    for timeline in traces:
        if timeline.worker == worker:
            comp += sum(end - start for start, end
                        in timeline.intervals('compute').values())
    return ccr(comm, comp)
