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
Simulation trace export.

Timelines are written either as CSV rows ``iter,worker,tensor,kind,
start_ms,end_ms`` (kind being compute, compress or comm) or as a Chrome
trace-event JSON document that can be opened in chrome://tracing or
Perfetto (one process per worker, one thread per phase).
"""

import csv
import json
import logging

from CovapSim.Event import PHASES


LOGGER = logging.getLogger(__name__)

CSV_HEADER = ('iter', 'worker', 'tensor', 'kind', 'start_ms', 'end_ms')

# Chrome trace thread id of each phase
PHASE_TIDS = dict((phase, tid) for tid, phase in enumerate(PHASES))

TIME_FMT = '%.6f'


def trace_rows(timelines):
    """Yield (iter, worker, tensor, kind, start, end) tuples."""
    for timeline in timelines:
        starts = {}
        for event in timeline.events:
            key = (event.phase, event.tensor)
            if event.kind.endswith('_start'):
                starts[key] = event.time
            else:
                yield (timeline.step, timeline.worker, event.tensor,
                       event.phase, starts.pop(key), event.time)


def export_trace_csv(timelines, stream):
    """Write CSV trace rows of `timelines` to the text `stream`."""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    count = 0
    for step, worker, tensor, kind, start, end in trace_rows(timelines):
        writer.writerow((step, worker, tensor, kind, TIME_FMT % start,
                         TIME_FMT % end))
        count += 1
    LOGGER.debug("wrote %d trace rows", count)
    return count


def chrome_trace(timelines):
    """Return the Chrome trace-event document of `timelines`."""
    timelines = list(timelines)
    offsets = {}
    offset = 0.0
    for step in sorted(set(t.step for t in timelines)):
        offsets[step] = offset
        offset += max(t.t_total for t in timelines if t.step == step)

    events = []
    workers = sorted(set(t.worker for t in timelines))
    for worker in workers:
        events.append({"name": "process_name", "ph": "M", "pid": worker,
                       "tid": 0, "args": {"name": "worker %d" % worker}})
        for tid, phase in enumerate(PHASES):
            events.append({"name": "thread_name", "ph": "M", "pid": worker,
                           "tid": tid, "args": {"name": phase}})
    for step, worker, tensor, kind, start, end in trace_rows(timelines):
        events.append({"name": "%s t%d" % (kind, tensor), "cat": kind,
                       "ph": "X", "pid": worker, "tid": PHASE_TIDS[kind],
                       "ts": round((offsets[step] + start) * 1000.0, 3),
                       "dur": round((end - start) * 1000.0, 3),
                       "args": {"iter": step, "tensor": tensor}})
    return {"traceEvents": events, "displayTimeUnit": "ms"}


def export_chrome_trace(timelines, stream):
    """Write the Chrome trace-event JSON of `timelines` to `stream`."""
    json.dump(chrome_trace(timelines), stream, sort_keys=True)
