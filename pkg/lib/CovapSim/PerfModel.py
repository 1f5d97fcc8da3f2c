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
Closed-form timing model of data-parallel iterations.

All times are milliseconds. An iteration is split into the time before
the first gradient tensor is ready (T_before, forward pass included), the
rest of the backward pass (T_comp) and the gradient communication
(T_comm). Per-tensor lists refine T_comp and T_comm for the exact overlap
recurrence; T_compress accounts for gradient compression overheads.

Speedups of a report are all relative to T_DP, the iteration time of
data-parallel training without overlapping nor compression.
"""

import logging
import math

from CovapSim.Defaults import DEFAULTS


LOGGER = logging.getLogger(__name__)

# tolerance on float time arithmetic
EPSILON = 1.0e-9

# (T_before, T_comp, T_comm, CCR, S_ovlp, S_LS) rows of reference
# measurements on 64 GPUs
REFERENCE_ROWS = {
    'resnet101': {'t_before': 55.0, 't_comp': 135.0, 't_comm': 280.0,
                  'ccr': 2.1, 's_ovlp': 1.43, 's_ls': 2.47},
    'vgg19':     {'t_before': 105.0, 't_comp': 210.0, 't_comm': 842.0,
                  'ccr': 4.0, 's_ovlp': 1.22, 's_ls': 3.04},
    'bert':      {'t_before': 80.0, 't_comp': 170.0, 't_comm': 520.0,
                  'ccr': 3.1, 's_ovlp': 1.28, 's_ls': 3.08},
}

REFERENCE_TOLERANCE = 0.03


class PerfModelError(Exception):
    """Raised on invalid timing inputs."""

class UndefinedRatioError(PerfModelError):
    """Raised when a ratio over a zero computation time is requested."""


def _total(name, total, values):
    """Reconcile a total with its per-tensor list."""
    if values is None:
        return total
    values = [float(val) for val in values]
    if any(val < 0 for val in values):
        raise PerfModelError("negative value in %s list" % name)
    computed = sum(values)
    if total is None:
        return computed
    if abs(total - computed) > EPSILON * max(1.0, abs(total)):
        raise PerfModelError("%s total %r != sum of per-tensor list %r"
                             % (name, total, computed))
    return total


class PhaseTimes(object):
    """
    Phase durations of one iteration, as totals and optionally per
    effective tensor (`comp`, `comm` and `compress` lists).
    """

    def __init__(self, t_before, t_comp=None, t_comm=None, comp=None,
                 comm=None, compress=None, t_compress=None):
        self.comp = list(comp) if comp is not None else None
        self.comm = list(comm) if comm is not None else None
        self.compress = list(compress) if compress is not None else None
        self.t_before = float(t_before)
        self.t_comp = _total('comp', t_comp, self.comp)
        self.t_comm = _total('comm', t_comm, self.comm)
        self.t_compress = _total('compress', t_compress, self.compress) or 0.0
        for name in ('t_before', 't_comp', 't_comm', 't_compress'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise PerfModelError("%s must be >= 0 (got %r)"
                                     % (name, value))
        lengths = set(len(lst) for lst in (self.comp, self.comm,
                                           self.compress) if lst is not None)
        if len(lengths) > 1:
            raise PerfModelError("per-tensor lists differ in length")

    @classmethod
    def uniform(cls, t_before, t_comp, t_comm, count, t_compress=0.0):
        """Return PhaseTimes with totals split evenly over `count` tensors."""
        return cls(t_before,
                   comp=[float(t_comp) / count] * count,
                   comm=[float(t_comm) / count] * count,
                   compress=[float(t_compress) / count] * count)

    @property
    def has_per_tensor(self):
        return self.comp is not None and self.comm is not None

    @property
    def count(self):
        for lst in (self.comp, self.comm, self.compress):
            if lst is not None:
                return len(lst)
        return None

    @property
    def ccr(self):
        return ccr(self.t_comm, self.t_comp)

    def compressed(self, t_compress, comm_reduction):
        """
        Return the PhaseTimes of a compressed run: communication shrinks
        by `comm_reduction` (never below zero) and `t_compress` is added.
        Per-tensor lists are rescaled proportionally.
        """
        t_comm = max(0.0, self.t_comm - comm_reduction)
        comm = compress = None
        if self.comm is not None:
            scale = t_comm / self.t_comm if self.t_comm else 0.0
            comm = [val * scale for val in self.comm]
        if self.comp is not None:
            if self.t_comp:
                compress = [t_compress * val / self.t_comp
                            for val in self.comp]
            else:
                compress = [float(t_compress) / len(self.comp)] * \
                    len(self.comp)
        return PhaseTimes(self.t_before, self.t_comp,
                          None if comm is not None else t_comm,
                          self.comp, comm, compress,
                          None if compress is not None else t_compress)

    def as_dict(self):
        return {"t_before": self.t_before, "t_comp": self.t_comp,
                "t_comm": self.t_comm, "t_compress": self.t_compress}


class OverlapSchedule(object):
    """Result of the overlap recurrence over effective tensors."""

    def __init__(self, ready, comm_starts, comm_ends, bubbles, compute_end):
        self.ready = ready
        self.comm_starts = comm_starts
        self.comm_ends = comm_ends
        self.bubbles = bubbles
        self.compute_end = compute_end

    @property
    def comm_end(self):
        ends = [end for end in self.comm_ends if end is not None]
        return ends[-1] if ends else None

    @property
    def t_total(self):
        times = [self.compute_end] + [t for t in self.ready]
        if self.comm_end is not None:
            times.append(self.comm_end)
        return max(times)


def ready_times(t_before, comp, compress, compress_stream=None, origin=0.0):
    """
    Return (ready, compute_end): times at which each tensor can be
    communicated, and the end of the backward pass.

    Tensor i becomes ready once the backward work of the tensors before
    it has run (the first tensor at T_before) and it has been compressed,
    either on the compute stream ('compute') or on a side stream ('side').
    """
    if compress_stream is None:
        compress_stream = DEFAULTS.compress_stream
    ready = []
    now = origin + t_before
    if compress_stream == 'compute':
        for comp_i, compress_i in zip(comp, compress):
            now = now + compress_i
            ready.append(now)
            now = now + comp_i
    elif compress_stream == 'side':
        side_free = origin
        for comp_i, compress_i in zip(comp, compress):
            side_free = max(now, side_free) + compress_i
            ready.append(side_free)
            now = now + comp_i
    else:
        raise PerfModelError("unknown compress stream %r" % compress_stream)
    return ready, now


def overlap_schedule(phases, skip=(), compress_stream=None):
    """
    Evaluate the overlap recurrence: one communication channel, tensor i's
    collective starting at max(previous collective end, ready_i). Tensors
    in `skip` are not communicated.
    """
    if not phases.has_per_tensor:
        raise PerfModelError("overlap schedule needs per-tensor times")
    count = phases.count
    compress = phases.compress or [0.0] * count
    ready, compute_end = ready_times(phases.t_before, phases.comp, compress,
                                     compress_stream)
    starts = [None] * count
    ends = [None] * count
    bubbles = []
    prev = None
    for idx in range(count):
        if idx in skip:
            continue
        if prev is None:
            start = ready[idx]
        else:
            start = max(ends[prev], ready[idx])
            if start > ends[prev]:
                bubbles.append((prev, start - ends[prev]))
        starts[idx] = start
        ends[idx] = start + phases.comm[idx]
        prev = idx
    return OverlapSchedule(ready, starts, ends, bubbles, compute_end)


def interval_covers(interval, t_comp, t_comm):
    """
    Return True when `interval` iterations of computation hide one full
    round of communication, I * T_comp >= T_comm.
    """
    return interval * t_comp >= t_comm - EPSILON * max(1.0, t_comm)


def settle_tail(compute_end, last_end, t_before, deferrable):
    """
    Return (t_total, deferred): iteration time and the part of the
    communication tail drained during the next iteration's T_before.
    Only `deferrable` schedules may defer, and by at most t_before.
    """
    if last_end is None or last_end <= compute_end:
        return compute_end, 0.0
    if not deferrable:
        return last_end, 0.0
    tail = last_end - compute_end
    if tail <= t_before:
        return compute_end, tail
    return last_end - t_before, t_before


def ccr(t_comm, t_comp):
    """Return the communication to computation ratio."""
    if t_comp == 0:
        raise UndefinedRatioError("CCR undefined for a zero computation time")
    return float(t_comm) / t_comp


def choose_interval(ccr_value):
    """Return the COVAP interval for a CCR: max(1, ceil(ccr))."""
    if ccr_value < 0:
        raise PerfModelError("negative CCR %r" % ccr_value)
    # a CCR of 3.0000000001 computed from rounded times is 3
    return max(1, int(math.ceil(ccr_value - EPSILON)))


def t_dp(phases):
    """Iteration time without overlapping: T_before + T_comp + T_comm."""
    return phases.t_before + phases.t_comp + phases.t_comm


def t_dp_ls(phases):
    """Linear scaling iteration time: T_before + T_comp."""
    return phases.t_before + phases.t_comp


def t_ovlp(phases, compress_stream=None):
    """
    Iteration time with communication overlapped by the backward pass.
    Exact recurrence with per-tensor times, otherwise
    T_before + T_comp + max(0, T_comm - T_comp).
    """
    if phases.has_per_tensor:
        return overlap_schedule(phases,
                                compress_stream=compress_stream).t_total
    return phases.t_before + phases.t_comp + \
        max(0.0, phases.t_comm - phases.t_comp)


def t_gc(phases):
    """Compressed iteration time without overlapping."""
    return phases.t_before + phases.t_comp + phases.t_compress + \
        phases.t_comm


def t_gc_ovlp(phases):
    """
    Compressed iteration time with overlapping, the part of the
    compressed communication longer than compute and compression being
    left uncovered.
    """
    covered = phases.t_comp + phases.t_compress
    return phases.t_before + covered + max(0.0, phases.t_comm - covered)


def speedup_fraction(t_before, t_comp, ccr_value, workers):
    """Return P * k / (k + CCR) with k = T_before / T_comp + 1."""
    if t_comp == 0:
        raise UndefinedRatioError("speedup undefined for T_comp = 0")
    k = float(t_before) / t_comp + 1.0
    return workers * k / (k + ccr_value)


class SpeedupReport(object):
    """Iteration times and speedups derived from PhaseTimes."""

    FIELDS = ('ccr', 'interval', 't_dp', 't_dp_ls', 't_ovlp', 't_gc',
              't_gc_ovlp', 's_ovlp', 's_ls', 's_gc', 's_gc_ovlp',
              'predicted_speedup_frac', 'workers')

    def __init__(self, **kwargs):
        for name in self.FIELDS:
            setattr(self, name, kwargs.get(name))
        self.name = kwargs.get('name')
        self.flags = list(kwargs.get('flags') or ())

    def as_dict(self):
        result = dict((name, getattr(self, name)) for name in self.FIELDS)
        result['name'] = self.name
        result['flags'] = list(self.flags)
        return result


def speedup_report(phases, gc_phases=None, workers=None, name=None):
    """
    Build a SpeedupReport of `phases`; `gc_phases` describe the same
    iteration with gradient compression (defaults to no compression).
    """
    if gc_phases is None:
        gc_phases = PhaseTimes(phases.t_before, phases.t_comp, phases.t_comm)
    ratio = ccr(phases.t_comm, phases.t_comp)
    report = SpeedupReport(name=name, ccr=ratio,
                           interval=choose_interval(ratio),
                           t_dp=t_dp(phases), t_dp_ls=t_dp_ls(phases),
                           t_ovlp=t_ovlp(phases), t_gc=t_gc(gc_phases),
                           t_gc_ovlp=t_gc_ovlp(gc_phases), workers=workers)
    report.s_ovlp = report.t_dp / report.t_ovlp
    report.s_ls = report.t_dp / report.t_dp_ls
    report.s_gc = report.t_dp / report.t_gc
    report.s_gc_ovlp = report.t_dp / report.t_gc_ovlp
    if workers:
        report.predicted_speedup_frac = speedup_fraction(
            phases.t_before, phases.t_comp, ratio, workers)
    if ratio >= 1 and not report.s_ls + EPSILON >= report.s_ovlp >= \
            1 - EPSILON:
        report.flags.append("bound chain violated: s_ls=%.3f s_ovlp=%.3f"
                            % (report.s_ls, report.s_ovlp))
    if name in REFERENCE_ROWS:
        check_reference(name, report)
    LOGGER.debug("speedup report %s: ccr=%.3f s_ovlp=%.3f s_ls=%.3f", name,
                 ratio, report.s_ovlp, report.s_ls)
    return report


def reference_phases(name):
    """Return PhaseTimes of a bundled reference row."""
    try:
        row = REFERENCE_ROWS[name]
    except KeyError:
        raise PerfModelError("no reference row named %r" % name)
    return PhaseTimes(row['t_before'], row['t_comp'], row['t_comm'])


def check_reference(name, report, tolerance=REFERENCE_TOLERANCE):
    """
    Compare `report` with reference row `name`; mismatches are appended
    to report.flags and returned.
    """
    row = REFERENCE_ROWS[name]
    flags = []
    if round(report.ccr, 1) != row['ccr']:
        flags.append("%s: ccr %.1f differs from reference %.1f"
                     % (name, report.ccr, row['ccr']))
    for field in ('s_ovlp', 's_ls'):
        value = getattr(report, field)
        if abs(value - row[field]) > tolerance:
            flags.append("%s: %s %.2f differs from reference %.2f (row "
                         "values are inconsistent)" % (name, field, value,
                                                       row[field]))
    for flag in flags:
        if flag not in report.flags:
            report.flags.append(flag)
        LOGGER.info(flag)
    return flags
