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
CLI results display class
"""

from __future__ import print_function

import csv
import sys

from CovapSim.CLI.Utils import format_ms, human_bi_bytes_unit
from CovapSim.Experiment import ITERATION_HEADER, SWEEP_HEADER, \
    TRAIN_HEADER, report_json

# Display constants
VERB_QUIET = 0
VERB_STD = 1
VERB_VERB = 2
VERB_DEBUG = 3
FORMATS = ("json", "csv", "table")

PLAN_HEADER = ('bucket', 'layers', 'numel', 'size', 'shards')
TRAIN_SUMMARY_HEADER = ('seed', 'scheme', 'I', 'steps', 'final_loss',
                        'bytes', 'max_ratio', 'diverged')


def format_table(header, rows):
    """Return lines of `rows` under `header`, columns left aligned."""
    lines = [tuple(str(cell) for cell in header)]
    lines.extend(tuple(str(cell) for cell in row) for row in rows)
    widths = [max(len(line[col]) for line in lines)
              for col in range(len(header))]
    return ["  ".join(cell.ljust(width) for cell, width
                      in zip(line, widths)).rstrip() for line in lines]


class Display(object):
    """
    Output display class for the covap-sim command line.
    """

    def __init__(self, options, out=None):
        """Initialize a Display object from CLI.OptionParser options."""
        self.verbosity = VERB_STD
        if getattr(options, 'quiet', False):
            self.verbosity = VERB_QUIET
        if getattr(options, 'verbose', False):
            self.verbosity = VERB_VERB
        if getattr(options, 'debug', False):
            self.verbosity = VERB_DEBUG
        self.format = getattr(options, 'format', None) or FORMATS[-1]
        self.out = out or sys.stdout

    def _print(self, line=""):
        print(line, file=self.out)

    def _print_table(self, header, rows):
        for line in format_table(header, rows):
            self._print(line)

    def _print_csv(self, header, rows):
        writer = csv.writer(self.out, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)

    def _print_pairs(self, pairs):
        width = max(len(key) for key, _ in pairs)
        for key, value in pairs:
            if isinstance(value, float):
                value = "%.3f" % value
            self._print("%s  %s" % (key.ljust(width), value))

    def print_report(self, report):
        """Print `report` in the selected format."""
        if self.format == "json":
            self.out.write(report_json(report))
            return
        getattr(self, "_print_%s_%s" % (report.command, self.format))(report)

    # plan
    def _plan_rows(self, plan):
        for bucket in plan["buckets"]:
            yield (bucket["index"],
                   ",".join(str(ref) for ref in bucket["layers"]),
                   bucket["numel"], human_bi_bytes_unit(bucket["bytes"]),
                   len(bucket["shards"]) or 1)

    def _print_plan_table(self, report):
        plan = report.plan
        if self.verbosity >= VERB_STD:
            self._print("%s: %d buckets, cap %s, median numel %s (%s)"
                        % (report.config.name, len(plan["buckets"]),
                           human_bi_bytes_unit(plan["cap_bytes"]),
                           plan["median_exact"], plan["median_convention"]))
            self._print_table(PLAN_HEADER, self._plan_rows(plan))
        self._print("effective tensors: %d (I=%d)"
                    % (plan["effective_tensors"], plan["interval"]))

    def _print_plan_csv(self, report):
        self._print_csv(PLAN_HEADER, self._plan_rows(report.plan))

    # profile
    def _profile_pairs(self, report):
        prof = report.profile
        return [("workers", prof["workers"]),
                ("iterations", prof["iterations"]),
                ("t_before_ms", prof["t_before"]),
                ("t_comp_ms", prof["t_comp"]),
                ("t_comm_ms", prof["t_comm"]),
                ("naive_ccr", prof["naive_ccr"]),
                ("ccr", prof["ccr"]),
                ("interval", prof["interval"])]

    def _print_profile_table(self, report):
        pairs = self._profile_pairs(report)
        if self.verbosity <= VERB_QUIET:
            pairs = pairs[-2:]
        self._print_pairs(pairs)

    def _print_profile_csv(self, report):
        self._print_csv(("key", "value"), self._profile_pairs(report))

    # simulate
    def _print_simulate_table(self, report):
        brk = report.breakdown
        spd = report.speedup
        if self.verbosity >= VERB_STD:
            self._print_pairs([
                ("scheme", brk["scheme"]),
                ("interval", brk["interval"]),
                ("t_before_ms", brk["t_before"]),
                ("t_comp_ms", brk["t_comp"]),
                ("t_comm_ms", brk["t_comm"]),
                ("ccr", brk["ccr"]),
                ("t_dp_ms", spd["t_dp"]),
                ("t_ovlp_ms", spd["t_ovlp"]),
                ("t_dp_ls_ms", spd["t_dp_ls"]),
                ("s_ovlp", spd["s_ovlp"]),
                ("s_ls", spd["s_ls"]),
                ("t_iteration_ms", brk["t_iteration"]),
                ("unoverlapped_comm_ms", brk["unoverlapped_comm"]),
                ("deferred_comm_ms", brk["deferred_comm"])])
        self._print_pairs([("speedup", brk["speedup"])])
        if self.verbosity >= VERB_VERB:
            for flag in spd["flags"]:
                self._print("flag: %s" % flag)
        if report.sweep:
            self._print()
            self._print_table(("scheme", "ratio", "workers", "t_iter_ms",
                               "speedup"),
                              [(pt.scheme, pt.ratio, pt.workers,
                                format_ms(pt.t_iteration),
                                "%.2f" % pt.speedup)
                               for pt in report.sweep])

    def _print_simulate_csv(self, report):
        if report.sweep:
            self._print_csv(SWEEP_HEADER,
                            [pt.row() for pt in report.sweep])
        else:
            self._print_csv(ITERATION_HEADER, report.iteration_rows())

    # train
    def _train_summary_rows(self, report):
        for run in report.training["runs"]:
            final = run["final_loss"]
            yield (run["seed"], run["scheme"], run["interval"], run["steps"],
                   "-" if final is None else "%.6g" % final,
                   run["total_bytes"], "%.4f" % run["audit"]["max_ratio"],
                   "yes" if run["diverged"] else "no")

    def _print_train_table(self, report):
        self._print_table(TRAIN_SUMMARY_HEADER,
                          self._train_summary_rows(report))

    def _print_train_csv(self, report):
        self._print_csv(TRAIN_HEADER, report.train_rows)
