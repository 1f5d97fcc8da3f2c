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
covap-sim CLI OptionParser
"""

from copy import copy
import optparse

from CovapSim import __version__
from CovapSim.CLI.Display import FORMATS


def check_positive(option, opt, value):
    """type-checker function for positive integers"""
    try:
        result = int(value)
        if result < 1:
            raise ValueError()
        return result
    except ValueError:
        raise optparse.OptionValueError(
            "option %s: invalid value: %r, should be a positive integer"
            % (opt, value))

def check_safestring(option, opt, value):
    """type-checker function for safestring"""
    safestr = str(value)
    # check if the string is not empty and not an option
    if not safestr or safestr.startswith('-'):
        raise optparse.OptionValueError(
            "option %s: invalid value: %r" % (opt, value))
    return safestr


class Option(optparse.Option):
    """This Option subclass adds positive and safestring types."""
    TYPES = optparse.Option.TYPES + ("positive", "safestring",)
    TYPE_CHECKER = copy(optparse.Option.TYPE_CHECKER)
    TYPE_CHECKER["positive"] = check_positive
    TYPE_CHECKER["safestring"] = check_safestring

class OptionParser(optparse.OptionParser):
    """Derived OptionParser for the covap-sim CLI"""

    def __init__(self, usage, **kwargs):
        """Initialize covap-sim CLI OptionParser"""
        optparse.OptionParser.__init__(self, usage,
                                       version="%%prog %s" % __version__,
                                       option_class=Option,
                                       **kwargs)

    def install_config_options(self):
        """Install experiment configuration options"""
        optgrp = optparse.OptionGroup(self, "Experiment")
        optgrp.add_option("-c", "--config", action="store", metavar="PATH",
                          type="safestring", dest="config",
                          help="experiment configuration file (JSON or YAML)")
        optgrp.add_option("--seed", action="store", type="int", dest="seed",
                          metavar="N", help="override the experiment seed")
        optgrp.add_option("--sweep-parallel", action="store",
                          type="positive", dest="sweep_parallel", default=1,
                          metavar="N",
                          help="evaluate N sweep points concurrently")
        self.add_option_group(optgrp)

    def install_output_options(self):
        """Install report output options"""
        optgrp = optparse.OptionGroup(self, "Output behaviour")
        optgrp.add_option("-o", "--out", action="store", metavar="DIR",
                          type="safestring", dest="out",
                          help="write report.json and raw CSV files to DIR")
        optgrp.add_option("-f", "--format", action="store", dest="format",
                          choices=FORMATS, default=FORMATS[-1],
                          help="report format on standard output (%s; "
                               "default: %s)" % (", ".join(FORMATS),
                                                 FORMATS[-1]))
        optgrp.add_option("-d", "--debug", action="store_true",
                          dest="debug",
                          help="output more messages for debugging purpose")
        optgrp.add_option("-q", "--quiet", action="store_true",
                          dest="quiet", help="be quiet, print essential "
                                             "output only")
        optgrp.add_option("-v", "--verbose", action="store_true",
                          dest="verbose", help="be verbose, print "
                                               "informative messages")
        self.add_option_group(optgrp)
