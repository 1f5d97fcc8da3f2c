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
Execute covap-sim commands.

covap-sim profiles, plans, simulates and trains COVAP experiments
described by a JSON or YAML configuration file. See covap-sim(1).
"""

from __future__ import print_function

import logging
import os
import sys

from CovapSim.CLI.Display import Display
from CovapSim.CLI.Error import EXIT_OK, GENERIC_ERRORS, handle_generic_error
from CovapSim.CLI.OptionParser import OptionParser

from CovapSim.Config import load_config
from CovapSim.Experiment import run_experiment, write_report
from CovapSim.Trainer import DivergenceError

COMMANDS = ('profile', 'plan', 'simulate', 'train')

LOG_ENV = 'COVAP_SIM_LOG'

LOGGER = logging.getLogger(__name__)


def log_level(debug=False, environ=None):
    """
    Return the root log level: DEBUG with -d, else the level named by
    $COVAP_SIM_LOG, else WARNING. Also return the invalid name if any.
    """
    if debug:
        return logging.DEBUG, None
    if environ is None:
        environ = os.environ
    name = environ.get(LOG_ENV)
    if not name:
        return logging.WARNING, None
    level = logging.getLevelName(name.upper())
    if not isinstance(level, int):
        return logging.WARNING, name
    return level, None

def configure_logging(debug=False):
    """Configure the root logger once for the command line."""
    level, invalid = log_level(debug)
    logging.basicConfig(level=level,
                        format="%(name)s: %(levelname)s: %(message)s")
    logging.getLogger().setLevel(level)
    if invalid:
        LOGGER.warning("invalid %s level %r, using WARNING", LOG_ENV,
                       invalid)

def covap_sim(args):
    """covap-sim command line"""
    usage = "%%prog [options] {%s}" % "|".join(COMMANDS)
    parser = OptionParser(usage)
    parser.install_config_options()
    parser.install_output_options()
    options, args = parser.parse_args(args)

    if len(args) != 1 or args[0] not in COMMANDS:
        parser.error("expected one command among %s" % ", ".join(COMMANDS))
    if not options.config:
        parser.error("missing --config")
    command = args[0]

    configure_logging(options.debug)

    config = load_config(options.config)
    config.override(seed=options.seed, output=options.out)
    report = run_experiment(config, command, options.sweep_parallel)
    if config.output:
        write_report(report, config.output)

    Display(options).print_report(report)

    if report.training is not None and report.training["diverged"]:
        raise DivergenceError("loss is not finite (see report)")

def main():
    """main script function"""
    try:
        covap_sim(sys.argv[1:])
    except GENERIC_ERRORS as ex:
        sys.exit(handle_generic_error(ex))

    sys.exit(EXIT_OK)


if __name__ == '__main__':
    main()
