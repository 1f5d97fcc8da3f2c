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
CLI error handling helper functions
"""

from __future__ import print_function

import configparser
import errno
import logging
import os.path
import signal
import sys

from CovapSim.Baseline import BaselineError
from CovapSim.Compressor import CompressorError
from CovapSim.Config import ConfigError
from CovapSim.Engine.Engine import EngineException
from CovapSim.PerfModel import PerfModelError
from CovapSim.Profiler import ProfileError
from CovapSim.Simulator import SimulatorError
from CovapSim.Topology import TopologyError
from CovapSim.Trainer import DivergenceError, ReplicaMismatchError, \
    TrainerError

# process exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_INVARIANT = 4

GENERIC_ERRORS = (configparser.Error,
                  ConfigError,
                  TopologyError,
                  CompressorError,
                  BaselineError,
                  PerfModelError,
                  SimulatorError,
                  ProfileError,
                  TrainerError,
                  EngineException,
                  AssertionError,
                  IOError,
                  OSError,
                  KeyboardInterrupt)

LOGGER = logging.getLogger(__name__)

def handle_generic_error(excobj, prog=os.path.basename(sys.argv[0])):
    """handle error given `excobj' generic script exception"""
    try:
        raise excobj
    except (ConfigError, configparser.Error) as exc:
        print("%s: %s" % (prog, exc), file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print("%s: Training diverged: %s" % (prog, exc), file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ReplicaMismatchError, EngineException, AssertionError) as exc:
        print("%s: Internal invariant violated: %s" % (prog, exc),
              file=sys.stderr)
        return EXIT_INVARIANT
    except TopologyError as exc:
        print("%s: Model error: %s" % (prog, exc), file=sys.stderr)
    except (CompressorError, BaselineError) as exc:
        print("%s: Compressor error: %s" % (prog, exc), file=sys.stderr)
    except (PerfModelError, SimulatorError, ProfileError,
            TrainerError) as exc:
        print("%s: %s" % (prog, exc), file=sys.stderr)
    except (IOError, OSError) as exc:  # see PEP 3151
        if exc.errno == errno.EPIPE:
            # be quiet on broken pipe
            LOGGER.debug(exc)
        else:
            print("ERROR: %s" % exc, file=sys.stderr)
    except KeyboardInterrupt as exc:
        return 128 + signal.SIGINT
    except:
        assert False, "wrong GENERIC_ERRORS"

    # Exit with error code 1 (generic failure)
    return EXIT_FAILURE
