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
covap-sim Defaults module.

Manage library defaults.
"""

# Imported early
# Should not import any other CovapSim modules when loaded
from configparser import ConfigParser, NoOptionError, NoSectionError

import os


#
# defaults.conf sections
#
CFG_SECTION_TOPOLOGY = 'topology'
CFG_SECTION_COVAP = 'covap'
CFG_SECTION_SIMULATOR = 'simulator'
CFG_SECTION_TRAINER = 'trainer'

#
# Functions
#
def config_paths(config_name):
    """Return default path list for a covap-sim config file name."""
    return ['/etc/covap-sim/%s' % config_name, # system-wide config file
            # default pip --user config file
            os.path.expanduser('~/.local/etc/covap-sim/%s' % config_name),
            # per-user config (top override)
            os.path.join(os.environ.get('XDG_CONFIG_HOME',
                                        os.path.expanduser('~/.config')),
                         'covap-sim', config_name)]

def _parser_get_choice(choices):
    """Return a converter accepting only one of `choices`."""
    def _get_choice(parser, section, option, **kwargs):
        value = ConfigParser.get(parser, section, option, **kwargs).strip()
        if value not in choices:
            raise ValueError("%s.%s: invalid value %r (expected one of %s)"
                             % (section, option, value, ', '.join(choices)))
        return value
    return _get_choice


#
# Classes
#
class Defaults(object):
    """
    Class used to manipulate covap-sim defaults.

    The following attributes may be read at any time and also changed
    programmatically, before plans, compressors or simulations are built.

    Topology defaults:

    * bucket_cap_bytes (integer; default is ``26214400``, 25 MiB)
    * median_convention (string; ``'paired-low'`` or ``'middle'``)

    COVAP defaults:

    * selection (string; ``'narrative'`` or ``'formula'``)
    * ef_init_value (float; default is ``0.3``)
    * ef_ascend_fraction (float; fraction of planned steps per ascent,
      default is ``0.05``)
    * ef_ascend_range (float; default is ``0.1``)

    Simulator defaults:

    * compress_stream (string; ``'compute'`` or ``'side'``)
    * defer_tail (boolean; default is ``True``)
    * bandwidth_gbps (float; default is ``30``)
    * allreduce_efficiency (float; default is ``1.0``)
    * latency_ms (float; default is ``0``)

    Trainer defaults:

    * threaded (boolean; default is ``False``)
    * log_every (integer; default is ``100``)

    Example of use::

        >>> from CovapSim.Defaults import DEFAULTS
        >>> DEFAULTS.median_convention = 'middle'

    The library default values of all of the above attributes may be
    changed using the defaults.conf configuration file.
    """

    MEDIAN_CONVENTIONS = ('paired-low', 'middle')
    SELECTIONS = ('narrative', 'formula')
    COMPRESS_STREAMS = ('compute', 'side')

    #
    # Default values and datatype converters for topology
    #
    _TOPOLOGY = {"bucket_cap_bytes"  : 25 * 1024 * 1024,
                 "median_convention" : 'paired-low'}

    _TOPOLOGY_CONVERTERS = {
        "bucket_cap_bytes"  : ConfigParser.getint,
        "median_convention" : _parser_get_choice(MEDIAN_CONVENTIONS)}

    #
    # Default values and datatype converters for covap
    #
    _COVAP = {"selection"          : 'narrative',
              "ef_init_value"      : 0.3,
              "ef_ascend_fraction" : 0.05,
              "ef_ascend_range"    : 0.1}

    _COVAP_CONVERTERS = {"selection"          : _parser_get_choice(SELECTIONS),
                         "ef_init_value"      : ConfigParser.getfloat,
                         "ef_ascend_fraction" : ConfigParser.getfloat,
                         "ef_ascend_range"    : ConfigParser.getfloat}

    #
    # Default values and datatype converters for simulator
    #
    _SIMULATOR = {"compress_stream"      : 'compute',
                  "defer_tail"           : True,
                  "bandwidth_gbps"       : 30.0,
                  "allreduce_efficiency" : 1.0,
                  "latency_ms"           : 0.0}

    _SIMULATOR_CONVERTERS = {
        "compress_stream"      : _parser_get_choice(COMPRESS_STREAMS),
        "defer_tail"           : ConfigParser.getboolean,
        "bandwidth_gbps"       : ConfigParser.getfloat,
        "allreduce_efficiency" : ConfigParser.getfloat,
        "latency_ms"           : ConfigParser.getfloat}

    #
    # Default values and datatype converters for trainer
    #
    _TRAINER = {"threaded"  : False,
                "log_every" : 100}

    _TRAINER_CONVERTERS = {"threaded"  : ConfigParser.getboolean,
                           "log_every" : ConfigParser.getint}

    def __init__(self, filenames):
        """Initialize Defaults from config filenames"""

        self._sections = {
            CFG_SECTION_TOPOLOGY: (self._TOPOLOGY.copy(),
                                   self._TOPOLOGY_CONVERTERS),
            CFG_SECTION_COVAP: (self._COVAP.copy(), self._COVAP_CONVERTERS),
            CFG_SECTION_SIMULATOR: (self._SIMULATOR.copy(),
                                    self._SIMULATOR_CONVERTERS),
            CFG_SECTION_TRAINER: (self._TRAINER.copy(),
                                  self._TRAINER_CONVERTERS)}

        config = ConfigParser()
        parsed = config.read(filenames)

        if parsed:
            self._parse_config(config)

    def _parse_config(self, config):
        """parse config"""
        for section, (values, converters) in self._sections.items():
            for key, conv in converters.items():
                try:
                    values[key] = conv(config, section, key)
                except (NoSectionError, NoOptionError):
                    pass

    def __getattr__(self, name):
        """Defaults attribute lookup"""
        if name == '_sections':
            raise AttributeError(name)
        for values, _ in self._sections.values():
            if name in values:
                return values[name]
        raise AttributeError(name)

    def __setattr__(self, name, value):
        """Defaults attribute assignment"""
        if name == '_sections':
            object.__setattr__(self, name, value)
            return
        for values, _ in self._sections.values():
            if name in values:
                values[name] = value
                return
        raise AttributeError(name)

#
# Globally accessible Defaults object
#
DEFAULTS = Defaults(config_paths('defaults.conf'))
