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
Experiment configuration documents.

An experiment is described by one JSON document, or YAML when the file
name ends with .yaml or .yml::

    {"name": "resnet101", "seed": 0,
     "model": {"file": "models/resnet101.json"},
     "cluster": {"workers": 64, "bandwidth_gbps": 30},
     "phases": {"t_before": 55, "t_comp": 135, "t_comm": 280},
     "compressor": {"scheme": "covap"},
     "covap": {"interval": "auto", "ef": {"enabled": true}},
     "sweep": {"ratios": {"from": 1, "to": 6}, "workers": [8, 16, 32, 64]},
     "output": "out/resnet101"}

Every section is optional. Errors are reported as ConfigError naming the
dotted path of the faulty field, and the line and column of syntax
errors.
"""

import hashlib
import json
import logging
import os.path

import yaml

from CovapSim.Baseline import SCHEMES, SPARSIFIERS
from CovapSim.Compressor import CompressorError, CovapConfig
from CovapSim.PerfModel import PerfModelError, PhaseTimes, REFERENCE_ROWS, \
    reference_phases
from CovapSim.Simulator import ClusterConfig, GBPS, SimulatorError, \
    calibrate
from CovapSim.Topology import TopologyError, model_from_dict
from CovapSim.Trainer import MODEL_KINDS


LOGGER = logging.getLogger(__name__)

YAML_SUFFIXES = ('.yaml', '.yml')

TOP_LEVEL_KEYS = ('name', 'seed', 'model', 'cluster', 'phases', 'compressor',
                  'covap', 'sweep', 'train', 'iterations', 'output')

AUTO = 'auto'


class ConfigError(Exception):
    """Exception used to report an invalid experiment configuration."""
    def __init__(self, field, msg, line=None, column=None):
        Exception.__init__(self)
        self.field = field
        self.msg = msg
        self.line = line
        self.column = column

    def __str__(self):
        if self.line is not None:
            return "(Config %s): %s at line %d column %d" % \
                (self.field, self.msg, self.line, self.column)
        return "(Config %s): %s" % (self.field, self.msg)


def load_document(path, basedir=None):
    """Read and parse the JSON or YAML document at `path`."""
    if basedir and not os.path.isabs(path):
        path = os.path.join(basedir, path)
    name = os.path.basename(path)
    try:
        with open(path) as stream:
            text = stream.read()
    except (IOError, OSError) as exc:
        raise ConfigError(name, exc.strerror or str(exc))
    if path.endswith(YAML_SUFFIXES):
        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, 'problem_mark', None)
            problem = getattr(exc, 'problem', None) or str(exc)
            if mark is None:
                raise ConfigError(name, problem)
            raise ConfigError(name, problem, mark.line + 1, mark.column + 1)
    try:
        return json.loads(text)
    except ValueError as exc:
        raise ConfigError(name, getattr(exc, 'msg', str(exc)),
                          getattr(exc, 'lineno', None),
                          getattr(exc, 'colno', None))


def config_sha256(doc):
    """Return the SHA-256 of the canonical JSON form of `doc`."""
    canonical = json.dumps(doc, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


#
# Field readers
#
def _section(doc, key, field=None):
    value = doc.get(key)
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError(field or key, "must be a mapping")
    return value

def _check_keys(section, allowed, field):
    for key in sorted(section):
        if key not in allowed:
            raise ConfigError("%s.%s" % (field, key), "unknown field")

def _int(section, key, field, default=None, minimum=None):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("%s.%s" % (field, key), "integer expected, got %r"
                          % (value,))
    if minimum is not None and value < minimum:
        raise ConfigError("%s.%s" % (field, key), "must be >= %d"
                          % minimum)
    return value

def _number(value, field, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, "number expected, got %r" % (value,))
    if minimum is not None and value < minimum:
        raise ConfigError(field, "must be >= %s" % minimum)
    return float(value)

def _real(section, key, field, default=None, minimum=None):
    value = section.get(key, default)
    if value is None:
        return None
    return _number(value, "%s.%s" % (field, key), minimum)

def _bool(section, key, field, default=None):
    value = section.get(key, default)
    if value is not None and not isinstance(value, bool):
        raise ConfigError("%s.%s" % (field, key), "boolean expected")
    return value

def _choice(section, key, field, choices, default=None):
    value = section.get(key, default)
    if value is not None and value not in choices:
        raise ConfigError("%s.%s" % (field, key), "%r not in %s"
                          % (value, ", ".join(choices)))
    return value

def _reals(section, key, field, minimum=None):
    values = section.get(key)
    if values is None:
        return None
    if not isinstance(values, list):
        raise ConfigError("%s.%s" % (field, key), "list expected")
    return [_number(val, "%s.%s[%d]" % (field, key, idx), minimum)
            for idx, val in enumerate(values)]

def _ints(values, field, minimum=1):
    if not isinstance(values, list) or not values:
        raise ConfigError(field, "non-empty list expected")
    result = []
    for idx, val in enumerate(values):
        if isinstance(val, bool) or not isinstance(val, int) or val < minimum:
            raise ConfigError("%s[%d]" % (field, idx), "integer >= %d "
                              "expected, got %r" % (minimum, val))
        result.append(val)
    return result

def _int_range(value, field):
    """list of ints, or {"from": a, "to": b} inclusive"""
    if isinstance(value, dict):
        _check_keys(value, ('from', 'to'), field)
        start = _int(value, 'from', field, 1, 1)
        stop = _int(value, 'to', field, None, 1)
        if stop is None or stop < start:
            raise ConfigError(field, "empty range")
        return list(range(start, stop + 1))
    return _ints(value, field)


class TrainSettings(object):
    """Settings of the `train` section."""

    KEYS = ('model', 'features', 'hidden', 'samples', 'workers', 'lr',
            'steps', 'seeds', 'layer_sizes', 'layers', 'batch_size',
            'threaded', 'noise', 'cap_bytes')

    def __init__(self, section, field='train'):
        _check_keys(section, self.KEYS, field)
        self.model = _choice(section, 'model', field, MODEL_KINDS,
                             MODEL_KINDS[0])
        self.features = _int(section, 'features', field, 1024, 1)
        self.hidden = _int(section, 'hidden', field, 16, 1)
        self.samples = _int(section, 'samples', field, 2048, 1)
        self.workers = _int(section, 'workers', field, 4, 1)
        self.lr = _real(section, 'lr', field, 0.05)
        if self.lr <= 0:
            raise ConfigError(field + '.lr', "must be > 0")
        self.steps = _int(section, 'steps', field, 2000, 0)
        self.seeds = None
        if section.get('seeds') is not None:
            self.seeds = _ints(section['seeds'], field + '.seeds', 0)
        self.layers = _int(section, 'layers', field, 8, 1)
        self.layer_sizes = None
        if section.get('layer_sizes') is not None:
            self.layer_sizes = _ints(section['layer_sizes'],
                                     field + '.layer_sizes')
        self.batch_size = _int(section, 'batch_size', field, None, 1)
        self.threaded = _bool(section, 'threaded', field)
        self.noise = _real(section, 'noise', field, 1.0, 0)
        self.cap_bytes = _int(section, 'cap_bytes', field, None, 1)
        if self.workers > self.samples:
            raise ConfigError(field + '.workers', "more workers than "
                              "samples")

    def as_dict(self):
        return dict((key, getattr(self, key)) for key in self.KEYS)


class CovapSettings(object):
    """Settings of the `covap` section; the interval may be 'auto'."""

    KEYS = ('interval', 'ef', 'selection')
    EF_KEYS = ('enabled', 'init_value', 'ascend_steps', 'ascend_range')

    def __init__(self, section, field='covap'):
        _check_keys(section, self.KEYS, field)
        interval = section.get('interval', AUTO)
        if interval != AUTO:
            interval = _int(section, 'interval', field, None, 1)
        self.interval = interval
        self.selection = section.get('selection')
        ef_field = field + '.ef'
        ef = section.get('ef') or {}
        if not isinstance(ef, dict):
            raise ConfigError(ef_field, "must be a mapping")
        _check_keys(ef, self.EF_KEYS, ef_field)
        self.ef_enabled = _bool(ef, 'enabled', ef_field, True)
        self.ef_init_value = _real(ef, 'init_value', ef_field)
        self.ef_ascend_steps = _int(ef, 'ascend_steps', ef_field, None, 1)
        self.ef_ascend_range = _real(ef, 'ascend_range', ef_field)
        # validate everything but the interval
        self.build(1)

    @property
    def is_auto(self):
        return self.interval == AUTO

    def build(self, interval=None, total_steps=None):
        """Return a CovapConfig, resolving an 'auto' interval."""
        if interval is None:
            if self.is_auto:
                raise ConfigError("covap.interval", "cannot resolve 'auto' "
                                  "without phase times")
            interval = self.interval
        kwargs = dict(ef_init_value=self.ef_init_value,
                      ef_ascend_range=self.ef_ascend_range,
                      ef_enabled=self.ef_enabled,
                      selection=self.selection)
        try:
            if self.ef_ascend_steps is None and total_steps:
                return CovapConfig.default_schedule(interval, total_steps,
                                                    **kwargs)
            return CovapConfig(interval,
                               ef_ascend_steps=self.ef_ascend_steps or 1,
                               **kwargs)
        except CompressorError as exc:
            raise ConfigError("covap", str(exc))

    def as_dict(self):
        return {"interval": self.interval, "selection": self.selection,
                "ef": {"enabled": self.ef_enabled,
                       "init_value": self.ef_init_value,
                       "ascend_steps": self.ef_ascend_steps,
                       "ascend_range": self.ef_ascend_range}}


class CompressorSettings(object):
    """Settings of the `compressor` section."""

    KEYS = ('scheme', 'k_fraction', 'seed', 'compress_ms', 'ef')

    def __init__(self, section, field='compressor'):
        _check_keys(section, self.KEYS, field)
        if isinstance(section.get('scheme'), list):
            raise ConfigError(field + '.scheme', "exactly one compressor "
                              "must be selected (use sweep.schemes)")
        self.scheme = _choice(section, 'scheme', field, SCHEMES, 'none')
        self.k_fraction = _real(section, 'k_fraction', field)
        if self.scheme in SPARSIFIERS:
            if self.k_fraction is None:
                raise ConfigError(field + '.k_fraction', "required by "
                                  "scheme %s" % self.scheme)
            if not 0 < self.k_fraction <= 1:
                raise ConfigError(field + '.k_fraction', "must be within "
                                  "(0, 1]")
        self.seed = _int(section, 'seed', field, 0, 0)
        self.compress_ms = _real(section, 'compress_ms', field, None, 0)
        self.ef_enabled = _bool(section, 'ef', field, True)

    def as_dict(self):
        return dict((key, getattr(self, key)) for key in
                    ('scheme', 'k_fraction', 'seed', 'compress_ms'))


class SweepSettings(object):
    """Cross product of compression ratios, cluster sizes and schemes."""

    KEYS = ('ratios', 'workers', 'schemes')

    def __init__(self, section, field='sweep'):
        _check_keys(section, self.KEYS, field)
        if not section:
            raise ConfigError(field, "empty sweep")
        self.ratios = None
        if 'ratios' in section:
            self.ratios = _int_range(section['ratios'], field + '.ratios')
        self.workers = None
        if 'workers' in section:
            self.workers = _ints(section['workers'], field + '.workers')
        self.schemes = None
        if 'schemes' in section:
            schemes = section['schemes']
            if not isinstance(schemes, list) or not schemes:
                raise ConfigError(field + '.schemes', "non-empty list "
                                  "expected")
            for idx, scheme in enumerate(schemes):
                if scheme not in SCHEMES:
                    raise ConfigError("%s.schemes[%d]" % (field, idx),
                                      "unknown scheme %r" % (scheme,))
            self.schemes = list(schemes)

    def as_dict(self):
        return {"ratios": self.ratios, "workers": self.workers,
                "schemes": self.schemes}


class ExperimentConfig(object):
    """Parsed and validated experiment document."""

    def __init__(self, doc, path=None):
        if not isinstance(doc, dict):
            raise ConfigError("document", "top level must be a mapping")
        _check_keys(doc, TOP_LEVEL_KEYS, "document")
        self.doc = doc
        self.path = path
        self.basedir = os.path.dirname(path) if path else None
        default_name = None
        if path:
            default_name = os.path.splitext(os.path.basename(path))[0]
        self.name = doc.get('name', default_name)
        self.seed = _int(doc, 'seed', 'document', 0, 0)
        self.iterations = _int(doc, 'iterations', 'document', None, 1)
        self.output = doc.get('output')
        if self.output is not None and self.basedir and \
                not os.path.isabs(self.output):
            self.output = os.path.join(self.basedir, self.output)
        self.model, self.cap_bytes = self._parse_model()
        self.cluster = self._parse_cluster()
        self.phases = self._parse_phases()
        self.compressor = CompressorSettings(
            _section(doc, 'compressor') or {})
        self.covap = CovapSettings(_section(doc, 'covap') or {})
        sweep = _section(doc, 'sweep')
        self.sweep = SweepSettings(sweep) if sweep is not None else None
        train = _section(doc, 'train')
        self.train = TrainSettings(train) if train is not None else None
        LOGGER.debug("parsed experiment %s (%s)", self.name, path)

    @property
    def sha256(self):
        return config_sha256(self.doc)

    def override(self, seed=None, output=None):
        """Apply command line overrides."""
        if seed is not None:
            self.seed = seed
            if self.train is not None:
                self.train.seeds = [seed]
        if output is not None:
            self.output = output

    @property
    def train_seeds(self):
        if self.train is None or self.train.seeds is None:
            return [self.seed]
        return list(self.train.seeds)

    def _parse_model(self):
        section = _section(self.doc, 'model')
        if section is None:
            return None, None
        if 'file' in section:
            _check_keys(section, ('file',), 'model')
            try:
                section = load_document(section['file'], self.basedir)
            except ConfigError as exc:
                raise ConfigError("model.file", str(exc))
        try:
            model, cap = model_from_dict(section, self.doc.get('name'))
        except TopologyError as exc:
            raise ConfigError("model", str(exc))
        if cap is not None and (isinstance(cap, bool) or
                                not isinstance(cap, int) or cap < 1):
            raise ConfigError("model.bucket_cap_bytes", "positive integer "
                              "expected")
        return model, cap

    def _parse_cluster(self):
        field = 'cluster'
        section = _section(self.doc, field) or {}
        _check_keys(section, ('workers', 'bandwidth_gbps', 'latency_ms',
                              'allreduce_efficiency', 'skew_ms',
                              'calibration'), field)
        workers = _int(section, 'workers', field, 1, 1)
        gbps = _real(section, 'bandwidth_gbps', field)
        try:
            cluster = ClusterConfig(
                workers, gbps * GBPS if gbps is not None else None,
                _real(section, 'latency_ms', field),
                _real(section, 'allreduce_efficiency', field),
                _reals(section, 'skew_ms', field, 0))
        except SimulatorError as exc:
            raise ConfigError(field, str(exc))
        calib = section.get('calibration')
        if calib is not None:
            cfield = field + '.calibration'
            if not isinstance(calib, dict):
                raise ConfigError(cfield, "must be a mapping")
            _check_keys(calib, ('numels', 'measured_ms', 'bytes_per_elem'),
                        cfield)
            try:
                cluster = calibrate(cluster,
                                    _ints(calib.get('numels'),
                                          cfield + '.numels'),
                                    _reals(calib, 'measured_ms', cfield, 0),
                                    _int(calib, 'bytes_per_elem', cfield, 4,
                                         1))
            except SimulatorError as exc:
                raise ConfigError(cfield, str(exc))
        return cluster

    def _parse_phases(self):
        field = 'phases'
        section = _section(self.doc, field)
        if section is None:
            return None
        _check_keys(section, ('reference', 't_before', 't_comp', 't_comm',
                              'comp', 'comm'), field)
        if 'reference' in section:
            name = _choice(section, 'reference', field,
                           sorted(REFERENCE_ROWS))
            return reference_phases(name)
        try:
            return PhaseTimes(_real(section, 't_before', field, 0.0, 0),
                              _real(section, 't_comp', field, None, 0),
                              _real(section, 't_comm', field, None, 0),
                              _reals(section, 'comp', field, 0),
                              _reals(section, 'comm', field, 0))
        except PerfModelError as exc:
            raise ConfigError(field, str(exc))


def parse_config(doc, path=None):
    """Return the ExperimentConfig of an already parsed document."""
    return ExperimentConfig(doc, path)


def load_config(path):
    """Load and validate the experiment document at `path`."""
    return ExperimentConfig(load_document(path), path)
