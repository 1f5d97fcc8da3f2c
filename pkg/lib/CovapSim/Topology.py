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
covap-sim model topology module

This module describes models as ordered layer lists, packs layers into
fixed-capacity communication buckets and slices oversized buckets into
evenly sized shards.

Layers are always listed in backward-pass completion order, that is the
order in which their gradients become available. A model description
file looks like::

    {"layers": [{"name": "fc3", "param_count": 4096000,
                 "bytes_per_param": 4, "backward_ms": 1.5}, ...],
     "bucket_cap_bytes": 26214400}

A uniform model may be given as ``{"uniform_layers": {"count": 16,
"param_count": 2790906}}`` instead of an explicit layer list.
"""

from fractions import Fraction
import logging
import numbers

from CovapSim.Defaults import DEFAULTS


LOGGER = logging.getLogger(__name__)

MEDIAN_PAIRED_LOW = 'paired-low'
MEDIAN_MIDDLE = 'middle'


class TopologyError(Exception):
    """topology error to report invalid model descriptions or plans"""


class LayerSpec(object):
    """One layer of a model, seen as a block of scalar gradients."""

    def __init__(self, name, param_count, bytes_per_param=4,
                 backward_ms=None):
        """initialize a new LayerSpec instance."""
        if isinstance(param_count, bool) or \
                not isinstance(param_count, numbers.Integral) or \
                param_count < 1:
            raise TopologyError("layer %s: invalid param_count %r"
                                % (name, param_count))
        if bytes_per_param not in (2, 4):
            raise TopologyError("layer %s: bytes_per_param must be 2 or 4 "
                                "(got %r)" % (name, bytes_per_param))
        if backward_ms is not None and backward_ms < 0:
            raise TopologyError("layer %s: negative backward_ms" % name)
        self.name = str(name)
        self.param_count = int(param_count)
        self.bytes_per_param = bytes_per_param
        self.backward_ms = backward_ms

    @property
    def nbytes(self):
        """gradient size in bytes"""
        return self.param_count * self.bytes_per_param

    def __repr__(self):
        return "<LayerSpec %s numel=%d>" % (self.name, self.param_count)


class ModelSpec(object):
    """
    A model as an ordered list of LayerSpec, in backward completion order.
    """

    def __init__(self, layers, name=None):
        """initialize a new ModelSpec instance."""
        self.layers = tuple(layers)
        if not self.layers:
            raise TopologyError("model has no layers")
        self.name = name

    def __len__(self):
        return len(self.layers)

    @property
    def total_params(self):
        """total number of scalar gradients"""
        return sum(layer.param_count for layer in self.layers)

    @property
    def total_bytes(self):
        """total gradient size in bytes"""
        return sum(layer.nbytes for layer in self.layers)

    def has_backward_times(self):
        """Return True if every layer declares its backward time."""
        return all(layer.backward_ms is not None for layer in self.layers)


class Bucket(object):
    """A communication tensor made of contiguous layers."""

    def __init__(self, index, layer_refs, numel, nbytes, backward_ms=None):
        self.index = index
        self.layer_refs = tuple(layer_refs)
        self.numel = numel
        self.bytes = nbytes
        self.backward_ms = backward_ms

    def __repr__(self):
        return "<Bucket %d layers=%s numel=%d>" % (self.index,
                                                   list(self.layer_refs),
                                                   self.numel)


class Shard(object):
    """
    A slice [start, end) of one bucket. Unsharded buckets are represented
    by a single Shard covering the whole bucket when effective tensors are
    enumerated.
    """

    def __init__(self, parent_bucket, start, end):
        if not 0 <= start < end:
            raise TopologyError("invalid shard range [%r, %r)" % (start, end))
        self.parent_bucket = parent_bucket
        self.start = start
        self.end = end

    @property
    def slice_range(self):
        return (self.start, self.end)

    @property
    def numel(self):
        return self.end - self.start

    def __eq__(self, other):
        return isinstance(other, Shard) and \
            (self.parent_bucket, self.start, self.end) == \
            (other.parent_bucket, other.start, other.end)

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash((self.parent_bucket, self.start, self.end))

    def __repr__(self):
        return "<Shard bucket=%d [%d, %d)>" % (self.parent_bucket, self.start,
                                               self.end)


class BucketPlan(object):
    """
    Ordered buckets of a model, plus optional shards replacing the
    oversized ones.
    """

    def __init__(self, buckets, cap_bytes, shards=None, interval=None):
        self.buckets = tuple(buckets)
        self.cap_bytes = cap_bytes
        self.shards = tuple(shards) if shards is not None else None
        self.interval = interval

    def sharded_buckets(self):
        """Return the dict of bucket index to its shard list."""
        result = {}
        for shard in self.shards or ():
            result.setdefault(shard.parent_bucket, []).append(shard)
        return result

    def effective_tensors(self):
        """
        Return the communication units of this plan, in backward order,
        as a list of Shard. Buckets that are not sharded appear as one
        Shard spanning the whole bucket.
        """
        sharded = self.sharded_buckets()
        tensors = []
        for bucket in self.buckets:
            if bucket.index in sharded:
                tensors.extend(sharded[bucket.index])
            else:
                tensors.append(Shard(bucket.index, 0, bucket.numel))
        return tensors

    def numels(self):
        """Return element counts of effective tensors."""
        return [shard.numel for shard in self.effective_tensors()]

    def tensor_bytes(self):
        """Return byte sizes of effective tensors."""
        result = []
        for shard in self.effective_tensors():
            bucket = self.buckets[shard.parent_bucket]
            result.append(bucket.bytes * shard.numel // bucket.numel)
        return result

    def tensor_backward_ms(self):
        """
        Return backward times of effective tensors, split by element count
        within sharded buckets, or None if some bucket has no time.
        """
        result = []
        for shard in self.effective_tensors():
            bucket = self.buckets[shard.parent_bucket]
            if bucket.backward_ms is None:
                return None
            result.append(bucket.backward_ms * shard.numel / bucket.numel)
        return result

    def offsets(self):
        """
        Return [start, end) offsets of each effective tensor in the flat
        gradient vector laid out in backward order.
        """
        result = []
        pos = 0
        for numel in self.numels():
            result.append((pos, pos + numel))
            pos += numel
        return result

    @property
    def num_tensors(self):
        """effective tensor count"""
        return len(self.effective_tensors())

    @property
    def total_numel(self):
        return sum(bucket.numel for bucket in self.buckets)


def allocate_buckets(model, cap_bytes=None):
    """
    Pack layers of `model` into buckets of at most `cap_bytes` bytes,
    greedily in backward order. A layer larger than the capacity gets a
    bucket of its own and is never split here.
    """
    if cap_bytes is None:
        cap_bytes = DEFAULTS.bucket_cap_bytes
    if not model or not len(model):
        raise TopologyError("cannot allocate buckets of an empty model")
    if cap_bytes < 1:
        raise TopologyError("invalid bucket capacity %r" % cap_bytes)

    buckets = []
    current = []

    def _close():
        layers = [model.layers[ref] for ref in current]
        times = [layer.backward_ms for layer in layers]
        backward_ms = None if None in times else sum(times)
        buckets.append(Bucket(len(buckets), current,
                              sum(layer.param_count for layer in layers),
                              sum(layer.nbytes for layer in layers),
                              backward_ms))

    current_bytes = 0
    for ref, layer in enumerate(model.layers):
        if current and current_bytes + layer.nbytes > cap_bytes:
            _close()
            current = []
            current_bytes = 0
        current.append(ref)
        current_bytes += layer.nbytes
    _close()

    LOGGER.debug("allocated %d layers into %d buckets (cap %d bytes)",
                 len(model), len(buckets), cap_bytes)
    return BucketPlan(buckets, cap_bytes)


def median_numel(plan, convention=None):
    """
    Return the median element count of the buckets of `plan` as an exact
    Fraction.

    With an odd bucket count, this is the middle value. With an even
    count, the 'middle' convention averages the two central values while
    the default 'paired-low' convention averages the sorted values at
    positions n/2-2 and n/2-1 (the two values for n = 2).
    """
    if convention is None:
        convention = DEFAULTS.median_convention
    values = sorted(bucket.numel for bucket in plan.buckets)
    count = len(values)
    if count == 0:
        raise TopologyError("median of an empty plan")
    if count % 2:
        return Fraction(values[count // 2])
    if convention == MEDIAN_MIDDLE or count == 2:
        low = count // 2 - 1
    elif convention == MEDIAN_PAIRED_LOW:
        low = count // 2 - 2
    else:
        raise TopologyError("unknown median convention %r" % convention)
    return Fraction(values[low] + values[low + 1], 2)


def even_slices(numel, count):
    """
    Return `count` contiguous [start, end) ranges covering [0, numel),
    the first numel % count ranges holding one extra element.
    """
    base, extra = divmod(numel, count)
    ranges = []
    start = 0
    for idx in range(count):
        end = start + base + (1 if idx < extra else 0)
        ranges.append((start, end))
        start = end
    return ranges


def shard_plan(plan, interval, convention=None):
    """
    Return a new BucketPlan where every bucket holding p = numel // median
    >= 2 times the median element count is replaced by min(p, interval)
    even shards. Other buckets are kept as they are.
    """
    if interval < 1:
        raise TopologyError("invalid interval %r" % interval)
    median = median_numel(plan, convention)
    shards = []
    for bucket in plan.buckets:
        parts = min(bucket.numel // median, interval)
        if parts >= 2:
            for start, end in even_slices(bucket.numel, parts):
                shards.append(Shard(bucket.index, start, end))
            LOGGER.debug("bucket %d (numel %d) sliced into %d shards",
                         bucket.index, bucket.numel, parts)
    return BucketPlan(plan.buckets, plan.cap_bytes, shards, interval)


def uniform_model(count, param_count, bytes_per_param=4, backward_ms=None,
                  name=None):
    """Return a ModelSpec of `count` identical layers."""
    if count < 1:
        raise TopologyError("uniform model needs at least one layer")
    return ModelSpec([LayerSpec("layer%d" % idx, param_count,
                                bytes_per_param, backward_ms)
                      for idx in range(count)], name=name)


def model_from_dict(doc, name=None):
    """
    Build (ModelSpec, bucket_cap_bytes) from a parsed model description.
    bucket_cap_bytes is None when the description does not set it.
    """
    if not isinstance(doc, dict):
        raise TopologyError("model description is not a mapping")
    cap = doc.get("bucket_cap_bytes")
    name = doc.get("name", name)
    if "uniform_layers" in doc:
        uni = doc["uniform_layers"]
        try:
            model = uniform_model(int(uni["count"]), uni["param_count"],
                                  uni.get("bytes_per_param", 4),
                                  uni.get("backward_ms"), name)
        except (KeyError, TypeError, ValueError) as exc:
            raise TopologyError("invalid uniform_layers: %s" % exc)
        return model, cap
    layers = []
    for idx, entry in enumerate(doc.get("layers") or ()):
        try:
            layers.append(LayerSpec(entry.get("name", "layer%d" % idx),
                                    entry["param_count"],
                                    entry.get("bytes_per_param", 4),
                                    entry.get("backward_ms")))
        except (AttributeError, KeyError, TypeError) as exc:
            raise TopologyError("layers[%d]: invalid entry (%s)" % (idx, exc))
    return ModelSpec(layers, name=name), cap


def load_model(source, basedir=None):
    """
    Load a model description from a file path or an already parsed dict.
    Return (ModelSpec, bucket_cap_bytes or None).
    """
    if isinstance(source, dict):
        return model_from_dict(source)
    # late import: Config depends on this module
    from CovapSim.Config import ConfigError, load_document
    try:
        doc = load_document(source, basedir)
    except ConfigError as exc:
        raise TopologyError(str(exc))
    return model_from_dict(doc)


def plan_to_dict(plan, model=None):
    """Return a JSON-ready description of `plan`."""
    buckets = []
    sharded = plan.sharded_buckets()
    for bucket in plan.buckets:
        entry = {"index": bucket.index,
                 "layers": list(bucket.layer_refs),
                 "numel": bucket.numel,
                 "bytes": bucket.bytes,
                 "shards": [list(shard.slice_range)
                            for shard in sharded.get(bucket.index, ())]}
        if model is not None:
            entry["layer_names"] = [model.layers[ref].name
                                    for ref in bucket.layer_refs]
        buckets.append(entry)
    convention = DEFAULTS.median_convention
    median = median_numel(plan, convention)
    return {"cap_bytes": plan.cap_bytes,
            "interval": plan.interval,
            "median_numel": float(median),
            "median_exact": str(median),
            "median_convention": convention,
            "buckets": buckets,
            "effective_tensors": plan.num_tensors,
            "total_numel": plan.total_numel}
