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
Baseline gradient compressors: Top-k, Random-k and FP16.

Sparsifiers work per effective tensor and keep exactly ceil(k * d)
entries of a d-element vector. All compressors implement the
:class:`CovapSim.Compressor.GradientCompressor` interface so that the
same :class:`CovapSim.Compressor.ErrorFeedback` wrapper applies to them.

The reference cost table holds compression overheads and communication
time reductions measured for VGG-19 (143652544 parameters) on a 64-GPU,
30 Gbps cluster. Other models are scaled linearly in parameter count.
"""

import logging
import math

import numpy

from CovapSim.Compressor import CovapCompressor, GradientCompressor


LOGGER = logging.getLogger(__name__)

SCHEMES = ('none', 'covap', 'topk', 'randomk', 'fp16')
SPARSIFIERS = ('topk', 'randomk')

# largest finite half precision value
HALF_MAX = float(numpy.finfo(numpy.float16).max)

# bytes of one transmitted sparse index
INDEX_BYTES = 4

# scheme: (compression overhead ms, communication time reduction ms)
REFERENCE_PARAMS = 143652544
COST_TABLE = {'none'      : (0.0, 0.0),
              'covap'     : (0.0, 0.0),
              'topk'      : (1560.0, 603.0),
              'dgc'       : (25.0, 747.0),
              'randomk'   : (200.0, 653.0),
              'fp16'      : (5.0, 423.0),
              'efsignsgd' : (20.0, -210.0),
              'powersgd'  : (20.0, 753.0),
              'oktopk'    : (500.0, 674.0)}


class BaselineError(Exception):
    """Raised on invalid baseline compressor input."""


class BaselineConfig(object):
    """Settings of a baseline compressor."""

    def __init__(self, scheme, k_fraction=None, rng_seed=0, ef_enabled=True):
        self.scheme = scheme
        self.k_fraction = k_fraction
        self.rng_seed = rng_seed
        self.ef_enabled = ef_enabled
        self.validate()

    def validate(self):
        if self.scheme not in ('topk', 'randomk', 'fp16'):
            raise BaselineError("unknown baseline scheme %r" % self.scheme)
        if self.scheme in SPARSIFIERS:
            if self.k_fraction is None:
                raise BaselineError("%s needs k_fraction" % self.scheme)
            _check_fraction(self.k_fraction)
        elif self.k_fraction is not None:
            raise BaselineError("k_fraction is only valid for sparsifiers")


def _check_fraction(k_fraction):
    if k_fraction is None or not 0 < k_fraction <= 1:
        raise BaselineError("k_fraction must be within (0, 1] (got %r)"
                            % (k_fraction,))


def sparsified_count(numel, k_fraction):
    """Return ceil(k_fraction * numel), at least 1."""
    _check_fraction(k_fraction)
    # round away binary noise such as 0.3 * 10 = 3.0000000000000004
    return max(1, int(math.ceil(round(k_fraction * numel, 9))))


def _check_vector(x):
    x = numpy.asarray(x)
    if x.ndim != 1 or x.shape[0] == 0:
        raise BaselineError("expected a non-empty 1-D gradient vector")
    return x


def topk_compress(x, k_fraction):
    """
    Return (indices, values) of the ceil(k * d) largest entries of `x` in
    absolute value, largest first. Ties go to the lower index.
    """
    x = _check_vector(x)
    count = sparsified_count(x.shape[0], k_fraction)
    indices = numpy.argsort(-numpy.abs(x), kind='stable')[:count]
    return indices, x[indices]


def randomk_compress(x, k_fraction, rng):
    """
    Return (indices, values) of ceil(k * d) entries of `x` drawn without
    replacement from the numpy Generator `rng`. Indices are sorted.
    """
    x = _check_vector(x)
    count = sparsified_count(x.shape[0], k_fraction)
    indices = numpy.sort(rng.choice(x.shape[0], size=count, replace=False))
    return indices, x[indices]


def fp16_roundtrip(x):
    """
    Round `x` to half precision (nearest even) and widen it back to its
    dtype. Values out of the half range are clamped to +/-HALF_MAX.
    """
    x = numpy.asarray(x)
    if not numpy.issubdtype(x.dtype, numpy.floating):
        x = x.astype(numpy.float64)
    clipped = numpy.clip(x, -HALF_MAX, HALF_MAX)
    return clipped.astype(numpy.float16).astype(x.dtype)


def fp16_saturated(x):
    """Return the number of entries of `x` clamped by fp16_roundtrip()."""
    return int(numpy.count_nonzero(numpy.abs(numpy.asarray(x)) > HALF_MAX))


def compression_cost(scheme, param_count):
    """
    Return (compression overhead ms, communication reduction ms) of
    `scheme` for a model of `param_count` parameters.
    """
    try:
        overhead, reduction = COST_TABLE[scheme]
    except KeyError:
        raise BaselineError("no reference cost for scheme %r" % scheme)
    scale = float(param_count) / REFERENCE_PARAMS
    return overhead * scale, reduction * scale


def payload_bytes_model(scheme, numel, bytes_per_param=4, k_fraction=None):
    """
    Return the transmitted bytes of one `numel` elements tensor under
    `scheme`. Top-k sends values and indices, Random-k only values (all
    workers share the seed), FP16 half of the elements width.
    """
    if scheme in ('none', 'covap'):
        return numel * bytes_per_param
    if scheme == 'topk':
        return sparsified_count(numel, k_fraction) * \
            (bytes_per_param + INDEX_BYTES)
    if scheme == 'randomk':
        return sparsified_count(numel, k_fraction) * bytes_per_param
    if scheme == 'fp16':
        return numel * 2
    raise BaselineError("unknown scheme %r" % scheme)


class SparseUpdate(object):
    """Per tensor (indices, values) pairs of one iteration."""

    def __init__(self, indices, values, step, layout, dtype):
        self.indices = indices
        self.values = values
        self.step = step
        self.layout = tuple(layout)
        self.dtype = dtype

    def dense(self):
        result = []
        for numel, idx, val in zip(self.layout, self.indices, self.values):
            vec = numpy.zeros(numel, dtype=self.dtype)
            vec[idx] = val
            result.append(vec)
        return result


class DenseUpdate(object):
    """Full tensors of one iteration, as transmitted."""

    def __init__(self, tensors, step, bytes_per_elem, dtype=None):
        self.tensors = tensors
        self.step = step
        self.bytes_per_elem = bytes_per_elem
        self.dtype = dtype


class NoneCompressor(GradientCompressor):
    """Identity compressor (dense data-parallel training)."""

    name = 'none'

    def compress(self, tensors, step):
        itemsize = tensors[0].dtype.itemsize if tensors else 4
        return DenseUpdate(list(tensors), step, itemsize)

    def decompress(self, update):
        return [vec.copy() for vec in update.tensors]

    def payload_bytes(self, update):
        return sum(vec.shape[0] for vec in update.tensors) * \
            update.bytes_per_elem


class TopkCompressor(GradientCompressor):
    """Per tensor Top-k sparsifier."""

    name = 'topk'

    def __init__(self, k_fraction):
        _check_fraction(k_fraction)
        self.k_fraction = k_fraction

    def compress(self, tensors, step):
        pairs = [topk_compress(vec, self.k_fraction) for vec in tensors]
        return SparseUpdate([p[0] for p in pairs], [p[1] for p in pairs],
                            step, [vec.shape[0] for vec in tensors],
                            tensors[0].dtype)

    def decompress(self, update):
        return update.dense()

    def payload_bytes(self, update):
        return sum(val.nbytes + idx.shape[0] * INDEX_BYTES
                   for idx, val in zip(update.indices, update.values))


class RandomkCompressor(GradientCompressor):
    """
    Per tensor Random-k sparsifier. The generator of tensor t at step s
    is seeded with (seed, s, t), so every worker draws the same indices.
    """

    name = 'randomk'

    def __init__(self, k_fraction, seed=0):
        _check_fraction(k_fraction)
        self.k_fraction = k_fraction
        self.seed = seed

    def generator(self, step, tensor):
        return numpy.random.default_rng([self.seed, step, tensor])

    def compress(self, tensors, step):
        pairs = [randomk_compress(vec, self.k_fraction,
                                  self.generator(step, idx))
                 for idx, vec in enumerate(tensors)]
        return SparseUpdate([p[0] for p in pairs], [p[1] for p in pairs],
                            step, [vec.shape[0] for vec in tensors],
                            tensors[0].dtype)

    def decompress(self, update):
        return update.dense()

    def payload_bytes(self, update):
        # indices are regenerated from the shared seed
        return sum(val.nbytes for val in update.values)


class Fp16Compressor(GradientCompressor):
    """Half precision cast; counts clamped elements in `saturated`."""

    name = 'fp16'

    def __init__(self):
        self.saturated = 0

    def compress(self, tensors, step):
        halves = []
        for vec in tensors:
            self.saturated += fp16_saturated(vec)
            halves.append(numpy.clip(vec, -HALF_MAX, HALF_MAX)
                          .astype(numpy.float16))
        return DenseUpdate(halves, step, 2, tensors[0].dtype)

    def decompress(self, update):
        return [vec.astype(update.dtype) for vec in update.tensors]

    def payload_bytes(self, update):
        return sum(vec.nbytes for vec in update.tensors)


def new_compressor(scheme, covap_cfg=None, k_fraction=None, seed=0):
    """Return a GradientCompressor instance for `scheme`."""
    if scheme == 'none':
        return NoneCompressor()
    if scheme == 'covap':
        if covap_cfg is None:
            raise BaselineError("covap scheme needs a CovapConfig")
        return CovapCompressor(covap_cfg)
    if scheme == 'topk':
        return TopkCompressor(k_fraction)
    if scheme == 'randomk':
        return RandomkCompressor(k_fraction, seed)
    if scheme == 'fp16':
        return Fp16Compressor()
    raise BaselineError("unknown scheme %r" % scheme)
