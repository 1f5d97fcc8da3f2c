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
COVAP gradient compressor.

COVAP is a coarse-grained filter: at iteration ``num_steps`` only the
effective tensors whose index is congruent to ``num_steps`` modulo the
interval I are transmitted, the others being kept in local memory as
residuals (error feedback) and re-added to later gradients with a
scheduled compensation coefficient.

This module also provides :class:`ErrorFeedback`, the residual wrapper
shared with the baseline compressors of :mod:`CovapSim.Baseline`.

Gradients are handled as lists of 1-D numpy arrays laid out like the
effective tensors of a :class:`CovapSim.Topology.BucketPlan`.
"""

import logging

import numpy

from CovapSim.Defaults import DEFAULTS


LOGGER = logging.getLogger(__name__)

SELECTION_NARRATIVE = 'narrative'
SELECTION_FORMULA = 'formula'


class CompressorError(Exception):
    """Base compressor error."""

class CompressorStateError(CompressorError):
    """Raised when gradients do not match the compressor state layout."""

class CompressorInputError(CompressorError):
    """Raised on malformed compressed updates or configurations."""


def select_tensors(num_steps, interval, count, selection=None):
    """
    Return the frozenset of effective tensor indices transmitted at
    iteration `num_steps` out of `count` tensors.

    The default 'narrative' selection picks t with (t - num_steps) mod I
    equal to 0 (tensor 0 at iterations 0, I, 2I...). The 'formula'
    selection uses (t + num_steps) mod I instead.
    """
    if interval < 1 or count < 1 or num_steps < 0:
        raise CompressorInputError("invalid selection arguments "
                                   "(num_steps=%r, I=%r, b=%r)"
                                   % (num_steps, interval, count))
    if selection is None:
        selection = DEFAULTS.selection
    if selection == SELECTION_NARRATIVE:
        first = num_steps % interval
    elif selection == SELECTION_FORMULA:
        first = (-num_steps) % interval
    else:
        raise CompressorInputError("unknown selection %r" % selection)
    return frozenset(range(first, count, interval))


class CovapConfig(object):
    """
    COVAP settings: interval I, compensation coefficient schedule and
    error feedback switch.
    """

    def __init__(self, interval=1, ef_init_value=None, ef_ascend_steps=1,
                 ef_ascend_range=None, ef_enabled=True, selection=None):
        if ef_init_value is None:
            ef_init_value = DEFAULTS.ef_init_value
        if ef_ascend_range is None:
            ef_ascend_range = DEFAULTS.ef_ascend_range
        if selection is None:
            selection = DEFAULTS.selection
        self.interval = interval
        self.ef_init_value = ef_init_value
        self.ef_ascend_steps = ef_ascend_steps
        self.ef_ascend_range = ef_ascend_range
        self.ef_enabled = ef_enabled
        self.selection = selection
        self.validate()

    @classmethod
    def default_schedule(cls, interval, total_steps, **kwargs):
        """
        Return a CovapConfig with the library scheduler defaults: ascend
        every ef_ascend_fraction of the planned `total_steps`.
        """
        steps = max(1, int(round(total_steps * DEFAULTS.ef_ascend_fraction)))
        return cls(interval, ef_ascend_steps=steps, **kwargs)

    def validate(self):
        """Check settings, raise CompressorInputError if invalid."""
        if isinstance(self.interval, bool) or int(self.interval) != \
                self.interval or self.interval < 1:
            raise CompressorInputError("interval must be a positive integer "
                                       "(got %r)" % (self.interval,))
        if not 0 <= self.ef_init_value <= 1:
            raise CompressorInputError("ef init_value must be within [0, 1]")
        if int(self.ef_ascend_steps) != self.ef_ascend_steps or \
                self.ef_ascend_steps < 1:
            raise CompressorInputError("ef ascend_steps must be a positive "
                                       "integer")
        if self.ef_ascend_range < 0:
            raise CompressorInputError("ef ascend_range must be >= 0")
        if self.selection not in (SELECTION_NARRATIVE, SELECTION_FORMULA):
            raise CompressorInputError("unknown selection %r"
                                       % self.selection)

    def coefficient(self, num_steps):
        """compensation coefficient at `num_steps`"""
        return ef_coefficient(num_steps, self)

    def __repr__(self):
        return "<CovapConfig I=%d ef=%s>" % (self.interval, self.ef_enabled)


def ef_coefficient(num_steps, cfg):
    """
    Return min(init_value + (num_steps // ascend_steps) * ascend_range, 1).
    """
    value = cfg.ef_init_value + \
        (num_steps // cfg.ef_ascend_steps) * cfg.ef_ascend_range
    return min(value, 1.0)


class CompressorState(object):
    """
    Per-worker error feedback memory: one residual vector per effective
    tensor and the iteration counter.
    """

    def __init__(self, residuals, num_steps=0):
        self.residuals = [numpy.asarray(res) for res in residuals]
        self.num_steps = num_steps

    @classmethod
    def zeros(cls, numels, dtype=numpy.float64):
        """Return a fresh state for tensors of the given element counts."""
        return cls([numpy.zeros(numel, dtype=dtype) for numel in numels])

    @property
    def numels(self):
        return [res.shape[0] for res in self.residuals]

    def check_layout(self, gradients):
        """Raise CompressorStateError unless `gradients` match residuals."""
        if len(gradients) != len(self.residuals):
            raise CompressorStateError("got %d gradient tensors, state has %d"
                                       % (len(gradients),
                                          len(self.residuals)))
        for idx, (grad, res) in enumerate(zip(gradients, self.residuals)):
            if numpy.shape(grad) != res.shape:
                raise CompressorStateError(
                    "tensor %d: gradient shape %s != residual shape %s"
                    % (idx, numpy.shape(grad), res.shape))


class CompressedUpdate(object):
    """
    Gradient values of the tensors selected at one iteration.

    `payload` maps effective tensor indices to their vectors, `layout`
    holds element counts of all tensors.
    """

    def __init__(self, selected_indices, payload, step, layout,
                 dtype=numpy.float64):
        self.selected_indices = frozenset(selected_indices)
        self.payload = payload
        self.step = step
        self.layout = tuple(layout)
        self.dtype = dtype

    @property
    def numel(self):
        """element count of the payload"""
        return sum(vec.shape[0] for vec in self.payload.values())

    @property
    def nbytes(self):
        return sum(vec.nbytes for vec in self.payload.values())


class GradientCompressor(object):
    """
    Compressor interface used by :class:`ErrorFeedback`, the trainer and
    the simulator.

    Derived classes implement compress() and decompress(); compressed
    objects must also be priced by payload_bytes().
    """

    name = None

    def compress(self, tensors, step):
        """Compress the list of tensor vectors at iteration `step`."""
        raise NotImplementedError("Derived classes must implement.")

    def decompress(self, update):
        """Return the list of dense tensor vectors of `update`."""
        raise NotImplementedError("Derived classes must implement.")

    def payload_bytes(self, update):
        """Return the transmitted size of `update` in bytes."""
        raise NotImplementedError("Derived classes must implement.")


class CovapCompressor(GradientCompressor):
    """Coarse-grained COVAP filter (the compression operator itself)."""

    name = 'covap'

    def __init__(self, cfg):
        self.cfg = cfg

    def compress(self, tensors, step):
        selected = select_tensors(step, self.cfg.interval, len(tensors),
                                  self.cfg.selection)
        payload = dict((idx, tensors[idx]) for idx in sorted(selected))
        dtype = tensors[0].dtype if tensors else numpy.float64
        return CompressedUpdate(selected, payload, step,
                                [vec.shape[0] for vec in tensors], dtype)

    def decompress(self, update):
        return covap_decompress(update)

    def payload_bytes(self, update):
        return update.nbytes


class ErrorFeedback(object):
    """
    Error feedback wrapper around any GradientCompressor.

    At each step the scheduled share of the residuals is added to the
    gradients, the sum is compressed, and the part that did not make it
    into the compressed update is kept as the new residuals::

        corrected = gradients + coefficient(step) * residuals
        update = compress(corrected)
        residuals = corrected - decompress(update)

    When `coefficient` is None, error feedback is disabled: residuals are
    still tracked but never added back.
    """

    def __init__(self, compressor, numels=None, coefficient=None,
                 state=None, dtype=numpy.float64):
        self.compressor = compressor
        self.coefficient = coefficient
        if state is None:
            if numels is None:
                raise CompressorStateError("either numels or state is needed")
            state = CompressorState.zeros(numels, dtype)
        self.state = state
        self.last_corrected = None

    @property
    def enabled(self):
        return self.coefficient is not None

    def step(self, gradients):
        """Run one compression step, return the compressed update."""
        state = self.state
        state.check_layout(gradients)
        if self.enabled:
            coeff = self.coefficient(state.num_steps)
            if coeff == 1.0:
                corrected = [grad + res for grad, res
                             in zip(gradients, state.residuals)]
            else:
                corrected = [grad + coeff * res for grad, res
                             in zip(gradients, state.residuals)]
        else:
            corrected = [numpy.array(grad, copy=True) for grad in gradients]

        update = self.compressor.compress(corrected, state.num_steps)
        restored = self.compressor.decompress(update)
        state.residuals = [corr - rest for corr, rest
                           in zip(corrected, restored)]
        self.last_corrected = corrected
        LOGGER.debug("%s step %d: %d payload bytes", self.compressor.name,
                     state.num_steps, self.compressor.payload_bytes(update))
        state.num_steps += 1
        return update


def covap_compress(gradients, state, cfg):
    """
    Run one COVAP step with error feedback on `gradients` using `state`.
    Return (CompressedUpdate, state); `state` is updated in place.
    """
    coefficient = cfg.coefficient if cfg.ef_enabled else None
    feedback = ErrorFeedback(CovapCompressor(cfg), coefficient=coefficient,
                             state=state)
    update = feedback.step(gradients)
    return update, state


def covap_decompress(update, numels=None):
    """
    Return full-width tensor vectors with the payload of `update` at the
    selected tensors and zeros elsewhere.
    """
    if numels is None:
        numels = update.layout
    result = [numpy.zeros(numel, dtype=update.dtype) for numel in numels]
    for idx, vec in update.payload.items():
        if not 0 <= idx < len(numels):
            raise CompressorInputError("tensor index %r out of range [0, %d)"
                                       % (idx, len(numels)))
        if vec.shape[0] != numels[idx]:
            raise CompressorInputError("tensor %d: payload has %d elements, "
                                       "expected %d" % (idx, vec.shape[0],
                                                        numels[idx]))
        result[idx] = numpy.array(vec, dtype=update.dtype, copy=True)
    return result


def direct_operator(tensors, num_steps, interval, selection=None):
    """
    Evaluate the COVAP operator on `tensors` directly: tensors selected at
    `num_steps` are kept, all others are zeroed.
    """
    selected = select_tensors(num_steps, interval, len(tensors), selection)
    return [vec.copy() if idx in selected else numpy.zeros_like(vec)
            for idx, vec in enumerate(tensors)]


def split_flat(vector, offsets):
    """Split a flat vector into tensor views along [start, end) offsets."""
    return [vector[start:end] for start, end in offsets]
