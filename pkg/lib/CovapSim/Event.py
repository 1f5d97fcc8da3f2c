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
covap-sim event handling.

This module contains the :class:`.Event` trace record and the base class
:class:`.EventHandler` which defines the interface called by the
:class:`CovapSim.Engine.Engine.Engine` when simulation timers fire.
"""

COMPUTE_START = 'compute_start'
COMPUTE_END = 'compute_end'
COMPRESS_START = 'compress_start'
COMPRESS_END = 'compress_end'
COMM_START = 'comm_start'
COMM_END = 'comm_end'

EVENT_KINDS = (COMPUTE_START, COMPUTE_END, COMPRESS_START, COMPRESS_END,
               COMM_START, COMM_END)

# phase name of each event kind (compute, compress or comm)
PHASES = ('compute', 'compress', 'comm')


class Event(object):
    """One timestamped event of a simulated worker."""

    __slots__ = ('kind', 'tensor', 'worker', 'time')

    def __init__(self, kind, tensor, worker, time):
        if kind not in EVENT_KINDS:
            raise ValueError("unknown event kind %r" % (kind,))
        self.kind = kind
        self.tensor = tensor
        self.worker = worker
        self.time = time

    @property
    def phase(self):
        return self.kind.rsplit('_', 1)[0]

    def sort_key(self):
        return (self.time, self.worker, self.tensor)

    def __eq__(self, other):
        return isinstance(other, Event) and \
            (self.kind, self.tensor, self.worker, self.time) == \
            (other.kind, other.tensor, other.worker, other.time)

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "<Event %s w=%d t=%d %r>" % (self.kind, self.worker,
                                            self.tensor, self.time)


class EventHandler(object):
    """covap-sim EventHandler interface.

    Derived class should implement any of the following methods to listen
    for simulation timers. If not implemented, the default behavior is to
    do nothing. Every method receives the fired
    :class:`CovapSim.Engine.Engine.EngineTimer`, whose ``worker``,
    ``tensor`` and ``fire_date`` attributes identify the event.
    """

    def ev_compress_start(self, timer):
        """
        Called when a tensor starts being compressed.

        :param timer: fired timer
        """

    def ev_compress_end(self, timer):
        """
        Called when a tensor is compressed and ready to be communicated.

        :param timer: fired timer
        """

    def ev_compute_start(self, timer):
        """
        Called when the backward segment producing a tensor starts. The
        segment after the last effective tensor carries the tensor count.

        :param timer: fired timer
        """

    def ev_compute_end(self, timer):
        """
        Called when the backward segment producing a tensor ends.

        :param timer: fired timer
        """

    def ev_comm_start(self, timer):
        """
        Called when a worker issues the collective of a tensor. The
        collective itself starts once every worker has issued it.

        :param timer: fired timer
        """

    def ev_comm_end(self, timer):
        """
        Called when the collective of a tensor completes.

        :param timer: fired timer
        """
