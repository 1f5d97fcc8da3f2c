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
Virtual clock event engine.

An Engine implements a loop that pops timers from a queue ordered by
(fire date, worker, tensor, sequence number), advances its clock to the
fire date and calls the matching ``ev_<kind>`` method of the timer's
event handler. Handlers schedule new timers relative to the current
clock. Nothing here depends on wall-clock time, so identical inputs
always produce the identical sequence of events.
"""

import heapq
import logging


LOGGER = logging.getLogger(__name__)

# Define epsilon value for time float arithmetic operations
EPSILON = 1.0e-9


class EngineException(Exception):
    """
    Base engine exception.
    """

class EngineIllegalOperationError(EngineException):
    """
    Error raised when an illegal operation has been performed.
    """

class EngineAlreadyRunningError(EngineIllegalOperationError):
    """
    Error raised when the engine is already running.
    """


class EngineTimer(object):
    """
    A one-shot timer firing `fire_delay` milliseconds after the engine
    clock at the time it is added. When fired, the engine calls
    ``handler.ev_<kind>(timer)``.
    """

    def __init__(self, fire_delay, handler, kind, worker=0, tensor=0):
        if fire_delay < -EPSILON:
            raise EngineIllegalOperationError("negative fire delay %r"
                                              % fire_delay)
        self.fire_delay = max(fire_delay, 0.0)
        self.eh = handler
        assert self.eh is not None, "An event handler is needed for timer."
        self.kind = kind
        self.worker = worker
        self.tensor = tensor
        self.fire_date = None
        self._engine = None

    def _set_engine(self, engine):
        """
        Bind to engine, called by Engine.
        """
        if self._engine:
            # A timer can be registered to only one engine at a time.
            raise EngineIllegalOperationError("Already bound to engine.")

        self._engine = engine

    def _fire(self):
        self._engine = None
        getattr(self.eh, 'ev_%s' % self.kind)(self)

    def __repr__(self):
        return "<EngineTimer %s w=%d t=%d @%r>" % (self.kind, self.worker,
                                                   self.tensor,
                                                   self.fire_date)


class _EngineTimerQ(object):

    class _EngineTimerCase(object):
        """
        Helper class that allows comparisons of fire dates, to be easily
        used in an heapq. Ties are broken by worker, tensor and insertion
        order.
        """
        def __init__(self, client, now, seq):
            self.client = client
            self.fire_date = self.client.fire_delay + now
            self.client.fire_date = self.fire_date
            self.key = (self.fire_date, client.worker, client.tensor, seq)

        def __lt__(self, other):
            return self.key < other.key


    def __init__(self, engine):
        """
        Initializer.
        """
        self._engine = engine
        self.timers = []
        self._seq = 0

    def __len__(self):
        """
        Return the number of pending timers.
        """
        return len(self.timers)

    def schedule(self, client):
        """
        Insert a client's timer.
        """
        heapq.heappush(self.timers,
                       _EngineTimerQ._EngineTimerCase(client,
                                                      self._engine.clock,
                                                      self._seq))
        self._seq += 1

    def pop_next(self):
        """
        Remove and return the next timer case, or None.
        """
        if not self.timers:
            return None
        return heapq.heappop(self.timers)

    def clear(self):
        """
        Drop all pending timers.
        """
        for timercase in self.timers:
            timercase.client._engine = None
        self.timers = []


class Engine(object):
    """
    Deterministic discrete-event engine with a virtual clock in
    milliseconds.
    """

    def __init__(self):
        """Initialize engine."""
        self.clock = 0.0
        self.timerq = _EngineTimerQ(self)
        self.running = False
        self.fired = 0

    def add_timer(self, timer):
        """Add a timer instance to engine."""
        timer._set_engine(self)
        self.timerq.schedule(timer)

    def schedule(self, fire_delay, handler, kind, worker=0, tensor=0):
        """Create, add and return a new EngineTimer."""
        timer = EngineTimer(fire_delay, handler, kind, worker, tensor)
        self.add_timer(timer)
        return timer

    def run(self):
        """Run engine in calling thread until no timer is left."""
        if self.running:
            raise EngineAlreadyRunningError()

        try:
            self.running = True
            while True:
                timercase = self.timerq.pop_next()
                if timercase is None:
                    break
                if timercase.fire_date < self.clock:
                    raise EngineIllegalOperationError(
                        "timer %r scheduled in the past" % timercase.client)
                self.clock = timercase.fire_date
                self.fired += 1
                timercase.client._fire()
        finally:
            self.timerq.clear()
            self.running = False
        LOGGER.debug("engine stopped at %r ms after %d events", self.clock,
                     self.fired)
        return self.clock
