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
covap-sim is a simulator and desk-scale training library for COVAP, an
overlapping-aware gradient compression scheme for data-parallel training.

It models how gradient buckets are built and sharded, how a coarse-grained
tensor filter spreads communication over several iterations, how the
resulting collectives overlap with the backward pass, and how error
feedback keeps a compressed SGD run on track.

Please see first:
  - CovapSim.Topology
  - CovapSim.Compressor
  - CovapSim.Simulator
"""

__version__ = '0.3.0'
__version_info__ = tuple([ int(_n) for _n in __version__.split('.')])
__date__    = '2026/10/19'
