#!/usr/bin/env python
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

import os
from setuptools import setup, find_packages


VERSION = '0.3.0'

# Default CFGDIR: in-prefix config install (pip as user)
CFGDIR = 'etc/covap-sim'

# Use system-wide CFGDIR instead when installing as root on Unix
try:
    if os.geteuid() == 0:
        CFGDIR = '/etc/covap-sim'
except AttributeError:  # Windows?
    pass

# Dependencies (for pip install)
REQUIRES = ['PyYAML', 'numpy']

setup(name='covap-sim',
      version=VERSION,
      package_dir={'': 'lib'},
      packages=find_packages('lib'),
      data_files=[(CFGDIR, ['conf/defaults.conf']),
                  (os.path.join(CFGDIR, 'experiments'),
                   ['conf/experiments/baselines.json',
                    'conf/experiments/bert.json',
                    'conf/experiments/ratio-sweep.yaml',
                    'conf/experiments/resnet101.json',
                    'conf/experiments/train-linear.json',
                    'conf/experiments/vgg19-shard.json',
                    'conf/experiments/vgg19.json']),
                  (os.path.join(CFGDIR, 'models'),
                   ['conf/models/vgg19-buckets.json'])],
      entry_points={'console_scripts':
                    ['covap-sim=CovapSim.CLI.Main:main'],
                   },
      author='The covap-sim developers',
      license='LGPLv2+',
      platforms=['GNU/Linux', 'BSD', 'MacOSX'],
      keywords=['covap', 'gradient compression', 'data parallel',
                'simulation'],
      description='COVAP gradient compression simulator and library',
      long_description=open('doc/txt/covap-sim.rst').read(),
      classifiers=[
          "Development Status :: 4 - Beta",
          "Environment :: Console",
          "Intended Audience :: Science/Research",
          "License :: OSI Approved :: GNU Lesser General Public License v2 or later (LGPLv2+)",
          "Operating System :: MacOS :: MacOS X",
          "Operating System :: POSIX :: BSD",
          "Operating System :: POSIX :: Linux",
          "Programming Language :: Python",
          "Programming Language :: Python :: 3",
          "Topic :: Scientific/Engineering :: Artificial Intelligence",
          "Topic :: System :: Distributed Computing"
      ],
      python_requires='>=3.6',
      install_requires=REQUIRES,
     )
