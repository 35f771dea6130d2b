#!/usr/bin/env python3

from setuptools import Command
from setuptools import setup
import subprocess
import sys


class VersionCheckCommand(Command):
    """Make sure git tag and version match before uploading"""
    user_options = []

    def initialize_options(self):
        """Abstract method that is required to be overwritten"""

    def finalize_options(self):
        """Abstract method that is required to be overwritten"""

    def run(self):
        version = self.distribution.get_version()
        version_git = subprocess.check_output(['git', 'describe', '--tags', '--always']).rstrip().decode('utf-8')
        if version != version_git:
            print('ERROR: Release version mismatch! setup.py (%s) does not match git (%s)'
                  % (version, version_git))
            sys.exit(1)
        print('Upload using: twine upload --sign dist/lbamm-%s.tar.gz' % version)


with open("README.md", "r") as fh:
    long_description = fh.read()

setup(name='lbamm',
      version='0.3',
      description='Liquidity-based automated market makers for prediction markets',
      long_description=long_description,
      long_description_content_type='text/markdown',
      license='AGPL-3.0',
      packages=['lbamm'],
      entry_points={
          'console_scripts': ['lbamm = lbamm.__main__:main'],
      },
      python_requires='>=3.7',
      cmdclass={'versioncheck': VersionCheckCommand},
      install_requires=[
          'GitPython',
          'numpy >= 1.17',
          'pandas >= 1.0',
          'PyYAML',
          'scipy >= 1.4',
          'yamllint',
      ],
      extras_require={
          'test': ['hypothesis', 'pytest'],
      },
      classifiers=[
          'Development Status :: 4 - Beta',
          'Intended Audience :: Financial and Insurance Industry',
          'Intended Audience :: Science/Research',
          'License :: OSI Approved :: GNU Affero General Public License v3 or later (AGPLv3+)',
          'Operating System :: POSIX',
          'Operating System :: MacOS :: MacOS X',
          'Operating System :: Unix',
          'Topic :: Office/Business :: Financial',
          'Topic :: Scientific/Engineering :: Mathematics',
      ],
      )
