#!/usr/bin/env python3
#
# lbamm/__main__.py - part of the lbamm tools
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

import os
import re
import sys
import logging

import lbamm.common
from lbamm import _
from lbamm.exception import LBAMMException, ValidationException
from argparse import ArgumentError
from collections import OrderedDict


COMMANDS = OrderedDict([
    ("quote", _("Price bets against a market maker state")),
    ("pool", _("Add or remove liquidity and replay pool events")),
    ("backtest", _("Replay money-line prices against a market maker")),
    ("derivatives", _("Sell options on a lognormal terminal price")),
    ("selftest", _("Check the market maker invariants on random markets")),
])


def print_help():
    print(_("usage: ") + _("lbamm [<command>] [-h|--help|--version|<args>]"))
    print("")
    print(_("Valid commands are:"))
    for cmd, summary in COMMANDS.items():
        print("   " + cmd + ' ' * (15 - len(cmd)) + summary)
    print("")


def print_version():
    output = _('no version info found!')
    cmddir = os.path.realpath(os.path.dirname(os.path.dirname(__file__)))
    if os.path.isdir(os.path.join(cmddir, '.git')):
        import git
        try:
            output = 'git commit ' + lbamm.common.get_head_commit_id(git.repo.Repo(cmddir))
        except (git.exc.GitError, ValueError):
            pass
    elif os.path.exists(os.path.join(cmddir, 'setup.py')):
        with open(os.path.join(cmddir, 'setup.py')) as fp:
            m = re.search(r'''.*[\s,\(]+version\s*=\s*["']([0-9a-z.]+)["'].*''',
                          fp.read(), flags=re.MULTILINE)
        if m:
            output = m.group(1)
    else:
        from pkg_resources import get_distribution
        output = get_distribution('lbamm').version
    print(output)


def main():
    if len(sys.argv) <= 1:
        print_help()
        sys.exit(0)

    command = sys.argv[1]
    if command not in COMMANDS:
        if command in ('-h', '--help'):
            print_help()
            sys.exit(0)
        elif command == '--version':
            print_version()
            sys.exit(0)
        else:
            print(_("Command '{command}' not recognised.\n").format(command=command))
            print_help()
            sys.exit(1)

    verbose = any(s in sys.argv for s in ['-v', '--verbose'])
    quiet = any(s in sys.argv for s in ['-q', '--quiet'])

    # Helpful to differentiate warnings from errors even when on quiet
    logformat = '%(asctime)s %(levelname)s: %(message)s'
    loglevel = logging.INFO
    if verbose:
        loglevel = logging.DEBUG
    elif quiet:
        loglevel = logging.WARN

    logging.basicConfig(format=logformat, level=loglevel)

    if verbose and quiet:
        logging.critical(_("Conflicting arguments: '--verbose' and '--quiet' "
                           "can not be specified at the same time."))
        sys.exit(1)

    # Trick argparse into displaying the right usage when --help is used.
    sys.argv[0] += ' ' + command

    del sys.argv[1]
    mod = __import__('lbamm.' + command, None, None, [command])

    try:
        mod.main()
    # These are ours, contain a proper message and are "expected"
    except LBAMMException as e:
        if verbose:
            raise
        else:
            logging.critical(str(e))
        sys.exit(2 if isinstance(e, ValidationException) else 1)
    except ArgumentError as e:
        logging.critical(str(e))
        sys.exit(2)
    except KeyboardInterrupt:
        print('')
        lbamm.common.force_exit(1)
    # These should only be unexpected crashes due to bugs in the code
    # str(e) often doesn't contain a reason, so just show the backtrace
    except Exception as e:
        logging.critical(_("Unknown exception found!"))
        raise e
    sys.exit(0)


if __name__ == "__main__":
    main()
