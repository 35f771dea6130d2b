#!/usr/bin/env python3
#
# common.py - part of the lbamm tools
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

# common.py is imported by all modules, only numpy among the numerical
# libraries belongs here.

import git
import io
import os
import re
import sys
import json
import time
import logging
from binascii import hexlify
from datetime import datetime, timezone

import numpy as np
import yaml
try:
    from yaml import CSafeLoader as SafeLoader
except ImportError:
    from yaml import SafeLoader

from . import _
from .exception import ValidationException

# The path to this lbamm distribution
LBAMM_PATH = os.path.realpath(os.path.join(os.path.dirname(__file__), '..'))

SIGNIFICANT_DIGITS = 10

# compact "key=value,key=value" specs as given to --synth
KEY_VALUE_REGEX = re.compile(r'^\s*([a-zA-Z_][a-zA-Z0-9_]*)\s*=\s*([^,=]+?)\s*$')

config = None
options = None
warnings_action = None


default_config = {
    'utility': 'log',
    'fee_level': 0.0,
    'initial_cash': 100.0,
    'seed': None,
    'output': 'output',
    'atoms': None,
    'weights': None,
    'liquidity': None,
    'data': None,
    'outcome': 'A',
    'synth_rows': 2016,
    'synth_cadence': 600,
    'synth_spread_bps': 476.0,
    'synth_mid': 0.5,
    'synth_start': 1674864000,
    'sigmas': [0.05, 0.25, 0.5],
    'gammas': [round(0.005 * i, 3) for i in range(11)],
    'paths': 500,
    'dt': 60.0,
    'stableswap_lambda': 2.0,
    'workers': 1,
    'spot': 1.0,
    'bs_sigma': 0.25,
    'rate': 0.0,
    'tau': 0.25,
    'grid_atoms': 2001,
    'grid_width': 6.0,
    'epsilon': 1e-6,
    'strike': 1.0,
    'put_sizes': [50, 100],
    'call_contracts': 100,
    'call_caps': [round(0.05 * 1.5 ** i, 6) for i in range(20)],
    'selftest_instances': 1000,
}


def setup_global_opts(parser):
    parser.add_argument("-v", "--verbose", action="store_true", default=False,
                        help=_("Spew out even more information than normal"))
    parser.add_argument("-q", "--quiet", action="store_true", default=False,
                        help=_("Restrict output to warnings and errors"))
    parser.add_argument("-W", choices=['error', 'warn', 'ignore'], default='warn',
                        help=_("force flagged conditions to be errors, or ignore"))
    parser.add_argument("--config", default=None,
                        help=_("Read settings from this YAML or JSON file"))


def warn_or_exception(value, cause=None):
    '''output warning or Exception depending on -W'''
    if warnings_action == 'ignore':
        pass
    elif warnings_action == 'error':
        if cause:
            raise ValidationException(value) from cause
        else:
            raise ValidationException(value)
    else:
        logging.warning(value)


def fill_config_defaults(thisconfig):
    for k, v in default_config.items():
        if k not in thisconfig:
            thisconfig[k] = v

    if thisconfig['seed'] is None and os.getenv('LBAMM_SEED') is not None:
        try:
            thisconfig['seed'] = int(os.getenv('LBAMM_SEED'))
        except ValueError:
            raise ValidationException(_("LBAMM_SEED must be an integer, not '{seed}'")
                                      .format(seed=os.getenv('LBAMM_SEED')))

    for k in ('sigmas', 'gammas', 'put_sizes', 'call_caps'):
        if isinstance(thisconfig[k], str):
            thisconfig[k] = parse_float_list(thisconfig[k])


def read_config(opts, config_file='lbamm.yml'):
    """Read the run config

    The config is read from the file given with --config, or from
    config_file in the current directory if it exists.  Both YAML and
    JSON are accepted.  Missing keys are filled in from default_config.

    """
    global config, options, warnings_action

    if config is not None:
        return config

    options = opts
    if opts is not None:
        warnings_action = getattr(opts, 'W', None)
        if getattr(opts, 'config', None):
            config_file = opts.config
            if not os.path.isfile(config_file):
                raise ValidationException(_("Config file '{path}' does not exist")
                                          .format(path=config_file))

    config = {}

    if os.path.isfile(config_file):
        logging.debug(_("Reading '{config_file}'").format(config_file=config_file))
        with io.open(config_file, 'r', encoding='utf-8') as fp:
            try:
                data = yaml.load(fp, Loader=SafeLoader)
            except yaml.YAMLError as e:
                raise ValidationException(_("Could not parse '{path}'").format(path=config_file),
                                          str(e))
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ValidationException(_("'{path}' must hold a mapping of settings")
                                      .format(path=config_file))
        if not config_file.endswith('.json'):
            problems = run_yamllint(config_file)
            if problems:
                logging.warning(problems)
        for k in data:
            if k not in default_config:
                warn_or_exception(_("Unknown setting '{key}' in '{path}'")
                                  .format(key=k, path=config_file))
        config.update(data)
    else:
        logging.debug(_("No '{config_file}' found, using defaults.").format(config_file=config_file))

    fill_config_defaults(config)

    return config


def merge_options(thisconfig, opts, keys):
    """Let command line flags override config values

    keys maps option attribute names to config keys; options left at
    None are not applied.

    """
    for optkey, configkey in keys.items():
        value = getattr(opts, optkey, None)
        if value is not None:
            thisconfig[configkey] = value
    return thisconfig


def parse_key_values(spec):
    """Parse 'seed=42,rows=2016,spread=476' into a dict of numbers or strings"""
    result = {}
    if not spec:
        return result
    for item in spec.split(','):
        m = KEY_VALUE_REGEX.match(item)
        if not m:
            raise ValidationException(_('Not a valid key=value item: "{item}"').format(item=item))
        key, value = m.group(1), m.group(2)
        try:
            number = float(value)
            result[key] = int(number) if number.is_integer() and '.' not in value \
                and 'e' not in value.lower() else number
        except ValueError:
            result[key] = value
    return result


def parse_float_list(text):
    try:
        return [float(v) for v in text.split(',') if v.strip() != '']
    except ValueError:
        raise ValidationException(_('Could not parse number list "{text}"').format(text=text))


def round_sig(value, digits=SIGNIFICANT_DIGITS):
    if value == 0 or not np.isfinite(value):
        return float(value)
    return float('{:.{}g}'.format(value, digits))


class Encoder(json.JSONEncoder):
    """JSON encoder for reports, numbers carry 10 significant digits"""

    def default(self, obj):
        if isinstance(obj, set):
            return sorted(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        return super().default(obj)

    def iterencode(self, o, _one_shot=False):
        return super().iterencode(_round_floats(o), _one_shot)


def _round_floats(obj):
    if isinstance(obj, (float, np.floating)):
        return round_sig(float(obj))
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def ensure_output_dir(path):
    if not os.path.exists(path):
        os.makedirs(path)
    return path


def write_json(output, path, pretty=True):
    ensure_output_dir(os.path.dirname(path) or '.')
    with open(path, 'w') as fp:
        if pretty:
            json.dump(output, fp, sort_keys=True, cls=Encoder, indent=2)
        else:
            json.dump(output, fp, sort_keys=True, cls=Encoder, separators=(',', ':'))
    logging.info(_("Wrote '{path}'").format(path=path))
    return path


def write_csv(frame, path):
    """Write a pandas DataFrame with 10 significant digits"""
    ensure_output_dir(os.path.dirname(path) or '.')
    frame.to_csv(path, index=False, float_format='%.{}g'.format(SIGNIFICANT_DIGITS))
    logging.info(_("Wrote '{path}'").format(path=path))
    return path


def setup_status_output(start_timestamp):
    """Create the common header for every report"""
    output = {
        'commandLine': sys.argv,
        'startTimestamp': int(time.mktime(start_timestamp) * 1000),
        'subcommand': sys.argv[0].split()[1] if len(sys.argv[0].split()) > 1 else None,
    }
    if os.path.isdir(os.path.join(LBAMM_PATH, '.git')):
        try:
            git_repo = git.repo.Repo(LBAMM_PATH)
            output['lbamm'] = {
                'commitId': get_head_commit_id(git_repo),
                'isDirty': git_repo.is_dirty(),
            }
        except (git.exc.GitError, ValueError) as e:
            logging.debug(_("Could not read git state: {error}").format(error=e))
    return output


def finish_status_output(output):
    output['endTimestamp'] = int(datetime.now(timezone.utc).timestamp() * 1000)
    return output


def get_head_commit_id(git_repo):
    """Get git commit ID for HEAD as a str

    repo.head.commit.binsha is a bytearray stored in a str
    """
    return hexlify(bytearray(git_repo.head.commit.binsha)).decode()


def force_exit(exitvalue=0):
    """force exit when worker threads could block the exit"""
    sys.stdout.flush()
    sys.stderr.flush()
    os._exit(exitvalue)


YAML_LINT_CONFIG = {'extends': 'default',
                    'rules': {'document-start': 'disable',
                              'line-length': 'disable',
                              'truthy': 'disable'}}


def run_yamllint(path, indent=0):

    try:
        import yamllint.config
        import yamllint.linter
    except ImportError:
        return ''

    result = []
    with open(path, 'r', encoding='utf-8') as f:
        problems = yamllint.linter.run(f, yamllint.config.YamlLintConfig(json.dumps(YAML_LINT_CONFIG)))
    for problem in problems:
        result.append(' ' * indent + path + ':' + str(problem.line) + ': ' + problem.message)
    return '\n'.join(result)


def check_range(name, value, low=None, high=None, low_open=False, high_open=False):
    """Raise ValidationException unless value lies in the given interval"""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationException(_("'{name}' must be a number, not '{value}'")
                                  .format(name=name, value=value))
    bad = not np.isfinite(value)
    if low is not None:
        bad = bad or (value <= low if low_open else value < low)
    if high is not None:
        bad = bad or (value >= high if high_open else value > high)
    if bad:
        raise ValidationException(_("'{name}' = {value} is out of range {lb}{low}, {high}{rb}")
                                  .format(name=name, value=value,
                                          lb='(' if low_open else '[',
                                          low='-inf' if low is None else low,
                                          high='inf' if high is None else high,
                                          rb=')' if high_open else ']'))
    return value


def setup_market_opts(parser):
    """Options describing a single market, shared by quote and pool"""
    parser.add_argument("--utility", default=None,
                        help=_("Market maker utility, e.g. log, stableswap:lambda=2, "
                               "essinf:base=log,epsilon=0.4, hanson:gamma=0.7 or a JSON object"))
    parser.add_argument("--atoms", default=None,
                        help=_("Comma-separated outcome labels"))
    parser.add_argument("--weights", default=None,
                        help=_("Comma-separated outcome probabilities, uniform if omitted"))
    parser.add_argument("--liquidity", default=None,
                        help=_("Comma-separated remaining liquidity per outcome"))
    parser.add_argument("--cash", type=float, default=None,
                        help=_("Initial cash in every outcome when --liquidity is not given"))
    parser.add_argument("--gamma", type=float, default=None,
                        help=_("Fee level in [0, 1]"))


MARKET_OPTIONS = {
    'utility': 'utility',
    'atoms': 'atoms',
    'weights': 'weights',
    'liquidity': 'liquidity',
    'cash': 'initial_cash',
    'gamma': 'fee_level',
}


def _as_list(value):
    if value is None or isinstance(value, (list, tuple)):
        return value
    return [v.strip() for v in str(value).split(',') if v.strip() != '']


def read_market(thisconfig):
    """Build the MarketState described by the merged config"""
    from .engine import MarketState
    from .measure import OutcomeSpace

    liquidity = _as_list(thisconfig.get('liquidity'))
    atoms = _as_list(thisconfig.get('atoms'))
    weights = _as_list(thisconfig.get('weights'))
    if atoms is None:
        count = len(liquidity or weights or [0, 0])
        atoms = ['w%d' % (i + 1) for i in range(count)]
    if weights is None:
        space = OutcomeSpace.uniform(atoms)
    else:
        space = OutcomeSpace(atoms, [float(w) for w in weights])
    if liquidity is None:
        state = MarketState.initial(space, thisconfig['utility'], thisconfig['initial_cash'],
                                    fee_level=thisconfig['fee_level'])
    else:
        state = MarketState(space, thisconfig['utility'], [float(v) for v in liquidity],
                            fee_level=thisconfig['fee_level'])
    logging.debug(_("Market: {state}").format(state=state))
    return state


def read_payoff(space, text):
    """Parse '1,0' or 'A=1,B=0' into a Payoff on space"""
    from .measure import Payoff

    if isinstance(text, (list, tuple)):
        return Payoff(space, [float(v) for v in text])
    if '=' in text:
        values = [0.0] * space.size
        for key, value in parse_key_values(text).items():
            values[space.index(key)] = float(value)
        return Payoff(space, values)
    return Payoff(space, parse_float_list(text))
