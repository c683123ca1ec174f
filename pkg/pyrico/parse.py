"""Grammar and methods for parsing the simulation configuration file"""


from .printing import PyricoError
from .config import Configuration, ConfigError

from string import punctuation

import json
import logging
import pyparsing as pp
import re


logger = logging.getLogger(__name__)


numkeys_int = ['rng_seed', 'exact_node_limit']
numkeys_float = ['monitor_period', 'latency_persistence_window', 'node_down_timeout', 'heuristic_solver_delay',
                 'redeploy_duration', 'sim_horizon', 'exact_budget', 'exact_node_time', 'spike_probability',
                 'spike_ms', 'spike_added_ms', 'spike_at', 'crash_at']
optnumkeys = ['spike_duration', 'crash_downtime']
strkeylist = ['scenario', 'spike_e2', 'crash_cn']


def parse(s):
    equals = pp.Suppress('=')
    comment = pp.Suppress(pp.Optional(pp.Literal('#') - pp.ZeroOrMore(pp.Word(pp.printables))))

    # single str value
    strkeys = pp.oneOf(' '.join(strkeylist), caseless=True)
    string = pp.Word(pp.alphanums + punctuation.replace('#', ''))
    strgram = strkeys - equals - string - comment

    # single num value
    numkeys = pp.oneOf(' '.join(numkeys_int + numkeys_float), caseless=True)
    point = pp.Literal(".")
    e = pp.CaselessLiteral("E")
    num = pp.Combine(pp.Word("+-" + pp.nums, pp.nums) +
                     pp.Optional(point + pp.Optional(pp.Word(pp.nums))) +
                     pp.Optional(e + pp.Word("+-" + pp.nums, pp.nums)))
    numgram = numkeys - equals - num - comment

    # num value that may be switched off with 'none'
    optkeys = pp.oneOf(' '.join(optnumkeys), caseless=True)
    nonetoken = pp.CaselessLiteral('none')
    optgram = optkeys - equals - (num | nonetoken) - comment

    line = (strgram | numgram | optgram).parseString(s, parseAll=True).asList()

    return line


def ploop(ls):  # parse loop
    d = {}
    for i, line in enumerate(ls):
        if re.match(r'\s*$', line) or re.match(r'\s*#', line):
            continue
        try:
            logger.debug('Parsing line %s' % line.strip())
            l = parse(line)
        except pp.ParseBaseException as pe:
            logger.error('Error parsing configuration line %i: %s', i + 1, line.strip())
            raise ConfigError('Parsing error on line %i of the configuration file:\n%s\n%s' %
                              (i + 1, line.strip(), pe))
        key = l[0]
        if key in d:
            raise ConfigError('Configuration key %s is specified more than once' % key)
        if key in numkeys_int:
            d[key] = int(l[1])
        elif key in numkeys_float:
            d[key] = float(l[1])
        elif key in optnumkeys:
            d[key] = None if l[1].lower() == 'none' else float(l[1])
        else:
            d[key] = l[1]
    return d


def load_config(path):
    """
    Reads a configuration file in key = value form, or JSON when the file name ends in .json

    :param path: Path to the configuration file
    :type path: str
    :rtype: Configuration
    """
    try:
        infile = open(path, 'r')
    except FileNotFoundError:
        raise PyricoError('Configuration file %s not found' % path)
    with infile:
        if path.endswith('.json'):
            try:
                param_dict = json.load(infile)
            except ValueError as err:
                raise ConfigError('Configuration file %s is not valid JSON: %s' % (path, err))
            if not isinstance(param_dict, dict):
                raise ConfigError('Configuration file %s must contain a JSON object' % path)
        else:
            param_dict = ploop(infile.readlines())
    return Configuration(param_dict)
