"""Classes and methods for configuring logging and simulation runs"""


from .printing import print1, PyricoError

import logging
import os


logger = logging.getLogger(__name__)


def init_logging(file_prefix=None, debug=False, log_level_name='warning'):
    """
    Attach handlers to the root logger.

    :param file_prefix: Prefix of the log file; if None, records are written to stderr
    :type file_prefix: str
    :param debug: Whether to write an additional debug-level log file
    :type debug: bool
    :param log_level_name: One of debug, info, warning, error, critical, none or their first letters
    :type log_level_name: str
    """
    file_name = '%s.log' % file_prefix if file_prefix else None

    # Parse log level
    if log_level_name == 'debug' or log_level_name == 'd':
        log_level = logging.DEBUG
    elif log_level_name == 'info' or log_level_name == 'i':
        log_level = logging.INFO
    elif log_level_name == 'warning' or log_level_name == 'w':
        log_level = logging.WARNING
    elif log_level_name == 'error' or log_level_name == 'e':
        log_level = logging.ERROR
    elif log_level_name == 'critical' or log_level_name == 'c':
        log_level = logging.CRITICAL
    elif log_level_name == 'none' or log_level_name == 'n':
        log_level = logging.CRITICAL
        file_name = os.devnull
    else:
        raise ConfigError('Invalid log level setting "%s"' % log_level_name)

    fmt = logging.Formatter(fmt='%(asctime)s %(name)-20s %(levelname)-8s %(processName)-10s %(message)s')

    if file_name:
        handler = logging.FileHandler(file_name, mode='a')
    else:
        handler = logging.StreamHandler()
    handler.setLevel(log_level)
    handler.setFormatter(fmt)

    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    root.addHandler(handler)

    dlog = logging.getLogger('distributed')
    dlog.handlers[:] = []
    dlog.setLevel(max(logging.WARNING, log_level))
    dlog.addHandler(handler)

    asynclog = logging.getLogger('asyncio')
    asynclog.setLevel(999)  # Higher than critical -> silent

    if debug and file_prefix:
        dfh = logging.FileHandler('%s_debug.log' % file_prefix, mode='a')
        dfh.setLevel(logging.DEBUG)
        dfh.setFormatter(fmt)
        root.addHandler(dfh)


def reinit_logging(file_prefix=None, debug=False, log_level_name='warning'):
    """
    Shut down logging, then restart it.
    Used after starting a dask Client, which replaces the root handlers.
    """
    if logging.root:
        del logging.root.handlers[:]
    init_logging(file_prefix, debug, log_level_name)


class Configuration(object):
    def __init__(self, d=None):
        """
        Instantiates a Configuration object using a dictionary generated by the configuration file parser (or read
        from JSON). Default key, value pairs are used for pairs not present in the provided dictionary.

        :param d: The result from parsing a configuration file
        :type d: dict
        """
        d = dict(d) if d else dict()
        self.check_unknown_keys(d)
        self.config = self.default_config()
        for k, v in d.items():
            self.config[k] = v
        self._check_values()
        logger.debug('Completed configuration')

    @staticmethod
    def default_config():
        """Default configuration values"""
        default = {
            'monitor_period': 1.0, 'latency_persistence_window': 10.0, 'node_down_timeout': 50.0,
            'heuristic_solver_delay': 5.0, 'redeploy_duration': 35.0, 'sim_horizon': 300.0, 'rng_seed': 0,
            'exact_budget': 60.0, 'exact_node_time': 1e-4, 'exact_node_limit': 200000,
            'spike_probability': 0.0, 'spike_ms': 5.0,
            'scenario': 'none', 'spike_e2': None, 'spike_added_ms': 10.0, 'spike_at': 150.0, 'spike_duration': None,
            'crash_cn': None, 'crash_at': 40.0, 'crash_downtime': None,
        }
        return default

    @staticmethod
    def duration_keys():
        """Keys whose value must be strictly positive"""
        return ('monitor_period', 'latency_persistence_window', 'node_down_timeout', 'heuristic_solver_delay',
                'redeploy_duration', 'sim_horizon', 'exact_budget', 'exact_node_time')

    @classmethod
    def check_unknown_keys(cls, conf_dict):
        """
        Raises a ConfigError for any key that no part of the program reads.

        :param conf_dict: The config dictionary
        """
        unknown = sorted(set(conf_dict.keys()) - set(cls.default_config().keys()))
        if unknown:
            logger.error('Unknown configuration keys: %s', ', '.join(unknown))
            raise UnknownKeyError('Unknown configuration key(s): %s' % ', '.join(unknown))

    def _check_values(self):
        for k in self.duration_keys():
            try:
                v = float(self.config[k])
            except (TypeError, ValueError):
                raise ConfigError('Configuration key %s must be a number, got %r' % (k, self.config[k]))
            if v <= 0.:
                raise ConfigError('Configuration key %s must be positive, got %s' % (k, v))
            self.config[k] = v
        if not 0. <= float(self.config['spike_probability']) <= 1.:
            raise ConfigError('spike_probability must lie in [0, 1], got %s' % self.config['spike_probability'])
        if int(self.config['exact_node_limit']) < 1:
            raise ConfigError('exact_node_limit must be at least 1')
        if self.config['scenario'] not in ('none', 'spike', 'crash'):
            raise ConfigError('scenario must be one of none, spike, crash; got %s' % self.config['scenario'])
        for k in ('spike_duration', 'crash_downtime'):
            if self.config[k] is not None and float(self.config[k]) <= 0.:
                raise ConfigError('Configuration key %s must be positive when given' % k)
        if self.config['spike_probability'] > 0.:
            print1('Warning: measurement spikes enabled with probability %s' % self.config['spike_probability'])

    def sim_config(self):
        """
        :return: The simulation settings held by this configuration
        :rtype: pyrico.orchestrator.SimConfig
        """
        from .orchestrator import SimConfig
        c = self.config
        return SimConfig(monitor_period=c['monitor_period'],
                         latency_persistence_window=c['latency_persistence_window'],
                         node_down_timeout=c['node_down_timeout'],
                         heuristic_solver_delay=c['heuristic_solver_delay'],
                         redeploy_duration=c['redeploy_duration'],
                         sim_horizon=c['sim_horizon'],
                         rng_seed=int(c['rng_seed']),
                         exact_budget=c['exact_budget'],
                         exact_node_time=c['exact_node_time'],
                         exact_node_limit=int(c['exact_node_limit']),
                         spike_probability=float(c['spike_probability']),
                         spike_ms=float(c['spike_ms']))


class ConfigError(PyricoError):
    exit_code = 2


class UnknownKeyError(ConfigError):
    pass
