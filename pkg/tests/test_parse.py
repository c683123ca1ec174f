from .context import parse
from .context import config

import json
import pytest


class TestParse:

    @classmethod
    def setup_class(cls):
        cls.s = ['scenario = spike #inject a spike', 'monitor_period = 0.5', 'exact_node_time = 1e-4',
                 'rng_seed = 7', 'spike_duration = none', 'crash_downtime = 20', 'spike_e2 = e2-north_3',
                 '  # a comment', '', 'Node_Down_Timeout = 30']

    def test_grammar(self):
        assert parse.parse(self.s[0]) == ['scenario', 'spike']
        assert parse.parse(self.s[1]) == ['monitor_period', '0.5']
        assert parse.parse(self.s[2]) == ['exact_node_time', '1E-4']
        assert parse.parse(self.s[3]) == ['rng_seed', '7']
        assert parse.parse(self.s[4]) == ['spike_duration', 'none']
        assert parse.parse(self.s[6]) == ['spike_e2', 'e2-north_3']

    def test_capital(self):
        assert parse.parse(self.s[9]) == ['node_down_timeout', '30']

    def test_ploop(self):
        d = parse.ploop(self.s)
        assert d == {'scenario': 'spike', 'monitor_period': 0.5, 'exact_node_time': 1e-4, 'rng_seed': 7,
                     'spike_duration': None, 'crash_downtime': 20., 'spike_e2': 'e2-north_3',
                     'node_down_timeout': 30.}
        assert isinstance(d['rng_seed'], int)

    def test_bad_lines(self):
        with pytest.raises(config.ConfigError) as info:
            parse.ploop(['scenario = crash', 'monitor_period = fast'])
        assert 'line 2' in info.value.message
        with pytest.raises(config.ConfigError):
            parse.ploop(['colour = red'])
        with pytest.raises(config.ConfigError):
            parse.ploop(['rng_seed = 1', 'rng_seed = 2'])

    def test_load_config(self, tmp_path):
        path = tmp_path / 'sim.conf'
        path.write_text('scenario = crash\ncrash_cn = c1\nnode_down_timeout = 20\n')
        c = parse.load_config(str(path))
        assert c.config['scenario'] == 'crash'
        assert c.config['crash_cn'] == 'c1'
        assert c.sim_config().node_down_timeout == 20.

    def test_load_json(self, tmp_path):
        path = tmp_path / 'sim.json'
        path.write_text(json.dumps({'scenario': 'spike', 'spike_added_ms': 12.5}))
        c = parse.load_config(str(path))
        assert c.config['spike_added_ms'] == 12.5
        path.write_text('[1, 2]')
        with pytest.raises(config.ConfigError):
            parse.load_config(str(path))
        path.write_text('{"scenario": ')
        with pytest.raises(config.ConfigError):
            parse.load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(parse.PyricoError):
            parse.load_config(str(tmp_path / 'absent.conf'))
