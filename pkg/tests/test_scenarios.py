from .context import scenarios
from .context import model
from .context import config
from .context import heuristic
from . import oracle

import json
import numpy as np
import pytest


class TestScenarios:

    @classmethod
    def setup_class(cls):
        cls.small = scenarios.TierSpec(tiers=[scenarios.TierRow(2, 10., (4., 2., 1.), 32., 64., 256.),
                                              scenarios.TierRow(4, 20., (8., 4., 2.), 16., 32., 256.),
                                              scenarios.TierRow(8, 30., (16., 8., 4.), 8., 16., 256.)])
        cls.tiny = oracle.tiny_instance()

    def test_default_tiers(self):
        t = scenarios.TierSpec()
        assert [r.e2_count for r in t.tiers] == [5, 20, 487]
        assert t.n_sites == 512
        assert t.tiers[2].proc == 8.
        assert t.demands['nib'] == (1., 2., 50.)

    def test_generate(self):
        inst = scenarios.generate_hierarchical_topology(self.small, 5, seed=3)
        assert model.validate_instance(inst) == []
        assert inst.e2_ids == ['n%03d' % i for i in range(1, 15)]
        assert inst.cn_ids == ['c0', 'c001', 'c002', 'c003', 'c004', 'c005']
        # edge CNs fill the lowest tier first
        assert all(inst.cn_by_id[m].tier == 3 for m in inst.cn_ids[1:])
        assert inst.cloud.id == 'c0'
        assert inst.graph.node_order[:14] == inst.e2_ids
        assert [a.id for a in inst.xapps] == ['xapp1', 'xapp2']
        assert all(a.rho_ms == 10. and a.needs_data for a in inst.xapps)

    def test_latencies(self):
        inst = scenarios.generate_hierarchical_topology(self.small, 14, seed=3)
        g = inst.graph
        # a tier-1 site is one cloud link away from c0, a CN one access link away from its site
        assert g.lat('n001', 'c0') == 4.
        tier3_cn = [c.id for c in inst.compute_nodes if c.tier == 3][0]
        assert min(g.lat(e, tier3_cn) for e in inst.e2_ids) == 1.
        for e in inst.e2_nodes:
            if e.tier == 2:
                assert g.lat(e.id, 'c0') - 4. in (1., 2., 3.)
        assert np.array_equal(g.latency, g.latency.T)

    def test_deterministic(self):
        a = scenarios.generate_hierarchical_topology(self.small, 6, seed=9)
        b = scenarios.generate_hierarchical_topology(self.small, 6, seed=9)
        assert a.to_dict() == b.to_dict()
        c = scenarios.generate_hierarchical_topology(self.small, 6, seed=10)
        assert c.to_dict() != a.to_dict()

    def test_bad_counts(self):
        with pytest.raises(config.ConfigError):
            scenarios.generate_hierarchical_topology(self.small, 15)
        with pytest.raises(config.ConfigError):
            scenarios.generate_hierarchical_topology(self.small, -1)
        with pytest.raises(config.ConfigError):
            scenarios.generate_hierarchical_topology(scenarios.TierSpec(tiers=[]), 0)

    def test_tier_file(self, tmp_path):
        path = str(tmp_path / 'tiers.json')
        with open(path, 'w') as f:
            json.dump(self.small.to_dict(), f)
        back = scenarios.TierSpec.load(path)
        assert back.to_dict() == self.small.to_dict()
        with open(path, 'w') as f:
            json.dump({'tiers': [], 'colour': 'red'}, f)
        with pytest.raises(config.ConfigError):
            scenarios.TierSpec.load(path)

    def test_spike(self):
        initial = heuristic.solve_heuristic(self.tiny)
        sched = scenarios.scenario_latency_spike(self.tiny, 'n2', 10., 150., initial=initial)
        assert len(sched) == 1
        t, fault = sched.entries[0]
        assert t == 150.
        assert fault.kind == 'LatencyDelta'
        assert fault.link == ('n2', 'c1')
        assert fault.duration is None
        with pytest.raises(config.ConfigError):
            scenarios.scenario_latency_spike(self.tiny, 'zz', initial=initial)

    def test_crash(self):
        sched = scenarios.scenario_cn_crash(self.tiny, 'c1', 40., downtime=20.)
        t, fault = sched.entries[0]
        assert (t, fault.cn, fault.duration) == (40., 'c1', 20.)
        with pytest.raises(scenarios.CloudCrashUnsupported) as info:
            scenarios.scenario_cn_crash(self.tiny, 'c0')
        assert info.value.exit_code == 2
        with pytest.raises(config.ConfigError):
            scenarios.scenario_cn_crash(self.tiny, 'c7')

    def test_defaults(self):
        initial = heuristic.solve_heuristic(self.tiny)
        assert scenarios.default_spike_e2(self.tiny) == 'n2'
        assert scenarios.default_crash_cn(self.tiny, initial) == 'c1'
        assert scenarios.loop_hosts(self.tiny, initial) == {'c1'}

    def test_schedule_horizon(self):
        sched = scenarios.FaultSchedule([(400., scenarios.CnCrash('c1'))])
        with pytest.raises(config.ConfigError):
            sched.check_horizon(300.)
        sched.check_horizon(500.)

    def test_schedule_dict(self):
        sched = scenarios.FaultSchedule([(150., scenarios.LatencyDelta(('n2', 'c1'), 10., 30.)),
                                         (40., scenarios.CnCrash('c2', None))])
        d = sched.to_dict()
        assert [f['time'] for f in d['faults']] == [40., 150.]
        back = scenarios.FaultSchedule.from_dict(json.loads(json.dumps(d)))
        assert back.to_dict() == d
        with pytest.raises(config.ConfigError):
            scenarios.fault_from_dict({'fault': 'Meteor'})

    def test_manifest(self, tmp_path):
        sched = scenarios.FaultSchedule([(40., scenarios.CnCrash('c1'))])
        conf = config.Configuration({'scenario': 'crash', 'crash_cn': 'c1'})
        path = str(tmp_path / 'manifest.json')
        scenarios.write_manifest(path, 'tiny.json', sched, conf)
        inst_path, back, cfg = scenarios.read_manifest(path)
        assert inst_path == 'tiny.json'
        assert back.to_dict() == sched.to_dict()
        assert cfg['crash_cn'] == 'c1'
        assert cfg['node_down_timeout'] == 50.
