from .context import heuristic
from .context import exact
from .context import model
from .context import scenarios
from . import oracle

import json
import numpy as np
import pytest
import threading
import time


class TestHeuristic:

    @classmethod
    def setup_class(cls):
        cls.tiny = oracle.tiny_instance()
        cls.spiked = cls.tiny.with_graph(cls.tiny.graph.with_link_delta('n2', 'c1', 10.))

    def test_tiny(self):
        alg = heuristic.Heuristic(self.tiny)
        sol = alg.run()
        assert sol.total_cost == 21.
        for e in ('n1', 'n2'):
            assert sol.config[e] == model.Configuration('c0', 'c1', 'c1', 'c1')
            assert sol.xapp_host[(e, 'x1')] == 'c1'
        assert alg.initial_solution == sol
        assert model.check_feasible(self.tiny, sol) == []

    def test_spiked_link(self):
        alg = heuristic.Heuristic(self.spiked)
        sol = alg.run()
        assert sol.config['n1'] == model.Configuration('c0', 'c1', 'c1', 'c1')
        assert sol.config['n2'] == model.Configuration('c0', 'c2', 'c1', 'c1')
        assert sol.xapp_host[('n2', 'x1')] == 'c1'
        assert sol.total_cost == 35.
        # Phase 1 put all of n2 on c2
        assert alg.initial_solution.total_cost == 40.
        assert model.check_feasible(self.spiked, sol) == []
        moves = [e for e in alg.phase_log if e['phase'] == 'move']
        assert [(m['e2'], m['component'], m['to']) for m in moves] == \
            [('n2', 'xapp:x1', 'c1'), ('n2', 'sdl', 'c1'), ('n2', 'nib', 'c1')]

    def test_everything_on_cloud(self):
        tiers = scenarios.TierSpec(tiers=[scenarios.TierRow(1, 10., (4., 2., 1.), 32., 64., 256.)], xapp_count=1,
                                   xapp_rho_ms=100.)
        inst = scenarios.generate_hierarchical_topology(tiers, 0)
        sol = heuristic.solve_heuristic(inst)
        assert sol.used == frozenset(['c0'])
        assert sol.total_cost == 7.
        assert sol.total_cost == exact.solve_exact(inst).best_cost

    def test_soundness_and_gap(self):
        gaps = []
        seed = 0
        while len(gaps) < 200 and seed < 2000:
            rng = np.random.RandomState(seed)
            inst = oracle.random_instance(1000 + seed, rng.randint(1, 5), rng.randint(2, 4), rng.randint(1, 3),
                                          chain=seed % 3 == 0)
            seed += 1
            try:
                alg = heuristic.Heuristic(inst)
                sol = alg.run()
            except (heuristic.HeuristicInfeasible, heuristic.NoFeasibleCN):
                continue
            assert model.check_feasible(inst, sol) == []
            assert oracle.violation_set(inst, sol) == set()
            assert sol.total_cost <= alg.initial_solution.total_cost
            res = exact.solve_exact(inst)
            assert res.status == exact.OPTIMAL
            assert sol.total_cost >= res.best_cost
            gaps.append((sol.total_cost - res.best_cost) / res.best_cost)
        assert len(gaps) >= 200
        print('Mean heuristic gap over %i instances: %.3f' % (len(gaps), float(np.mean(gaps))))

    def test_e2t_minimality(self):
        sol = heuristic.solve_heuristic(self.tiny)
        res = exact.solve_exact(self.tiny)
        assert sol.instance_counts()['e2t'] == res.best.instance_counts()['e2t'] == 1

    def test_e2t_minimality_on_tiered_topologies(self):
        # Evaluation tier costs, capacities and demands with a few E2 nodes; the top site has no edge CN
        for n in range(2, 7):
            rows = [scenarios.TierRow(1, 10., (4., 2., 1.), 32., 64., 256.),
                    scenarios.TierRow(1, 20., (8., 4., 2.), 16., 32., 256.),
                    scenarios.TierRow(n - 1, 30., (16., 8., 4.), 8., 16., 256.)]
            tiers = scenarios.TierSpec(tiers=rows, link_latency_choices=(5,))
            inst = scenarios.generate_hierarchical_topology(tiers, n_cns=n, seed=n)
            assert len(inst.compute_nodes) == n + 1
            sol = heuristic.solve_heuristic(inst)
            res = exact.solve_exact(inst)
            assert res.status == exact.OPTIMAL
            assert model.check_feasible(inst, sol) == []
            assert sol.instance_counts()['e2t'] == res.best.instance_counts()['e2t'] == n + 1
            assert sol.total_cost >= res.best_cost

    def test_default_topology_needs_local_cns(self):
        # a lowest-tier E2 node without a CN at its site misses 10 ms at round-trip factor 2
        inst = scenarios.generate_hierarchical_topology(n_cns=8, seed=1)
        with pytest.raises(heuristic.HeuristicInfeasible):
            heuristic.solve_heuristic(inst)
        inst = scenarios.generate_hierarchical_topology(n_cns=8, seed=1, round_trip_factor=1.)
        assert model.check_feasible(inst, heuristic.solve_heuristic(inst)) == []

    def test_probe_bound(self):
        for seed in range(20):
            inst = oracle.random_instance(seed, 4, 3, 2)
            alg = heuristic.Heuristic(inst)
            try:
                alg.run()
            except (heuristic.HeuristicInfeasible, heuristic.NoFeasibleCN):
                pass
            assert alg.probes <= heuristic.probe_bound(inst)

    def test_scalability(self):
        inst = scenarios.generate_hierarchical_topology(n_cns=512, seed=7)
        assert len(inst.e2_nodes) == 512
        start = time.perf_counter()
        alg = heuristic.Heuristic(inst)
        sol = alg.run()
        assert time.perf_counter() - start < 30.
        assert alg.probes <= heuristic.probe_bound(inst)
        assert model.check_feasible(inst, sol) == []

    def test_upstream(self):
        xapps = [model.XAppSpec('x1', 10., False, ('x2',)), model.XAppSpec('x2', 10., True)]
        inst = model.Instance(self.tiny.graph, self.tiny.e2_nodes, self.tiny.compute_nodes, self.tiny.demands, xapps)
        p = heuristic.Placement(inst)
        assert heuristic.upstream_of(inst, 'n1', model.E2T, p) == 'n1'
        p.assign('n1', model.E2T, 'c2')
        assert heuristic.upstream_of(inst, 'n1', 'xapp:x1', p) == 'c2'
        p.assign('n1', 'xapp:x1', 'c1')
        # x2 is called by x1
        assert heuristic.upstream_of(inst, 'n1', 'xapp:x2', p) == 'c1'
        p.assign('n1', 'xapp:x2', 'c0')
        # the first xApp needing data is x2
        assert heuristic.upstream_of(inst, 'n1', model.SDL, p) == 'c0'
        p.assign('n1', model.SDL, 'c2')
        assert heuristic.upstream_of(inst, 'n1', model.NIB, p) == 'c2'

    def test_sort_by_decreasing_cost(self):
        assert heuristic.sort_by_decreasing_cost(model.E2T, self.tiny) == ['c2', 'c1', 'c0']
        assert heuristic.sort_by_decreasing_cost('xapp:x1', self.tiny) == ['c2', 'c1', 'c0']

    def test_affected(self):
        xapps = [model.XAppSpec('x1', 10., False, ('x2',)), model.XAppSpec('x2', 10., True)]
        inst = model.Instance(self.tiny.graph, self.tiny.e2_nodes, self.tiny.compute_nodes, self.tiny.demands, xapps)
        assert heuristic.affected_xapps(inst, 'xapp:x2') == ['x1', 'x2']
        assert heuristic.affected_xapps(inst, 'xapp:x1') == ['x1']
        assert heuristic.affected_xapps(inst, model.RICMAN) == []
        assert heuristic.affected_xapps(inst, model.SDL) == ['x1', 'x2']

    def test_placement_sharing(self):
        p = heuristic.Placement(self.tiny)
        p.assign('n1', model.E2T, 'c1')
        p.assign('n2', model.E2T, 'c1')
        assert p.usage['c1'] == [2., 4., 2.]
        assert p.move_delta('n1', model.E2T, 'c2') == 14.
        p.release('n1', model.E2T)
        assert p.usage['c1'] == [2., 4., 2.]
        assert p.move_delta('n2', model.E2T, 'c2') == 0.
        p.release('n2', model.E2T)
        assert p.usage['c1'] == [0., 0., 0.]

    def test_re_place(self):
        p = heuristic.Placement(self.tiny)
        for c, m in [(model.RICMAN, 'c0'), (model.E2T, 'c2'), ('xapp:x1', 'c2'), (model.SDL, 'c2'), (model.NIB, 'c2')]:
            p.assign('n1', c, m)
        p.assign('n2', model.E2T, 'c1')
        order = heuristic.sort_by_decreasing_cost(model.E2T, self.tiny)
        # c0 is cheaper but breaks the loop; c1 is already active
        assert heuristic.re_place(model.E2T, order, p, self.tiny, 'n1') == 'c1'
        assert p.host_of('n1', model.E2T) == 'c1'
        assert p.refcount[('c2', model.E2T)] == 0
        assert p.loop('n1', 'x1') == 4.

    def test_re_place_without_room(self):
        inst = oracle.tiny_instance(c1_proc=1.)
        p = heuristic.Placement(inst)
        for c, m in [(model.RICMAN, 'c0'), (model.E2T, 'c2'), ('xapp:x1', 'c2'), (model.SDL, 'c2'), (model.NIB, 'c2')]:
            p.assign('n1', c, m)
        p.assign('n2', model.NIB, 'c1')
        usage = {m: list(u) for m, u in p.usage.items()}
        order = heuristic.sort_by_decreasing_cost(model.E2T, inst)
        # c0 breaks the loop and c1 is full
        assert heuristic.re_place(model.E2T, order, p, inst, 'n1') == 'c2'
        assert p.host_of('n1', model.E2T) == 'c2'
        assert p.usage == usage
        assert p.refcount.get(('c1', model.E2T), 0) == 0
        assert p.probes == 2

    def test_no_feasible_cn(self):
        inst = oracle.tiny_instance(c1_proc=1.).without_nodes(['c0', 'c2'])
        with pytest.raises(heuristic.NoFeasibleCN):
            heuristic.closest_cn(inst, 'n1', model.E2T, heuristic.Placement(inst))

    def test_infeasible(self):
        inst = oracle.tiny_instance(rho=1.)
        with pytest.raises(heuristic.HeuristicInfeasible) as info:
            heuristic.solve_heuristic(inst)
        assert len(info.value.violations) == 2
        assert info.value.violations[0].kind == model.LATENCY_EXCEEDED
        assert info.value.exit_code == 3

    def test_cancel(self):
        ev = threading.Event()
        ev.set()
        with pytest.raises(heuristic.SolverCancelled):
            heuristic.solve_heuristic(self.tiny, ev)

    def test_phase_log_file(self, tmp_path):
        alg = heuristic.Heuristic(self.tiny)
        alg.run()
        path = str(tmp_path / 'phases.jsonl')
        alg.write_phase_log(path)
        with open(path) as f:
            entries = [json.loads(line) for line in f]
        initial = [e for e in entries if e['phase'] == 'initial']
        assert len(initial) == 2 * 5
        assert entries[0] == {'phase': 'initial', 'e2': 'n1', 'component': 'e2t', 'cn': 'c1'}

    def test_deterministic(self):
        inst = oracle.random_instance(77, 4, 3, 2)
        try:
            a = heuristic.solve_heuristic(inst)
        except heuristic.HeuristicInfeasible:
            return
        assert heuristic.solve_heuristic(inst) == a
