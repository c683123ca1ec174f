from .context import cli
from .context import model
from .context import scenarios
from .context import printing
from . import oracle

import csv
import io
import json
import logging
import os
import pytest


def run(argv):
    """Runs the command line and returns its exit code"""
    root = logging.getLogger()
    saved = root.handlers[:]
    try:
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
    finally:
        for h in root.handlers[len(saved):]:
            h.close()
        root.handlers[:] = saved
        printing.verbosity = 1
    return info.value.code


class TestCli:

    @classmethod
    def setup_class(cls):
        cls.tiers = scenarios.TierSpec(tiers=[scenarios.TierRow(2, 10., (4., 2., 1.), 32., 64., 256.)],
                                       xapp_count=1, xapp_rho_ms=100.)

    def write_instance(self, tmp_path, instance=None, name='tiny.json'):
        path = str(tmp_path / name)
        model.save_instance(instance if instance is not None else oracle.tiny_instance(), path)
        return path

    def test_gen(self, tmp_path, capsys):
        assert run(['-L', 'n', 'gen', '--cns', '3', '--seed', '1']) == 0
        first = capsys.readouterr().out
        assert run(['-L', 'n', 'gen', '--cns', '3', '--seed', '1']) == 0
        assert capsys.readouterr().out == first
        inst = model.Instance.from_dict(json.loads(first))
        assert len(inst.compute_nodes) == 4

        out = str(tmp_path / 'gen.json')
        assert run(['-L', 'n', '-v', '0', 'gen', '--cns', '3', '--seed', '1', '--out', out]) == 0
        assert capsys.readouterr().out == ''
        assert model.load_instance(out).to_dict() == inst.to_dict()

    def test_gen_too_many_cns(self):
        assert run(['-L', 'n', 'gen', '--cns', '600']) == 2

    def test_solve_heuristic(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path)
        sol = str(tmp_path / 'sol.json')
        assert run(['-L', 'n', '-v', '0', 'solve', '--in', inst, '--out', sol]) == 0
        line = capsys.readouterr().out.strip()
        assert line.startswith('heuristic,21,true,')
        with open(sol) as f:
            d = json.load(f)
        assert d['strategy'] == 'heuristic'
        assert model.load_solution(sol).config['n1'] == model.Configuration('c0', 'c1', 'c1', 'c1')

    def test_solve_phase_log(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path)
        log = str(tmp_path / 'phases.jsonl')
        assert run(['-L', 'n', '-v', '0', 'solve', '--in', inst, '--phase-log', log]) == 0
        with open(log) as f:
            assert json.loads(f.readline())['phase'] == 'initial'

    def test_solve_exact(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path)
        assert run(['-L', 'n', '-v', '0', 'solve', '--strategy', 'exact', '--in', inst]) == 0
        assert capsys.readouterr().out.startswith('exact,21,true,')

    def test_solve_race(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path)
        assert run(['-L', 'n', '-v', '0', 'solve', '--strategy', 'race', '--in', inst]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert [l.split(',')[:3] for l in lines] == [['heuristic', '21', 'true'], ['exact', '21', 'true'],
                                                     ['race:heuristic', '21', 'true']]

    def test_solve_infeasible(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path, oracle.tiny_instance(rho=1.))
        assert run(['-L', 'n', '-v', '0', 'solve', '--strategy', 'exact', '--in', inst]) == 3
        assert capsys.readouterr().out.startswith('exact,NA,false,')
        assert run(['-L', 'n', '-v', '0', 'solve', '--in', inst]) == 3

    def test_solve_no_incumbent(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path)
        assert run(['-L', 'n', '-v', '0', 'solve', '--strategy', 'exact', '--node-limit', '1', '--in', inst]) == 4

    def test_solve_bad_instance(self, tmp_path, capsys):
        path = tmp_path / 'broken.json'
        d = oracle.tiny_instance().to_dict()
        d['graph']['latency'][0][1] += 1.
        path.write_text(json.dumps(d))
        assert run(['-L', 'n', 'solve', '--in', str(path)]) == 2
        assert 'symmetric' in capsys.readouterr().out

    def test_compare(self, tmp_path, capsys):
        tiers = tmp_path / 'tiers.json'
        tiers.write_text(json.dumps(self.tiers.to_dict()))
        args = ['-L', 'n', '-v', '0', 'compare', '--cns-list', '1,0', '--tiers', str(tiers), '--omit-timing']
        assert run(args) == 0
        first = capsys.readouterr().out
        assert run(args) == 0
        assert capsys.readouterr().out == first
        rows = list(csv.reader(io.StringIO(first)))
        assert rows[0] == cli.SWEEP_COLUMNS
        assert [r[:2] for r in rows[1:]] == [['0', 'exact'], ['0', 'heuristic'], ['1', 'exact'], ['1', 'heuristic']]
        assert rows[1][2] == rows[2][2] == '7'
        assert all(r[3] == 'NA' for r in rows[1:])
        assert rows[1][6] == 'Optimal' and rows[2][6] == 'Feasible'

    def test_compare_to_file(self, tmp_path, capsys):
        tiers = tmp_path / 'tiers.json'
        tiers.write_text(json.dumps(self.tiers.to_dict()))
        out = tmp_path / 'sweep.csv'
        assert run(['-L', 'n', '-v', '0', 'compare', '--cns-list', '2', '--tiers', str(tiers), '--out',
                    str(out)]) == 0
        rows = list(csv.reader(io.StringIO(out.read_text())))
        assert len(rows) == 3
        assert float(rows[1][3]) >= 0.

    def test_compare_empty_list(self):
        assert run(['-L', 'n', 'compare', '--cns-list', ',']) == 2
        assert run(['-L', 'n', 'compare', '--cns-list', 'a,b']) == 2

    def test_simulate_spike(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path)
        out = tmp_path / 'spike'
        assert run(['-L', 'n', '-v', '0', 'simulate', '--scenario', 'spike', '--in', inst, '--out-dir',
                    str(out)]) == 0
        events = [json.loads(l) for l in (out / 'events.jsonl').read_text().splitlines()]
        triggers = [e for e in events if e['kind'] == 'OptimizationTrigger']
        assert [e['time'] for e in triggers] == [160.]
        assert (out / 'samples.csv').read_text().startswith('time,e2,xapp,loop_latency_ms')
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['instance'] == inst
        assert manifest['schedule']['faults'][0]['link'] == ['n2', 'c1']

    def test_simulate_crash_config(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path)
        conf = tmp_path / 'sim.conf'
        conf.write_text('scenario = crash\nnode_down_timeout = 20\n')
        out = tmp_path / 'crash'
        assert run(['-L', 'n', '-v', '0', 'simulate', '--in', inst, '--config', str(conf), '--out-dir',
                    str(out)]) == 0
        events = [json.loads(l) for l in (out / 'events.jsonl').read_text().splitlines()]
        down = [e for e in events if e['kind'] == 'NodeDownDetected']
        assert [(e['time'], e['cn']) for e in down] == [(60., 'c1')]

    def test_simulate_none_deterministic(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path)
        for d in ('a', 'b'):
            assert run(['-L', 'n', '-v', '0', 'simulate', '--in', inst, '--out-dir', str(tmp_path / d)]) == 0
        for name in ('events.jsonl', 'samples.csv'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    def test_simulate_infeasible(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path, oracle.tiny_instance(rho=1.))
        assert run(['-L', 'n', 'simulate', '--in', inst, '--out-dir', str(tmp_path / 'x')]) == 5

    def test_simulate_cloud_crash(self, tmp_path, capsys):
        inst = self.write_instance(tmp_path)
        conf = tmp_path / 'sim.conf'
        conf.write_text('scenario = crash\ncrash_cn = c0\n')
        assert run(['-L', 'n', 'simulate', '--in', inst, '--config', str(conf), '--out-dir',
                    str(tmp_path / 'x')]) == 2

    def test_small_tiers_flow(self, tmp_path, capsys):
        tiers = os.path.join(os.path.dirname(__file__), '..', 'docs', 'small_tiers.json')
        inst = str(tmp_path / 'ran.json')
        assert run(['-L', 'n', '-v', '0', 'gen', '--tiers', tiers, '--cns', '4', '--seed', '1', '--out', inst]) == 0
        assert len(model.load_instance(inst).e2_nodes) == 5
        assert run(['-L', 'n', '-v', '0', 'solve', '--in', inst, '--strategy', 'race', '--node-limit', '20000']) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith('heuristic,') and lines[0].split(',')[2] == 'true'
        assert lines[2].startswith('race:')
        conf = tmp_path / 'sim.conf'
        conf.write_text('exact_node_limit = 20000\n')
        out = tmp_path / 'spike'
        assert run(['-L', 'n', '-v', '0', 'simulate', '--in', inst, '--scenario', 'spike', '--config', str(conf),
                    '--out-dir', str(out)]) == 0
        events = [json.loads(l) for l in (out / 'events.jsonl').read_text().splitlines()]
        assert [e['time'] for e in events if e['kind'] == 'OptimizationTrigger'][:1] == [160.]
        assert run(['-L', 'n', '-v', '0', 'compare', '--tiers', tiers, '--cns-list', '3', '--node-limit', '20000',
                    '--omit-timing']) == 0
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
        assert [r[6] for r in rows[1:] if r[1] == 'heuristic'] == ['Feasible']

    def test_compare_help(self, capsys):
        assert run(['compare', '--help']) == 0
        text = ''.join(capsys.readouterr().out.split())
        assert 'relaxtheloopswith--round-trip-factor1' in text
        assert 'docs/small_tiers.json' in text

    def test_space(self, capsys):
        assert run(['-L', 'n', 'space', '--e2', '100', '--cns', '5', '--xapps', '5']) == 0
        assert capsys.readouterr().out.strip() == '3.13125e+13'

    def test_bad_flags(self, capsys):
        assert run(['solve', '--strategy', 'magic', '--in', 'x.json']) == 2
        assert run(['-L', 'n', 'space', '--e2', '0', '--cns', '5', '--xapps', '5']) == 1

    def test_log_level_from_environment(self, monkeypatch, capsys):
        monkeypatch.setenv('RICO_LOG', 'loud')
        assert run(['space', '--e2', '1', '--cns', '1', '--xapps', '1']) == 2
        monkeypatch.setenv('RICO_LOG', 'ERROR')
        assert run(['space', '--e2', '1', '--cns', '1', '--xapps', '1']) == 0

    def test_no_command(self, capsys):
        assert run(['-L', 'n']) == 0
        assert 'No command given' in capsys.readouterr().out
