"""The entry point for the pyrico application containing the main function and version"""


from .parse import load_config
from .config import init_logging, Configuration, ConfigError
from .printing import print0, print1, print2, PyricoError
from .model import load_instance, save_instance, save_solution, check_feasible
from .exact import solve_exact, estimate_search_space, SolverBudget, OPTIMAL, TIMEOUT
from .heuristic import Heuristic, HeuristicInfeasible, NoFeasibleCN, solve_heuristic
from .orchestrator import race_solvers, run_simulation, SimConfig, SimInfeasible
from .scenarios import (TierSpec, FaultSchedule, generate_hierarchical_topology, scenario_latency_spike,
                        scenario_cn_crash, default_spike_e2, default_crash_cn, write_manifest)
import pyrico.printing as printing

import argparse
import csv
import json
import logging
import os
import sys
import time
import traceback


__version__ = "1.0.0"

SWEEP_COLUMNS = ['n_cns', 'strategy', 'cost', 'elapsed_s', 'e2t_instances', 'xapp_instances', 'status']
COMPARE_DESCRIPTION = ('Sweeps the number of edge CNs and solves each generated instance with both strategies. '
                       'With the default topology (5, 20 and 487 E2 nodes) and round-trip factor 2, a lowest-tier '
                       'E2 node meets the 10 ms threshold only through a CN at its own site, so every point is '
                       'Infeasible until all 487 lowest-tier sites have a CN. Sweep a smaller topology with --tiers '
                       '(e.g. docs/small_tiers.json) or relax the loops with --round-trip-factor 1.')

logger = logging.getLogger(__name__)


class ExactInfeasible(PyricoError):
    exit_code = 3


class NoIncumbent(PyricoError):
    exit_code = 4


def _fmt_cost(c):
    if c is None:
        return 'NA'
    return '%d' % c if float(c).is_integer() else repr(float(c))


def _summary(strategy, cost, feasible, elapsed):
    return '%s,%s,%s,%.4f' % (strategy, _fmt_cost(cost), 'true' if feasible else 'false', elapsed)


def _load_tiers(path):
    return TierSpec.load(path) if path else TierSpec()


def cmd_gen(args):
    tiers = _load_tiers(args.tiers)
    instance = generate_hierarchical_topology(tiers, args.cns, args.seed, args.round_trip_factor)
    if args.out:
        save_instance(instance, args.out)
        print1('Wrote instance with %i E2 nodes and %i compute nodes to %s' %
               (len(instance.e2_nodes), len(instance.compute_nodes), args.out))
    else:
        print0(json.dumps(instance.to_dict(), sort_keys=True))
    return 0


def _solve_heuristic(instance, args):
    alg = Heuristic(instance)
    solution = alg.run()
    if args.phase_log:
        alg.write_phase_log(args.phase_log)
    elif printing.verbosity >= 2:
        for entry in alg.phase_log:
            print2(json.dumps(entry, sort_keys=True))
    return solution, alg.elapsed


def cmd_solve(args):
    instance = load_instance(args.infile)
    if args.strategy == 'heuristic':
        solution, elapsed = _solve_heuristic(instance, args)
        print0(_summary('heuristic', solution.total_cost, not check_feasible(instance, solution), elapsed))
        extra = {'strategy': 'heuristic'}

    elif args.strategy == 'exact':
        result = solve_exact(instance, SolverBudget(args.budget, args.node_limit))
        if result.best is None:
            print0(_summary('exact', None, False, result.elapsed))
            if result.status == TIMEOUT:
                raise NoIncumbent('Exact search stopped after %i nodes without a feasible placement' %
                                  result.explored_nodes)
            raise ExactInfeasible('No placement satisfies every latency and capacity constraint')
        solution = result.best
        print0(_summary('exact', solution.total_cost, not check_feasible(instance, solution), result.elapsed))
        if result.status != OPTIMAL:
            print1('Exact search stopped early; the reported placement is the best one found')
        extra = {'strategy': 'exact', 'status': result.status}

    else:
        config = SimConfig(exact_budget=float('inf'), exact_node_limit=args.node_limit)
        start = time.perf_counter()
        race = race_solvers(instance, config, wall_limit=args.budget)
        elapsed = time.perf_counter() - start
        print0(_summary('heuristic', race.applied.total_cost, True, race.heuristic_wall))
        exact = race.exact
        print0(_summary('exact', exact.best_cost, exact.best is not None, exact.elapsed))
        if race.optimal_is_superior:
            solution, winner = race.late_optimal, 'exact'
        else:
            solution, winner = race.applied, 'heuristic'
        print0(_summary('race:%s' % winner, solution.total_cost, not check_feasible(instance, solution), elapsed))
        extra = {'strategy': 'race', 'applied': winner, 'exact_status': exact.status}

    if args.out:
        save_solution(solution, args.out, extra)
        print1('Wrote solution to %s' % args.out)
    return 0


def run_sweep_point(point):
    """
    Solves one generated instance with both strategies

    :param point: (n_cns, seed, budget, node_limit, tiers, round_trip_factor)
    :return: One row per strategy, as lists in SWEEP_COLUMNS order
    """
    n_cns, seed, budget, node_limit, tiers, factor = point
    instance = generate_hierarchical_topology(tiers, n_cns, seed, factor)
    rows = []

    try:
        alg = Heuristic(instance)
        sol = alg.run()
        counts = sol.instance_counts()
        rows.append([n_cns, 'heuristic', sol.total_cost, alg.elapsed, counts['e2t'], counts['xapp'], 'Feasible'])
    except (HeuristicInfeasible, NoFeasibleCN) as err:
        logger.info('Heuristic failed for %i CNs: %s', n_cns, err.log_message)
        rows.append([n_cns, 'heuristic', None, None, None, None, 'Infeasible'])

    result = solve_exact(instance, SolverBudget(budget, node_limit))
    if result.best is not None:
        counts = result.best.instance_counts()
        rows.append([n_cns, 'exact', result.best_cost, result.elapsed, counts['e2t'], counts['xapp'], result.status])
    else:
        rows.append([n_cns, 'exact', None, result.elapsed, None, None, result.status])
    return rows


def _parse_cns_list(s):
    try:
        values = [int(x) for x in s.split(',') if x.strip()]
    except ValueError:
        raise ConfigError('--cns-list must be a comma-separated list of integers, got %s' % s)
    if not values:
        raise ConfigError('--cns-list is empty')
    return values


def cmd_compare(args, log_prefix=None, debug=False):
    cns_list = _parse_cns_list(args.cns_list)
    tiers = _load_tiers(args.tiers)
    points = [(n, args.seed, args.budget, args.node_limit, tiers, args.round_trip_factor) for n in cns_list]

    if args.parallel:
        from .cluster import Cluster
        cluster = Cluster(args.parallel, log_prefix, debug, args.log_level)
        try:
            results = cluster.map(run_sweep_point, points)
        finally:
            cluster.teardown()
    else:
        results = []
        for p in points:
            print2('Solving sweep point with %i CNs' % p[0])
            results.append(run_sweep_point(p))

    rows = sorted((r for rs in results for r in rs), key=lambda r: (r[0], r[1]))
    out = open(args.out, 'w', newline='') if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator='\n')
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            n, strategy, cost, elapsed, e2t, xa, status = r
            if elapsed is None or args.omit_timing:
                elapsed = 'NA'
            else:
                elapsed = '%.4f' % elapsed
            w.writerow([n, strategy, _fmt_cost(cost), elapsed, 'NA' if e2t is None else e2t,
                        'NA' if xa is None else xa, status])
    finally:
        if args.out:
            out.close()
    return 0


def _build_schedule(instance, configuration):
    c = configuration.config
    if c['scenario'] == 'none':
        return FaultSchedule()
    try:
        initial = solve_heuristic(instance)
    except (HeuristicInfeasible, NoFeasibleCN) as err:
        raise SimInfeasible('No initial placement: %s' % err.log_message)
    if c['scenario'] == 'spike':
        e2 = c['spike_e2'] or default_spike_e2(instance)
        return scenario_latency_spike(instance, e2, c['spike_added_ms'], c['spike_at'], c['spike_duration'], initial)
    cn = c['crash_cn'] or default_crash_cn(instance, initial)
    return scenario_cn_crash(instance, cn, c['crash_at'], c['crash_downtime'], initial)


def cmd_simulate(args):
    instance = load_instance(args.infile)
    configuration = load_config(args.config) if args.config else Configuration()
    if args.scenario:
        configuration.config['scenario'] = args.scenario
    schedule = _build_schedule(instance, configuration)
    sim_config = configuration.sim_config()

    trace = run_simulation(instance, schedule, sim_config)
    trace.write(args.out_dir)
    write_manifest(os.path.join(args.out_dir, 'manifest.json'), args.infile, schedule, configuration)
    for w in trace.metadata['solver_wall_times']:
        logger.info('Solver race at %s s took %.3f s (heuristic) and %.3f s (exact) of real time', w['time'],
                    w['heuristic'], w['exact'])
    print1('Wrote %i events and %i samples to %s' % (len(trace.events), len(trace.samples), args.out_dir))
    return 0


def cmd_space(args):
    print0('%.10g' % estimate_search_space(args.e2, args.cns, args.comp, args.xapps))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog='pyrico',
                                     description='Computes minimum-cost placements of Near-RT RIC components over a '
                                                 'cloud-edge overlay and simulates their orchestration under faults.')
    parser.add_argument('-l', '--log_prefix', action='store',
                        help='write the log to <prefix>.log instead of stderr')
    parser.add_argument('-d', '--debug_logging', action='store_true',
                        help='outputs a separate debugging log (requires --log_prefix)')
    parser.add_argument('-L', '--log_level', type=str.lower, default=None,
                        choices=['debug', 'info', 'warning', 'error', 'critical', 'none', 'd', 'i', 'w', 'e', 'c', 'n'],
                        help='set the level of output to the log. Options in decreasing order of verbosity are: '
                             'debug, info, warning, error, critical, none. Defaults to $RICO_LOG, then warning.')
    parser.add_argument('-v', '--verbosity', type=int, default=1, choices=[0, 1, 2],
                        help='amount of progress output on the console')
    sub = parser.add_subparsers(dest='command')

    p = sub.add_parser('gen', help='generate a hierarchical topology instance')
    p.add_argument('--cns', type=int, required=True, help='number of edge compute nodes')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', help='instance JSON file; printed to stdout if omitted')
    p.add_argument('--tiers', help='JSON file overriding the tier parameters')
    p.add_argument('--round-trip-factor', type=float, default=2.0)

    p = sub.add_parser('solve', help='solve one instance; prints strategy,cost,feasible,elapsed_s')
    p.add_argument('--strategy', choices=['exact', 'heuristic', 'race'], default='heuristic')
    p.add_argument('--budget', type=float, default=60., help='wall-clock seconds for the exact solver')
    p.add_argument('--node-limit', type=int, default=None, help='branch-and-bound node limit')
    p.add_argument('--in', dest='infile', required=True, help='instance JSON file')
    p.add_argument('--out', help='solution JSON file')
    p.add_argument('--phase-log', help='JSON lines file receiving the heuristic phase log')

    p = sub.add_parser('compare', help='sweep the number of CNs and compare both strategies; CSV columns: %s' %
                                       ','.join(SWEEP_COLUMNS),
                       description=COMPARE_DESCRIPTION)
    p.add_argument('--cns-list', required=True, help='comma-separated numbers of edge CNs')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--budget', type=float, default=60., help='wall-clock seconds for each exact search')
    p.add_argument('--node-limit', type=int, default=None)
    p.add_argument('--tiers', help='JSON file overriding the tier parameters')
    p.add_argument('--round-trip-factor', type=float, default=2.0)
    p.add_argument('--parallel', type=int, default=None, metavar='N', help='run sweep points on N dask workers')
    p.add_argument('--out', help='CSV file; printed to stdout if omitted')
    p.add_argument('--omit-timing', action='store_true', help='write NA in the elapsed_s column')

    p = sub.add_parser('simulate', help='simulate the orchestrator; writes events.jsonl, samples.csv and '
                                        'manifest.json')
    p.add_argument('--scenario', choices=['none', 'spike', 'crash'], default=None,
                   help='overrides the scenario key of the configuration')
    p.add_argument('--in', dest='infile', required=True, help='instance JSON file')
    p.add_argument('--config', help='configuration file (key = value, or .json)')
    p.add_argument('--out-dir', required=True)

    p = sub.add_parser('space', help='print the size of the placement search space')
    p.add_argument('--e2', type=int, required=True)
    p.add_argument('--cns', type=int, required=True)
    p.add_argument('--comp', type=int, default=4)
    p.add_argument('--xapps', type=int, required=True)
    return parser


def main(argv=None):
    """The main function for running a pyrico command"""
    start_time = time.time()
    code = 1

    parser = build_parser()
    cmdline_args = parser.parse_args(argv)
    if cmdline_args.log_level is None:
        cmdline_args.log_level = os.environ.get('RICO_LOG', 'warning').lower()
    printing.verbosity = cmdline_args.verbosity
    log_prefix = cmdline_args.log_prefix
    debug = cmdline_args.debug_logging

    try:
        init_logging(log_prefix, debug, cmdline_args.log_level)
    except ConfigError as e:
        print0('Error: %s' % e.message)
        sys.exit(e.exit_code)

    print2('pyrico v%s' % __version__)
    logger.info('Running pyrico v%s', __version__)

    try:
        if cmdline_args.command is None:
            print0('No command given, so I won\'t do anything.\nFor more information, try pyrico --help')
            code = 0
        elif cmdline_args.command == 'gen':
            code = cmd_gen(cmdline_args)
        elif cmdline_args.command == 'solve':
            code = cmd_solve(cmdline_args)
        elif cmdline_args.command == 'compare':
            code = cmd_compare(cmdline_args, log_prefix, debug)
        elif cmdline_args.command == 'simulate':
            code = cmd_simulate(cmdline_args)
        else:
            code = cmd_space(cmdline_args)

    except PyricoError as e:
        # Problems such as bad user input are caught here and print a useful message before quitting
        logger.error('Terminating due to a %s:', type(e).__name__)
        logger.error(e.log_message)
        print0('Error: %s' % e.message)
        code = e.exit_code
    except KeyboardInterrupt:
        print0('Aborted.')
        logger.info('Terminating due to keyboard interrupt')
        code = 1
    except Exception:
        # Sends any unhandled errors to the log instead of to user output
        logger.exception('Internal error')
        exceptiondata = traceback.format_exc().splitlines()
        print0('Sorry, an unknown error occurred: %s' % exceptiondata[-1])
        code = 1
    finally:
        mins, secs = divmod(time.time() - start_time, 60)
        hrs, mins = divmod(mins, 60)
        logger.info('Total time: %d:%02d:%02d', hrs, mins, secs)
        sys.exit(code)
