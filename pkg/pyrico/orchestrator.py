"""Deterministic discrete-event simulation of the monitor, trigger, re-optimize and redeploy cycle"""


from .printing import PyricoError, print1
from .config import ConfigError
from .model import control_loop_latency
from .heuristic import solve_heuristic, HeuristicInfeasible, NoFeasibleCN
from .exact import solve_exact, SolverBudget, OPTIMAL
from .scenarios import FaultSchedule

from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import csv
import heapq
import json
import logging
import numpy as np
import os
import threading
import time


logger = logging.getLogger(__name__)


# Trace event kinds
METRIC_SAMPLE = 'MetricSample'
CONTROL_LOOP_VIOLATION = 'ControlLoopViolation'
NODE_DOWN_DETECTED = 'NodeDownDetected'
OPTIMIZATION_TRIGGER = 'OptimizationTrigger'
SOLVER_STARTED = 'SolverStarted'
HEURISTIC_SOLUTION = 'HeuristicSolution'
OPTIMAL_SOLUTION = 'OptimalSolution'
REDEPLOY_STARTED = 'RedeployStarted'
REDEPLOY_FINISHED = 'RedeployFinished'
LOOP_SATISFIED = 'LoopSatisfied'
FAULT_INJECTED = 'FaultInjected'

# Trigger kinds
LATENCY_TRIGGER = 'LatencyTrigger'
NODE_DOWN_TRIGGER = 'NodeDownTrigger'

# Internal events; equal times are processed in this order
_FAULT_END, _FAULT_START, _REDEPLOY_DONE, _HEURISTIC_DONE, _EXACT_DONE, _SAMPLE = range(6)

SimEvent = namedtuple('SimEvent', ['time', 'kind', 'payload'])
Trigger = namedtuple('Trigger', ['kind', 'subject'])


class SimConfig(object):
    def __init__(self, monitor_period=1., latency_persistence_window=10., node_down_timeout=50.,
                 heuristic_solver_delay=5., redeploy_duration=35., sim_horizon=300., rng_seed=0, exact_budget=60.,
                 exact_node_time=1e-4, exact_node_limit=200000, spike_probability=0., spike_ms=5.):
        """
        :param monitor_period: Seconds between two samples of every control loop
        :param latency_persistence_window: Seconds a loop must stay above its threshold before a trigger fires
        :param node_down_timeout: Seconds a compute node must be unreachable before it is declared down
        :param heuristic_solver_delay: Simulated seconds until the heuristic result is available
        :param redeploy_duration: Simulated seconds from the start of a redeploy to the switch-over
        :param sim_horizon: Last simulated second
        :param rng_seed: Seed of the measurement noise
        :param exact_budget: Simulated seconds the exact solver may take inside a race
        :param exact_node_time: Simulated seconds per explored branch-and-bound node
        :param exact_node_limit: Branch-and-bound node limit inside a race
        :param spike_probability: Probability that a sample carries an isolated measurement spike
        :param spike_ms: Size of such a spike
        """
        self.monitor_period = float(monitor_period)
        self.latency_persistence_window = float(latency_persistence_window)
        self.node_down_timeout = float(node_down_timeout)
        self.heuristic_solver_delay = float(heuristic_solver_delay)
        self.redeploy_duration = float(redeploy_duration)
        self.sim_horizon = float(sim_horizon)
        self.rng_seed = int(rng_seed)
        self.exact_budget = float(exact_budget)
        self.exact_node_time = float(exact_node_time)
        self.exact_node_limit = int(exact_node_limit) if exact_node_limit is not None else None
        self.spike_probability = float(spike_probability)
        self.spike_ms = float(spike_ms)
        for k in ('monitor_period', 'latency_persistence_window', 'node_down_timeout', 'heuristic_solver_delay',
                  'redeploy_duration', 'sim_horizon', 'exact_budget', 'exact_node_time'):
            if getattr(self, k) <= 0:
                raise ConfigError('Simulation setting %s must be positive' % k)


class LiveState(object):
    """What the monitoring system sees: the deployed placement, node availability and the loop latency history"""

    def __init__(self, instance, solution):
        self.instance = instance
        self.solution = solution
        self.available = {m: True for m in instance.cn_ids}
        self.down_since = {}
        self.detected = set()
        self.deltas = []
        self.graph = instance.graph
        self.history = {(e, a.id): [] for e in instance.e2_ids for a in instance.xapps}

    def _rebuild_graph(self):
        g = self.instance.graph
        for d in self.deltas:
            g = g.with_link_delta(d.link[0], d.link[1], d.added_ms)
        self.graph = g

    def add_delta(self, delta):
        self.deltas.append(delta)
        self._rebuild_graph()

    def remove_delta(self, delta):
        self.deltas.remove(delta)
        self._rebuild_graph()

    def set_down(self, cn, now):
        self.available[cn] = False
        self.down_since[cn] = now

    def set_up(self, cn):
        self.available[cn] = True
        self.down_since.pop(cn, None)
        self.detected.discard(cn)

    def hosts_in_loop(self, e2, xapp):
        p = self.solution.config[e2]
        spec = self.instance.xapp_by_id[xapp]
        hosts = {p.t, self.solution.xapp_host[(e2, xapp)]}
        hosts.update(self.solution.xapp_host[(e2, x)] for x in spec.chain)
        if spec.needs_data or any(self.instance.xapp_by_id[x].needs_data for x in spec.chain):
            hosts.update((p.s, p.d))
        return hosts

    def measure(self, e2, xapp):
        """Loop latency under the effective matrix, or None if the loop crosses a node that is down"""
        if not all(self.available[m] for m in self.hosts_in_loop(e2, xapp)):
            return None
        return control_loop_latency(self.instance, self.solution, e2, xapp, self.graph)

    def record(self, e2, xapp, now, value, keep):
        h = self.history[(e2, xapp)]
        h.append((now, value))
        while h and h[0][0] < now - keep:
            h.pop(0)

    def clear_history(self, pair=None):
        for k in ([pair] if pair is not None else list(self.history)):
            self.history[k] = []

    def snapshot(self):
        """Instance seen by the optimizer: effective latencies, without the nodes known to be down"""
        down = [m for m, up in self.available.items() if not up]
        return self.instance.with_graph(self.graph).without_nodes(down)


def evaluate_triggers(state, now, config):
    """
    :param state: Monitored state
    :type state: LiveState
    :param now: Current simulated time
    :param config: Simulation settings
    :type config: SimConfig
    :return: Latency triggers of every pair above its threshold for the whole persistence window, and node-down
    triggers of every undetected node unreachable for the node-down timeout
    :rtype: list of Trigger
    """
    firings = []
    for (e, a), h in sorted(state.history.items()):
        if not h or h[-1][0] != now:
            continue
        rho = state.instance.xapp_by_id[a].rho_ms
        run_start = None
        for t, v in reversed(h):
            if v is None or v <= rho:
                break
            run_start = t
        if run_start is not None and now - run_start >= config.latency_persistence_window - 1e-9:
            firings.append(Trigger(LATENCY_TRIGGER, (e, a)))
    for m in sorted(state.down_since):
        if m not in state.detected and now - state.down_since[m] >= config.node_down_timeout - 1e-9:
            firings.append(Trigger(NODE_DOWN_TRIGGER, m))
    return firings


class RaceResult(object):
    def __init__(self, applied, late_optimal, exact, exact_delay, heuristic_wall):
        """
        :param applied: Heuristic solution, deployed first
        :param late_optimal: Optimal solution found within the exact budget, or None
        :param exact: Full exact solver result
        :param exact_delay: Simulated duration of the exact search
        :param heuristic_wall: Real seconds spent in the heuristic
        """
        self.applied = applied
        self.late_optimal = late_optimal
        self.exact = exact
        self.exact_delay = exact_delay
        self.heuristic_wall = heuristic_wall

    @property
    def optimal_is_superior(self):
        return self.late_optimal is not None and self.late_optimal.total_cost < self.applied.total_cost

    def __iter__(self):
        return iter((self.applied, self.late_optimal))


def race_solvers(instance, config, cancel=None, wall_limit=float('inf')):
    """
    Runs the heuristic and the exact solver side by side on the same instance

    :param instance: Snapshot to optimize
    :param config: Simulation settings
    :type config: SimConfig
    :param cancel: Event shared with the exact solver; set it to abandon the search
    :param wall_limit: Real seconds the exact solver may run; simulations keep it unlimited and stop on exact_node_limit
    :type wall_limit: float
    :rtype: RaceResult
    :raise HeuristicInfeasible: if the heuristic finds no placement
    """
    cancel = cancel if cancel is not None else threading.Event()
    budget = SolverBudget(wall_limit, config.exact_node_limit)
    with ThreadPoolExecutor(max_workers=2) as pool:
        start = time.perf_counter()
        exact_future = pool.submit(solve_exact, instance, budget, cancel)
        heuristic_future = pool.submit(solve_heuristic, instance)
        try:
            applied = heuristic_future.result()
        except Exception:
            cancel.set()
            raise
        heuristic_wall = time.perf_counter() - start
        result = exact_future.result()

    delay = result.explored_nodes * config.exact_node_time
    late_optimal = None
    if result.status == OPTIMAL and delay <= config.exact_budget:
        late_optimal = result.best
    logger.info('Race: heuristic cost %s in %.3f s; exact %s cost %s, %i nodes (%.3f s real, %.3f s simulated)',
                applied.total_cost, heuristic_wall, result.status, result.best_cost, result.explored_nodes,
                result.elapsed, delay)
    return RaceResult(applied, late_optimal, result, delay, heuristic_wall)


def _instance_labels(instances):
    return sorted('%s/%s' % (m, c) for m, c in instances)


class EventTrace(object):
    def __init__(self):
        self.events = []
        self.samples = []
        self.late_optimal = []
        self.metadata = {'solver_wall_times': []}

    def emit(self, now, kind, **payload):
        self.events.append(SimEvent(now, kind, payload))

    def of_kind(self, kind):
        return [e for e in self.events if e.kind == kind]

    def first(self, kind):
        for e in self.events:
            if e.kind == kind:
                return e
        return None

    def write_jsonl(self, path):
        with open(path, 'w') as f:
            for e in self.events:
                d = dict(e.payload)
                d['time'] = e.time
                d['kind'] = e.kind
                f.write(json.dumps(d, sort_keys=True) + '\n')

    def write_samples_csv(self, path):
        with open(path, 'w', newline='') as f:
            w = csv.writer(f)
            w.writerow(['time', 'e2', 'xapp', 'loop_latency_ms'])
            for row in self.samples:
                w.writerow(row)

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        self.write_jsonl(os.path.join(out_dir, 'events.jsonl'))
        self.write_samples_csv(os.path.join(out_dir, 'samples.csv'))


class Simulation(object):
    """Event loop over a priority queue of timed internal events"""

    def __init__(self, instance, faults, config):
        self.instance = instance
        self.faults = faults if faults is not None else FaultSchedule()
        self.config = config
        self.faults.check_horizon(config.sim_horizon)
        self.rng = np.random.RandomState(config.rng_seed)
        self.trace = EventTrace()
        self.queue = []
        self.seq = 0

        self.state = None
        self.round = 0
        self.heuristic_pending = False
        self.in_flight = None
        self.candidate = None
        self.applied_cost = None
        self.awaiting_satisfied = False
        self.deferred_trigger = []
        self.cancel = None
        self.violating = set()

    def push(self, when, rank, data=None):
        self.seq += 1
        heapq.heappush(self.queue, (when, rank, self.seq, data))

    @property
    def busy(self):
        return self.heuristic_pending or self.in_flight is not None

    def run(self):
        """
        :rtype: EventTrace
        """
        try:
            initial = solve_heuristic(self.instance)
        except (HeuristicInfeasible, NoFeasibleCN) as err:
            raise SimInfeasible('No initial placement: %s' % err.log_message)
        self.state = LiveState(self.instance, initial)
        self.trace.emit(0., HEURISTIC_SOLUTION, initial=True, cost=initial.total_cost, solution=initial.digest())
        logger.info('Initial placement %s with cost %s', initial.digest(), initial.total_cost)

        for t, fault in self.faults.entries:
            self.push(t, _FAULT_START, fault)
            if fault.duration is not None and t + fault.duration <= self.config.sim_horizon:
                self.push(t + fault.duration, _FAULT_END, fault)
        self.push(0., _SAMPLE, 0)

        handlers = {_FAULT_START: self._fault_start, _FAULT_END: self._fault_end,
                    _REDEPLOY_DONE: self._redeploy_done, _HEURISTIC_DONE: self._heuristic_done,
                    _EXACT_DONE: self._exact_done, _SAMPLE: self._sample}
        while self.queue:
            now, rank, seq, data = heapq.heappop(self.queue)
            if now > self.config.sim_horizon:
                break
            handlers[rank](now, data)
        if self.cancel is not None:
            self.cancel.set()
        logger.info('Simulation finished with %i events', len(self.trace.events))
        return self.trace

    def _fault_start(self, now, fault):
        if fault.kind == 'LatencyDelta':
            self.state.add_delta(fault)
            self.trace.emit(now, FAULT_INJECTED, fault=fault.kind, link=list(fault.link), added_ms=fault.added_ms)
        else:
            self.state.set_down(fault.cn, now)
            self.trace.emit(now, FAULT_INJECTED, fault=fault.kind, cn=fault.cn)
        print1('%8.1f s  fault injected: %s' % (now, fault.kind))

    def _fault_end(self, now, fault):
        if fault.kind == 'LatencyDelta':
            self.state.remove_delta(fault)
            self.trace.emit(now, FAULT_INJECTED, fault=fault.kind, link=list(fault.link), cleared=True)
        else:
            self.state.set_up(fault.cn)
            self.trace.emit(now, FAULT_INJECTED, fault=fault.kind, cn=fault.cn, cleared=True)

    def _sample(self, now, k):
        c = self.config
        keep = c.latency_persistence_window + c.monitor_period
        all_ok = True
        for e in self.instance.e2_ids:
            for a in self.instance.xapps:
                v = self.state.measure(e, a.id)
                if v is not None and c.spike_probability > 0. and self.rng.random_sample() < c.spike_probability:
                    v += c.spike_ms
                self.state.record(e, a.id, now, v, keep)
                if v is None:
                    continue
                self.trace.emit(now, METRIC_SAMPLE, e2=e, xapp=a.id, latency_ms=v)
                self.trace.samples.append((now, e, a.id, v))
                if v > a.rho_ms:
                    all_ok = False
                    if (e, a.id) not in self.violating:
                        self.violating.add((e, a.id))
                        self.trace.emit(now, CONTROL_LOOP_VIOLATION, e2=e, xapp=a.id, latency_ms=v, rho_ms=a.rho_ms)
                else:
                    self.violating.discard((e, a.id))

        if self.awaiting_satisfied and all_ok:
            self.awaiting_satisfied = False
            self.trace.emit(now, LOOP_SATISFIED)
            print1('%8.1f s  control loops satisfied' % now)

        reasons = []
        for trig in evaluate_triggers(self.state, now, c):
            if trig.kind == NODE_DOWN_TRIGGER:
                self.state.detected.add(trig.subject)
                self.trace.emit(now, NODE_DOWN_DETECTED, cn=trig.subject)
                print1('%8.1f s  compute node %s detected down' % (now, trig.subject))
                self.deferred_trigger.append('%s:%s' % (trig.kind, trig.subject))
            else:
                self.state.clear_history(trig.subject)
                if self.busy:
                    logger.debug('Ignoring latency trigger for %s/%s during reconfiguration', *trig.subject)
                else:
                    reasons.append('%s:%s/%s' % (trig.kind, trig.subject[0], trig.subject[1]))
        if not self.busy and (reasons or self.deferred_trigger):
            self._start_round(now, self.deferred_trigger + reasons)
            self.deferred_trigger = []

        self.push(round((k + 1) * c.monitor_period, 9), _SAMPLE, k + 1)

    def _start_round(self, now, reasons):
        if self.cancel is not None:
            self.cancel.set()
        self.round += 1
        self.candidate = None
        self.applied_cost = None
        self.trace.emit(now, OPTIMIZATION_TRIGGER, reasons=reasons)
        self.trace.emit(now, SOLVER_STARTED, round=self.round)
        print1('%8.1f s  optimization trigger (%s)' % (now, ', '.join(reasons)))

        self.cancel = threading.Event()
        try:
            race = race_solvers(self.state.snapshot(), self.config, self.cancel)
        except (HeuristicInfeasible, NoFeasibleCN) as err:
            raise SimInfeasible('No feasible placement after the trigger at %s s: %s' % (now, err.log_message))
        self.trace.metadata['solver_wall_times'].append({'time': now, 'heuristic': race.heuristic_wall,
                                                         'exact': race.exact.elapsed})
        self.heuristic_pending = True
        self.push(now + self.config.heuristic_solver_delay, _HEURISTIC_DONE, (self.round, race.applied))
        if race.late_optimal is not None:
            self.push(now + race.exact_delay, _EXACT_DONE, (self.round, race.late_optimal))
        else:
            logger.info('Exact solver did not finish within its budget (%s)', race.exact.status)

    def _heuristic_done(self, now, data):
        rnd, solution = data
        if rnd != self.round:
            return
        self.heuristic_pending = False
        self.applied_cost = solution.total_cost
        self.trace.emit(now, HEURISTIC_SOLUTION, cost=solution.total_cost, solution=solution.digest())
        if solution == self.state.solution:
            logger.info('Heuristic solution equals the deployed one; no redeploy')
        else:
            self._start_redeploy(now, solution)
        if self.candidate is not None and self.in_flight is None:
            self._consider_optimal(now, self.candidate)

    def _exact_done(self, now, data):
        rnd, solution = data
        if rnd != self.round:
            logger.info('Dropping optimal solution of superseded round %i', rnd)
            return
        self.trace.emit(now, OPTIMAL_SOLUTION, cost=solution.total_cost, solution=solution.digest())
        if self.busy:
            self.candidate = solution
        else:
            self._consider_optimal(now, solution)

    def _consider_optimal(self, now, solution):
        self.candidate = None
        if self.applied_cost is not None and solution.total_cost < self.applied_cost and \
                solution != self.state.solution:
            self._start_redeploy(now, solution)
        else:
            self.trace.late_optimal.append((now, solution))
            logger.info('Optimal solution (cost %s) not applied', solution.total_cost)

    def _start_redeploy(self, now, solution):
        current = self.state.solution.instances()
        target = solution.instances()
        self.trace.emit(now, REDEPLOY_STARTED, solution=solution.digest(), cost=solution.total_cost,
                        added=_instance_labels(target - current), released=_instance_labels(current - target))
        print1('%8.1f s  redeploy started (cost %s)' % (now, solution.total_cost))
        self.in_flight = solution
        self.push(now + self.config.redeploy_duration, _REDEPLOY_DONE, solution)

    def _redeploy_done(self, now, solution):
        self.state.solution = solution
        self.in_flight = None
        self.state.clear_history()
        self.violating.clear()
        self.awaiting_satisfied = True
        self.trace.emit(now, REDEPLOY_FINISHED, solution=solution.digest())
        print1('%8.1f s  redeploy finished' % now)
        if self.candidate is not None and not self.heuristic_pending:
            self._consider_optimal(now, self.candidate)


def run_simulation(instance, faults, config):
    """
    :param instance: A valid instance
    :type instance: pyrico.model.Instance
    :param faults: Faults to inject
    :type faults: pyrico.scenarios.FaultSchedule
    :param config: Simulation settings
    :type config: SimConfig
    :rtype: EventTrace
    :raise SimInfeasible: if no feasible placement exists initially or after a fault
    """
    return Simulation(instance, faults, config).run()


class SimInfeasible(PyricoError):
    exit_code = 5
