"""Latency-first placement with greedy cost consolidation"""


from .printing import PyricoError
from .model import (Solution, Configuration, Violation, RICMAN, E2T, SDL, NIB, RESOURCES, LATENCY_EXCEEDED,
                    xapp_component, is_xapp_component, xapp_of, is_bounded, loop_latency)

import json
import logging
import time


logger = logging.getLogger(__name__)


class Placement(object):
    """
    Solution under construction. Keeps a reference count per (compute node, component) so that a shared instance
    releases its demand only when the last E2 node it serves moves away.
    """

    def __init__(self, instance):
        self.instance = instance
        self.host = {}
        self.refcount = {}
        self.load = {m: 0 for m in instance.cn_ids}
        self.usage = {m: [0., 0., 0.] for m in instance.cn_ids}
        self.probes = 0

    def host_of(self, e2, component):
        return self.host.get((e2, component))

    def xapp_hosts(self):
        return {(e, xapp_of(c)): m for (e, c), m in self.host.items() if is_xapp_component(c)}

    def fits(self, m, component):
        """Whether the compute node can run the component, counting an existing instance as free"""
        self.probes += 1
        if self.refcount.get((m, component), 0) > 0:
            return True
        cn = self.instance.cn_by_id[m]
        demand = self.instance.demand_of(component)
        for i, r in enumerate(RESOURCES):
            cap = cn.capacity(r)
            if is_bounded(cap) and self.usage[m][i] + demand[i] > cap:
                return False
        return True

    def assign(self, e2, component, m):
        n = self.refcount.get((m, component), 0)
        if n == 0:
            demand = self.instance.demand_of(component)
            for i in range(3):
                self.usage[m][i] += demand[i]
        self.refcount[(m, component)] = n + 1
        self.load[m] += 1
        self.host[(e2, component)] = m

    def release(self, e2, component):
        m = self.host.pop((e2, component))
        n = self.refcount[(m, component)] - 1
        self.refcount[(m, component)] = n
        if n == 0:
            demand = self.instance.demand_of(component)
            for i in range(3):
                self.usage[m][i] -= demand[i]
        self.load[m] -= 1
        return m

    def move_delta(self, e2, component, target):
        """Change of total cost if the component of e2 moved to target"""
        source = self.host[(e2, component)]
        if source == target:
            return 0.
        cns = self.instance.cn_by_id
        delta = 0.
        if self.refcount[(source, component)] == 1:
            delta -= cns[source].var_cost(component)
        if self.load[source] == 1:
            delta -= cns[source].fixed_cost
        if self.refcount.get((target, component), 0) == 0:
            delta += cns[target].var_cost(component)
        if self.load[target] == 0:
            delta += cns[target].fixed_cost
        return delta

    def loop(self, e2, xapp):
        h = self.host
        return loop_latency(self.instance, e2, xapp, h.get((e2, E2T)), h.get((e2, SDL)), h.get((e2, NIB)),
                            self.xapp_hosts_of(e2))

    def xapp_hosts_of(self, e2):
        return {(e2, a.id): self.host.get((e2, xapp_component(a.id))) for a in self.instance.xapps}

    def violations(self, e2):
        out = []
        for a in self.instance.xapps:
            measured = self.loop(e2, a.id)
            if measured > a.rho_ms:
                out.append(Violation(LATENCY_EXCEEDED, (e2, a.id), measured, a.rho_ms))
        return out

    def to_solution(self):
        h = self.host
        config = {e: Configuration(h[(e, RICMAN)], h[(e, E2T)], h[(e, SDL)], h[(e, NIB)])
                  for e in self.instance.e2_ids}
        return Solution(config, self.xapp_hosts(), self.instance)


def ordered_components(instance):
    """E2T, then every xApp in declared order, then SDL/STSL, then NIBs"""
    return instance.loop_components()


def upstream_of(instance, e2, component, partial):
    """
    Node from which the latency of a component's candidate hosts is measured during the initial placement
    """
    if component == E2T:
        return e2
    if is_xapp_component(component):
        a = xapp_of(component)
        for caller in instance.xapps:
            if caller.id == a:
                break
            if a in caller.chain:
                i = caller.chain.index(a)
                prev = partial.host_of(e2, xapp_component(caller.chain[i - 1])) if i > 0 else None
                return prev if prev is not None else partial.host_of(e2, xapp_component(caller.id))
        return partial.host_of(e2, E2T)
    if component == SDL:
        for a in instance.xapps:
            if a.needs_data:
                return partial.host_of(e2, xapp_component(a.id))
        return partial.host_of(e2, E2T)
    if component == NIB:
        return partial.host_of(e2, SDL)
    raise ValueError('Component %s is not part of the control loop' % component)


def closest_cn(instance, e2, component, partial):
    """
    Compute node with room for the component that is closest to its upstream component

    :param instance: The problem instance
    :param e2: E2 node id
    :param component: A control-loop component (E2T, an xApp reference, SDL or NIB)
    :param partial: Placement built so far
    :type partial: Placement
    :return: Compute node id; ties go to the lower fixed cost, then the lower id
    :raise NoFeasibleCN: if no compute node has enough capacity
    """
    source = upstream_of(instance, e2, component, partial)
    lat = instance.graph.lat
    best, best_key = None, None
    for m in instance.cn_ids:
        if not partial.fits(m, component):
            continue
        key = (lat(source, m), instance.cn_by_id[m].fixed_cost, m)
        if best_key is None or key < best_key:
            best, best_key = m, key
    if best is None:
        raise NoFeasibleCN('No compute node can host %s for E2 node %s' % (component, e2))
    return best


def sort_by_decreasing_cost(component, instance):
    """
    :return: Compute node ids by decreasing fixed plus variable cost of the component; the cheapest is last
    :rtype: list
    """
    cns = instance.cn_by_id
    return sorted(instance.cn_ids, key=lambda m: (cns[m].fixed_cost + cns[m].var_cost(component), m), reverse=True)


def affected_xapps(instance, component):
    """xApps whose control loop traverses the component"""
    if component == RICMAN:
        return []
    if is_xapp_component(component):
        a = xapp_of(component)
        return [x.id for x in instance.xapps if x.id == a or a in x.chain]
    return [x.id for x in instance.xapps]


def re_place(component, cost_ordered, working, instance, e2):
    """
    Moves a component of one E2 node to the cheapest compute node that has room for it, keeps every loop through
    the component within its threshold and does not raise the total cost.

    :param component: Component reference
    :param cost_ordered: Output of sort_by_decreasing_cost for the component
    :param working: Placement being improved; updated in place
    :type working: Placement
    :param instance: The problem instance
    :param e2: E2 node id owning the component
    :return: The (possibly unchanged) host
    """
    current = working.host_of(e2, component)
    check = affected_xapps(instance, component)
    for m in reversed(cost_ordered):
        if m == current:
            return current
        if working.move_delta(e2, component, m) > 0:
            working.probes += 1
            continue
        if not working.fits(m, component):
            continue
        working.release(e2, component)
        working.assign(e2, component, m)
        if all(working.loop(e2, a) <= instance.xapp_by_id[a].rho_ms for a in check):
            return m
        working.release(e2, component)
        working.assign(e2, component, current)
    return current


class Heuristic(object):
    """
    Two-phase greedy placement. Phase 1 puts each control-loop component at the closest compute node with room for
    it. Phase 2 starts RIC_Man on the cloud node and then moves each component, E2 node by E2 node, to the cheapest
    compute node that keeps the loops within their thresholds.
    """

    def __init__(self, instance, cancel=None):
        self.instance = instance
        self.cancel = cancel
        self.working = Placement(instance)
        self.phase_log = []
        self.initial_solution = None
        self.elapsed = None

    @property
    def probes(self):
        return self.working.probes

    def _check_cancel(self):
        if self.cancel is not None and self.cancel.is_set():
            raise SolverCancelled('Heuristic cancelled')

    def run(self):
        """
        :rtype: pyrico.model.Solution
        """
        start = time.perf_counter()
        inst = self.instance
        w = self.working
        components = ordered_components(inst)

        for e in inst.e2_ids:
            self._check_cancel()
            for c in components:
                m = closest_cn(inst, e, c, w)
                w.assign(e, c, m)
                self.phase_log.append({'phase': 'initial', 'e2': e, 'component': c, 'cn': m})

        violations = []
        for e in inst.e2_ids:
            violations.extend(w.violations(e))
        if violations:
            logger.info('Initial placement violates %i control loop thresholds', len(violations))
            raise HeuristicInfeasible(violations)

        cloud = inst.cloud.id
        for e in inst.e2_ids:
            w.assign(e, RICMAN, cloud)
            self.phase_log.append({'phase': 'initial', 'e2': e, 'component': RICMAN, 'cn': cloud})
        self.initial_solution = w.to_solution()
        logger.debug('Initial placement cost %s', self.initial_solution.total_cost)

        cost_ordered = {c: sort_by_decreasing_cost(c, inst) for c in [RICMAN] + components}
        for e in inst.e2_ids:
            self._check_cancel()
            for c in [RICMAN] + components:
                before = w.host_of(e, c)
                after = re_place(c, cost_ordered[c], w, inst, e)
                if after != before:
                    self.phase_log.append({'phase': 'move', 'e2': e, 'component': c, 'from': before, 'to': after})

        solution = w.to_solution()
        self.elapsed = time.perf_counter() - start
        logger.info('Heuristic placement cost %s (initial %s), %i probes, %.3f s', solution.total_cost,
                    self.initial_solution.total_cost, self.probes, self.elapsed)
        return solution

    def write_phase_log(self, path):
        """Writes the phase log as JSON lines"""
        with open(path, 'w') as f:
            for entry in self.phase_log:
                f.write(json.dumps(entry, sort_keys=True) + '\n')


def solve_heuristic(instance, cancel=None):
    """
    :param instance: A valid instance
    :type instance: pyrico.model.Instance
    :param cancel: Optional threading.Event checked between E2 nodes
    :rtype: pyrico.model.Solution
    :raise HeuristicInfeasible: if the closest-node placement already breaks a loop threshold
    """
    return Heuristic(instance, cancel).run()


def probe_bound(instance):
    """The (comp + |A|)^2 * |N| * |V_C| complexity bound with comp = 4 component classes"""
    k = 4 + len(instance.xapps)
    return k * k * len(instance.e2_nodes) * len(instance.compute_nodes)


class NoFeasibleCN(PyricoError):
    exit_code = 3


class HeuristicInfeasible(PyricoError):
    exit_code = 3

    def __init__(self, violations):
        self.violations = list(violations)
        first = self.violations[0]
        super().__init__('No latency-respecting initial placement: %i loop(s) exceed their threshold, e.g. %s at '
                         '%.3f ms > %.3f ms' % (len(self.violations), first.subject, first.measured, first.limit),
                         'The heuristic found no placement meeting the control loop thresholds')


class SolverCancelled(PyricoError):
    pass
