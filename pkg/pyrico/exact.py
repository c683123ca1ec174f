"""Optimal placement by depth-first branch and bound, and the search-space estimate of the placement problem"""


from .printing import PyricoError
from .model import (Solution, Configuration, RICMAN, E2T, SDL, NIB, RESOURCES, xapp_component, is_bounded,
                    loop_latency)

import logging
import time


logger = logging.getLogger(__name__)


OPTIMAL = 'Optimal'
TIMEOUT = 'Timeout'
INFEASIBLE = 'Infeasible'


class SolverBudget(object):
    """Limits on one exact search"""

    def __init__(self, wall_time_limit=float('inf'), node_limit=None):
        """
        :param wall_time_limit: Seconds of real time before the search gives up
        :type wall_time_limit: float
        :param node_limit: Maximum number of explored search nodes, or None for no limit
        :type node_limit: int
        """
        if not wall_time_limit > 0:
            raise PyricoError('Solver wall time limit must be positive, got %s' % wall_time_limit)
        if node_limit is not None and node_limit < 1:
            raise PyricoError('Solver node limit must be at least 1, got %s' % node_limit)
        self.wall_time_limit = wall_time_limit
        self.node_limit = node_limit


class ExactResult(object):
    def __init__(self, status, best, explored_nodes, elapsed):
        self.status = status
        self.best = best
        self.best_cost = best.total_cost if best is not None else None
        self.explored_nodes = explored_nodes
        self.elapsed = elapsed

    def to_dict(self):
        return {'status': self.status, 'cost': self.best_cost, 'elapsed': self.elapsed,
                'explored_nodes': self.explored_nodes,
                'solution': self.best.to_dict() if self.best is not None else None}

    def __repr__(self):
        return 'ExactResult(%s, cost=%s, nodes=%i)' % (self.status, self.best_cost, self.explored_nodes)


class BranchAndBound(object):
    """
    Depth-first search over the hosts of every component of every E2 node.

    E2 nodes are branched in id order. Within an E2 node the components are fixed in the order E2T, xApps, SDL/STSL,
    NIBs, RIC_Man, and candidate hosts are tried in id order. The lower bound of a partial assignment is the cost of the
    instances it has already activated. Among equal-cost optima the assignment with the smallest
    (E2 id, r, t, s, d, xApp hosts) key is kept.
    """

    def __init__(self, instance, budget=None, cancel=None):
        """
        :param instance: A valid instance
        :type instance: pyrico.model.Instance
        :param budget: Search limits; unlimited if None
        :type budget: SolverBudget
        :param cancel: Event checked at every search node; setting it stops the search with a Timeout
        :type cancel: threading.Event
        """
        self.instance = instance
        self.budget = budget if budget is not None else SolverBudget()
        self.cancel = cancel

        self.e2s = list(instance.e2_ids)
        self.cns = list(instance.cn_ids)
        self.xapps = [a.id for a in instance.xapps]
        self.xapps_by_id = sorted(self.xapps)
        self.factor = instance.round_trip_factor
        self.min_rho = min(a.rho_ms for a in instance.xapps)

        order = [E2T] + [xapp_component(a) for a in self.xapps] + [SDL, NIB, RICMAN]
        self.variables = [(e, c) for e in self.e2s for c in order]
        self.per_e2 = len(order)
        self.domains = [self._domain(e, c) for e, c in self.variables]

        self.demand = {c: tuple(instance.demand_of(c)) for c in order}
        self.cost = {(m, c): instance.cn_by_id[m].var_cost(c) for m in self.cns for c in order}
        self.fixed = {m: instance.cn_by_id[m].fixed_cost for m in self.cns}
        self.capacity = {m: [instance.cn_by_id[m].capacity(r) for r in RESOURCES] for m in self.cns}

        self.refcount = {}
        self.load = {m: 0 for m in self.cns}
        self.usage = {m: [0., 0., 0.] for m in self.cns}
        self.host = {}
        self.xapp_host = {}
        self.path_cost = [0.] * (len(self.variables) + 1)
        self.e2_keys = []

        self.best = None
        self.best_cost = None
        self.best_key = None
        self.explored = 0

    def _domain(self, e, component):
        if component != E2T:
            return list(self.cns)
        g = self.instance.graph
        return [m for m in self.cns if self.factor * g.lat(e, m) <= self.min_rho]

    def _fits(self, component, m):
        if self.refcount.get((m, component), 0) > 0:
            return True
        use = self.usage[m]
        for i, cap in enumerate(self.capacity[m]):
            if is_bounded(cap) and use[i] + self.demand[component][i] > cap:
                return False
        return True

    def _do(self, depth, m):
        e, component = self.variables[depth]
        inc = 0.
        if self.load[m] == 0:
            inc += self.fixed[m]
        self.load[m] += 1
        n = self.refcount.get((m, component), 0)
        if n == 0:
            inc += self.cost[(m, component)]
            use = self.usage[m]
            for i, v in enumerate(self.demand[component]):
                use[i] += v
        self.refcount[(m, component)] = n + 1
        self.host[(e, component)] = m
        if component.startswith('xapp:'):
            self.xapp_host[(e, component[5:])] = m
        self.path_cost[depth + 1] = self.path_cost[depth] + inc
        if component == RICMAN:
            self.e2_keys.append(self._e2_key(e))

    def _undo(self, depth):
        e, component = self.variables[depth]
        m = self.host.pop((e, component))
        if component.startswith('xapp:'):
            del self.xapp_host[(e, component[5:])]
        n = self.refcount[(m, component)] - 1
        self.refcount[(m, component)] = n
        if n == 0:
            use = self.usage[m]
            for i, v in enumerate(self.demand[component]):
                use[i] -= v
        self.load[m] -= 1
        if component == RICMAN:
            self.e2_keys.pop()

    def _e2_key(self, e):
        h = self.host
        return (h[(e, RICMAN)], h[(e, E2T)], h[(e, SDL)], h[(e, NIB)]) + \
            tuple(self.xapp_host[(e, a)] for a in self.xapps_by_id)

    def _latency_ok(self, depth):
        """Checks the loops that become (partially) evaluable once this variable is fixed"""
        e, component = self.variables[depth]
        pos = depth % self.per_e2
        if pos == len(self.xapps):
            # All xApp hosts known: the path without the data-layer hops is a lower bound of every loop
            g = self.instance.graph
            t = self.host[(e, E2T)]
            for a in self.instance.xapps:
                h = self.xapp_host[(e, a.id)]
                partial = g.lat(e, t) + g.lat(t, h)
                prev = h
                for x in a.chain:
                    hx = self.xapp_host[(e, x)]
                    partial += g.lat(prev, hx)
                    prev = hx
                if self.factor * partial > a.rho_ms:
                    return False
        elif component == NIB:
            t, s, d = self.host[(e, E2T)], self.host[(e, SDL)], self.host[(e, NIB)]
            for a in self.instance.xapps:
                if loop_latency(self.instance, e, a.id, t, s, d, self.xapp_host) > a.rho_ms:
                    return False
        return True

    def _pruned(self, depth):
        if self.best_cost is None:
            return False
        lb = self.path_cost[depth + 1]
        if lb > self.best_cost:
            return True
        if lb == self.best_cost and self.variables[depth][1] == RICMAN:
            k = len(self.e2_keys)
            return tuple(self.e2_keys) > self.best_key[:k]
        return False

    def _record_leaf(self):
        cost = self.path_cost[len(self.variables)]
        key = tuple(self.e2_keys)
        if self.best_cost is None or cost < self.best_cost or (cost == self.best_cost and key < self.best_key):
            self.best_cost = cost
            self.best_key = key
            config = {e: Configuration(self.host[(e, RICMAN)], self.host[(e, E2T)], self.host[(e, SDL)],
                                       self.host[(e, NIB)]) for e in self.e2s}
            self.best = Solution(config, self.xapp_host, self.instance)
            logger.debug('New incumbent with cost %s after %i nodes', cost, self.explored)

    def _out_of_budget(self, start):
        if self.cancel is not None and self.cancel.is_set():
            logger.info('Exact search cancelled after %i nodes', self.explored)
            return True
        if self.budget.node_limit is not None and self.explored >= self.budget.node_limit:
            logger.info('Exact search reached its node limit of %i', self.budget.node_limit)
            return True
        if time.perf_counter() - start > self.budget.wall_time_limit:
            logger.info('Exact search reached its wall time limit of %s s', self.budget.wall_time_limit)
            return True
        return False

    def run(self):
        """
        :rtype: ExactResult
        """
        start = time.perf_counter()
        for (e, c), dom in zip(self.variables, self.domains):
            if not dom:
                logger.info('No compute node meets the E2T latency bound of E2 node %s', e)
                return ExactResult(INFEASIBLE, None, 0, time.perf_counter() - start)

        n = len(self.variables)
        pos = [0] * n
        chosen = [False] * n
        depth = 0
        finished = True
        while depth >= 0:
            if self._out_of_budget(start):
                finished = False
                break
            if chosen[depth]:
                self._undo(depth)
                chosen[depth] = False
            dom = self.domains[depth]
            component = self.variables[depth][1]
            placed = False
            while pos[depth] < len(dom):
                m = dom[pos[depth]]
                pos[depth] += 1
                if not self._fits(component, m):
                    continue
                self._do(depth, m)
                self.explored += 1
                if not self._latency_ok(depth) or self._pruned(depth):
                    self._undo(depth)
                    continue
                chosen[depth] = True
                placed = True
                break
            if not placed:
                pos[depth] = 0
                depth -= 1
                continue
            if depth == n - 1:
                self._record_leaf()
            else:
                depth += 1

        elapsed = time.perf_counter() - start
        if not finished:
            status = TIMEOUT
        elif self.best is None:
            status = INFEASIBLE
        else:
            status = OPTIMAL
        logger.info('Exact search finished: %s, cost %s, %i nodes, %.3f s', status, self.best_cost, self.explored,
                    elapsed)
        return ExactResult(status, self.best, self.explored, elapsed)


def solve_exact(instance, budget=None, cancel=None):
    """
    Finds a minimum-cost feasible placement

    :param instance: A valid instance
    :type instance: pyrico.model.Instance
    :param budget: Search limits
    :type budget: SolverBudget
    :param cancel: Optional threading.Event for cooperative cancellation
    :rtype: ExactResult
    """
    return BranchAndBound(instance, budget, cancel).run()


def estimate_search_space(n_e2, n_cn, n_comp, n_xapps):
    """
    Size of the placement search space, (n_e2 * n_cn) ** n_comp + (n_e2 * n_cn) ** n_xapps

    :rtype: float
    """
    for v in (n_e2, n_cn, n_comp, n_xapps):
        if v < 1:
            raise PyricoError('Search space counts must be at least 1')
    base = n_e2 * n_cn
    return float(base ** n_comp + base ** n_xapps)
