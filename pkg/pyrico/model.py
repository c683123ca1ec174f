"""Domain types of the RIC placement problem and the cost, latency and feasibility evaluations shared by every
solver and by the simulator"""


from .printing import PyricoError

from collections import namedtuple

import hashlib
import json
import logging
import numpy as np


logger = logging.getLogger(__name__)


UNBOUNDED = 'unbounded'

# Component classes making up a configuration tuple (r, t, s, d)
RICMAN = 'ricman'
E2T = 'e2t'
SDL = 'sdl'
NIB = 'nib'
COMPONENT_CLASSES = (RICMAN, E2T, SDL, NIB)

RESOURCES = ('proc', 'mem', 'sto')

# Violation kinds
LATENCY_EXCEEDED = 'LatencyExceeded'
PROC_OVERFLOW = 'ProcOverflow'
MEM_OVERFLOW = 'MemOverflow'
STO_OVERFLOW = 'StoOverflow'
INCOMPLETE_ASSIGNMENT = 'IncompleteAssignment'
OVERFLOW_KINDS = {'proc': PROC_OVERFLOW, 'mem': MEM_OVERFLOW, 'sto': STO_OVERFLOW}


def xapp_component(xapp_id):
    """Component reference for the instance of an xApp"""
    return 'xapp:%s' % xapp_id


def is_xapp_component(component):
    return component.startswith('xapp:')


def xapp_of(component):
    """Inverse of xapp_component"""
    return component[len('xapp:'):]


def is_bounded(capacity):
    return capacity != UNBOUNDED


Demand = namedtuple('Demand', ['proc', 'mem', 'sto'])

Configuration = namedtuple('Configuration', ['r', 't', 's', 'd'])
Configuration.__doc__ = 'Hosts of RIC_Man, E2T, SDL/STSL and NIBs serving one E2 node'

Violation = namedtuple('Violation', ['kind', 'subject', 'measured', 'limit'])


class ComputeNode(object):
    """A computing node, either the cloud node (tier 0) or an edge host with finite resources"""

    def __init__(self, id, tier, proc_capacity, mem_capacity, sto_capacity, fixed_cost=0., var_cost_ricman=0.,
                 var_cost_e2t=0., var_cost_sdl=0., var_cost_nib=0., var_cost_xapp=None):
        self.id = id
        self.tier = int(tier)
        self.proc_capacity = proc_capacity
        self.mem_capacity = mem_capacity
        self.sto_capacity = sto_capacity
        self.fixed_cost = float(fixed_cost)
        self.var_cost_ricman = float(var_cost_ricman)
        self.var_cost_e2t = float(var_cost_e2t)
        self.var_cost_sdl = float(var_cost_sdl)
        self.var_cost_nib = float(var_cost_nib)
        self.var_cost_xapp = dict(var_cost_xapp) if var_cost_xapp else dict()

    @property
    def is_cloud(self):
        return self.tier == 0

    def capacity(self, resource):
        return getattr(self, '%s_capacity' % resource)

    def var_cost(self, component):
        """
        Variable cost of running one instance of the component on this node

        :param component: One of COMPONENT_CLASSES or a reference built by xapp_component
        :type component: str
        :rtype: float
        """
        if is_xapp_component(component):
            return self.var_cost_xapp[xapp_of(component)]
        return getattr(self, 'var_cost_%s' % component)

    def to_dict(self):
        return {'id': self.id, 'tier': self.tier, 'proc_capacity': self.proc_capacity,
                'mem_capacity': self.mem_capacity, 'sto_capacity': self.sto_capacity,
                'fixed_cost': self.fixed_cost, 'var_cost_ricman': self.var_cost_ricman,
                'var_cost_e2t': self.var_cost_e2t, 'var_cost_sdl': self.var_cost_sdl,
                'var_cost_nib': self.var_cost_nib, 'var_cost_xapp': dict(sorted(self.var_cost_xapp.items()))}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def __repr__(self):
        return 'ComputeNode(%s, tier %i)' % (self.id, self.tier)


class E2Node(object):
    """A RAN element terminating one end of every control loop it takes part in"""

    def __init__(self, id, tier=0):
        self.id = id
        self.tier = int(tier)

    def to_dict(self):
        return {'id': self.id, 'tier': self.tier}

    def __repr__(self):
        return 'E2Node(%s)' % self.id


class OverlayGraph(object):
    """Dense symmetric matrix of one-way latencies (ms) between all E2 nodes and compute nodes"""

    def __init__(self, node_order, latency):
        """
        :param node_order: Node ids, in the row order of the latency matrix
        :type node_order: list
        :param latency: Square matrix of one-way latencies in ms
        :type latency: np.ndarray
        """
        self.node_order = list(node_order)
        self.latency = np.array(latency, dtype=float)
        self.latency.setflags(write=False)
        self.index = {n: i for i, n in enumerate(self.node_order)}
        # Plain lists make scalar lookups in the solvers much cheaper than numpy indexing
        self._rows = self.latency.tolist()

    @property
    def nodes(self):
        return self.node_order

    def lat(self, a, b):
        return self._rows[self.index[a]][self.index[b]]

    def with_link_delta(self, a, b, added_ms):
        """
        Returns a copy in which the link between a and b is slower by added_ms in both directions
        """
        lat = self.latency.copy()
        i, j = self.index[a], self.index[b]
        lat[i, j] += added_ms
        if i != j:
            lat[j, i] += added_ms
        return OverlayGraph(self.node_order, lat)

    def subgraph(self, keep):
        """Returns the graph restricted to the node ids in keep, preserving order"""
        order = [n for n in self.node_order if n in keep]
        idx = [self.index[n] for n in order]
        return OverlayGraph(order, self.latency[np.ix_(idx, idx)])

    def to_dict(self):
        return {'node_order': list(self.node_order), 'latency': self.latency.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d['node_order'], d['latency'])


class ComponentDemands(object):
    """Resource demands of one instance of each component class"""

    def __init__(self, ricman, e2t, sdl, nib):
        self.ricman = Demand(*ricman)
        self.e2t = Demand(*e2t)
        self.sdl = Demand(*sdl)
        self.nib = Demand(*nib)

    def for_class(self, component):
        return getattr(self, component)

    def to_dict(self):
        return {c: dict(self.for_class(c)._asdict()) for c in COMPONENT_CLASSES}

    @classmethod
    def from_dict(cls, d):
        return cls(**{c: Demand(**d[c]) for c in COMPONENT_CLASSES})


class XAppSpec(object):
    """An xApp with its latency threshold, data-access flag, call chain and demands"""

    def __init__(self, id, rho_ms, needs_data=False, chain=(), demands=(0., 0., 0.)):
        self.id = id
        self.rho_ms = float(rho_ms)
        self.needs_data = bool(needs_data)
        self.chain = tuple(chain)
        self.demands = Demand(*demands)

    @property
    def calls_others(self):
        return len(self.chain) > 0

    def to_dict(self):
        return {'id': self.id, 'rho_ms': self.rho_ms, 'needs_data': self.needs_data, 'chain': list(self.chain),
                'demands': dict(self.demands._asdict())}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d['demands'] = Demand(**d['demands'])
        return cls(**d)

    def __repr__(self):
        return 'XAppSpec(%s)' % self.id


class Instance(object):
    """Full input of a placement problem"""

    def __init__(self, graph, e2_nodes, compute_nodes, demands, xapps, round_trip_factor=2.0):
        self.graph = graph
        self.e2_nodes = list(e2_nodes)
        self.compute_nodes = list(compute_nodes)
        self.demands = demands
        self.xapps = list(xapps)
        self.round_trip_factor = float(round_trip_factor)

        self.cn_by_id = {c.id: c for c in self.compute_nodes}
        self.xapp_by_id = {a.id: a for a in self.xapps}
        self.e2_ids = sorted(e.id for e in self.e2_nodes)
        self.cn_ids = sorted(self.cn_by_id)

    @property
    def cloud(self):
        """The tier-0 compute node"""
        for c in self.compute_nodes:
            if c.is_cloud:
                return c
        return None

    def demand_of(self, component):
        if is_xapp_component(component):
            return self.xapp_by_id[xapp_of(component)].demands
        return self.demands.for_class(component)

    def loop_components(self):
        """Components taking part in the control loop of every E2 node, in placement order"""
        return [E2T] + [xapp_component(a.id) for a in self.xapps] + [SDL, NIB]

    def without_nodes(self, cn_ids):
        """
        Returns a copy of the instance without the given compute nodes

        :param cn_ids: Ids of compute nodes to drop
        :type cn_ids: iterable
        :rtype: Instance
        """
        drop = set(cn_ids)
        cns = [c for c in self.compute_nodes if c.id not in drop]
        keep = set(c.id for c in cns) | set(e.id for e in self.e2_nodes)
        return Instance(self.graph.subgraph(keep), self.e2_nodes, cns, self.demands, self.xapps,
                        self.round_trip_factor)

    def with_graph(self, graph):
        """Returns a copy of the instance using another latency matrix over the same nodes"""
        return Instance(graph, self.e2_nodes, self.compute_nodes, self.demands, self.xapps, self.round_trip_factor)

    def to_dict(self):
        return {'graph': self.graph.to_dict(),
                'compute_nodes': [c.to_dict() for c in self.compute_nodes],
                'e2_nodes': [e.to_dict() for e in self.e2_nodes],
                'demands': self.demands.to_dict(),
                'xapps': [a.to_dict() for a in self.xapps],
                'round_trip_factor': self.round_trip_factor}

    @classmethod
    def from_dict(cls, d):
        return cls(OverlayGraph.from_dict(d['graph']),
                   [E2Node(**e) for e in d['e2_nodes']],
                   [ComputeNode.from_dict(c) for c in d['compute_nodes']],
                   ComponentDemands.from_dict(d['demands']),
                   [XAppSpec.from_dict(a) for a in d['xapps']],
                   d.get('round_trip_factor', 2.0))


class Solution(object):
    """
    A placement: one configuration tuple per E2 node plus one host per (E2 node, xApp) pair, with the indicators
    derived from them. When an instance is supplied the costs are evaluated as well.
    """

    def __init__(self, config, xapp_host, instance=None):
        """
        :param config: Map of E2 node id to Configuration
        :type config: dict
        :param xapp_host: Map of (E2 node id, xApp id) to compute node id
        :type xapp_host: dict
        :param instance: If given, fixed_cost, variable_cost and total_cost are computed against it
        :type instance: Instance
        """
        self.config = {e: Configuration(*p) for e, p in config.items()}
        self.xapp_host = dict(xapp_host)

        self.ricman_on = frozenset(p.r for p in self.config.values())
        self.e2t_on = frozenset(p.t for p in self.config.values())
        self.sdl_on = frozenset(p.s for p in self.config.values())
        self.nib_on = frozenset(p.d for p in self.config.values())
        self.xapp_on = frozenset((m, a) for (e, a), m in self.xapp_host.items())
        self.used = frozenset(self.ricman_on | self.e2t_on | self.sdl_on | self.nib_on |
                              set(m for m, a in self.xapp_on))

        if instance is not None:
            self.fixed_cost = fixed_cost(instance, self)
            self.variable_cost = variable_cost(instance, self)
            self.total_cost = self.fixed_cost + self.variable_cost
        else:
            self.fixed_cost = self.variable_cost = self.total_cost = None

    def hosts_of(self, component):
        """Set of compute nodes running an instance of the component"""
        if is_xapp_component(component):
            a = xapp_of(component)
            return frozenset(m for m, x in self.xapp_on if x == a)
        return {RICMAN: self.ricman_on, E2T: self.e2t_on, SDL: self.sdl_on, NIB: self.nib_on}[component]

    def instances(self):
        """All deployed (compute node, component) instances"""
        out = set()
        for c in COMPONENT_CLASSES:
            out.update((m, c) for m in self.hosts_of(c))
        out.update((m, xapp_component(a)) for m, a in self.xapp_on)
        return out

    def instance_counts(self):
        return {'e2t': len(self.e2t_on), 'xapp': len(self.xapp_on)}

    def assignment_key(self):
        """Ordering key by (E2 id, r, t, s, d, xApp hosts in xApp id order)"""
        key = []
        for e in sorted(self.config):
            p = self.config[e]
            hosts = tuple(self.xapp_host[(x, a)] for (x, a) in sorted(self.xapp_host) if x == e)
            key.append((e, p.r, p.t, p.s, p.d) + hosts)
        return tuple(key)

    def to_dict(self):
        return {'config': {e: dict(self.config[e]._asdict()) for e in sorted(self.config)},
                'xapp_host': [{'e2': e, 'xapp': a, 'cn': self.xapp_host[(e, a)]} for e, a in sorted(self.xapp_host)],
                'used': sorted(self.used),
                'ricman_on': sorted(self.ricman_on), 'e2t_on': sorted(self.e2t_on),
                'sdl_on': sorted(self.sdl_on), 'nib_on': sorted(self.nib_on),
                'xapp_on': [list(x) for x in sorted(self.xapp_on)],
                'fixed_cost': self.fixed_cost, 'variable_cost': self.variable_cost, 'total_cost': self.total_cost}

    @classmethod
    def from_dict(cls, d, instance=None):
        config = {e: Configuration(**p) for e, p in d['config'].items()}
        hosts = {(h['e2'], h['xapp']): h['cn'] for h in d['xapp_host']}
        return cls(config, hosts, instance)

    def digest(self):
        """Short stable hash of the assignment, used to tag solutions in traces"""
        s = json.dumps({'config': self.to_dict()['config'], 'xapp_host': self.to_dict()['xapp_host']},
                       sort_keys=True)
        return hashlib.sha1(s.encode('utf-8')).hexdigest()[:12]

    def __eq__(self, other):
        return isinstance(other, Solution) and self.config == other.config and self.xapp_host == other.xapp_host

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(self.digest())

    def __repr__(self):
        return 'Solution(%s, cost=%s)' % (self.digest(), self.total_cost)


def validate_instance(instance):
    """
    Checks the structural invariants of an instance

    :param instance: The instance to check
    :type instance: Instance
    :return: One message per violated invariant, each naming the offending field; empty if the instance is valid
    :rtype: list
    """
    errors = []
    if not instance.e2_nodes:
        errors.append('e2_nodes: must not be empty')
    if not instance.compute_nodes:
        errors.append('compute_nodes: must not be empty')
    if not instance.xapps:
        errors.append('xapps: must not be empty')
    if instance.round_trip_factor <= 0.:
        errors.append('round_trip_factor: must be positive, got %s' % instance.round_trip_factor)

    cn_ids = [c.id for c in instance.compute_nodes]
    e2_ids = [e.id for e in instance.e2_nodes]
    xapp_ids = [a.id for a in instance.xapps]
    for name, ids in (('compute_nodes', cn_ids), ('e2_nodes', e2_ids), ('xapps', xapp_ids)):
        dups = sorted(set(i for i in ids if ids.count(i) > 1))
        if dups:
            errors.append('%s: duplicate id(s) %s' % (name, ', '.join(map(str, dups))))
    shared = sorted(set(cn_ids) & set(e2_ids))
    if shared:
        errors.append('e2_nodes: id(s) %s also used by compute nodes' % ', '.join(map(str, shared)))

    clouds = [c.id for c in instance.compute_nodes if c.tier == 0]
    if len(clouds) > 1:
        errors.append('compute_nodes: duplicate cloud node (tier 0): %s' % ', '.join(map(str, clouds)))
    elif instance.compute_nodes and not clouds:
        errors.append('compute_nodes: missing cloud node (tier 0)')

    for c in instance.compute_nodes:
        for r in RESOURCES:
            cap = c.capacity(r)
            if c.is_cloud and is_bounded(cap):
                errors.append('compute_nodes[%s].%s_capacity: cloud node must be unbounded' % (c.id, r))
            elif is_bounded(cap) and (not isinstance(cap, (int, float)) or cap <= 0):
                errors.append('compute_nodes[%s].%s_capacity: bounded capacity must be positive' % (c.id, r))
        costs = [('fixed_cost', c.fixed_cost)] + [('var_cost_%s' % k, c.var_cost(k)) for k in COMPONENT_CLASSES]
        costs += [('var_cost_xapp[%s]' % a, v) for a, v in sorted(c.var_cost_xapp.items())]
        for name, v in costs:
            if v < 0:
                errors.append('compute_nodes[%s].%s: cost must be nonnegative' % (c.id, name))
        for a in xapp_ids:
            if a not in c.var_cost_xapp:
                errors.append('compute_nodes[%s].var_cost_xapp: missing xApp %s' % (c.id, a))

    for k in COMPONENT_CLASSES:
        if any(v < 0 for v in instance.demands.for_class(k)):
            errors.append('demands.%s: demands must be nonnegative' % k)

    for a in instance.xapps:
        if a.rho_ms <= 0:
            errors.append('xapps[%s].rho_ms: must be positive' % a.id)
        if any(v < 0 for v in a.demands):
            errors.append('xapps[%s].demands: demands must be nonnegative' % a.id)
        if len(set(a.chain)) != len(a.chain):
            errors.append('xapps[%s].chain: duplicate entries' % a.id)
        if a.id in a.chain:
            errors.append('xapps[%s].chain: contains its own id' % a.id)
        missing = [x for x in a.chain if x not in instance.xapp_by_id]
        if missing:
            errors.append('xapps[%s].chain: unknown xApp(s) %s' % (a.id, ', '.join(map(str, missing))))
    if _chain_has_cycle(instance):
        errors.append('xapps.chain: call relation is cyclic')

    errors.extend(_validate_graph(instance.graph, set(cn_ids) | set(e2_ids)))
    return errors


def _chain_has_cycle(instance):
    state = {}

    def visit(a):
        state[a] = 1
        for b in instance.xapp_by_id[a].chain:
            if b not in instance.xapp_by_id:
                continue
            if state.get(b) == 1 or (b not in state and visit(b)):
                return True
        state[a] = 2
        return False

    return any(a.id not in state and visit(a.id) for a in instance.xapps)


def _validate_graph(graph, expected_nodes):
    errors = []
    lat = graph.latency
    n = len(graph.node_order)
    if lat.shape != (n, n):
        return ['graph.latency: shape %s does not match %i nodes' % (lat.shape, n)]
    if set(graph.node_order) != expected_nodes or len(set(graph.node_order)) != n:
        missing = sorted(expected_nodes - set(graph.node_order))
        extra = sorted(set(graph.node_order) - expected_nodes)
        errors.append('graph.node_order: missing %s, unexpected %s' % (missing, extra))
    if not np.all(np.isfinite(lat)):
        errors.append('graph.latency: entries must be finite')
    if np.any(np.diag(lat) != 0):
        errors.append('graph.latency: nonzero diagonal')
    if not np.array_equal(lat, lat.T):
        errors.append('graph.latency: matrix is not symmetric')
    if np.any(lat < 0):
        errors.append('graph.latency: negative latency')
    return errors


def loop_latency(instance, e2, xapp, t, s, d, xapp_host, graph=None):
    """
    Control-loop latency of one (E2 node, xApp) pair for explicitly given hosts.

    :param xapp_host: Map of (E2 node id, xApp id) to compute node id; must cover the xApp and its chain
    :param graph: Latency matrix to evaluate against; defaults to the instance's
    :return: round_trip_factor times the summed one-way path, in ms
    :raise MissingAssignment: if a host taking part in the loop is unassigned
    """
    g = graph if graph is not None else instance.graph
    spec = instance.xapp_by_id[xapp]
    h = xapp_host.get((e2, xapp))
    if t is None or h is None or (spec.needs_data and (s is None or d is None)):
        raise MissingAssignment('Loop of %s/%s has unassigned hosts' % (e2, xapp))
    total = g.lat(e2, t) + g.lat(t, h)
    if spec.needs_data:
        total += g.lat(h, s) + g.lat(s, d)
    prev = h
    for x in spec.chain:
        hx = xapp_host.get((e2, x))
        if hx is None:
            raise MissingAssignment('Loop of %s/%s has no host for chained xApp %s' % (e2, xapp, x))
        total += g.lat(prev, hx)
        if instance.xapp_by_id[x].needs_data:
            if s is None or d is None:
                raise MissingAssignment('Loop of %s/%s has unassigned data hosts' % (e2, xapp))
            total += g.lat(hx, s) + g.lat(s, d)
        prev = hx
    return instance.round_trip_factor * total


def control_loop_latency(instance, solution, e2, xapp, graph=None):
    """
    Round-trip latency of the control loop between an E2 node and one of its xApps

    :param instance: The problem instance
    :type instance: Instance
    :param solution: Placement to evaluate
    :type solution: Solution
    :param e2: E2 node id
    :param xapp: xApp id
    :param graph: Optional latency matrix overriding the instance's, e.g. with faults applied
    :rtype: float
    """
    p = solution.config.get(e2)
    if p is None:
        raise MissingAssignment('E2 node %s has no configuration' % e2)
    return loop_latency(instance, e2, xapp, p.t, p.s, p.d, solution.xapp_host, graph)


def fixed_cost(instance, solution):
    """Activation cost of every compute node hosting at least one component"""
    return sum(instance.cn_by_id[m].fixed_cost for m in sorted(solution.used))


def variable_cost(instance, solution):
    """Running cost of every deployed component instance, each charged once per compute node"""
    total = 0.
    for m, component in sorted(solution.instances()):
        total += instance.cn_by_id[m].var_cost(component)
    return total


def total_cost(instance, solution):
    return fixed_cost(instance, solution) + variable_cost(instance, solution)


def resource_usage(instance, solution):
    """
    :return: Map of compute node id to aggregated [proc, mem, sto] demand of its hosted instances
    :rtype: dict
    """
    usage = {m: np.zeros(3) for m in instance.cn_by_id}
    for m, component in solution.instances():
        if m in usage:
            usage[m] += np.array(instance.demand_of(component), dtype=float)
    return usage


def check_feasible(instance, solution):
    """
    Evaluates every constraint of the placement problem

    :return: All violated constraints; empty iff the solution is feasible
    :rtype: list of Violation
    """
    violations = []
    complete = set()
    for e in instance.e2_ids:
        p = solution.config.get(e)
        if p is None or any(m not in instance.cn_by_id for m in p):
            violations.append(Violation(INCOMPLETE_ASSIGNMENT, e, 1., 0.))
            continue
        ok = True
        for a in instance.xapps:
            if solution.xapp_host.get((e, a.id)) not in instance.cn_by_id:
                violations.append(Violation(INCOMPLETE_ASSIGNMENT, (e, a.id), 1., 0.))
                ok = False
        if ok:
            complete.add(e)

    for e in instance.e2_ids:
        if e not in complete:
            continue
        for a in instance.xapps:
            measured = control_loop_latency(instance, solution, e, a.id)
            if measured > a.rho_ms:
                violations.append(Violation(LATENCY_EXCEEDED, (e, a.id), measured, a.rho_ms))

    usage = resource_usage(instance, solution)
    for m in instance.cn_ids:
        cn = instance.cn_by_id[m]
        for i, r in enumerate(RESOURCES):
            cap = cn.capacity(r)
            if is_bounded(cap) and usage[m][i] > cap:
                violations.append(Violation(OVERFLOW_KINDS[r], m, float(usage[m][i]), float(cap)))
    return violations


def load_instance(path):
    """
    Reads an instance from a JSON file and validates it

    :raise InstanceError: if the file violates the instance invariants
    """
    try:
        with open(path) as f:
            d = json.load(f)
    except FileNotFoundError:
        raise PyricoError('Instance file %s not found' % path)
    except ValueError as err:
        raise InstanceError('Instance file %s is not valid JSON: %s' % (path, err))
    try:
        instance = Instance.from_dict(d)
    except (KeyError, TypeError) as err:
        raise InstanceError('Instance file %s is missing or misnames a field: %s' % (path, err))
    errors = validate_instance(instance)
    if errors:
        raise InstanceError('Instance file %s is invalid:\n\t%s' % (path, '\n\t'.join(errors)),
                            'Instance file %s is invalid (%i problems, first: %s)' % (path, len(errors), errors[0]))
    logger.info('Loaded instance %s with %i E2 nodes and %i compute nodes', path, len(instance.e2_nodes),
                len(instance.compute_nodes))
    return instance


def save_instance(instance, path):
    with open(path, 'w') as f:
        json.dump(instance.to_dict(), f, sort_keys=True)
        f.write('\n')


def save_solution(solution, path, extra=None):
    d = solution.to_dict()
    if extra:
        d.update(extra)
    with open(path, 'w') as f:
        json.dump(d, f, sort_keys=True, indent=1)
        f.write('\n')


def load_solution(path, instance=None):
    with open(path) as f:
        return Solution.from_dict(json.load(f), instance)


class MissingAssignment(PyricoError):
    pass


class InstanceError(PyricoError):
    exit_code = 2
