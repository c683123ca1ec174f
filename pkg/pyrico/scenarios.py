"""Hierarchical evaluation topology and fault schedules for the orchestration simulator"""


from .printing import PyricoError
from .config import ConfigError
from .model import (Instance, OverlayGraph, ComputeNode, E2Node, ComponentDemands, XAppSpec, Demand, UNBOUNDED,
                    E2T, SDL, NIB, is_xapp_component)
from .heuristic import solve_heuristic

from collections import namedtuple

import json
import logging
import networkx as nx
import numpy as np


logger = logging.getLogger(__name__)


TierRow = namedtuple('TierRow', ['e2_count', 'fixed_cost', 'var_costs', 'proc', 'mem', 'sto'])
TierRow.__doc__ = 'One tier of sites; var_costs are the (RIC_Man and E2T, SDL/STSL and NIBs, xApp) costs of its CNs'


class TierSpec(object):
    """Parameters of the hierarchical RAN topology and of the RIC components deployed on it"""

    def __init__(self, tiers=None, cloud_var_costs=(2., 2., 1., 1., 1.), link_latency_choices=(1, 2, 2, 3, 3),
                 cloud_link_ms=4., cn_access_ms=1., demands=None, xapp_count=2, xapp_rho_ms=10.,
                 xapp_demands=(1., 2., 1.), xapp_needs_data=True):
        """
        :param tiers: Tier rows from the top (closest to the cloud) down; defaults to three tiers of 5, 20 and 487 E2
        nodes
        :param cloud_var_costs: Cloud variable costs of (RIC_Man, E2T, SDL/STSL, NIBs, xApp)
        :param link_latency_choices: Values the one-way latency of an inter-tier link is drawn from
        :param cloud_link_ms: One-way latency between a top-tier site and the cloud node
        :param cn_access_ms: One-way latency between a site and the compute node installed there
        """
        if tiers is None:
            tiers = [TierRow(5, 10., (4., 2., 1.), 32., 64., 256.),
                     TierRow(20, 20., (8., 4., 2.), 16., 32., 256.),
                     TierRow(487, 30., (16., 8., 4.), 8., 16., 256.)]
        self.tiers = [TierRow(*t) for t in tiers]
        self.cloud_var_costs = tuple(float(x) for x in cloud_var_costs)
        self.link_latency_choices = tuple(link_latency_choices)
        self.cloud_link_ms = float(cloud_link_ms)
        self.cn_access_ms = float(cn_access_ms)
        if demands is None:
            demands = {'ricman': (4., 8., 4.), 'e2t': (2., 4., 2.), 'sdl': (2., 4., 1.), 'nib': (1., 2., 50.)}
        self.demands = {k: tuple(v) for k, v in demands.items()}
        self.xapp_count = int(xapp_count)
        self.xapp_rho_ms = float(xapp_rho_ms)
        self.xapp_demands = tuple(xapp_demands)
        self.xapp_needs_data = bool(xapp_needs_data)

    @property
    def n_sites(self):
        return sum(t.e2_count for t in self.tiers)

    def to_dict(self):
        return {'tiers': [t._asdict() for t in self.tiers], 'cloud_var_costs': list(self.cloud_var_costs),
                'link_latency_choices': list(self.link_latency_choices), 'cloud_link_ms': self.cloud_link_ms,
                'cn_access_ms': self.cn_access_ms, 'demands': {k: list(v) for k, v in self.demands.items()},
                'xapp_count': self.xapp_count, 'xapp_rho_ms': self.xapp_rho_ms,
                'xapp_demands': list(self.xapp_demands), 'xapp_needs_data': self.xapp_needs_data}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if 'tiers' in d:
            d['tiers'] = [TierRow(t['e2_count'], t['fixed_cost'], tuple(t['var_costs']), t['proc'], t['mem'],
                                  t['sto']) for t in d['tiers']]
        try:
            return cls(**d)
        except TypeError as err:
            raise ConfigError('Invalid tier specification: %s' % err)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as f:
                return cls.from_dict(json.load(f))
        except FileNotFoundError:
            raise PyricoError('Tier specification file %s not found' % path)
        except ValueError as err:
            raise ConfigError('Tier specification file %s is not valid JSON: %s' % (path, err))


def _check_tiers(tiers, n_cns):
    if not tiers.tiers:
        raise ConfigError('The topology needs at least one tier')
    for i, t in enumerate(tiers.tiers):
        if t.e2_count < 1:
            raise ConfigError('Tier %i has %s E2 nodes; every tier needs at least one' % (i + 1, t.e2_count))
    if n_cns < 0 or n_cns > tiers.n_sites:
        raise ConfigError('Cannot place %i edge CNs on %i sites' % (n_cns, tiers.n_sites))
    if tiers.xapp_count < 1:
        raise ConfigError('At least one xApp is required')


def generate_hierarchical_topology(tiers=None, n_cns=0, seed=0, round_trip_factor=2.0):
    """
    Builds the tiered RAN instance. Every E2 node sits at its own site. Site k of a tier hangs off site k mod n of the
    tier above (n sites there), the top tier hangs off the cloud node, and edge CNs are installed at the sites of the
    lowest tier first, then upward, in site order. Overlay latencies are shortest-path sums over this tree.

    :param tiers: Topology parameters; defaults to TierSpec()
    :type tiers: TierSpec
    :param n_cns: Number of edge compute nodes
    :type n_cns: int
    :param seed: Seed of the inter-tier link latency draws
    :type seed: int
    :param round_trip_factor: Factor applied to one-way loop paths
    :rtype: pyrico.model.Instance
    """
    tiers = tiers if tiers is not None else TierSpec()
    _check_tiers(tiers, n_cns)
    rng = np.random.RandomState(seed)

    tree = nx.Graph()
    tree.add_node('c0')
    sites = []
    e2_nodes = []
    count = 0
    for level, row in enumerate(tiers.tiers):
        level_sites = []
        for k in range(row.e2_count):
            count += 1
            site = 'n%03d' % count
            if level == 0:
                tree.add_edge('c0', site, weight=tiers.cloud_link_ms)
            else:
                parent = sites[level - 1][k % len(sites[level - 1])]
                tree.add_edge(parent, site, weight=float(rng.choice(tiers.link_latency_choices)))
            level_sites.append(site)
            e2_nodes.append(E2Node(site, level + 1))
        sites.append(level_sites)

    xapps = [XAppSpec('xapp%i' % (i + 1), tiers.xapp_rho_ms, tiers.xapp_needs_data, (), tiers.xapp_demands)
             for i in range(tiers.xapp_count)]
    xapp_ids = [a.id for a in xapps]

    cr, ce, cs, cd, ca = tiers.cloud_var_costs
    compute_nodes = [ComputeNode('c0', 0, UNBOUNDED, UNBOUNDED, UNBOUNDED, 0., cr, ce, cs, cd,
                                 {a: ca for a in xapp_ids})]
    hosts = [(level, s) for level in reversed(range(len(tiers.tiers))) for s in sites[level]][:n_cns]
    for i, (level, site) in enumerate(hosts):
        row = tiers.tiers[level]
        cn = 'c%03d' % (i + 1)
        rt, sd, xa = row.var_costs
        compute_nodes.append(ComputeNode(cn, level + 1, float(row.proc), float(row.mem), float(row.sto),
                                         row.fixed_cost, rt, rt, sd, sd, {a: xa for a in xapp_ids}))
        tree.add_edge(cn, site, weight=tiers.cn_access_ms)

    node_order = [e.id for e in e2_nodes] + [c.id for c in compute_nodes]
    index = {n: i for i, n in enumerate(node_order)}
    latency = np.zeros((len(node_order), len(node_order)))
    for src in node_order:
        lengths = nx.single_source_dijkstra_path_length(tree, src, weight='weight')
        for dst, v in lengths.items():
            if dst in index:
                latency[index[src], index[dst]] = v

    demands = ComponentDemands(**{k: Demand(*v) for k, v in tiers.demands.items()})
    logger.info('Generated topology with %i E2 nodes and %i edge CNs (seed %s)', len(e2_nodes), n_cns, seed)
    return Instance(OverlayGraph(node_order, latency), e2_nodes, compute_nodes, demands, xapps, round_trip_factor)


class LatencyDelta(object):
    """Extra one-way latency on the link between two overlay nodes, optionally for a limited time"""
    kind = 'LatencyDelta'

    def __init__(self, link, added_ms, duration=None):
        self.link = tuple(link)
        self.added_ms = float(added_ms)
        self.duration = float(duration) if duration is not None else None

    def to_dict(self):
        return {'fault': self.kind, 'link': list(self.link), 'added_ms': self.added_ms, 'duration': self.duration}


class CnCrash(object):
    """A compute node going down, optionally coming back after downtime"""
    kind = 'CnCrash'

    def __init__(self, cn, downtime=None):
        self.cn = cn
        self.downtime = float(downtime) if downtime is not None else None

    @property
    def duration(self):
        return self.downtime

    def to_dict(self):
        return {'fault': self.kind, 'cn': self.cn, 'downtime': self.downtime}


def fault_from_dict(d):
    if d['fault'] == LatencyDelta.kind:
        return LatencyDelta(d['link'], d['added_ms'], d.get('duration'))
    if d['fault'] == CnCrash.kind:
        return CnCrash(d['cn'], d.get('downtime'))
    raise ConfigError('Unknown fault type %s' % d['fault'])


class FaultSchedule(object):
    def __init__(self, entries=()):
        """
        :param entries: (time, fault) pairs
        """
        self.entries = sorted(((float(t), f) for t, f in entries), key=lambda x: x[0])

    def check_horizon(self, horizon):
        for t, f in self.entries:
            if t < 0 or t > horizon:
                raise ConfigError('Fault %s at %s s lies outside the simulated horizon [0, %s]' % (f.kind, t, horizon))

    def to_dict(self):
        return {'faults': [dict(time=t, **f.to_dict()) for t, f in self.entries]}

    @classmethod
    def from_dict(cls, d):
        return cls([(x['time'], fault_from_dict(x)) for x in d['faults']])

    def __len__(self):
        return len(self.entries)


def scenario_latency_spike(instance, e2, added_ms=10., at=150., duration=None, initial=None):
    """
    Slows down the link between an E2 node and the E2T serving it

    :param initial: Placement in force when the fault hits; the heuristic placement if None
    :rtype: FaultSchedule
    """
    if e2 not in instance.e2_ids:
        raise ConfigError('Unknown E2 node %s for the latency spike' % e2)
    if initial is None:
        initial = solve_heuristic(instance)
    t = initial.config[e2].t
    logger.info('Latency spike of %s ms on link %s-%s at %s s', added_ms, e2, t, at)
    return FaultSchedule([(at, LatencyDelta((e2, t), added_ms, duration))])


def scenario_cn_crash(instance, cn, at=40., downtime=None, initial=None):
    """
    Shuts down an edge compute node

    :rtype: FaultSchedule
    :raise CloudCrashUnsupported: if cn is the cloud node
    """
    if cn not in instance.cn_by_id:
        raise ConfigError('Unknown compute node %s for the crash scenario' % cn)
    if instance.cn_by_id[cn].is_cloud:
        raise CloudCrashUnsupported('The cloud node %s is assumed to be always available' % cn)
    if initial is not None and cn not in loop_hosts(instance, initial):
        logger.warning('Crashed CN %s hosts no control-loop component in the initial placement', cn)
    return FaultSchedule([(at, CnCrash(cn, downtime))])


def loop_hosts(instance, solution):
    """Compute nodes running E2T, xApp, SDL/STSL or NIB instances"""
    return set(m for m, c in solution.instances() if c in (E2T, SDL, NIB) or is_xapp_component(c))


def default_spike_e2(instance):
    return instance.e2_ids[-1]


def default_crash_cn(instance, initial):
    """
    The edge compute node running the E2T of the last E2 node, or else the first edge node in any control loop
    """
    t = initial.config[instance.e2_ids[-1]].t
    if not instance.cn_by_id[t].is_cloud:
        return t
    edge = sorted(m for m in loop_hosts(instance, initial) if not instance.cn_by_id[m].is_cloud)
    if not edge:
        raise ConfigError('No edge compute node runs a control-loop component; specify crash_cn')
    return edge[0]


def write_manifest(path, instance_path, schedule, configuration):
    """Bundles the instance reference, fault schedule and resolved configuration of a simulation run"""
    d = {'instance': instance_path, 'schedule': schedule.to_dict(), 'config': configuration.config}
    with open(path, 'w') as f:
        json.dump(d, f, sort_keys=True, indent=1)
        f.write('\n')


def read_manifest(path):
    """
    :return: instance path, FaultSchedule and the configuration dictionary
    """
    with open(path) as f:
        d = json.load(f)
    return d['instance'], FaultSchedule.from_dict(d['schedule']), d['config']


class CloudCrashUnsupported(PyricoError):
    exit_code = 2
