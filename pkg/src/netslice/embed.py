"""Constrained pathfinding and request embedding.

The pathfinder enumerates candidate shortest paths over device-level
adjacency, validating each against label availability, bandwidth residuals
and layer adaptation capabilities; failed candidates enter an exclusion set
and the search continues with the next-shortest (k-shortest by exclusion).

The same engine serves both levels of the two-level embedding: the broker's
abstract delegation graph (domain nodes, border interfaces, reachability
flags) and a provider's detailed substrate (devices, switch matrices,
adaptations).

Residual capacity lives in the model itself: availableBandwidth,
availableLabelSet and availableUnits triples are rewritten by allocation,
with matching inUse* facts, so a path search over a model always sees
current state.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import vocab
from .graphstore import (
    Iri,
    Literal,
    Model,
    Triple,
    int_value,
    integer,
    string,
)
from .models import DelegationView, SliceRequest, SubstrateGraph
from .pathquery import HopWitness, Pred, Seq, adjacent, sub_graph
from .vocab import (
    AVAILABLE_BANDWIDTH,
    AVAILABLE_LABEL_SET,
    AVAILABLE_UNITS,
    AT_LAYER,
    IN_USE_BANDWIDTH,
    IN_USE_LABEL_SET,
    IN_USE_UNITS,
    INTERNALLY_REACHABLE,
    LABEL_TRANSLATOR,
    LAYERS,
    NETWORK_CONNECTION,
    NETWORK_DOMAIN,
    entailed_schema,
    parse_label_set,
    render_label_set,
)

DEVICE_ADJACENCY = Seq(
    Pred(vocab.HAS_INTERFACE), Pred(vocab.LINKED_TO), Pred(vocab.INTERFACE_OF)
)


class InsufficientResources(Exception):
    def __init__(self, node: Iri, compute_class: Iri):
        self.node = node
        self.compute_class = compute_class
        super().__init__(f"no domain has units of {compute_class.local()} for {node.value}")


class EmbeddingFailed(Exception):
    def __init__(self, element: Iri, reason: str):
        self.element = element
        self.reason = reason
        super().__init__(f"{element.value}: {reason}")


class OverAllocation(Exception):
    pass


class DoubleRelease(Exception):
    pass


# -- path finding ---------------------------------------------------------------


@dataclass(frozen=True)
class PathRequest:
    source: Iri
    dest: Iri
    layer: Iri
    bandwidth: int = 0
    required_label: Optional[int] = None

    def __post_init__(self):
        if self.source == self.dest:
            raise ValueError("path source and destination must differ")
        if self.bandwidth < 0:
            raise ValueError("bandwidth must be non-negative")


@dataclass(frozen=True)
class PathHop:
    element: Iri
    ingress: Optional[Iri]
    egress: Optional[Iri]
    layer: Optional[Iri]


@dataclass(frozen=True)
class PathSegment:
    """One traversed connection: the interface pair, its layer, the model
    entities carrying its resources (a link entity, or the two border
    interfaces of a crossing), and the allocated label if any."""

    a_iface: Iri
    b_iface: Iri
    layer: Iri
    carriers: tuple
    label: Optional[int]


@dataclass(frozen=True)
class PathResult:
    hops: tuple
    segments: tuple
    consumed_bandwidth: int
    internal_elements: tuple

    @property
    def allocated_label(self) -> Optional[int]:
        for seg in self.segments:
            if seg.label is not None:
                return seg.label
        return None

    def hop_count(self) -> int:
        return len(self.segments)


class ExclusionSet:
    """Hop sequences already found invalid in this search. Grows only."""

    def __init__(self):
        self._keys = set()

    def add(self, key) -> None:
        self._keys.add(key)

    def __contains__(self, key) -> bool:
        return key in self._keys

    def __len__(self) -> int:
        return len(self._keys)


def _chain_key(source: Iri, chain: tuple):
    return (source.value,) + tuple(
        (w.neighbor.value, tuple(v.value for v in w.via)) for w in chain
    )


def _candidate_paths(m: Model, source: Iri, dest: Iri):
    """Simple paths from source to dest as HopWitness chains, in order of
    (hop count, lexicographic hop sequence). Parallel links yield distinct
    candidates."""
    heap = [(0, (), ())]
    while heap:
        length, key, chain = heapq.heappop(heap)
        last = chain[-1].neighbor if chain else source
        if last == dest:
            yield chain
            continue
        visited = {source} | {w.neighbor for w in chain}
        for w in adjacent(m, last, DEVICE_ADJACENCY):
            if w.neighbor in visited:
                continue
            step_key = (w.neighbor.value, tuple(v.value for v in w.via))
            heapq.heappush(heap, (length + 1, key + (step_key,), chain + (w,)))


def _device_layer(m: Model, device: Iri) -> Optional[Iri]:
    direct = m.value(device, AT_LAYER)
    if isinstance(direct, Iri) and direct in LAYERS:
        return direct
    for matrix in m.objects(device, vocab.HAS_SWITCH_MATRIX):
        if isinstance(matrix, Iri):
            for t in m.types(matrix):
                if t in LAYERS:
                    return t
    return None


def _device_adaptations(m: Model, device: Iri) -> list:
    specs = []
    for a in m.objects(device, vocab.HAS_ADAPTATION):
        if not isinstance(a, Iri):
            continue
        client = m.value(a, vocab.ADAPTATION_CLIENT)
        server = m.value(a, vocab.ADAPTATION_SERVER)
        cap = int_value(m.value(a, vocab.ADAPTATION_CAPACITY)) or 1
        if isinstance(client, Iri) and isinstance(server, Iri):
            specs.append((client, server, cap))
    return specs


def _has_adaptation(m: Model, device: Iri, layer_a: Iri, layer_b: Iri) -> bool:
    for client, server, cap in _device_adaptations(m, device):
        if {client, server} == {layer_a, layer_b} and cap >= 1:
            return True
    return False


def _link_between(m: Model, a: Iri, b: Iri) -> Optional[Iri]:
    candidates = [
        link
        for link in m.subjects(vocab.HAS_ENDPOINT, a)
        if NETWORK_CONNECTION in m.types(link) and b in m.objects(link, vocab.HAS_ENDPOINT)
    ]
    return candidates[0] if candidates else None


def _carrier_bandwidth(m: Model, carriers) -> int:
    values = []
    for c in carriers:
        v = int_value(m.value(c, AVAILABLE_BANDWIDTH))
        values.append(v if v is not None else 0)
    return min(values) if values else 0


def _carrier_pool(m: Model, carriers) -> frozenset:
    pools = []
    for c in carriers:
        lit = m.value(c, AVAILABLE_LABEL_SET)
        pools.append(parse_label_set(lit.lexical) if isinstance(lit, Literal) else frozenset())
    out = pools[0]
    for p in pools[1:]:
        out &= p
    return out


def _segment_of(m: Model, a_iface: Iri, b_iface: Iri, fallback_layer: Iri):
    """Resolve the resource carriers and layer for one interface pair."""
    link = _link_between(m, a_iface, b_iface)
    if link is not None:
        layer = m.value(link, AT_LAYER)
        return (link,), layer if isinstance(layer, Iri) else fallback_layer
    layers = set()
    for iface in (a_iface, b_iface):
        lv = m.value(iface, AT_LAYER)
        if isinstance(lv, Iri):
            layers.add(lv)
    if len(layers) > 1:
        return None, None  # disagreeing crossing layers: unusable
    return (a_iface, b_iface), (layers.pop() if layers else fallback_layer)


def _validate_candidate(m: Model, source: Iri, chain: tuple, preq: PathRequest):
    """Check one candidate path. Returns a PathResult or None."""
    elements = [source] + [w.neighbor for w in chain]

    segments = []
    for w in chain:
        a_iface, b_iface = w.via
        carriers, layer = _segment_of(m, a_iface, b_iface, preq.layer)
        if carriers is None:
            return None
        if _carrier_bandwidth(m, carriers) < preq.bandwidth:
            return None
        segments.append([a_iface, b_iface, layer, carriers, None])

    # layer transitions: at every element boundary, the two incident layers
    # must either agree or be bridged by an adaptation on that element.
    # Endpoints behave as if attached at the request layer.
    boundary_layers = (
        [(preq.layer, segments[0][2])]
        + [(segments[i][2], segments[i + 1][2]) for i in range(len(segments) - 1)]
        + [(segments[-1][2], preq.layer)]
    )
    for i, element in enumerate(elements):
        lin, lout = boundary_layers[i]
        is_domain = NETWORK_DOMAIN in m.types(element)
        intermediate = 0 < i < len(elements) - 1
        if lin != lout:
            if is_domain or not _has_adaptation(m, element, lin, lout):
                return None
        elif intermediate:
            if is_domain:
                in_if = chain[i - 1].via[1]
                out_if = chain[i].via[0]
                if (
                    Triple(in_if, INTERNALLY_REACHABLE, out_if) not in m
                    and Triple(out_if, INTERNALLY_REACHABLE, in_if) not in m
                ):
                    return None
            else:
                if _device_layer(m, element) != lin:
                    return None

    # label continuity: maximal runs of same-layer pooled segments, split
    # where a translator-capable element sits between two segments.
    scopes = []
    current = []
    for i, seg in enumerate(segments):
        spec = LAYERS.get(seg[2])
        pooled = spec is not None and spec.pooled
        if not pooled:
            if current:
                scopes.append(current)
                current = []
            continue
        if current:
            joint = elements[i]  # element between segment i-1 and i
            if LABEL_TRANSLATOR in m.types(joint) or segments[current[-1]][2] != seg[2]:
                scopes.append(current)
                current = []
        current.append(i)
    if current:
        scopes.append(current)
    for scope in scopes:
        common = None
        for i in scope:
            pool = _carrier_pool(m, segments[i][3])
            common = pool if common is None else (common & pool)
        if preq.required_label is not None:
            if preq.required_label not in (common or ()):
                return None
            chosen = preq.required_label
        else:
            if not common:
                return None
            chosen = min(common)
        for i in scope:
            segments[i][4] = chosen

    hops = []
    for i, element in enumerate(elements):
        ingress = chain[i - 1].via[1] if i > 0 else None
        egress = chain[i].via[0] if i < len(chain) else None
        hops.append(PathHop(element, ingress, egress, _device_layer(m, element)))
    return PathResult(
        hops=tuple(hops),
        segments=tuple(PathSegment(*seg) for seg in segments),
        consumed_bandwidth=preq.bandwidth,
        internal_elements=tuple(sub_graph(m, list(chain))),
    )


def shortest_valid_path(m: Model, preq: PathRequest, limit: int = 10):
    """Minimal-hop feasible path, or None.

    Candidates come out in (hop count, lexicographic) order; each failed
    candidate is marked unavailable and the search re-runs. Gives up after
    `limit` failed candidates or when the graph is exhausted.
    """
    exclusions = ExclusionSet()
    for chain in _candidate_paths(m, preq.source, preq.dest):
        key = _chain_key(preq.source, chain)
        if key in exclusions:
            continue
        result = _validate_candidate(m, preq.source, chain, preq)
        if result is not None:
            return result
        exclusions.add(key)
        if len(exclusions) >= limit:
            return None
    return None


# -- residual state ---------------------------------------------------------------


@dataclass
class _Journal:
    ops: list = field(default_factory=list)


class DomainState:
    """One domain's substrate plus its live residual state.

    The model is the source of truth; allocation rewrites available* triples
    and maintains matching inUse* facts so that a released state serializes
    byte-identically to the original.
    """

    def __init__(self, substrate: SubstrateGraph, model: Model):
        self.substrate = substrate
        self.model = model
        self.active: dict[str, _Journal] = {}
        self._originals = {}
        for link in substrate.links:
            self._originals[(link.iri, "bw")] = link.capacity
            self._originals[(link.iri, "pool")] = link.label_pool
        for b in substrate.borders:
            self._originals[(b.iri, "bw")] = b.bandwidth
            self._originals[(b.iri, "pool")] = b.label_pool
        for p in substrate.pools:
            self._originals[(p.node, p.provides, "units")] = p.units
        self._address_counter = 0

    # -- low-level triple rewrites

    def _read_int(self, subject: Iri, prop: Iri) -> int:
        v = int_value(self.model.value(subject, prop))
        return v if v is not None else 0

    def _write_int(self, subject: Iri, prop: Iri, value: int, keep_zero: bool) -> None:
        for t in list(self.model.match(s=subject, p=prop)):
            self.model.remove(t)
        if value != 0 or keep_zero:
            self.model.add(Triple(subject, prop, integer(value)))

    def _read_pool(self, subject: Iri, prop: Iri) -> frozenset:
        lit = self.model.value(subject, prop)
        return parse_label_set(lit.lexical) if isinstance(lit, Literal) else frozenset()

    def _write_pool(self, subject: Iri, prop: Iri, values: frozenset) -> None:
        for t in list(self.model.match(s=subject, p=prop)):
            self.model.remove(t)
        if values:
            self.model.add(Triple(subject, prop, string(render_label_set(values))))

    # -- allocation primitives; each applies or raises OverAllocation

    def _apply(self, op, journal: Optional[_Journal]) -> None:
        kind = op[0]
        if kind == "bw":
            _, carrier, mbps = op
            avail = self._read_int(carrier, AVAILABLE_BANDWIDTH)
            if mbps > avail:
                raise OverAllocation(
                    f"{carrier.value}: {mbps} Mbps requested, {avail} available"
                )
            self._write_int(carrier, AVAILABLE_BANDWIDTH, avail - mbps, keep_zero=True)
            self._write_int(
                carrier, IN_USE_BANDWIDTH, self._read_int(carrier, IN_USE_BANDWIDTH) + mbps,
                keep_zero=False,
            )
        elif kind == "label":
            _, carrier, label = op
            avail = self._read_pool(carrier, AVAILABLE_LABEL_SET)
            if label not in avail:
                raise OverAllocation(f"{carrier.value}: label {label} not available")
            self._write_pool(carrier, AVAILABLE_LABEL_SET, avail - {label})
            self._write_pool(
                carrier, IN_USE_LABEL_SET, self._read_pool(carrier, IN_USE_LABEL_SET) | {label}
            )
        elif kind == "units":
            _, node, n = op
            avail = self._read_int(node, AVAILABLE_UNITS)
            if n > avail:
                raise OverAllocation(f"{node.value}: {n} units requested, {avail} available")
            self._write_int(node, AVAILABLE_UNITS, avail - n, keep_zero=True)
            self._write_int(node, IN_USE_UNITS, self._read_int(node, IN_USE_UNITS) + n, keep_zero=False)
        else:
            raise ValueError(f"unknown op {op!r}")
        if journal is not None:
            journal.ops.append(op)

    def _revert(self, op) -> None:
        kind = op[0]
        if kind == "bw":
            _, carrier, mbps = op
            self._write_int(
                carrier, AVAILABLE_BANDWIDTH, self._read_int(carrier, AVAILABLE_BANDWIDTH) + mbps,
                keep_zero=True,
            )
            self._write_int(
                carrier, IN_USE_BANDWIDTH, self._read_int(carrier, IN_USE_BANDWIDTH) - mbps,
                keep_zero=False,
            )
        elif kind == "label":
            _, carrier, label = op
            self._write_pool(
                carrier, AVAILABLE_LABEL_SET, self._read_pool(carrier, AVAILABLE_LABEL_SET) | {label}
            )
            self._write_pool(
                carrier, IN_USE_LABEL_SET, self._read_pool(carrier, IN_USE_LABEL_SET) - {label}
            )
        elif kind == "units":
            _, node, n = op
            self._write_int(node, AVAILABLE_UNITS, self._read_int(node, AVAILABLE_UNITS) + n, keep_zero=True)
            self._write_int(node, IN_USE_UNITS, self._read_int(node, IN_USE_UNITS) - n, keep_zero=False)

    def apply_ops(self, token: str, ops) -> None:
        """Apply an op list atomically under a token; rolls back on failure."""
        journal = self.active.setdefault(token, _Journal())
        done = []
        try:
            for op in ops:
                self._apply(op, None)
                done.append(op)
        except OverAllocation:
            for op in reversed(done):
                self._revert(op)
            if not journal.ops:
                self.active.pop(token, None)
            raise
        journal.ops.extend(done)

    def release_token(self, token: str) -> None:
        journal = self.active.pop(token, None)
        if journal is None:
            raise DoubleRelease(f"{self.substrate.domain.value}: token {token!r} not active")
        for op in reversed(journal.ops):
            self._revert(op)

    def has_token(self, token: str) -> bool:
        return token in self.active

    def next_address(self) -> str:
        self._address_counter += 1
        n = self._address_counter
        return f"10.103.{(n >> 8) & 255}.{n & 255}"

    def pick_host(self, requested_class: Iri):
        """First-fit pool (by node IRI) with free units providing a class
        that entails the requested one. Returns (node, provides) or None.

        Subclass checks run against the domain's own model, so provider
        extension classes declared in the substrate document count."""
        for pool in sorted(self.substrate.pools, key=lambda p: (p.node.value, p.provides.value)):
            cls = pool.provides
            if cls != requested_class and Triple(
                cls, vocab.RDFS_SUBCLASS_OF, requested_class
            ) not in self.model:
                continue
            if self._read_int(pool.node, AVAILABLE_UNITS) >= 1:
                return pool.node, cls
        return None

    def conservation_problems(self) -> list:
        """Violations of residual + in-use == original, empty when sound."""
        problems = []
        carriers = [(l.iri, l.capacity, l.label_pool) for l in self.substrate.links]
        carriers += [(b.iri, b.bandwidth, b.label_pool) for b in self.substrate.borders]
        for subject, capacity, pool in sorted(carriers, key=lambda c: c[0].value):
            avail = self._read_int(subject, AVAILABLE_BANDWIDTH)
            used = self._read_int(subject, IN_USE_BANDWIDTH)
            if avail + used != capacity or avail < 0 or used < 0:
                problems.append(f"bandwidth {subject.value}: {avail}+{used} != {capacity}")
            free = self._read_pool(subject, AVAILABLE_LABEL_SET)
            in_use = self._read_pool(subject, IN_USE_LABEL_SET)
            if free | in_use != pool or free & in_use:
                problems.append(f"labels {subject.value}: partition of {sorted(pool)} broken")
        for p in sorted(self.substrate.pools, key=lambda p: (p.node.value, p.provides.value)):
            avail = self._read_int(p.node, AVAILABLE_UNITS)
            used = self._read_int(p.node, IN_USE_UNITS)
            if avail + used != p.units or avail < 0 or used < 0:
                problems.append(f"units {p.node.value}: {avail}+{used} != {p.units}")
        return problems


def prepare_domain(raw: Model, extra_schemas: Sequence[Model] = ()) -> DomainState:
    """DomainState for a raw substrate document: merge the schema (plus any
    extension T-boxes), entail, and take the typed view. Conformance
    checking is the caller's business."""
    from .graphstore import entail, merge
    from .models import parse_substrate
    from .vocab import builtin_schema

    closed = entail(merge([builtin_schema(), *extra_schemas, raw]))
    return DomainState(parse_substrate(closed), closed)


# -- embedding plan ----------------------------------------------------------------


@dataclass
class Placement:
    node: Iri
    domain: Iri
    compute_class: Iri
    units: int = 1
    host: Optional[Iri] = None
    management_address: Optional[str] = None


@dataclass
class BorderCrossing:
    domain_a: Iri
    iface_a: Iri
    domain_b: Iri
    iface_b: Iri
    layer: Iri
    label: Optional[int]
    bandwidth: int


@dataclass
class DomainHop:
    """One domain's share of an inter-domain route: where the strand enters
    and leaves (None at the terminal ends), and the label its internal
    expansion must carry for continuity."""

    domain: Iri
    entry_iface: Optional[Iri]
    exit_iface: Optional[Iri]
    required_label: Optional[int]


@dataclass
class BranchSkeleton:
    """Delegation-level route of one link strand, before detail expansion."""

    to_node: Iri
    hops: list
    crossings: list


@dataclass
class BranchPath:
    """One realized root-to-member strand of a request link."""

    to_node: Iri
    domain_paths: list  # (domain Iri, PathResult) in traversal order
    crossings: list  # BorderCrossing between consecutive domain paths

    def hop_devices(self):
        """Intermediate (device, label) pairs along the stitched strand,
        endpoints' hosts excluded."""
        devices = []
        for _, path in self.domain_paths:
            for i, hop in enumerate(path.hops):
                label = path.segments[i - 1].label if i > 0 else (
                    path.segments[0].label if path.segments else None
                )
                devices.append((hop.element, label))
        return devices[1:-1] if len(devices) >= 2 else []

    def labels(self):
        out = set()
        for crossing in self.crossings:
            if crossing.label is not None:
                out.add(crossing.label)
        for _, path in self.domain_paths:
            for seg in path.segments:
                if seg.label is not None:
                    out.add(seg.label)
        return out


@dataclass
class LinkRealization:
    link: Iri
    root_node: Iri
    branches: list  # BranchPath per non-root member

    def labels(self):
        out = set()
        for b in self.branches:
            out |= b.labels()
        return out


@dataclass
class EmbeddingPlan:
    slice_id: str
    placements: dict = field(default_factory=dict)  # node Iri -> Placement
    realizations: dict = field(default_factory=dict)  # link Iri -> LinkRealization


# -- domain binding ----------------------------------------------------------------


def bind_domains(
    req: SliceRequest,
    delegations: Sequence[DelegationView],
    schema: Optional[Model] = None,
) -> dict:
    """Assign every request node a domain: bound nodes keep their binding,
    unbound ones are placed first-fit over domains sorted by IRI. Raises
    InsufficientResources when no domain can host a node's class.

    `schema` supplies the subclass closure; passing the broker's merged
    delegation view lets provider-defined compute subclasses match."""
    if schema is None:
        schema = entailed_schema()
    views = sorted(delegations, key=lambda d: d.domain.value)
    free = {}
    for view in views:
        for cls, units in view.units.items():
            free[(view.domain, cls)] = free.get((view.domain, cls), 0) + units

    def usable_classes(requested: Iri):
        out = []
        for domain, cls in free:
            if cls == requested or Triple(cls, vocab.RDFS_SUBCLASS_OF, requested) in schema:
                out.append((domain, cls))
        return sorted(out, key=lambda dc: (dc[0].value, dc[1].value))

    binding = {}
    for node in req.nodes:
        placed = False
        for domain, cls in usable_classes(node.compute_class):
            if node.in_domain is not None and domain != node.in_domain:
                continue
            if free[(domain, cls)] >= 1:
                free[(domain, cls)] -= 1
                binding[node.iri] = domain
                placed = True
                break
        if not placed:
            raise InsufficientResources(node.iri, node.compute_class)
    return binding


# -- full embedding ----------------------------------------------------------------


def _routing_model(delegations: Sequence[Model]) -> Model:
    from .graphstore import entail, merge
    from .vocab import builtin_schema

    return entail(merge([builtin_schema(), *delegations]))


def _required_labels_per_domain(route: PathResult, broker_view: Model):
    """For each domain hop of an inter-domain route, the label its internal
    expansion must carry (None when the domain translates labels or the
    crossings are unlabelled)."""
    required = []
    for i, hop in enumerate(route.hops):
        labels = set()
        if i > 0 and route.segments[i - 1].label is not None:
            labels.add(route.segments[i - 1].label)
        if i < len(route.segments) and route.segments[i].label is not None:
            labels.add(route.segments[i].label)
        if LABEL_TRANSLATOR in broker_view.types(hop.element) or not labels:
            required.append(None)
        else:
            required.append(min(labels))
    return required


def embed_request(
    req: SliceRequest,
    delegations: Sequence[Model],
    states: Mapping[Iri, DomainState],
    slice_id: str,
    limit: int = 10,
) -> EmbeddingPlan:
    """Embed a validated request: bind nodes, route every link (inter-domain
    over the merged delegation graph, then per-domain detail expansion), and
    allocate everything atomically. On failure the residual state is exactly
    what it was before the call."""
    views = [_parse_delegation(dv) for dv in delegations]
    broker_view = _routing_model(delegations) if delegations else None

    plan = EmbeddingPlan(slice_id)
    token = f"plan:{slice_id}"
    touched = []

    def alloc(domain: Iri, ops) -> None:
        state = states[domain]
        state.apply_ops(token, ops)
        if state not in touched:
            touched.append(state)

    def rollback() -> None:
        for state in touched:
            if state.has_token(token):
                state.release_token(token)

    try:
        binding = bind_domains(req, views, schema=broker_view)
    except InsufficientResources as e:
        raise EmbeddingFailed(e.node, str(e)) from e

    try:
        for node in req.nodes:
            domain = binding[node.iri]
            state = states.get(domain)
            if state is None:
                raise EmbeddingFailed(node.iri, f"no substrate for domain {domain.value}")
            picked = state.pick_host(node.compute_class)
            if picked is None:
                raise EmbeddingFailed(node.iri, "bound domain has no free units")
            host, cls = picked
            alloc(domain, [("units", host, 1)])
            plan.placements[node.iri] = Placement(
                node=node.iri,
                domain=domain,
                compute_class=cls,
                host=host,
                management_address=state.next_address(),
            )

        for link in req.links:
            realization = _realize_link(
                req, link, plan, states, broker_view, alloc, limit
            )
            plan.realizations[link.iri] = realization
    except EmbeddingFailed:
        rollback()
        raise
    except OverAllocation as e:
        rollback()
        raise EmbeddingFailed(req.reservation, str(e)) from e
    return plan


def _parse_delegation(m: Model):
    from .models import parse_delegation

    return parse_delegation(m)


def _owner_device(state: DomainState, border_iface: Iri) -> Optional[Iri]:
    for b in state.substrate.borders:
        if b.iri == border_iface:
            return b.owner
    return None


def link_members(req, link, placements) -> tuple:
    """(root node, other member nodes) of a link: the root sits in the
    lexicographically first participating domain."""
    members = sorted({n.iri for n in link.owners(req)}, key=lambda n: n.value)
    domains = {n: placements[n].domain for n in members}
    root_domain = min(domains[n].value for n in members)
    root = [n for n in members if domains[n].value == root_domain][0]
    return root, [n for n in members if n != root]


def route_branch(
    broker_view: Optional[Model],
    to_node: Iri,
    src_domain: Iri,
    dst_domain: Iri,
    layer: Iri,
    bandwidth: int,
    limit: int,
    link: Iri,
) -> BranchSkeleton:
    """Delegation-level route for one strand: the domains it traverses, the
    border interfaces it enters and leaves by, and the crossing labels."""
    if src_domain == dst_domain:
        return BranchSkeleton(
            to_node=to_node,
            hops=[DomainHop(src_domain, None, None, None)],
            crossings=[],
        )
    if broker_view is None:
        raise EmbeddingFailed(link, "no delegations available for inter-domain route")
    route = shortest_valid_path(
        broker_view, PathRequest(src_domain, dst_domain, layer, bandwidth), limit=limit
    )
    if route is None:
        raise EmbeddingFailed(link, "no inter-domain route")
    required = _required_labels_per_domain(route, broker_view)
    hops = [
        DomainHop(hop.element, hop.ingress, hop.egress, required[i])
        for i, hop in enumerate(route.hops)
    ]
    crossings = [
        BorderCrossing(
            domain_a=route.hops[i].element,
            iface_a=seg.a_iface,
            domain_b=route.hops[i + 1].element,
            iface_b=seg.b_iface,
            layer=seg.layer,
            label=seg.label,
            bandwidth=bandwidth,
        )
        for i, seg in enumerate(route.segments)
    ]
    return BranchSkeleton(to_node=to_node, hops=hops, crossings=crossings)


def crossing_ops(crossing: BorderCrossing, iface: Iri) -> list:
    ops = [("bw", iface, crossing.bandwidth)]
    if crossing.label is not None:
        ops.append(("label", iface, crossing.label))
    return ops


def deduct_crossing_from_view(view: Model, crossing: BorderCrossing) -> None:
    """Tentative accounting on a routing view: later strands of the same
    request must not resell the label or bandwidth this crossing took."""
    for iface in (crossing.iface_a, crossing.iface_b):
        avail = int_value(view.value(iface, AVAILABLE_BANDWIDTH)) or 0
        for t in list(view.match(s=iface, p=AVAILABLE_BANDWIDTH)):
            view.remove(t)
        view.add(Triple(iface, AVAILABLE_BANDWIDTH, integer(avail - crossing.bandwidth)))
        if crossing.label is not None:
            lit = view.value(iface, AVAILABLE_LABEL_SET)
            pool = parse_label_set(lit.lexical) if isinstance(lit, Literal) else frozenset()
            for t in list(view.match(s=iface, p=AVAILABLE_LABEL_SET)):
                view.remove(t)
            remaining = pool - {crossing.label}
            if remaining:
                view.add(Triple(iface, AVAILABLE_LABEL_SET, string(render_label_set(remaining))))


def expand_domain_hop(
    state: DomainState,
    hop: DomainHop,
    layer: Iri,
    bandwidth: int,
    from_device: Optional[Iri],
    to_device: Optional[Iri],
    limit: int,
    link: Iri,
) -> PathResult:
    """Detail expansion of one domain's share of a strand. The terminal ends
    use the placed hosts; transit ends use the border interfaces' owners."""
    entry = _owner_device(state, hop.entry_iface) if hop.entry_iface else from_device
    exit_ = _owner_device(state, hop.exit_iface) if hop.exit_iface else to_device
    if entry is None or exit_ is None:
        raise EmbeddingFailed(link, f"unknown border interface in {hop.domain.value}")
    if entry == exit_:
        return _trivial_path(entry)
    path = shortest_valid_path(
        state.model,
        PathRequest(entry, exit_, layer, bandwidth, hop.required_label),
        limit=limit,
    )
    if path is None:
        raise EmbeddingFailed(
            link, f"delegation admitted {hop.domain.value} but detail expansion failed"
        )
    return path


def _realize_link(req, link, plan, states, broker_view, alloc, limit):
    root, others = link_members(req, link, plan.placements)
    realization = LinkRealization(link=link.iri, root_node=root, branches=[])
    for member in others:
        src = plan.placements[root]
        dst = plan.placements[member]
        skeleton = route_branch(
            broker_view, member, src.domain, dst.domain, link.layer, link.bandwidth,
            limit, link.iri,
        )
        for crossing in skeleton.crossings:
            deduct_crossing_from_view(broker_view, crossing)
        branch = BranchPath(to_node=member, domain_paths=[], crossings=list(skeleton.crossings))
        for hop in skeleton.hops:
            state = states.get(hop.domain)
            if state is None:
                raise EmbeddingFailed(link.iri, f"no substrate for domain {hop.domain.value}")
            path = expand_domain_hop(
                state, hop, link.layer, link.bandwidth, src.host, dst.host, limit, link.iri
            )
            if path.segments:
                alloc(hop.domain, _path_ops(path))
            branch.domain_paths.append((hop.domain, path))
        for crossing in skeleton.crossings:
            for domain, iface in (
                (crossing.domain_a, crossing.iface_a),
                (crossing.domain_b, crossing.iface_b),
            ):
                alloc(domain, crossing_ops(crossing, iface))
        realization.branches.append(branch)
    return realization


def _trivial_path(device: Iri) -> PathResult:
    return PathResult(
        hops=(PathHop(device, None, None, None),),
        segments=(),
        consumed_bandwidth=0,
        internal_elements=(device,),
    )


def _path_ops(path: PathResult) -> list:
    ops = []
    for seg in path.segments:
        for carrier in seg.carriers:
            ops.append(("bw", carrier, path.consumed_bandwidth))
            if seg.label is not None:
                ops.append(("label", carrier, seg.label))
    return ops


# -- plan-level allocate / release ---------------------------------------------------


def plan_ops_by_domain(plan: EmbeddingPlan) -> dict:
    """All allocation ops implied by a plan, grouped per domain."""
    ops: dict[Iri, list] = {}

    def add(domain, op):
        ops.setdefault(domain, []).append(op)

    for node_iri in sorted(plan.placements, key=lambda n: n.value):
        p = plan.placements[node_iri]
        if p.host is not None:
            add(p.domain, ("units", p.host, p.units))
    for link_iri in sorted(plan.realizations, key=lambda l: l.value):
        r = plan.realizations[link_iri]
        for branch in r.branches:
            for domain, path in branch.domain_paths:
                for op in _path_ops(path):
                    add(domain, op)
            for c in branch.crossings:
                for domain, iface in ((c.domain_a, c.iface_a), (c.domain_b, c.iface_b)):
                    add(domain, ("bw", iface, c.bandwidth))
                    if c.label is not None:
                        add(domain, ("label", iface, c.label))
    return ops


def allocate(states: Mapping[Iri, DomainState], plan: EmbeddingPlan) -> None:
    """Apply a plan's reservations. All-or-nothing; raises OverAllocation."""
    token = f"plan:{plan.slice_id}"
    by_domain = plan_ops_by_domain(plan)
    done = []
    try:
        for domain in sorted(by_domain, key=lambda d: d.value):
            states[domain].apply_ops(token, by_domain[domain])
            done.append(states[domain])
    except OverAllocation:
        for state in done:
            state.release_token(token)
        raise


def release(states: Mapping[Iri, DomainState], plan: EmbeddingPlan) -> None:
    """Undo a previously allocated plan exactly. Raises DoubleRelease."""
    token = f"plan:{plan.slice_id}"
    holders = [s for s in states.values() if s.has_token(token)]
    if not holders:
        raise DoubleRelease(f"plan {plan.slice_id!r} holds no allocations")
    for state in holders:
        state.release_token(token)
