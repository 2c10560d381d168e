"""Deterministic in-process simulation of the provisioning protocol.

Aggregate managers delegate substrate abstractions to a broker; a
controller validates incoming slice requests, embeds them against the
broker's view, obtains tickets, and redeems them at the owning AMs, which
re-validate against their detailed substrates before allocating. Leases
expire on a virtual clock.

Actors exchange serialized documents only, never live objects, and a
single-threaded driver assigns every event a global sequence number, so a
scenario replays byte-identically.
"""

from __future__ import annotations

import itertools

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from . import embed as embed_mod
from . import rules as rules_mod
from .embed import (
    BranchPath,
    BranchSkeleton,
    DomainState,
    EmbeddingFailed,
    EmbeddingPlan,
    InsufficientResources,
    OverAllocation,
    Placement,
    crossing_ops,
    expand_domain_hop,
    link_members,
    prepare_domain,
    route_branch,
    _path_ops,
)
from .graphstore import (
    Iri,
    Model,
    RDFS_SUBCLASS_OF,
    Triple,
    entail,
    merge,
    parse_document,
    serialize_document,
)
from .models import (
    DelegationView,
    SliceRequest,
    Term,
    build_delegation,
    build_manifest,
    check_homeomorphic,
    parse_datetime,
    parse_delegation,
    parse_request,
    render_datetime,
)
from .vocab import builtin_schema, validate_conformance


class UnknownSlice(Exception):
    pass


class RedeemError(Exception):
    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind  # expired | over-delegated | infeasible-detail
        super().__init__(f"{kind}: {detail}" if detail else kind)


class TicketError(Exception):
    pass


class DelegationRejected(Exception):
    pass


@dataclass
class SliceError(Exception):
    step: str  # Validation | Binding | Embedding | Ticketing | Redeem
    detail: str
    violations: list = field(default_factory=list)
    issues: list = field(default_factory=list)

    def __str__(self) -> str:
        return f"{self.step}: {self.detail}"


class VirtualClock:
    def __init__(self, now: Optional[datetime] = None):
        self.now = now or datetime(2026, 1, 1, tzinfo=timezone.utc)

    def advance(self, to: datetime) -> None:
        if to < self.now:
            raise ValueError("virtual clock cannot move backwards")
        self.now = to


@dataclass
class Ticket:
    ticket_id: str
    slice_id: str
    domain: Iri
    placements: list  # (request node, requested compute class)
    border_allocs: list  # (iface, bandwidth, label or None)
    segments: list  # (branch key, index, DomainHop, from_node, to_node, layer, bandwidth)
    term: Term

    def units(self) -> dict:
        out: dict = {}
        for _, cls in self.placements:
            out[cls] = out.get(cls, 0) + 1
        return out


@dataclass
class Lease:
    lease_id: str
    slice_id: str
    ticket_id: str
    term: Term


SLICE_ARCS = {
    "Requested": {"Validated", "Closed"},
    "Validated": {"Ticketed", "Closed"},
    "Ticketed": {"Provisioned", "Closed"},
    "Provisioned": {"Closed"},
    "Closed": set(),
}


@dataclass
class SliceRecord:
    slice_id: str
    state: str = "Requested"
    request: Optional[SliceRequest] = None
    plan: Optional[EmbeddingPlan] = None
    manifest_text: Optional[str] = None
    tickets: list = field(default_factory=list)
    leases: list = field(default_factory=list)  # (am id, lease id)
    failure: Optional[SliceError] = None

    def transition(self, new_state: str) -> None:
        allowed = SLICE_ARCS[self.state]
        if new_state not in allowed:
            raise AssertionError(f"illegal slice transition {self.state} -> {new_state}")
        self.state = new_state


class AggregateManager:
    """Represents one resource provider; owns the detailed substrate."""

    def __init__(self, am_id: str, substrate_text: str):
        self.am_id = am_id
        raw = parse_document(substrate_text)
        self.state: DomainState = prepare_domain(raw)
        self.domain = self.state.substrate.domain
        self.leases: dict[str, Lease] = {}
        self._lease_counter = 0

    def delegate(self) -> str:
        """Serialized delegation of the current residual substrate."""
        from .models import parse_substrate

        current = parse_substrate(self.state.model)
        return serialize_document(build_delegation(current))

    def _host_candidates(self, requested_class: Iri) -> list:
        """Pools able to provision the class, first-fit order. Subclass
        checks use the substrate's own model so provider extensions count."""
        out = []
        for pool in sorted(
            self.state.substrate.pools, key=lambda p: (p.node.value, p.provides.value)
        ):
            if pool.provides == requested_class or Triple(
                pool.provides, RDFS_SUBCLASS_OF, requested_class
            ) in self.state.model:
                out.append((pool.node, pool.provides))
        return out

    def redeem(self, ticket: Ticket, clock: VirtualClock):
        """Re-validate the ticket against the detailed substrate, allocate,
        and return provisioned details. Raises RedeemError.

        Host selection is the AM's own call: if the first-fit host cannot
        reach the required borders (labels fragmented by earlier slices),
        other host combinations are tried before the ticket is refused.
        """
        if ticket.term.end <= clock.now:
            raise RedeemError("expired", f"ticket {ticket.ticket_id} term has ended")
        token = f"slice:{ticket.slice_id}"
        nodes = [n for n, _ in sorted(ticket.placements, key=lambda p: p[0].value)]
        classes = {n: cls for n, cls in ticket.placements}
        candidates = {n: self._host_candidates(classes[n]) for n in nodes}
        for n in nodes:
            if not candidates[n]:
                raise RedeemError(
                    "over-delegated", f"no {classes[n].local()} units left in {self.am_id}"
                )

        combos = itertools.product(*(candidates[n] for n in nodes)) if nodes else [()]
        failure: Exception = RedeemError("infeasible-detail", "no host combination works")
        for attempt_no, combo in enumerate(combos):
            if attempt_no >= 32:
                break
            try:
                placements, paths = self._try_redeem(ticket, token, nodes, combo)
            except OverAllocation as e:
                failure = RedeemError("over-delegated", str(e))
                continue
            except EmbeddingFailed as e:
                failure = RedeemError("infeasible-detail", str(e))
                continue
            self._lease_counter += 1
            lease = Lease(
                lease_id=f"{self.am_id}/lease/{self._lease_counter}",
                slice_id=ticket.slice_id,
                ticket_id=ticket.ticket_id,
                term=ticket.term,
            )
            self.leases[lease.lease_id] = lease
            return lease, placements, paths
        raise failure

    def _try_redeem(self, ticket: Ticket, token: str, nodes, combo):
        placements = {}
        paths = {}
        try:
            for node, (host, concrete) in zip(nodes, combo):
                self.state.apply_ops(token, [("units", host, 1)])
                placements[node] = (host, concrete, None)
            for iface, bandwidth, label in ticket.border_allocs:
                ops = [("bw", iface, bandwidth)]
                if label is not None:
                    ops.append(("label", iface, label))
                self.state.apply_ops(token, ops)
            for branch_key, index, hop, from_node, to_node, layer, bandwidth in ticket.segments:
                from_dev = placements[from_node][0] if from_node is not None else None
                to_dev = placements[to_node][0] if to_node is not None else None
                path = expand_domain_hop(
                    self.state, hop, layer, bandwidth, from_dev, to_dev,
                    limit=10, link=branch_key[0],
                )
                if path.segments:
                    self.state.apply_ops(token, _path_ops(path))
                paths[(branch_key, index)] = path
        except (OverAllocation, EmbeddingFailed, KeyError):
            if self.state.has_token(token):
                self.state.release_token(token)
            raise
        # addresses are handed out only once a combination sticks, so failed
        # attempts do not burn address space
        for node in nodes:
            host, concrete, _ = placements[node]
            placements[node] = (host, concrete, self.state.next_address())
        return placements, paths

    def release_slice(self, slice_id: str) -> None:
        token = f"slice:{slice_id}"
        if self.state.has_token(token):
            self.state.release_token(token)
        for lease_id in [l for l, lease in self.leases.items() if lease.slice_id == slice_id]:
            del self.leases[lease_id]

    def expired_leases(self, now: datetime) -> list:
        return sorted(
            (l for l in self.leases.values() if l.term.end <= now),
            key=lambda l: l.lease_id,
        )

    def serialized_state(self) -> str:
        return serialize_document(self.state.model)


class Broker:
    """Coordinates allocations across providers by ticketing delegations."""

    def __init__(self, broker_id: str = "broker"):
        self.broker_id = broker_id
        self.delegations: dict[Iri, Model] = {}
        self.ledgers: dict[Iri, embed_mod.DomainState] = {}
        self.views: dict[Iri, DelegationView] = {}
        self.tickets: dict[str, Ticket] = {}
        self._ticket_counter = 0

    def register_delegation(self, text: str) -> Iri:
        raw = parse_document(text)
        closed = entail(merge([builtin_schema(), raw]))
        view = parse_delegation(closed)
        domain = view.domain
        outstanding = self._outstanding(domain)
        if outstanding and not self._covers(view, outstanding):
            raise DelegationRejected(
                f"{domain.value}: re-delegation below outstanding commitments"
            )
        ledger = _DelegationLedger(view, closed)
        if outstanding:
            try:
                ledger.replay(self.ledgers[domain])
            except OverAllocation as e:
                raise DelegationRejected(f"{domain.value}: {e}") from e
        self.delegations[domain] = closed
        self.ledgers[domain] = ledger
        self.views[domain] = view
        return domain

    def _outstanding(self, domain: Iri) -> dict:
        ledger = self.ledgers.get(domain)
        return dict(ledger.active) if ledger is not None else {}

    def _covers(self, view: DelegationView, outstanding: dict) -> bool:
        needed_units: dict = {}
        needed_bw: dict = {}
        needed_labels: dict = {}
        for journal in outstanding.values():
            for op in journal.ops:
                if op[0] == "units":
                    needed_units[op[1]] = needed_units.get(op[1], 0) + op[2]
                elif op[0] == "bw":
                    needed_bw[op[1]] = needed_bw.get(op[1], 0) + op[2]
                elif op[0] == "label":
                    needed_labels.setdefault(op[1], set()).add(op[2])
        pools = {view.pool_nodes.get(cls): units for cls, units in view.units.items()}
        for node, units in needed_units.items():
            if pools.get(node, 0) < units:
                return False
        borders = {b.iri: b for b in view.borders}
        for iface, bw in needed_bw.items():
            if iface not in borders or borders[iface].bandwidth < bw:
                return False
        for iface, labels in needed_labels.items():
            if iface not in borders or not labels <= borders[iface].label_pool:
                return False
        return True

    def routing_view(self) -> Optional[Model]:
        if not self.delegations:
            return None
        return entail(
            merge([builtin_schema()] + [self.ledgers[d].model for d in sorted(self.delegations, key=lambda d: d.value)])
        )

    def delegation_views(self) -> list:
        views = []
        for domain in sorted(self.ledgers, key=lambda d: d.value):
            views.append(parse_delegation(self.ledgers[domain].model))
        return views

    def issue_ticket(
        self, slice_id: str, domain: Iri, placements, border_allocs, segments, term: Term
    ) -> Ticket:
        ledger = self.ledgers.get(domain)
        if ledger is None:
            raise TicketError(f"no delegation registered for {domain.value}")
        ops = []
        view = self.views[domain]
        schema = ledger.model  # delegation-carried subclass axioms count too
        for node, cls in placements:
            pool_node = None
            for delegated_cls in sorted(view.pool_nodes, key=lambda c: c.value):
                if delegated_cls == cls or Triple(delegated_cls, RDFS_SUBCLASS_OF, cls) in schema:
                    pool_node = view.pool_nodes[delegated_cls]
                    break
            if pool_node is None:
                raise TicketError(f"{domain.value} delegated no {cls.local()} units")
            ops.append(("units", pool_node, 1))
        for iface, bandwidth, label in border_allocs:
            ops.append(("bw", iface, bandwidth))
            if label is not None:
                ops.append(("label", iface, label))
        self._ticket_counter += 1
        ticket = Ticket(
            ticket_id=f"ticket/{self._ticket_counter}",
            slice_id=slice_id,
            domain=domain,
            placements=list(placements),
            border_allocs=list(border_allocs),
            segments=list(segments),
            term=term,
        )
        try:
            ledger.apply_ops(f"ticket:{ticket.ticket_id}", ops)
        except OverAllocation as e:
            raise TicketError(str(e)) from e
        self.tickets[ticket.ticket_id] = ticket
        return ticket

    def refund(self, ticket_id: str) -> None:
        ticket = self.tickets.pop(ticket_id, None)
        if ticket is None:
            return
        ledger = self.ledgers.get(ticket.domain)
        token = f"ticket:{ticket_id}"
        if ledger is not None and ledger.has_token(token):
            ledger.release_token(token)

    def conservation_problems(self) -> list:
        problems = []
        for domain in sorted(self.ledgers, key=lambda d: d.value):
            problems.extend(
                f"{domain.value}: {p}" for p in self.ledgers[domain].conservation_problems()
            )
        return problems

    def serialized_state(self) -> str:
        parts = []
        for domain in sorted(self.ledgers, key=lambda d: d.value):
            parts.append(serialize_document(self.ledgers[domain].model))
        return "\n".join(parts)


class _DelegationLedger(embed_mod.DomainState):
    """Residual accounting over a delegation model: same triple-rewrite
    machinery as a substrate state, with originals from the delegation."""

    def __init__(self, view: DelegationView, model: Model):
        self.substrate = None
        self.model = model
        self.active = {}
        self._view = view
        self._address_counter = 0

    def replay(self, prior: "_DelegationLedger") -> None:
        for token in sorted(prior.active):
            self.apply_ops(token, list(prior.active[token].ops))

    def conservation_problems(self) -> list:
        problems = []
        for b in self._view.borders:
            avail = self._read_int(b.iri, embed_mod.AVAILABLE_BANDWIDTH)
            used = self._read_int(b.iri, embed_mod.IN_USE_BANDWIDTH)
            if avail + used != b.bandwidth or avail < 0 or used < 0:
                problems.append(f"border bandwidth {b.iri.value}: {avail}+{used} != {b.bandwidth}")
            free = self._read_pool(b.iri, embed_mod.AVAILABLE_LABEL_SET)
            in_use = self._read_pool(b.iri, embed_mod.IN_USE_LABEL_SET)
            if free | in_use != b.label_pool or free & in_use:
                problems.append(f"border labels {b.iri.value}: partition broken")
        for cls in sorted(self._view.units, key=lambda c: c.value):
            node = self._view.pool_nodes[cls]
            avail = self._read_int(node, embed_mod.AVAILABLE_UNITS)
            used = self._read_int(node, embed_mod.IN_USE_UNITS)
            if avail + used != self._view.units[cls] or avail < 0 or used < 0:
                problems.append(f"units {node.value}: {avail}+{used} != {self._view.units[cls]}")
        return problems


class Controller:
    """Entry point for slice requests: validates, embeds, tickets, redeems,
    and assembles manifests."""

    def __init__(self, controller_id: str, broker: Broker, clock: VirtualClock, world=None):
        self.controller_id = controller_id
        self.broker = broker
        self.clock = clock
        self.world = world
        self.slices: dict[str, SliceRecord] = {}
        self.extra_rules: list = []

    def create_slice(self, slice_id: str, request_text: str, ams: dict) -> str:
        if slice_id in self.slices:
            raise ValueError(f"slice {slice_id!r} already exists")
        record = SliceRecord(slice_id)
        self.slices[slice_id] = record
        try:
            manifest = self._create(record, request_text, ams)
        except SliceError as e:
            record.failure = e
            self._teardown(record, ams)
            record.transition("Closed")
            raise
        record.transition("Provisioned")
        record.manifest_text = manifest
        return manifest

    def _create(self, record: SliceRecord, request_text: str, ams: dict) -> str:
        # validation: conformance plus rule violations against the closure
        try:
            raw = parse_document(request_text)
        except Exception as e:
            raise SliceError("Validation", f"unparseable request: {e}")
        merged = merge([builtin_schema(), raw])
        issues = validate_conformance(merged)
        if issues:
            raise SliceError("Validation", f"{len(issues)} conformance issues", issues=issues)
        closed = entail(merged)
        violations = rules_mod.validate(closed, self.extra_rules)
        if violations:
            raise SliceError(
                "Validation", f"{len(violations)} rule violations", violations=violations
            )
        try:
            request = parse_request(closed, source=raw)
        except Exception as e:
            raise SliceError("Validation", str(e))
        if request.term.begin < self.clock.now:
            raise SliceError("Validation", "term begins in the past")
        record.request = request
        record.transition("Validated")
        self._log("validate", record.slice_id, "ok")

        # binding over the broker's residual delegation view
        views = self.broker.delegation_views()
        routing = self.broker.routing_view()
        try:
            binding = embed_mod.bind_domains(request, views, schema=routing)
        except InsufficientResources as e:
            raise SliceError("Binding", str(e))

        # delegation-level embedding
        plan = EmbeddingPlan(record.slice_id)
        for node in request.nodes:
            plan.placements[node.iri] = Placement(
                node=node.iri, domain=binding[node.iri], compute_class=node.compute_class
            )
        skeletons: dict = {}
        try:
            for link in request.links:
                root, others = link_members(request, link, plan.placements)
                plan.realizations[link.iri] = embed_mod.LinkRealization(
                    link=link.iri, root_node=root, branches=[]
                )
                for member in others:
                    skeleton = route_branch(
                        routing,
                        member,
                        plan.placements[root].domain,
                        plan.placements[member].domain,
                        link.layer,
                        link.bandwidth,
                        limit=10,
                        link=link.iri,
                    )
                    # later strands must route around this one's reservations
                    for crossing in skeleton.crossings:
                        embed_mod.deduct_crossing_from_view(routing, crossing)
                    skeletons.setdefault(link.iri, []).append(skeleton)
        except EmbeddingFailed as e:
            raise SliceError("Embedding", str(e))
        record.plan = plan

        # one ticket per involved domain
        domain_placements: dict = {}
        for node in request.nodes:
            p = plan.placements[node.iri]
            domain_placements.setdefault(p.domain, []).append((node.iri, node.compute_class))
        domain_borders: dict = {}
        domain_segments: dict = {}
        for link in request.links:
            for skeleton in skeletons.get(link.iri, ()):
                branch_key = (link.iri, skeleton.to_node)
                for crossing in skeleton.crossings:
                    domain_borders.setdefault(crossing.domain_a, []).append(
                        (crossing.iface_a, crossing.bandwidth, crossing.label)
                    )
                    domain_borders.setdefault(crossing.domain_b, []).append(
                        (crossing.iface_b, crossing.bandwidth, crossing.label)
                    )
                root = plan.realizations[link.iri].root_node
                for index, hop in enumerate(skeleton.hops):
                    from_node = root if hop.entry_iface is None else None
                    to_node = skeleton.to_node if hop.exit_iface is None else None
                    domain_segments.setdefault(hop.domain, []).append(
                        (branch_key, index, hop, from_node, to_node, link.layer, link.bandwidth)
                    )
        involved = sorted(
            set(domain_placements) | set(domain_borders) | set(domain_segments),
            key=lambda d: d.value,
        )
        tickets = []
        try:
            for domain in involved:
                ticket = self.broker.issue_ticket(
                    record.slice_id,
                    domain,
                    domain_placements.get(domain, []),
                    domain_borders.get(domain, []),
                    domain_segments.get(domain, []),
                    request.term,
                )
                tickets.append(ticket)
                record.tickets.append(ticket.ticket_id)
                self._log("ticket", f"{record.slice_id}/{domain.value}", "ok")
        except TicketError as e:
            raise SliceError("Ticketing", str(e))
        record.transition("Ticketed")

        # redeem at each AM; fill plan details from the results
        node_hosts: dict = {}
        branch_paths: dict = {}
        am_by_domain = {am.domain: am for am in ams.values()}
        for ticket in tickets:
            am = am_by_domain.get(ticket.domain)
            if am is None:
                raise SliceError("Redeem", f"no AM for domain {ticket.domain.value}")
            try:
                lease, placements, paths = am.redeem(ticket, self.clock)
            except RedeemError as e:
                raise SliceError("Redeem", f"{am.am_id}: {e}")
            record.leases.append((am.am_id, lease.lease_id))
            self._log("redeem", f"{record.slice_id}/{ticket.domain.value}", "ok")
            node_hosts.update(placements)
            branch_paths.update(paths)

        for node in request.nodes:
            p = plan.placements[node.iri]
            if node.iri not in node_hosts:
                raise SliceError("Redeem", f"AM returned no host for {node.iri.value}")
            host, concrete, address = node_hosts[node.iri]
            p.host = host
            p.compute_class = concrete
            p.management_address = address
        for link in request.links:
            realization = plan.realizations[link.iri]
            for skeleton in skeletons.get(link.iri, ()):
                branch_key = (link.iri, skeleton.to_node)
                branch = BranchPath(
                    to_node=skeleton.to_node,
                    domain_paths=[],
                    crossings=list(skeleton.crossings),
                )
                for index, hop in enumerate(skeleton.hops):
                    path = branch_paths.get((branch_key, index))
                    if path is None:
                        raise SliceError("Redeem", "missing path expansion from AM")
                    branch.domain_paths.append((hop.domain, path))
                realization.branches.append(branch)

        try:
            manifest = build_manifest(request, plan)
        except Exception as e:
            raise SliceError("Redeem", f"manifest assembly failed: {e}")
        if not check_homeomorphic(request, manifest):
            raise SliceError("Redeem", "manifest failed the homeomorphism check")
        return serialize_document(manifest)

    def _teardown(self, record: SliceRecord, ams: dict) -> None:
        for am_id, _lease in record.leases:
            ams[am_id].release_slice(record.slice_id)
        record.leases.clear()
        for ticket_id in record.tickets:
            self.broker.refund(ticket_id)
        record.tickets.clear()

    def delete_slice(self, slice_id: str, ams: dict) -> None:
        record = self.slices.get(slice_id)
        if record is None:
            raise UnknownSlice(slice_id)
        if record.state != "Closed":
            self._teardown(record, ams)
            record.transition("Closed")

    def _log(self, kind: str, subject: str, outcome: str) -> None:
        if self.world is not None:
            self.world.log(self.controller_id, kind, subject, outcome)


class World:
    """Single-threaded driver: owns the actors, the clock, and the event log."""

    def __init__(self, start: Optional[datetime] = None):
        self.clock = VirtualClock(start)
        self.broker = Broker()
        self.controller = Controller("controller", self.broker, self.clock, world=self)
        self.ams: dict[str, AggregateManager] = {}
        self.events: list[str] = []
        self._seq = 0

    def log(self, actor: str, kind: str, subject: str, outcome: str) -> None:
        self._seq += 1
        self.events.append(f"seq {self._seq} {actor} {kind} {subject} {outcome}")

    def add_substrate(self, substrate_text: str) -> AggregateManager:
        am = AggregateManager(f"am-{len(self.ams) + 1}", substrate_text)
        self.ams[am.am_id] = am
        self.log(am.am_id, "delegate", am.domain.value, "ok")
        self.broker.register_delegation(am.delegate())
        self.log(self.broker.broker_id, "register", am.domain.value, "ok")
        return am

    def submit_request(self, slice_id: str, request_text: str) -> Optional[str]:
        self.log(self.controller.controller_id, "slice-request", slice_id, "ok")
        try:
            manifest = self.controller.create_slice(slice_id, request_text, self.ams)
        except SliceError as e:
            for v in e.violations:
                self.log(
                    self.controller.controller_id,
                    "violation",
                    v.subject.value,
                    f'"{v.message}"',
                )
            for issue in e.issues:
                self.log(
                    self.controller.controller_id,
                    "issue",
                    issue.subject.value,
                    f'"{issue.kind}"',
                )
            self.log(self.controller.controller_id, "slice-failed", slice_id, f"fail:{e.step}")
            self.log(self.controller.controller_id, "state", slice_id, "Closed")
            return None
        self.log(self.controller.controller_id, "manifest", slice_id, "ok")
        self.log(self.controller.controller_id, "state", slice_id, "Provisioned")
        return manifest

    def delete_slice(self, slice_id: str) -> None:
        self.controller.delete_slice(slice_id, self.ams)
        self.log(self.controller.controller_id, "delete", slice_id, "ok")
        self.log(self.controller.controller_id, "state", slice_id, "Closed")

    def advance_time(self, to: datetime) -> None:
        self.clock.advance(to)
        self.log("world", "advance", render_datetime(to), "ok")
        for am_id in sorted(self.ams):
            am = self.ams[am_id]
            for lease in am.expired_leases(self.clock.now):
                record = self.controller.slices.get(lease.slice_id)
                if record is not None and record.state != "Closed":
                    self.controller.delete_slice(lease.slice_id, self.ams)
                    self.log(am_id, "expire", lease.slice_id, "ok")

    def conservation_problems(self) -> list:
        problems = list(self.broker.conservation_problems())
        for am_id in sorted(self.ams):
            problems.extend(
                f"{am_id}: {p}" for p in self.ams[am_id].state.conservation_problems()
            )
        return problems

    def serialized_states(self) -> dict:
        out = {"broker": self.broker.serialized_state()}
        for am_id in sorted(self.ams):
            out[am_id] = self.ams[am_id].serialized_state()
        return out
