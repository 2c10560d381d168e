"""Built-in vocabulary: the topology/compute/request/manifest T-box,
layer and adaptation descriptors, and schema conformance checking.

The full published ontology tree is reduced here to the classes and
properties the embedding and validation algorithms actually touch.
Providers can layer extension schema files on top (CLI --schema).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .graphstore import (
    Iri,
    Literal,
    Model,
    OWL_CLASS,
    OWL_DATATYPE_PROPERTY,
    OWL_INVERSE_OF,
    OWL_OBJECT_PROPERTY,
    RDF_NS,
    RDF_TYPE,
    RDFS_DOMAIN,
    RDFS_NS,
    RDFS_RANGE,
    RDFS_SUBCLASS_OF,
    Triple,
    XSD_NS,
    entail,
    int_value,
)

TOPO_NS = "http://geni-orca.renci.org/owl/topology.owl#"
COMP_NS = "http://geni-orca.renci.org/owl/compute.owl#"
ETH_NS = "http://geni-orca.renci.org/owl/ethernet.owl#"
IP4_NS = "http://geni-orca.renci.org/owl/ip4.owl#"
REQ_NS = "http://geni-orca.renci.org/owl/request.owl#"
MANI_NS = "http://geni-orca.renci.org/owl/manifest.owl#"
TIME_NS = "http://www.w3.org/2006/time#"

BASE_PREFIXES = {
    "topo": TOPO_NS,
    "comp": COMP_NS,
    "eth": ETH_NS,
    "ip4": IP4_NS,
    "req": REQ_NS,
    "mani": MANI_NS,
    "time": TIME_NS,
    "rdf": RDF_NS,
    "rdfs": RDFS_NS,
    "owl": "http://www.w3.org/2002/07/owl#",
    "xsd": XSD_NS,
}

# -- classes -------------------------------------------------------------------

NETWORK_ELEMENT = Iri(TOPO_NS + "NetworkElement")
NETWORK_DOMAIN = Iri(TOPO_NS + "NetworkDomain")
DEVICE = Iri(TOPO_NS + "Device")
NETWORK_TRANSPORT_ELEMENT = Iri(TOPO_NS + "NetworkTransportElement")
INTERFACE = Iri(TOPO_NS + "Interface")
BORDER_INTERFACE = Iri(TOPO_NS + "BorderInterface")
NETWORK_CONNECTION = Iri(TOPO_NS + "NetworkConnection")
BROADCAST_CONNECTION = Iri(TOPO_NS + "BroadcastConnection")
LABEL = Iri(TOPO_NS + "Label")
LABEL_TRANSLATOR = Iri(TOPO_NS + "LabelTranslator")
ADAPTATION = Iri(TOPO_NS + "Adaptation")
ETHERNET_ELEMENT = Iri(ETH_NS + "EthernetNetworkElement")
VLAN = Iri(ETH_NS + "VLAN")
IP_ELEMENT = Iri(IP4_NS + "IPNetworkElement")
IP_ADDRESS = Iri(IP4_NS + "IPAddress")

COMPUTE_ELEMENT = Iri(COMP_NS + "ComputeElement")
SERVER_CLOUD = Iri(COMP_NS + "ServerCloud")
TESTBED = Iri(COMP_NS + "Testbed")
CLASSIFIED_CE = Iri(COMP_NS + "ClassifiedComputeElement")
BARE_METAL_CE = Iri(COMP_NS + "BareMetalCE")
VM = Iri(COMP_NS + "VM")

RESERVATION = Iri(REQ_NS + "Reservation")
INTERVAL = Iri(TIME_NS + "Interval")
PATH_HOP = Iri(MANI_NS + "PathHop")

# -- object properties ---------------------------------------------------------

HAS_INTERFACE = Iri(TOPO_NS + "hasInterface")
HAS_ENDPOINT = Iri(TOPO_NS + "hasEndpoint")
INTERFACE_OF = Iri(TOPO_NS + "interfaceOf")
LINKED_TO = Iri(TOPO_NS + "linkedTo")
CONNECTED_TO = Iri(TOPO_NS + "connectedTo")
AT_LAYER = Iri(TOPO_NS + "atLayer")
IN_DOMAIN = Iri(TOPO_NS + "inDomain")
HAS_LABEL = Iri(TOPO_NS + "hasLabel")
HAS_SWITCH_MATRIX = Iri(TOPO_NS + "hasSwitchMatrix")
HAS_ADAPTATION = Iri(TOPO_NS + "hasAdaptation")
ADAPTATION_CLIENT = Iri(TOPO_NS + "adaptationClientLayer")
ADAPTATION_SERVER = Iri(TOPO_NS + "adaptationServerLayer")
INTERNALLY_REACHABLE = Iri(TOPO_NS + "internallyReachableTo")
ELEMENT = Iri(REQ_NS + "element")
HAS_TERM = Iri(REQ_NS + "hasTerm")
PROVISIONS = Iri(COMP_NS + "provisions")
PROVISIONED_FROM = Iri(MANI_NS + "provisionedFrom")
HOP_DEVICE = Iri(MANI_NS + "hopDevice")
HOSTED_ON = Iri(MANI_NS + "hostedOn")

# -- data properties -----------------------------------------------------------

AVAILABLE_BANDWIDTH = Iri(TOPO_NS + "availableBandwidth")
IN_USE_BANDWIDTH = Iri(TOPO_NS + "inUseBandwidth")
AVAILABLE_LABEL_SET = Iri(TOPO_NS + "availableLabelSet")
IN_USE_LABEL_SET = Iri(TOPO_NS + "inUseLabelSet")
LABEL_VALUE = Iri(TOPO_NS + "labelValue")
AVAILABLE_UNITS = Iri(COMP_NS + "availableUnits")
IN_USE_UNITS = Iri(COMP_NS + "inUseUnits")
ADAPTATION_CAPACITY = Iri(TOPO_NS + "adaptationCapacity")
REQUESTED_BANDWIDTH = Iri(REQ_NS + "bandwidth")
DISK_IMAGE = Iri(COMP_NS + "diskImage")
POST_BOOT_SCRIPT = Iri(COMP_NS + "postBootScript")
HAS_BEGINNING = Iri(TIME_NS + "hasBeginning")
HAS_DURATION_SECONDS = Iri(TIME_NS + "hasDurationSeconds")
MANAGEMENT_ADDRESS = Iri(MANI_NS + "managementAddress")
HOP_LABEL = Iri(MANI_NS + "hopLabel")
HOP_INDEX = Iri(MANI_NS + "hopIndex")
ALLOCATED_LABEL = Iri(MANI_NS + "allocatedLabel")

RDFS_CLASS = Iri(RDFS_NS + "Class")

_SUBCLASSES = [
    (NETWORK_DOMAIN, NETWORK_ELEMENT),
    (DEVICE, NETWORK_ELEMENT),
    (NETWORK_TRANSPORT_ELEMENT, NETWORK_ELEMENT),
    (INTERFACE, NETWORK_TRANSPORT_ELEMENT),
    (BORDER_INTERFACE, INTERFACE),
    (NETWORK_CONNECTION, NETWORK_TRANSPORT_ELEMENT),
    (BROADCAST_CONNECTION, NETWORK_CONNECTION),
    (LABEL, NETWORK_ELEMENT),
    (LABEL_TRANSLATOR, DEVICE),
    (ADAPTATION, NETWORK_ELEMENT),
    (ETHERNET_ELEMENT, NETWORK_ELEMENT),
    (VLAN, LABEL),
    (IP_ELEMENT, NETWORK_ELEMENT),
    (IP_ADDRESS, LABEL),
    (COMPUTE_ELEMENT, NETWORK_ELEMENT),
    (SERVER_CLOUD, COMPUTE_ELEMENT),
    (TESTBED, COMPUTE_ELEMENT),
    (CLASSIFIED_CE, COMPUTE_ELEMENT),
    (BARE_METAL_CE, CLASSIFIED_CE),
    (VM, CLASSIFIED_CE),
    (PATH_HOP, NETWORK_ELEMENT),
]

# property -> (domain, range); ranges of marker-valued properties are rdfs:Class
_OBJECT_PROPERTIES = {
    HAS_INTERFACE: (NETWORK_ELEMENT, INTERFACE),
    # substrate links bind their endpoints with hasEndpoint, not
    # hasInterface: the inverse of hasInterface would otherwise make
    # link entities look like next-hop neighbors of devices.
    HAS_ENDPOINT: (NETWORK_CONNECTION, INTERFACE),
    INTERFACE_OF: (INTERFACE, NETWORK_ELEMENT),
    # linkedTo crosses documents: the far end of an inter-domain link is a
    # foreign IRI this model knows nothing about, so keep domain and range
    # at NetworkElement rather than Interface.
    LINKED_TO: (NETWORK_ELEMENT, NETWORK_ELEMENT),
    CONNECTED_TO: (NETWORK_ELEMENT, NETWORK_ELEMENT),
    AT_LAYER: (NETWORK_ELEMENT, RDFS_CLASS),
    IN_DOMAIN: (NETWORK_ELEMENT, NETWORK_DOMAIN),
    HAS_LABEL: (NETWORK_ELEMENT, LABEL),
    HAS_SWITCH_MATRIX: (DEVICE, NETWORK_ELEMENT),
    HAS_ADAPTATION: (NETWORK_ELEMENT, ADAPTATION),
    ADAPTATION_CLIENT: (ADAPTATION, RDFS_CLASS),
    ADAPTATION_SERVER: (ADAPTATION, RDFS_CLASS),
    INTERNALLY_REACHABLE: (NETWORK_ELEMENT, NETWORK_ELEMENT),
    ELEMENT: (RESERVATION, NETWORK_ELEMENT),
    HAS_TERM: (RESERVATION, INTERVAL),
    PROVISIONS: (NETWORK_ELEMENT, RDFS_CLASS),
    PROVISIONED_FROM: (NETWORK_ELEMENT, NETWORK_ELEMENT),
    HOP_DEVICE: (PATH_HOP, NETWORK_ELEMENT),
    HOSTED_ON: (COMPUTE_ELEMENT, NETWORK_ELEMENT),
}

_INVERSES = [
    (HAS_INTERFACE, INTERFACE_OF),
    (LINKED_TO, LINKED_TO),  # symmetric: one statement yields both directions
    (CONNECTED_TO, CONNECTED_TO),
    (INTERNALLY_REACHABLE, INTERNALLY_REACHABLE),
]

_DATA_PROPERTIES = {
    AVAILABLE_BANDWIDTH: NETWORK_ELEMENT,
    IN_USE_BANDWIDTH: NETWORK_ELEMENT,
    AVAILABLE_LABEL_SET: NETWORK_ELEMENT,
    IN_USE_LABEL_SET: NETWORK_ELEMENT,
    LABEL_VALUE: LABEL,
    AVAILABLE_UNITS: NETWORK_ELEMENT,
    IN_USE_UNITS: NETWORK_ELEMENT,
    ADAPTATION_CAPACITY: ADAPTATION,
    REQUESTED_BANDWIDTH: NETWORK_CONNECTION,
    DISK_IMAGE: COMPUTE_ELEMENT,
    POST_BOOT_SCRIPT: COMPUTE_ELEMENT,
    HAS_BEGINNING: INTERVAL,
    HAS_DURATION_SECONDS: INTERVAL,
    MANAGEMENT_ADDRESS: COMPUTE_ELEMENT,
    HOP_LABEL: PATH_HOP,
    HOP_INDEX: PATH_HOP,
    ALLOCATED_LABEL: NETWORK_CONNECTION,
}


@dataclass(frozen=True)
class LayerSpec:
    """One transport layer: its marker class, label class, and label domain."""

    layer: Iri
    label_class: Iri
    min_label: Optional[int] = None  # integer-labelled layers only
    max_label: Optional[int] = None
    address_pattern: Optional[str] = None  # string-labelled layers
    pooled: bool = False  # links carry allocatable label pools

    def label_ok(self, lexical: str) -> bool:
        if self.address_pattern is not None:
            return re.fullmatch(self.address_pattern, lexical) is not None
        try:
            v = int(lexical)
        except ValueError:
            return False
        return self.min_label <= v <= self.max_label

    def value_in_domain(self, v: int) -> bool:
        return self.min_label is not None and self.min_label <= v <= self.max_label


@dataclass(frozen=True)
class AdaptationSpec:
    """Multiplexing of client-layer connections onto a server-layer one."""

    client_layer: Iri
    server_layer: Iri
    capacity: int = 1

    def __post_init__(self):
        if self.client_layer == self.server_layer:
            raise ValueError("adaptation client and server layers must differ")
        if self.capacity < 1:
            raise ValueError("adaptation capacity must be >= 1")


ETHERNET_LAYER = LayerSpec(
    layer=ETHERNET_ELEMENT,
    label_class=VLAN,
    min_label=2,
    max_label=4094,
    pooled=True,
)
IP4_LAYER = LayerSpec(
    layer=IP_ELEMENT,
    label_class=IP_ADDRESS,
    address_pattern=r"(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})",
)

LAYERS = {spec.layer: spec for spec in (ETHERNET_LAYER, IP4_LAYER)}
_LABEL_CLASS_LAYER = {spec.label_class: spec for spec in LAYERS.values()}


def builtin_schema() -> Model:
    """The T-box as a Model. Constructed fresh; callers may mutate."""
    m = Model(BASE_PREFIXES)
    classes = {NETWORK_ELEMENT, RESERVATION, INTERVAL}
    for sub, sup in _SUBCLASSES:
        m.add(Triple(sub, RDFS_SUBCLASS_OF, sup))
        classes.add(sub)
        classes.add(sup)
    for c in classes:
        m.add(Triple(c, RDF_TYPE, OWL_CLASS))
    for prop, (dom, rng) in _OBJECT_PROPERTIES.items():
        m.add(Triple(prop, RDF_TYPE, OWL_OBJECT_PROPERTY))
        m.add(Triple(prop, RDFS_DOMAIN, dom))
        m.add(Triple(prop, RDFS_RANGE, rng))
    for a, b in _INVERSES:
        m.add(Triple(a, OWL_INVERSE_OF, b))
    for prop, dom in _DATA_PROPERTIES.items():
        m.add(Triple(prop, RDF_TYPE, OWL_DATATYPE_PROPERTY))
        m.add(Triple(prop, RDFS_DOMAIN, dom))
        m.add(Triple(prop, RDFS_RANGE, RDFS_CLASS))
    return m


@lru_cache(maxsize=1)
def _entailed_schema_cached() -> Model:
    return entail(builtin_schema())


def entailed_schema() -> Model:
    """Shared read-only entailed T-box. Do not mutate the result."""
    return _entailed_schema_cached()


# -- label set literals ----------------------------------------------------------

# Compact canonical form for integer label pools: "2-10,15,20-30".


def parse_label_set(lexical: str) -> frozenset:
    if not lexical:
        return frozenset()
    out = set()
    for part in lexical.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.update(range(int(lo), int(hi) + 1))
        else:
            out.add(int(part))
    return frozenset(out)


def render_label_set(values) -> str:
    vals = sorted(values)
    if not vals:
        return ""
    spans = []
    start = prev = vals[0]
    for v in vals[1:]:
        if v == prev + 1:
            prev = v
            continue
        spans.append((start, prev))
        start = prev = v
    spans.append((start, prev))
    return ",".join(str(a) if a == b else f"{a}-{b}" for a, b in spans)


# -- conformance -----------------------------------------------------------------


@dataclass(frozen=True)
class ConformanceIssue:
    kind: str  # untyped-instance | domain-violation | label-out-of-range | dangling-interface
    subject: Iri
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} {self.subject.value}: {self.detail}"


_SCHEMA_PREDICATES = {
    RDF_TYPE,
    RDFS_SUBCLASS_OF,
    Iri(RDFS_NS + "subPropertyOf"),
    RDFS_DOMAIN,
    RDFS_RANGE,
    OWL_INVERSE_OF,
}

_SCHEMA_TYPES = {OWL_CLASS, OWL_OBJECT_PROPERTY, OWL_DATATYPE_PROPERTY}


def _asserted_type_closure(m: Model) -> Model:
    """Closure of m without the domain/range typing rules.

    Entailment's domain/range rules would repair the very type gaps the
    conformance checker is meant to flag, so typing questions are answered
    against a closure of asserted types only (subclass, subproperty and
    inverse rules still apply).
    """
    stripped = m.copy()
    for t in list(stripped.match(p=RDFS_DOMAIN)) + list(stripped.match(p=RDFS_RANGE)):
        stripped.remove(t)
    return entail(stripped)


def validate_conformance(m: Model) -> list:
    """Schema conformance issues for a model merged with its T-box.

    Checks run over the asserted triples of m; typing questions consult a
    closure that deliberately omits domain/range inference. Issues are
    data, not errors: instances without a known class, property domain
    violations, label values outside their layer's domain, and interfaces
    attached to nothing.
    """
    closed = _asserted_type_closure(m)
    issues = []
    known_classes = set(closed.typed(OWL_CLASS))
    declared_domains = {}
    for t in m.match(p=RDFS_DOMAIN):
        if isinstance(t.object, Iri):
            declared_domains.setdefault(t.subject, t.object)

    subjects = sorted({t.subject for t in m}, key=lambda s: s.value)
    for s in subjects:
        types = closed.types(s)
        if types & _SCHEMA_TYPES:
            continue  # schema entity
        known = types & known_classes
        if not known:
            issues.append(
                ConformanceIssue("untyped-instance", s, "no rdf:type naming a known class")
            )
            continue
        for t in m.match(s=s):
            p = t.predicate
            if p in _SCHEMA_PREDICATES:
                continue
            dom = declared_domains.get(p)
            if dom is not None and dom != RDFS_CLASS and dom not in types:
                issues.append(
                    ConformanceIssue(
                        "domain-violation",
                        s,
                        f"{p.local()} requires {dom.local()}, subject types exclude it",
                    )
                )
        # label entities: value must sit inside the layer's label domain
        for label_class, spec in _LABEL_CLASS_LAYER.items():
            if label_class in types:
                for v in m.objects(s, LABEL_VALUE):
                    if isinstance(v, Literal) and not spec.label_ok(v.lexical):
                        issues.append(
                            ConformanceIssue(
                                "label-out-of-range",
                                s,
                                f"labelValue {v.lexical!r} outside {label_class.local()} domain",
                            )
                        )
        # pooled label sets on links and border interfaces
        layer = m.value(s, AT_LAYER)
        if isinstance(layer, Iri) and layer in LAYERS:
            spec = LAYERS[layer]
            if spec.pooled:
                for prop in (AVAILABLE_LABEL_SET, IN_USE_LABEL_SET):
                    lit = m.value(s, prop)
                    if isinstance(lit, Literal):
                        try:
                            pool = parse_label_set(lit.lexical)
                        except ValueError:
                            pool = None
                        if pool is None:
                            issues.append(
                                ConformanceIssue(
                                    "label-out-of-range", s, f"unparseable label set {lit.lexical!r}"
                                )
                            )
                        elif any(not spec.value_in_domain(v) for v in pool):
                            issues.append(
                                ConformanceIssue(
                                    "label-out-of-range",
                                    s,
                                    f"label set {lit.lexical!r} exceeds layer domain",
                                )
                            )
        if INTERFACE in types and not closed.objects(s, INTERFACE_OF):
            issues.append(
                ConformanceIssue("dangling-interface", s, "interface attached to no element")
            )
    issues.sort(key=lambda i: (i.kind, i.subject.value, i.detail))
    # collapse duplicates from repeated property uses
    seen = set()
    out = []
    for i in issues:
        key = (i.kind, i.subject, i.detail)
        if key not in seen:
            seen.add(key)
            out.append(i)
    return out
