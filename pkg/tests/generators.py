"""Random instance generators shared by the embed and acceptance tests.

Each generated substrate comes in two forms: a plain-python description
(dicts and tuples, used by the independent oracles) and the semantic model
the engine actually runs on. The oracle side never reads the model.
"""

from __future__ import annotations

import random

from netslice import vocab
from netslice.graphstore import Iri, Model, RDF_TYPE, Triple, entail, integer, merge, string
from netslice.vocab import (
    builtin_schema,
    ETHERNET_ELEMENT,
    IP_ELEMENT,
    render_label_set,
)

ETH = ETHERNET_ELEMENT
IP4 = IP_ELEMENT


def random_layered_instance(rng: random.Random, max_devices=12, max_links=20):
    """One pathfinding instance: device/link description plus its model."""
    n_devices = rng.randint(2, max_devices)
    devices = {}
    for i in range(n_devices):
        name = f"d{i}"
        devices[name] = {
            "layer": ETH if rng.random() < 0.75 else IP4,
            "translator": rng.random() < 0.12,
            "adaptations": [(ETH, IP4, 1)] if rng.random() < 0.45 else [],
            "units": rng.randint(1, 4) if rng.random() < 0.4 else 0,
        }
    links = []
    n_links = rng.randint(1, max_links)
    names = sorted(devices)
    for j in range(n_links):
        a, b = rng.sample(names, 2)
        layer = ETH if rng.random() < 0.8 else IP4
        links.append(
            {
                "name": f"l{j}",
                "ends": (a, b),
                "layer": layer,
                "capacity": rng.choice([0, 100, 200, 500, 1000]),
                "pool": frozenset(rng.sample(range(2, 21), rng.randint(0, 6)))
                if layer == ETH
                else frozenset(),
            }
        )
    return {"devices": devices, "links": links}


def instance_model(instance) -> Model:
    """Entailed model for a generated instance."""
    base = "urn:gen/"
    m = Model({"g": base})
    domain = Iri(base + "domain")
    m.add(Triple(domain, RDF_TYPE, vocab.NETWORK_DOMAIN))
    for name, d in sorted(instance["devices"].items()):
        dev = Iri(base + name)
        m.add(Triple(dev, RDF_TYPE, vocab.DEVICE))
        m.add(Triple(dev, vocab.IN_DOMAIN, domain))
        m.add(Triple(dev, vocab.AT_LAYER, d["layer"]))
        if d["translator"]:
            m.add(Triple(dev, RDF_TYPE, vocab.LABEL_TRANSLATOR))
        if d.get("units"):
            m.add(Triple(dev, vocab.PROVISIONS, vocab.VM))
            m.add(Triple(dev, vocab.AVAILABLE_UNITS, integer(d["units"])))
        for k, (client, server, cap) in enumerate(d["adaptations"]):
            a = Iri(base + f"{name}/adapt/{k}")
            m.add(Triple(dev, vocab.HAS_ADAPTATION, a))
            m.add(Triple(a, RDF_TYPE, vocab.ADAPTATION))
            m.add(Triple(a, vocab.ADAPTATION_CLIENT, client))
            m.add(Triple(a, vocab.ADAPTATION_SERVER, server))
            m.add(Triple(a, vocab.ADAPTATION_CAPACITY, integer(cap)))
    for link in instance["links"]:
        a, b = link["ends"]
        link_iri = Iri(base + link["name"])
        if_a = Iri(base + f"{a}/{link['name']}")
        if_b = Iri(base + f"{b}/{link['name']}")
        for dev, iface in ((a, if_a), (b, if_b)):
            m.add(Triple(Iri(base + dev), vocab.HAS_INTERFACE, iface))
            m.add(Triple(iface, RDF_TYPE, vocab.INTERFACE))
        m.add(Triple(if_a, vocab.LINKED_TO, if_b))
        m.add(Triple(link_iri, RDF_TYPE, vocab.NETWORK_CONNECTION))
        m.add(Triple(link_iri, vocab.HAS_ENDPOINT, if_a))
        m.add(Triple(link_iri, vocab.HAS_ENDPOINT, if_b))
        m.add(Triple(link_iri, vocab.AT_LAYER, link["layer"]))
        m.add(Triple(link_iri, vocab.AVAILABLE_BANDWIDTH, integer(link["capacity"])))
        if link["pool"]:
            m.add(Triple(link_iri, vocab.AVAILABLE_LABEL_SET, string(render_label_set(link["pool"]))))
    return entail(merge([builtin_schema(), m]))


def instance_device_iri(name: str) -> Iri:
    return Iri("urn:gen/" + name)
