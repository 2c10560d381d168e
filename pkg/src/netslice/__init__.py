"""netslice: multi-domain network slice orchestration over semantic graphs.

Substrates, slice requests, delegations and manifests are all plain triple
models in a small line-oriented text format. On top of that sit schema
conformance checks, a Datalog-lite validation rule engine, constrained
topology embedding with label and bandwidth allocation, and a deterministic
simulation of the aggregate-manager / broker / controller provisioning
protocol.
"""

__version__ = "0.1.0"
