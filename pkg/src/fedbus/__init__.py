"""Federated learning platform over pub/sub messaging.

Subpackages:

- ``fedbus.model``      -- from-scratch dense network training, metrics, datasets
- ``fedbus.algorithms`` -- server aggregation rules and client objective modifiers
- ``fedbus.protocol``   -- envelopes, topics, weight codec, ACLs, brokers
- ``fedbus.server``     -- the parameter server (federation coordinator)
- ``fedbus.client``     -- the client node agent
- ``fedbus.control``    -- control center service, HTTP API and CLI
- ``fedbus.bench``      -- local/centralized/federated benchmark harness
"""

__version__ = "0.1.0"

from .federation import LocalFederation  # noqa: E402

__all__ = ["LocalFederation", "__version__"]
