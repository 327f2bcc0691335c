"""Python bindings for the weic core library."""

import json

from ._core import *  # noqa: F401,F403
from ._core import Service, __version__


class Session:
    """In-process client for the environment service.

    Speaks the same NDJSON protocol as `weic serve`, minus the transport.
    """

    def __init__(self):
        self._service = Service()
        self._next_id = 0

    def request(self, op, **fields):
        self._next_id += 1
        msg = {"v": 1, "id": self._next_id, "op": op, **fields}
        reply = json.loads(self._service.handle(json.dumps(msg)))
        if not reply["ok"]:
            err = reply["error"]
            raise RuntimeError(f"{err['code']}: {err['message']}")
        return reply


__all__ = ["Session", "Service", "__version__"]
