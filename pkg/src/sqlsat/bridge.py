"""Line-delimited JSON service exposing the rewrite environment.

One request line yields exactly one response line.  Responses echo the
request's sequence number; numbers are serialized with nine significant
digits (enough to round-trip the float32 observation exactly), keys are
sorted, and separators are fixed, so a scripted session produces a
byte-identical transcript.  Malformed input gets an error response,
never a crash.  See PROTOCOL.md for the grammar.
"""

from __future__ import annotations

import json
import socketserver
import sys

import numpy as np

from .catalog import Catalog
from .datagen import QUERIES
from .env import EnvConfig, Observation, RewriteEnv
from .errors import (EpisodeFinished, InvalidAction, ParseError, SqlsatError,
                     UnknownColumn, UnknownTable, UnsupportedFeature)
from .parser import parse
from .rules import catalog as rules_catalog

PROTOCOL_VERSION = "1"


def _round9(x: float) -> float:
    return float(f"{float(x):.9g}")


def _obs_doc(obs: Observation) -> dict:
    return {
        "nodes": [[_round9(v) for v in row] for row in obs.nodes.tolist()],
        "edges": [[int(v) for v in row] for row in obs.edges.tolist()],
        "edge_attrs": [int(v) for v in obs.edge_attrs.tolist()],
        "mask": [bool(v) for v in obs.mask.tolist()],
        "context": [_round9(v) for v in obs.context.tolist()],
    }


def decode_observation(doc: dict) -> Observation:
    return Observation(
        nodes=np.asarray(doc["nodes"], dtype=np.float32).reshape(
            (-1, len(doc["nodes"][0]) if doc["nodes"] else 0)),
        edges=np.asarray(doc["edges"], dtype=np.int64).reshape((2, -1)),
        edge_attrs=np.asarray(doc["edge_attrs"], dtype=np.int64),
        mask=np.asarray(doc["mask"], dtype=bool),
        context=np.asarray(doc["context"], dtype=np.float32),
    )


class BridgeServer:
    """Protocol state machine for a single connection: one env at a time."""

    def __init__(self, catalog: Catalog, config: EnvConfig = EnvConfig(),
                 queries: dict[str, str] | None = None):
        self.catalog = catalog
        self.schema = catalog.schema()
        self.config = config
        self.queries = QUERIES if queries is None else queries
        self.rules = rules_catalog()
        self.env: RewriteEnv | None = None
        self.last_seq = 0
        self.closing = False

    # -- framing -------------------------------------------------------

    def handle_line(self, line: str) -> str:
        try:
            seq, payload = self._respond(line)
        except Exception as exc:  # never let a frame kill the connection
            seq, payload = self._bump(), _err("internal", f"{type(exc).__name__}: {exc}")
        doc = dict(payload)
        doc["seq"] = seq
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def _bump(self) -> int:
        self.last_seq += 1
        return self.last_seq

    def _respond(self, line: str) -> tuple[int, dict]:
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            return self._bump(), _err("bad_json", str(exc))
        if not isinstance(req, dict):
            return self._bump(), _err("bad_json", "request must be an object")
        seq = req.get("seq")
        if not isinstance(seq, int) or isinstance(seq, bool):
            return self._bump(), _err("missing_field", "integer seq required")
        if seq <= self.last_seq:
            return self._bump(), _err(
                "bad_seq", f"seq must exceed {self.last_seq}")
        self.last_seq = seq
        op = req.get("op")
        handler = getattr(self, f"_op_{op}", None) if isinstance(op, str) else None
        if handler is None:
            return seq, _err("unknown_op", f"no such op: {op!r}")
        try:
            return seq, handler(req)
        except SqlsatError as exc:
            return seq, _err("internal", str(exc))

    # -- operations ----------------------------------------------------

    def _op_hello(self, req: dict) -> dict:
        return {"kind": "hello", "ok": True,
                "version": PROTOCOL_VERSION,
                "num_actions": len(self.rules) + 1,
                "feature_dim": self.config.feature_dim}

    def _op_reset(self, req: dict) -> dict:
        query_id = req.get("query_id")
        sql = req.get("sql")
        if (query_id is None) == (sql is None):
            return _err("missing_field", "exactly one of query_id or sql")
        if query_id is not None:
            if query_id not in self.queries:
                return _err("unknown_query", f"no such query: {query_id!r}")
            sql = self.queries[query_id]
        try:
            expr = parse(sql, self.schema)
        except UnsupportedFeature as exc:
            return _err("unsupported", str(exc))
        except UnknownTable as exc:
            return _err("unknown_table", str(exc))
        except UnknownColumn as exc:
            return _err("unknown_column", str(exc))
        except ParseError as exc:
            return _err("parse_error", str(exc))
        seed = req.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            return _err("missing_field", "seed must be an integer")
        self.env = RewriteEnv(expr, self.catalog, self.config)
        obs = self.env.reset()
        doc = _obs_doc(obs)
        doc.update(kind="observation", ok=True)
        return doc

    def _op_step(self, req: dict) -> dict:
        if self.env is None:
            return _err("no_episode", "reset first")
        action = req.get("action")
        if not isinstance(action, int) or isinstance(action, bool):
            return _err("missing_field", "integer action required")
        try:
            result = self.env.step(action)
        except EpisodeFinished as exc:
            return _err("episode_finished", str(exc))
        except InvalidAction as exc:
            return _err("invalid_action", str(exc))
        info = dict(result.info)
        info["cost"] = _round9(info["cost"])
        return {"kind": "step_result", "ok": True,
                "observation": _obs_doc(result.obs),
                "reward": _round9(result.reward),
                "done": result.done,
                "info": info}

    def _op_rules(self, req: dict) -> dict:
        return {"kind": "rules", "ok": True,
                "rules": [{"index": i, "name": r.name, "category": r.category}
                          for i, r in enumerate(self.rules)],
                "reset_action": len(self.rules),
                "num_actions": len(self.rules) + 1}

    def _op_close(self, req: dict) -> dict:
        self.closing = True
        return {"kind": "closed", "ok": True}


def _err(code: str, detail: str) -> dict:
    return {"kind": "error", "ok": False, "code": code, "detail": detail}


def serve_stdio(catalog: Catalog, config: EnvConfig = EnvConfig(),
                stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    server = BridgeServer(catalog, config)
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(server.handle_line(line) + "\n")
        stdout.flush()
        if server.closing:
            break


def serve_tcp(catalog: Catalog, port: int, config: EnvConfig = EnvConfig(),
              host: str = "127.0.0.1"):
    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            server = BridgeServer(catalog, config)
            for raw in self.rfile:
                line = raw.decode("utf-8", errors="replace")
                if not line.strip():
                    continue
                self.wfile.write((server.handle_line(line) + "\n").encode())
                if server.closing:
                    break

    class ThreadedServer(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    srv = ThreadedServer((host, port), Handler)
    return srv
