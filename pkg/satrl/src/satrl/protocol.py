"""Client for the sqlsat bridge protocol over a server subprocess.

The trainer talks to the optimizer exclusively through this line
protocol (see PROTOCOL.md in the sqlsat distribution); nothing in this
package imports sqlsat itself.
"""

import json
import shutil
import subprocess
from dataclasses import dataclass

import numpy as np

PROTOCOL_VERSION = "1"
DEFAULT_CMD = ("sqlsat", "serve", "--stdio")


class BridgeError(RuntimeError):
    """Typed error response from the server; the session stays usable."""

    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


class ProtocolViolation(RuntimeError):
    """The server broke framing; the connection is not trustworthy."""


@dataclass
class Observation:
    nodes: np.ndarray       # (rows, feature_dim) float32
    edges: np.ndarray       # (2, E) int64
    edge_attrs: np.ndarray  # (E,) int64
    mask: np.ndarray        # (num_actions,) bool
    context: np.ndarray     # (2,) float32


@dataclass
class StepReply:
    obs: Observation
    reward: float
    done: bool
    info: dict


class BridgeClient:
    """One environment over one `sqlsat serve --stdio` subprocess."""

    def __init__(self, node_limit: int = 1000, horizon: int = 200,
                 catalog: str | None = None, cmd: tuple[str, ...] | None = None):
        argv = list(cmd if cmd is not None else DEFAULT_CMD)
        if cmd is None and shutil.which(argv[0]) is None:
            raise ProtocolViolation(
                "`sqlsat` is not on PATH; install the optimizer package first")
        argv += ["--node-limit", str(node_limit), "--horizon", str(horizon)]
        if catalog is not None:
            argv += ["--catalog", catalog]
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
        self.seq = 0
        hello = self.call("hello")
        if hello.get("version") != PROTOCOL_VERSION:
            self.close()
            raise ProtocolViolation(
                f"unknown protocol version {hello.get('version')!r}")
        self.num_actions: int = hello["num_actions"]
        self.feature_dim: int = hello["feature_dim"]
        self.reset_action: int = self.num_actions - 1

    # -- framing --------------------------------------------------------

    def send(self, op: str, **fields) -> int:
        self.seq += 1
        frame = {"op": op, "seq": self.seq, **fields}
        line = json.dumps(frame, sort_keys=True, separators=(",", ":"))
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        return self.seq

    def recv(self, seq: int) -> dict:
        line = self.proc.stdout.readline()
        if not line:
            raise ProtocolViolation("server closed the stream mid-session")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolViolation(f"unparseable response: {e}") from None
        if msg.get("seq") != seq:
            raise ProtocolViolation(
                f"response seq {msg.get('seq')} does not echo request {seq}")
        if not msg.get("ok"):
            raise BridgeError(msg.get("code", "?"), msg.get("detail", ""))
        return msg

    def call(self, op: str, **fields) -> dict:
        return self.recv(self.send(op, **fields))

    # -- operations -----------------------------------------------------

    def reset_send(self, query_id: str | None = None, sql: str | None = None,
                   seed: int = 0) -> int:
        fields: dict = {"seed": seed}
        if query_id is not None:
            fields["query_id"] = query_id
        if sql is not None:
            fields["sql"] = sql
        return self.send("reset", **fields)

    def reset_recv(self, seq: int) -> Observation:
        return self._decode_obs(self.recv(seq))

    def reset(self, query_id: str | None = None, sql: str | None = None,
              seed: int = 0) -> Observation:
        return self.reset_recv(self.reset_send(query_id, sql, seed))

    def step_send(self, action: int) -> int:
        return self.send("step", action=int(action))

    def step_recv(self, seq: int) -> StepReply:
        msg = self.recv(seq)
        return StepReply(self._decode_obs(msg["observation"]),
                         float(msg["reward"]), bool(msg["done"]), msg["info"])

    def step(self, action: int) -> StepReply:
        return self.step_recv(self.step_send(action))

    def rules(self) -> dict:
        return self.call("rules")

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.call("close")
            except (OSError, ProtocolViolation, BridgeError):
                pass
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            self.proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- decoding -------------------------------------------------------

    def _decode_obs(self, msg: dict) -> Observation:
        nodes = np.asarray(msg["nodes"], dtype=np.float32)
        if nodes.ndim != 2 or nodes.shape[1] != self.feature_dim:
            raise ProtocolViolation(
                f"node rows are not {self.feature_dim} wide: {nodes.shape}")
        edges = np.asarray(msg["edges"], dtype=np.int64).reshape(2, -1)
        edge_attrs = np.asarray(msg["edge_attrs"], dtype=np.int64)
        mask = np.asarray(msg["mask"], dtype=bool)
        if mask.shape != (self.num_actions,):
            raise ProtocolViolation(f"mask has shape {mask.shape}")
        context = np.asarray(msg["context"], dtype=np.float32)
        return Observation(nodes, edges, edge_attrs, mask, context)


class VectorBridge:
    """Lockstep pool of bridge connections, one server process each.

    Requests are written to every server before any response is read, so
    the environments compute concurrently while the trainer blocks.
    """

    def __init__(self, n: int, **kwargs):
        self.clients: list[BridgeClient] = []
        try:
            for _ in range(n):
                self.clients.append(BridgeClient(**kwargs))
        except Exception:
            self.close()
            raise
        self.num_actions = self.clients[0].num_actions
        self.feature_dim = self.clients[0].feature_dim
        self.reset_action = self.clients[0].reset_action

    def __len__(self) -> int:
        return len(self.clients)

    def reset_all(self, query_id: str, seed: int = 0) -> list[Observation]:
        seqs = [c.reset_send(query_id, seed=seed) for c in self.clients]
        return [c.reset_recv(s) for c, s in zip(self.clients, seqs)]

    def step_all(self, actions) -> list[StepReply]:
        seqs = [c.step_send(a) for c, a in zip(self.clients, actions)]
        return [c.step_recv(s) for c, s in zip(self.clients, seqs)]

    def close(self) -> None:
        for c in self.clients:
            c.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
