"""Message transports with exactly-once, per-sender-FIFO delivery.

The in-process transport backs every test and protocol run. The socket
transport demonstrates the same envelope stream over a connected socket
pair with 4-byte length-prefixed frames.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass

USER = "user"
SERVER = "server"

_ROLE_CODE = {USER: 0, SERVER: 1}
_CODE_ROLE = {0: USER, 1: SERVER}

_ENVELOPE_HEAD = struct.Struct("<BHBHHII")


class TransportIntegrityError(RuntimeError):
    """Duplicate, out-of-order, or misaddressed envelope."""


@dataclass(frozen=True)
class Envelope:
    """One addressed message: (sender role+index) -> (receiver role+index)."""

    sender_role: str
    sender_index: int
    receiver_role: str
    receiver_index: int
    round: int
    seq: int
    payload: bytes


def encode_envelope(env: Envelope) -> bytes:
    head = _ENVELOPE_HEAD.pack(
        _ROLE_CODE[env.sender_role], env.sender_index,
        _ROLE_CODE[env.receiver_role], env.receiver_index,
        env.round, env.seq, len(env.payload),
    )
    return head + env.payload


def decode_envelope(data: bytes) -> Envelope:
    s_role, s_idx, r_role, r_idx, rnd, seq, n = _ENVELOPE_HEAD.unpack_from(data)
    payload = data[_ENVELOPE_HEAD.size:]
    if len(payload) != n:
        raise ValueError("envelope payload length mismatch")
    return Envelope(_CODE_ROLE[s_role], s_idx, _CODE_ROLE[r_role], r_idx, rnd, seq, payload)


class InProcessTransport:
    """Deterministic in-memory queues, one inbox per (role, index)."""

    def __init__(self):
        self._inboxes: dict[tuple[str, int], list[Envelope]] = {}
        self._seen: set[tuple[str, int, int]] = set()
        self._next_seq: dict[tuple[str, int], int] = {}

    def register(self, role: str, index: int) -> None:
        self._inboxes.setdefault((role, index), [])

    def next_seq(self, role: str, index: int) -> int:
        key = (role, index)
        seq = self._next_seq.get(key, 0)
        self._next_seq[key] = seq + 1
        return seq

    def send(self, env: Envelope) -> None:
        inbox = self._inboxes.get((env.receiver_role, env.receiver_index))
        if inbox is None:
            raise TransportIntegrityError(
                f"unknown receiver {env.receiver_role} {env.receiver_index}"
            )
        key = (env.sender_role, env.sender_index, env.seq)
        if key in self._seen:
            raise TransportIntegrityError(
                f"duplicate envelope seq {env.seq} from {env.sender_role} {env.sender_index}"
            )
        self._seen.add(key)
        inbox.append(env)

    def drain(self, role: str, index: int) -> list[Envelope]:
        """All queued envelopes for one receiver, in arrival (per-sender FIFO) order."""
        inbox = self._inboxes.get((role, index))
        if inbox is None:
            raise TransportIntegrityError(f"unknown receiver {role} {index}")
        out, inbox[:] = list(inbox), []
        last_seq: dict[tuple[str, int], int] = {}
        for env in out:
            sender = (env.sender_role, env.sender_index)
            if sender in last_seq and env.seq <= last_seq[sender]:
                raise TransportIntegrityError("per-sender FIFO violated")
            last_seq[sender] = env.seq
        return out


class SocketTransport:
    """Length-prefixed envelope stream over a connected socket (demo only)."""

    def __init__(self, sock: socket.socket):
        self._sock = sock

    def send(self, env: Envelope) -> None:
        frame = encode_envelope(env)
        self._sock.sendall(struct.pack("<I", len(frame)) + frame)

    def _read_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = self._sock.recv(n - len(buf))
            if not chunk:
                raise ConnectionError("socket closed mid-frame")
            buf += chunk
        return buf

    def receive(self) -> Envelope:
        (n,) = struct.unpack("<I", self._read_exact(4))
        return decode_envelope(self._read_exact(n))

    @classmethod
    def pair(cls) -> tuple["SocketTransport", "SocketTransport"]:
        a, b = socket.socketpair()
        return cls(a), cls(b)
