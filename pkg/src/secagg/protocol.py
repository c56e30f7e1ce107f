"""M-round aggregation protocol with a rotating artificial-noise user.

Logical (noiseless) counterpart of the physical-layer scheme: each round one
user abstains to jam, the others deliver one segment of each per-server share,
servers sum what they received, and every user reconstructs the aggregate
from the server sums. Physical-layer transmission lives in airsim.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .coding import (
    AggregatedEvaluation,
    CodingConfig,
    IncompleteRoundError,
    InsufficientSharesError,
    aggregate_shares,
    encode_shares,
    reconstruct,
)
from .rng import FieldSampler, derive_seed
from .transport import SERVER, USER, Envelope, InProcessTransport, TransportIntegrityError
from .wire import HEADER_SIZE, ShareHeader, pack_share, unpack_share


class UnsupportedTopologyError(ValueError):
    """Protocol runs need at least 3 users (M-1 >= 2 message segments)."""


def uplink_segment(a: int, i: int) -> int | None:
    """Segment index user i transmits in round a; None when i jams (i == a)."""
    if i == a:
        return None
    return a - 1 if i < a else a


def downlink_segment(a: int, i: int) -> int:
    """Segment index delivered toward destination i in round a (i >= a maps to a)."""
    return a - 1 if i < a else a


@dataclass(frozen=True)
class RoundPlan:
    index: int
    noise_user: int
    segments: dict[int, int]  # transmitting user -> segment index


@dataclass(frozen=True)
class RoundSchedule:
    M: int
    rounds: tuple[RoundPlan, ...]


def build_schedule(M: int) -> RoundSchedule:
    """Rotation schedule: in round a, user a jams and the rest send segment
    a-1 (users below a) or a (users above a)."""
    if M < 3:
        raise UnsupportedTopologyError(f"need M >= 3 users, got {M}")
    rounds = []
    for a in range(1, M + 1):
        segs = {i: uplink_segment(a, i) for i in range(1, M + 1) if i != a}
        rounds.append(RoundPlan(index=a, noise_user=a, segments=segs))
    return RoundSchedule(M=M, rounds=tuple(rounds))


@dataclass(frozen=True)
class SegmentedMessage:
    """A message cut into equal-size pieces, zero-padded at the tail."""

    parts: tuple[tuple[int, ...], ...]
    pad: int

    def piece(self, index: int) -> tuple[int, ...]:
        return self.parts[index - 1]


def segment_message(values, parts: int) -> SegmentedMessage:
    size = -(-len(values) // parts)
    padded = list(values) + [0] * (parts * size - len(values))
    pieces = tuple(tuple(padded[k * size : (k + 1) * size]) for k in range(parts))
    return SegmentedMessage(parts=pieces, pad=parts * size - len(values))


def desegment_message(msg: SegmentedMessage) -> list[int]:
    out: list[int] = []
    for part in msg.parts:
        out.extend(part)
    return out[: len(out) - msg.pad] if msg.pad else out


@dataclass
class UplinkResult:
    columns: dict[int, list[list[int]]]  # server j -> shares ordered by user
    payload_bits: int
    header_bits: int
    envelopes: int


@dataclass
class DownlinkResult:
    per_user: dict[int, list[AggregatedEvaluation]]
    payload_bits: int  # unique message content (identical copies counted once)
    header_bits: int
    wire_bits: int  # actual transported bits including per-user copies
    envelopes: int


@dataclass
class RunReport:
    M: int
    K: int
    r: int
    q: int
    p: int
    seed: int
    rounds: int
    stragglers: int
    uplink_payload_bits: int
    uplink_header_bits: int
    downlink_payload_bits: int
    downlink_header_bits: int
    downlink_wire_bits: int
    ok: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class EndToEndResult:
    per_user: dict[int, list[int]]
    report: RunReport


def _share_header(cfg: CodingConfig, server: int, user: int, round: int, segment: int) -> ShareHeader:
    return ShareHeader(
        q=cfg.q, M=cfg.M, K=cfg.K, r=cfg.r, p=cfg.p,
        server=server, user=user, round=round, segment=segment,
    )


def run_uplink(gradients, cfg: CodingConfig, transport: InProcessTransport | None = None,
               seed: int = 0) -> UplinkResult:
    """Encode every user's gradient and deliver all share segments.

    Returns each server's reassembled column of M confidential shares.
    Masks are sampled per user from seeds split off the run seed.
    """
    if len(gradients) != cfg.M:
        raise UnsupportedTopologyError(f"expected {cfg.M} gradients, got {len(gradients)}")
    schedule = build_schedule(cfg.M)
    transport = transport if transport is not None else InProcessTransport()
    for i in range(1, cfg.M + 1):
        transport.register(USER, i)
    for j in range(1, cfg.K + 1):
        transport.register(SERVER, j)

    segmented: dict[tuple[int, int], SegmentedMessage] = {}
    for i, gradient in enumerate(gradients, start=1):
        sampler = FieldSampler(cfg.field, derive_seed(seed, f"mask/user{i}"))
        mask = sampler.vector(cfg.segment_len)
        shares = encode_shares(gradient, mask, cfg)
        for j in range(1, cfg.K + 1):
            segmented[(j, i)] = segment_message(shares[j - 1], cfg.M - 1)

    payload_bits = header_bits = envelopes = 0
    for plan in schedule.rounds:
        for i, seg_index in sorted(plan.segments.items()):
            for j in range(1, cfg.K + 1):
                piece = segmented[(j, i)].piece(seg_index)
                payload = pack_share(
                    _share_header(cfg, j, i, plan.index, seg_index), piece
                )
                transport.send(Envelope(
                    sender_role=USER, sender_index=i,
                    receiver_role=SERVER, receiver_index=j,
                    round=plan.index, seq=transport.next_seq(USER, i),
                    payload=payload,
                ))
                payload_bits += 64 * len(piece)
                header_bits += 8 * HEADER_SIZE
                envelopes += 1

    columns: dict[int, list[list[int]]] = {}
    for j in range(1, cfg.K + 1):
        pieces: dict[int, dict[int, tuple[int, ...]]] = {i: {} for i in range(1, cfg.M + 1)}
        for env in transport.drain(SERVER, j):
            header, values = unpack_share(env.payload)
            if header.server != j or env.receiver_index != j:
                raise TransportIntegrityError(
                    f"server {j} received share addressed to server {header.server}"
                )
            if header.user not in pieces:
                raise TransportIntegrityError(f"share from unknown user {header.user}")
            if header.segment in pieces[header.user]:
                raise TransportIntegrityError(
                    f"duplicate segment {header.segment} from user {header.user}"
                )
            pieces[header.user][header.segment] = tuple(values)
        column = []
        for i in range(1, cfg.M + 1):
            got = pieces[i]
            if sorted(got) != list(range(1, cfg.M)):
                raise IncompleteRoundError(
                    f"server {j} holds segments {sorted(got)} from user {i}"
                )
            msg = SegmentedMessage(
                parts=tuple(got[s] for s in range(1, cfg.M)),
                pad=(cfg.M - 1) * len(got[1]) - cfg.segment_len,
            )
            column.append(desegment_message(msg))
        columns[j] = column
    return UplinkResult(columns=columns, payload_bits=payload_bits,
                        header_bits=header_bits, envelopes=envelopes)


def run_downlink(aggregates, cfg: CodingConfig, transport: InProcessTransport | None = None,
                 participating: list[int] | None = None) -> DownlinkResult:
    """Deliver each participating server's aggregate to every user.

    All users receive identical payloads from a given server, so the unique
    payload accounting counts each server's message once; wire_bits tracks
    the per-user copies actually enqueued.
    """
    by_server = {agg.server: agg for agg in aggregates}
    participating = sorted(by_server) if participating is None else sorted(participating)
    if len(participating) < cfg.r + 1:
        raise InsufficientSharesError(
            f"downlink needs at least r+1={cfg.r + 1} servers, got {len(participating)}"
        )
    missing = [j for j in participating if j not in by_server]
    if missing:
        raise IncompleteRoundError(f"servers {missing} have no aggregate to send")
    transport = transport if transport is not None else InProcessTransport()
    for i in range(1, cfg.M + 1):
        transport.register(USER, i)
    for j in range(1, cfg.K + 1):
        transport.register(SERVER, j)

    segmented = {
        j: segment_message(list(by_server[j].values), cfg.M - 1) for j in participating
    }
    payload_bits = sum(
        64 * len(part) for j in participating for part in segmented[j].parts
    )
    header_bits = 8 * HEADER_SIZE * len(participating) * (cfg.M - 1)

    wire_bits = envelopes = 0
    for a in range(1, cfg.M + 1):
        for j in participating:
            for m in range(1, cfg.M + 1):
                if m == a:
                    continue
                seg_index = downlink_segment(a, m)
                piece = segmented[j].piece(seg_index)
                payload = pack_share(_share_header(cfg, j, m, a, seg_index), piece)
                transport.send(Envelope(
                    sender_role=SERVER, sender_index=j,
                    receiver_role=USER, receiver_index=m,
                    round=a, seq=transport.next_seq(SERVER, j),
                    payload=payload,
                ))
                wire_bits += 64 * len(piece) + 8 * HEADER_SIZE
                envelopes += 1

    per_user: dict[int, list[AggregatedEvaluation]] = {}
    for m in range(1, cfg.M + 1):
        pieces: dict[int, dict[int, tuple[int, ...]]] = {j: {} for j in participating}
        for env in transport.drain(USER, m):
            header, values = unpack_share(env.payload)
            if header.user != m:
                raise TransportIntegrityError(
                    f"user {m} received message addressed to user {header.user}"
                )
            if header.server not in pieces:
                raise TransportIntegrityError(
                    f"downlink message from unexpected server {header.server}"
                )
            if header.segment in pieces[header.server]:
                raise TransportIntegrityError(
                    f"duplicate downlink segment {header.segment} from server {header.server}"
                )
            pieces[header.server][header.segment] = tuple(values)
        evals = []
        for j in participating:
            got = pieces[j]
            if sorted(got) != list(range(1, cfg.M)):
                raise IncompleteRoundError(
                    f"user {m} holds downlink segments {sorted(got)} from server {j}"
                )
            msg = SegmentedMessage(
                parts=tuple(got[s] for s in range(1, cfg.M)),
                pad=(cfg.M - 1) * len(got[1]) - cfg.segment_len,
            )
            evals.append(AggregatedEvaluation(server=j, values=tuple(desegment_message(msg))))
        per_user[m] = evals
    return DownlinkResult(per_user=per_user, payload_bits=payload_bits,
                          header_bits=header_bits, wire_bits=wire_bits, envelopes=envelopes)


def run_end_to_end(gradients, cfg: CodingConfig, seed: int = 0, stragglers: int = 0,
                   transport: InProcessTransport | None = None) -> EndToEndResult:
    """Full round trip: encode, uplink, aggregate, downlink, reconstruct.

    With s stragglers the last s servers sit out the downlink. The report's
    ok flag records whether every user recovered exactly the gradient sum.
    """
    if stragglers < 0 or cfg.K - stragglers < cfg.r + 1:
        raise InsufficientSharesError(
            f"{stragglers} stragglers leave fewer than r+1={cfg.r + 1} servers"
        )
    up = run_uplink(gradients, cfg, transport=transport, seed=seed)
    aggregates = [
        aggregate_shares(up.columns[j], cfg, server=j) for j in sorted(up.columns)
    ]
    participating = list(range(1, cfg.K + 1 - stragglers))
    down = run_downlink(aggregates, cfg, transport=transport, participating=participating)

    q = cfg.q
    expected = [sum(col) % q for col in zip(*gradients)]
    per_user = {m: reconstruct(evals, cfg) for m, evals in down.per_user.items()}
    ok = all(result == expected for result in per_user.values())

    report = RunReport(
        M=cfg.M, K=cfg.K, r=cfg.r, q=cfg.q, p=cfg.p, seed=seed,
        rounds=cfg.M, stragglers=stragglers,
        uplink_payload_bits=up.payload_bits,
        uplink_header_bits=up.header_bits,
        downlink_payload_bits=down.payload_bits,
        downlink_header_bits=down.header_bits,
        downlink_wire_bits=down.wire_bits,
        ok=ok,
    )
    return EndToEndResult(per_user=per_user, report=report)
