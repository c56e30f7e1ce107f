import json
import random
import threading

import pytest

from secagg.coding import (
    CodingConfig,
    InsufficientSharesError,
    aggregate_shares,
    encode_shares,
)
from secagg.galois import encode_vector, field
from secagg.protocol import (
    RunReport,
    UnsupportedTopologyError,
    build_schedule,
    desegment_message,
    run_downlink,
    run_end_to_end,
    run_uplink,
    segment_message,
    uplink_segment,
)
from secagg.rng import FieldSampler, derive_seed
from secagg.transport import (
    SERVER,
    USER,
    Envelope,
    InProcessTransport,
    SocketTransport,
    TransportIntegrityError,
    decode_envelope,
    encode_envelope,
)
from secagg.wire import HEADER_SIZE, ShareHeader, pack_share, unpack_share


def sample_gradients(cfg, seed):
    f = field(cfg.q)
    return [
        FieldSampler(f, derive_seed(seed, f"gradient/user{i}")).vector(cfg.p)
        for i in range(1, cfg.M + 1)
    ]


class TestSchedule:
    def test_round_5_of_5_users(self):
        sched = build_schedule(5)
        last = sched.rounds[4]
        assert last.noise_user == 5
        assert last.segments == {1: 4, 2: 4, 3: 4, 4: 4}

    def test_m3_full_enumeration(self):
        sched = build_schedule(3)
        assert sched.rounds[0].segments == {2: 1, 3: 1}
        assert sched.rounds[1].segments == {1: 1, 3: 2}
        assert sched.rounds[2].segments == {1: 2, 2: 2}

    @pytest.mark.parametrize("M", [3, 4, 5, 8])
    def test_rotation_covers_every_segment_once(self, M):
        sched = build_schedule(M)
        noise_users = [plan.noise_user for plan in sched.rounds]
        assert sorted(noise_users) == list(range(1, M + 1))
        for i in range(1, M + 1):
            sent = sorted(
                plan.segments[i] for plan in sched.rounds if i in plan.segments
            )
            assert sent == list(range(1, M))

    def test_m2_rejected(self):
        with pytest.raises(UnsupportedTopologyError):
            build_schedule(2)
        assert uplink_segment(2, 2) is None


class TestSegmentation:
    def test_len4_into_4(self):
        msg = segment_message([1, 2, 3, 4], 4)
        assert msg.parts == ((1,), (2,), (3,), (4,))
        assert msg.pad == 0

    def test_len5_into_3_pads_one(self):
        msg = segment_message([1, 2, 3, 4, 5], 3)
        assert msg.parts == ((1, 2), (3, 4), (5, 0))
        assert msg.pad == 1

    def test_roundtrip_random(self):
        rng = random.Random(4)
        for _ in range(100):
            n = rng.randrange(1, 40)
            parts = rng.randrange(1, 9)
            values = [rng.randrange(1000) for _ in range(n)]
            assert desegment_message(segment_message(values, parts)) == values


class TestWire:
    def test_header_is_26_bytes(self):
        assert HEADER_SIZE == 26

    def test_pack_unpack_roundtrip(self):
        header = ShareHeader(q=2**31 - 1, M=5, K=4, r=3, p=300,
                             server=2, user=4, round=1, segment=3)
        data = pack_share(header, [7, 0, 2**31 - 2])
        parsed, values = unpack_share(data)
        assert parsed == header
        assert values == [7, 0, 2**31 - 2]

    def test_short_buffer_rejected(self):
        with pytest.raises(ValueError):
            unpack_share(b"\x00" * 10)


class TestTransport:
    def test_duplicate_seq_rejected(self):
        t = InProcessTransport()
        t.register(SERVER, 1)
        env = Envelope(USER, 1, SERVER, 1, round=1, seq=0, payload=b"x")
        t.send(env)
        with pytest.raises(TransportIntegrityError, match="duplicate"):
            t.send(env)

    def test_unknown_receiver_rejected(self):
        t = InProcessTransport()
        with pytest.raises(TransportIntegrityError, match="unknown receiver"):
            t.send(Envelope(USER, 1, SERVER, 9, round=1, seq=0, payload=b""))

    def test_envelope_codec_roundtrip(self):
        env = Envelope(SERVER, 3, USER, 2, round=4, seq=17, payload=b"\x01\x02")
        assert decode_envelope(encode_envelope(env)) == env

    def test_socket_pair_delivery(self):
        a, b = SocketTransport.pair()
        sent = [
            Envelope(USER, 1, SERVER, 1, round=r, seq=r, payload=bytes([r]) * 5)
            for r in range(3)
        ]
        received = []

        def reader():
            for _ in sent:
                received.append(b.receive())

        th = threading.Thread(target=reader)
        th.start()
        for env in sent:
            a.send(env)
        th.join(timeout=5)
        assert received == sent


class TestUplink:
    def test_servers_hold_exactly_their_column(self):
        cfg = CodingConfig.default(M=3, K=3, r=2, p=6)
        up = run_uplink(sample_gradients(cfg, 11), cfg, seed=11)
        assert sorted(up.columns) == [1, 2, 3]
        for j, column in up.columns.items():
            assert len(column) == 3
        assert up.envelopes == cfg.M * (cfg.M - 1) * cfg.K

    def test_reassembly_matches_encoder_bytes(self):
        cfg = CodingConfig.default(M=4, K=3, r=2, p=10)
        gradients = sample_gradients(cfg, 5)
        up = run_uplink(gradients, cfg, seed=5)
        for i, gradient in enumerate(gradients, start=1):
            mask = FieldSampler(cfg.field, derive_seed(5, f"mask/user{i}")).vector(cfg.segment_len)
            expected = encode_shares(gradient, mask, cfg)
            for j in range(1, cfg.K + 1):
                assert encode_vector(up.columns[j][i - 1]) == encode_vector(expected[j - 1])

    def test_rogue_misaddressed_share_detected(self):
        cfg = CodingConfig.default(M=3, K=3, r=1, p=3)
        transport = InProcessTransport()
        transport.register(SERVER, 2)
        rogue = pack_share(
            ShareHeader(q=cfg.q, M=3, K=3, r=1, p=3, server=1, user=1, round=1, segment=1),
            [1, 2, 3],
        )
        transport.send(Envelope(USER, 9, SERVER, 2, round=1, seq=0, payload=rogue))
        with pytest.raises(TransportIntegrityError, match="addressed"):
            run_uplink(sample_gradients(cfg, 1), cfg, transport=transport, seed=1)

    def test_unknown_user_detected(self):
        cfg = CodingConfig.default(M=3, K=3, r=1, p=3)
        transport = InProcessTransport()
        transport.register(SERVER, 1)
        rogue = pack_share(
            ShareHeader(q=cfg.q, M=3, K=3, r=1, p=3, server=1, user=9, round=1, segment=1),
            [1],
        )
        transport.send(Envelope(USER, 9, SERVER, 1, round=1, seq=0, payload=rogue))
        with pytest.raises(TransportIntegrityError, match="unknown user"):
            run_uplink(sample_gradients(cfg, 3), cfg, transport=transport, seed=3)

    def test_replayed_segment_detected(self):
        cfg = CodingConfig.default(M=3, K=3, r=1, p=3)
        transport = InProcessTransport()
        transport.register(SERVER, 1)
        dup = pack_share(
            ShareHeader(q=cfg.q, M=3, K=3, r=1, p=3, server=1, user=2, round=1, segment=1),
            [1],
        )
        transport.send(Envelope(USER, 9, SERVER, 1, round=1, seq=0, payload=dup))
        with pytest.raises(TransportIntegrityError, match="duplicate segment"):
            run_uplink(sample_gradients(cfg, 2), cfg, transport=transport, seed=2)


def aggregates_for(cfg, gradients, seed):
    up = run_uplink(gradients, cfg, seed=seed)
    return [aggregate_shares(up.columns[j], cfg, server=j) for j in sorted(up.columns)]


class TestDownlink:
    def test_all_users_reconstruct_identically(self):
        from secagg.coding import reconstruct

        cfg = CodingConfig.default(M=4, K=4, r=3, p=8)
        gradients = sample_gradients(cfg, 3)
        down = run_downlink(aggregates_for(cfg, gradients, 3), cfg)
        expected = [sum(c) % cfg.q for c in zip(*gradients)]
        assert sorted(down.per_user) == [1, 2, 3, 4]
        for evals in down.per_user.values():
            assert reconstruct(evals, cfg) == expected

    def test_straggler_subset_still_exact(self):
        from secagg.coding import reconstruct

        cfg = CodingConfig.default(M=4, K=4, r=2, p=8)
        gradients = sample_gradients(cfg, 9)
        down = run_downlink(aggregates_for(cfg, gradients, 9), cfg, participating=[1, 2, 3])
        expected = [sum(c) % cfg.q for c in zip(*gradients)]
        for evals in down.per_user.values():
            assert len(evals) == 3
            assert reconstruct(evals, cfg) == expected

    def test_below_threshold_rejected(self):
        cfg = CodingConfig.default(M=4, K=4, r=2, p=8)
        gradients = sample_gradients(cfg, 9)
        aggs = aggregates_for(cfg, gradients, 9)
        with pytest.raises(InsufficientSharesError):
            run_downlink(aggs, cfg, participating=[1, 2])


class TestEndToEnd:
    def test_golden_shape_matches_direct_sum(self):
        cfg = CodingConfig.default(M=5, K=4, r=3, p=60)
        gradients = sample_gradients(cfg, 7)
        result = run_end_to_end(gradients, cfg, seed=7)
        expected = [sum(c) % cfg.q for c in zip(*gradients)]
        assert result.report.ok
        for user_result in result.per_user.values():
            assert user_result == expected

    def test_all_zero_gradients(self):
        cfg = CodingConfig.default(M=3, K=3, r=2, p=4)
        result = run_end_to_end([[0] * 4] * 3, cfg, seed=0)
        assert result.report.ok
        assert all(v == [0, 0, 0, 0] for v in result.per_user.values())

    def test_straggler_mode(self):
        cfg = CodingConfig.default(M=4, K=4, r=2, p=8)
        gradients = sample_gradients(cfg, 21)
        result = run_end_to_end(gradients, cfg, seed=21, stragglers=1)
        assert result.report.ok
        assert result.report.stragglers == 1

    def test_too_many_stragglers_rejected(self):
        cfg = CodingConfig.default(M=4, K=4, r=2, p=8)
        with pytest.raises(InsufficientSharesError):
            run_end_to_end(sample_gradients(cfg, 1), cfg, seed=1, stragglers=2)

    def test_deterministic_given_seed(self):
        cfg = CodingConfig.default(M=4, K=3, r=2, p=10)
        gradients = sample_gradients(cfg, 13)
        a = run_end_to_end(gradients, cfg, seed=13)
        b = run_end_to_end(gradients, cfg, seed=13)
        assert a.report.to_json() == b.report.to_json()
        assert a.per_user == b.per_user

    def test_report_fields_json(self):
        cfg = CodingConfig.default(M=3, K=3, r=2, p=6)
        report = run_end_to_end(sample_gradients(cfg, 2), cfg, seed=2).report
        parsed = json.loads(report.to_json())
        for key in ("M", "K", "r", "q", "seed", "uplink_payload_bits",
                    "downlink_payload_bits", "ok"):
            assert key in parsed
        assert isinstance(report, RunReport)


class TestCommunicationCost:
    def test_payload_bits_match_formula_when_divisible(self):
        # p chosen so r | p and (M-1) | p/r: no padding anywhere.
        cfg = CodingConfig.default(M=5, K=4, r=3, p=300)
        result = run_end_to_end(sample_gradients(cfg, 7), cfg, seed=7)
        A = cfg.p * 64  # serialized gradient bits
        assert result.report.uplink_payload_bits == cfg.K * cfg.M * A // cfg.r
        assert result.report.downlink_payload_bits == cfg.K * A // cfg.r

    def test_total_bits_within_two_percent_of_ideal_at_r_k_minus_1(self):
        cfg = CodingConfig.default(M=5, K=4, r=3, p=10_000)
        result = run_end_to_end(sample_gradients(cfg, 1), cfg, seed=1)
        A = cfg.p * 64
        up_ideal = cfg.K / (cfg.K - 1) * cfg.M * A
        down_ideal = cfg.K / (cfg.K - 1) * A
        up_total = result.report.uplink_payload_bits + result.report.uplink_header_bits
        down_total = result.report.downlink_payload_bits + result.report.downlink_header_bits
        assert abs(up_total - up_ideal) / up_ideal < 0.02
        assert abs(down_total - down_ideal) / down_ideal < 0.02
