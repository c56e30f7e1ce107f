"""Wire format for share messages.

Layout (all little-endian):
    q        u64   field modulus
    M, K, r  u16   topology
    p        u32   gradient length in field elements
    server   u16   destination server index (1-based)
    user     u16   originating user index (1-based; 0 for downlink broadcast)
    round    u16   transmission round (1-based; 0 for unsegmented shares)
    segment  u16   segment index within the parent message (same convention)
payload: one u64 per field element, canonical residue.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .galois import decode_vector, encode_vector

_HEADER = struct.Struct("<QHHHIHHHH")

HEADER_SIZE = _HEADER.size  # 26 bytes


@dataclass(frozen=True)
class ShareHeader:
    q: int
    M: int
    K: int
    r: int
    p: int
    server: int
    user: int
    round: int
    segment: int


def pack_share(header: ShareHeader, values) -> bytes:
    head = _HEADER.pack(
        header.q, header.M, header.K, header.r, header.p,
        header.server, header.user, header.round, header.segment,
    )
    return head + encode_vector(values)


def unpack_share(data: bytes) -> tuple[ShareHeader, list[int]]:
    if len(data) < HEADER_SIZE:
        raise ValueError("share message shorter than header")
    fields = _HEADER.unpack_from(data)
    return ShareHeader(*fields), decode_vector(data[HEADER_SIZE:])
