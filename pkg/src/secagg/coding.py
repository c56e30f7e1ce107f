"""Lagrange multi-secret sharing of gradients across K servers.

Each user splits its length-p gradient into r segments, masks them with one
uniform random vector, and evaluates the resulting degree-r interpolation
polynomial at K server points. Any r+1 server-side sums of those evaluations
reconstruct the aggregate gradient exactly, while any single server's view
stays uniform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .galois import DEFAULT_PRIME, PrimeField, evaluation_weights, field, is_prime


class ConfigurationError(ValueError):
    """Coding configuration violates a feasibility constraint."""


class IncompleteRoundError(RuntimeError):
    """A server is missing shares required to aggregate."""


class InsufficientSharesError(RuntimeError):
    """Fewer than r+1 aggregated evaluations available for reconstruction."""


@dataclass(frozen=True)
class CodingConfig:
    """Parameters of one coding instance.

    M users, K servers, r gradient segments, prime modulus q, gradient
    length p, plus the r+1 mask/data nodes (betas) and K server evaluation
    points (alphas). Nodes must be pairwise distinct and disjoint.
    """

    M: int
    K: int
    r: int
    q: int
    p: int
    betas: tuple[int, ...]
    alphas: tuple[int, ...]

    def __post_init__(self):
        if self.M < 1:
            raise ConfigurationError("need at least one user")
        if self.r < 1:
            raise ConfigurationError("need at least one gradient segment")
        if self.r + 1 > self.K:
            raise ConfigurationError(
                f"reconstruction needs r+1 <= K, got r={self.r}, K={self.K}"
            )
        if self.p < 1:
            raise ConfigurationError("gradient length must be positive")
        if not is_prime(self.q):
            raise ConfigurationError(f"modulus {self.q} is not prime")
        if self.q < self.r + 1 + self.K:
            raise ConfigurationError(
                f"field too small: need q >= r+1+K = {self.r + 1 + self.K}, got {self.q}"
            )
        if len(self.betas) != self.r + 1:
            raise ConfigurationError("need exactly r+1 beta nodes")
        if len(self.alphas) != self.K:
            raise ConfigurationError("need exactly K alpha nodes")
        nodes = [b % self.q for b in self.betas] + [a % self.q for a in self.alphas]
        if len(set(nodes)) != len(nodes):
            raise ConfigurationError("beta and alpha nodes must be pairwise distinct")

    @classmethod
    def default(cls, M: int, K: int, r: int, p: int, q: int | None = None) -> "CodingConfig":
        """Canonical node layout: betas 1..r+1, alphas r+2..r+1+K (mod q)."""
        q = DEFAULT_PRIME if q is None else q
        betas = tuple(l % q for l in range(1, r + 2))
        alphas = tuple((r + 1 + j) % q for j in range(1, K + 1))
        return cls(M=M, K=K, r=r, q=q, p=p, betas=betas, alphas=alphas)

    @property
    def field(self) -> PrimeField:
        return field(self.q)

    @property
    def segment_len(self) -> int:
        """Length of each gradient segment (last one zero-padded)."""
        return -(-self.p // self.r)


@dataclass(frozen=True)
class AggregatedEvaluation:
    """One server's sum of received shares: the value F(alpha_j)."""

    server: int
    values: tuple[int, ...]


def split_gradient(values, cfg: CodingConfig) -> list[list[int]]:
    """Split a length-p gradient into r segments of segment_len, zero-padded."""
    if len(values) != cfg.p:
        raise ConfigurationError(f"gradient length {len(values)} != p={cfg.p}")
    size = cfg.segment_len
    padded = list(values) + [0] * (cfg.r * size - cfg.p)
    return [padded[k * size : (k + 1) * size] for k in range(cfg.r)]


def join_segments(segments, cfg: CodingConfig) -> list[int]:
    """Inverse of split_gradient: concatenate and drop padding."""
    out: list[int] = []
    for seg in segments:
        out.extend(seg)
    return out[: cfg.p]


@lru_cache(maxsize=256)
def encoding_matrix(cfg: CodingConfig) -> tuple[tuple[int, ...], ...]:
    """K x (r+1) matrix U with U[j][k] = prod_{l != k} (alpha_j - beta_l) / (beta_k - beta_l).

    Column k < r weights data segment k+1; the last column weights the mask.
    Row j of U applied to (segments..., mask) yields the share for server j.
    """
    f = cfg.field
    q = cfg.q
    rows = []
    for alpha in cfg.alphas:
        row = []
        for k, beta_k in enumerate(cfg.betas):
            num, den = 1, 1
            for l, beta_l in enumerate(cfg.betas):
                if l == k:
                    continue
                num = num * (alpha - beta_l) % q
                den = den * (beta_k - beta_l) % q
            row.append(num * f.inv(den) % q)
        rows.append(tuple(row))
    return tuple(rows)


def encode_shares(values, mask, cfg: CodingConfig) -> list[list[int]]:
    """Encode one user's gradient into K per-server confidential shares.

    The mask must be a fresh uniform segment_len vector; reusing one across
    encodings voids the privacy guarantee.
    """
    segments = split_gradient(values, cfg)
    if len(mask) != cfg.segment_len:
        raise ConfigurationError(
            f"mask length {len(mask)} != segment length {cfg.segment_len}"
        )
    q = cfg.q
    u = encoding_matrix(cfg)
    columns = segments + [list(mask)]
    shares = []
    for j in range(cfg.K):
        row = u[j]
        shares.append(
            [sum(row[k] * col[e] for k, col in enumerate(columns)) % q
             for e in range(cfg.segment_len)]
        )
    return shares


def aggregate_shares(shares, cfg: CodingConfig, server: int) -> AggregatedEvaluation:
    """Sum the M shares received by one server; equals F(alpha_j)."""
    if len(shares) != cfg.M or any(s is None for s in shares):
        got = sum(1 for s in shares if s is not None)
        raise IncompleteRoundError(
            f"server {server} holds {got} of {cfg.M} shares"
        )
    q = cfg.q
    total = [0] * cfg.segment_len
    for share in shares:
        if len(share) != cfg.segment_len:
            raise ConfigurationError("share length mismatch")
        for e, v in enumerate(share):
            total[e] = (total[e] + v) % q
    return AggregatedEvaluation(server=server, values=tuple(total))


def reconstruct(evals, cfg: CodingConfig) -> list[int]:
    """Recover the aggregate gradient from r+1 or more server evaluations.

    Interpolates the degree-r polynomial through (alpha_j, F(alpha_j)) and
    reads off its values at the data nodes beta_1..beta_r. Any r+1 distinct
    servers suffice; extras are ignored (lowest server indices win).
    """
    by_server: dict[int, tuple[int, ...]] = {}
    for ev in evals:
        by_server[ev.server] = ev.values
    if len(by_server) < cfg.r + 1:
        raise InsufficientSharesError(
            f"need {cfg.r + 1} distinct server evaluations, got {len(by_server)}"
        )
    chosen = sorted(by_server)[: cfg.r + 1]
    if not all(1 <= j <= cfg.K for j in chosen):
        raise ConfigurationError(f"server indices must lie in 1..{cfg.K}")
    nodes = [cfg.alphas[j - 1] for j in chosen]
    f = cfg.field
    q = cfg.q
    # Evaluation weights at each data node: F(beta_k) = sum_j w[k][j] F(alpha_j).
    weights = [evaluation_weights(f, nodes, cfg.betas[k]) for k in range(cfg.r)]
    columns = [by_server[j] for j in chosen]
    segments = []
    for k in range(cfg.r):
        wk = weights[k]
        segments.append(
            [sum(wk[j] * columns[j][e] for j in range(cfg.r + 1)) % q
             for e in range(cfg.segment_len)]
        )
    return join_segments(segments, cfg)
