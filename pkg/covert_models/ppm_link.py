"""
PPM Link
Alice's keyed PPM encoder, the silence-interleaved transmission sequence,
Bob's decoder and the discrete memoryless channel Bob sees.

Leftover-frame policy: the selected frames are split into consecutive
blocks of rs_n; a trailing remainder shorter than rs_n never carries a pulse.
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import xlogy
from scipy.stats import binom, entropy

from .channel_model import PpmSession
from .errors import ParameterRangeError, require_nonnegative
from .gf_codec import RsCodeword, get_codec
from .rng_streams import SeedLike, as_generator

logger = logging.getLogger(__name__)

ERASURE = -1


@dataclass(frozen=True)
class SecretKey:
    """Selected frame indices and the per-frame scrambling offsets"""

    selected: np.ndarray
    key: np.ndarray
    Q: int

    def __post_init__(self):
        selected = np.asarray(self.selected, dtype=np.int64)
        key = np.asarray(self.key, dtype=np.int64)
        if selected.shape != key.shape or selected.ndim != 1:
            raise ParameterRangeError(
                f"key length {key.shape} must equal selected length {selected.shape}",
                code="LENGTH_MISMATCH",
            )
        if key.size and (key.min() < 0 or key.max() >= self.Q):
            raise ParameterRangeError(f"key entries must lie in 0..{self.Q - 1}")
        if selected.size and (selected[0] < 0 or np.any(np.diff(selected) <= 0)):
            raise ParameterRangeError("selected frame indices must be nonnegative and strictly increasing")
        object.__setattr__(self, "selected", selected)
        object.__setattr__(self, "key", key)

    def __len__(self) -> int:
        return int(self.selected.size)


@dataclass(frozen=True)
class BinarySequence:
    """One entry per optical mode; 1 marks a pulse"""

    bits: np.ndarray
    Q: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size % self.Q != 0:
            raise ParameterRangeError(
                f"sequence length {bits.size} is not a whole number of {self.Q}-mode frames",
                code="LENGTH_MISMATCH",
            )
        if np.any(bits > 1):
            raise ParameterRangeError("sequence entries must be 0 or 1")
        if bits.size and bits.reshape(-1, self.Q).sum(axis=1).max() > 1:
            raise ParameterRangeError("at most one pulse per frame")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return int(self.bits.size)

    def frames(self) -> np.ndarray:
        return self.bits.reshape(-1, self.Q)

    def pulse_frames(self) -> np.ndarray:
        return np.flatnonzero(self.frames().any(axis=1))

    def to_packed_bytes(self) -> bytes:
        """Mode 0 is the least significant bit of byte 0"""
        return np.packbits(self.bits, bitorder="little").tobytes()

    @classmethod
    def from_packed_bytes(cls, data: bytes, n_modes: int, Q: int) -> "BinarySequence":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
        if bits.size < n_modes:
            raise ParameterRangeError(f"{len(data)} bytes hold fewer than {n_modes} modes", code="LENGTH_MISMATCH")
        return cls(bits[:n_modes], Q)

    def write_bitfile(self, path: str) -> None:
        with open(path, "wb") as f:
            f.write(self.to_packed_bytes())
        logger.info(f"Wrote {len(self)} modes to {path}")


@dataclass(frozen=True)
class BobFrameObservation:
    """Bob's click pattern for each selected frame, shape (frames, Q)"""

    clicks: np.ndarray

    def __post_init__(self):
        clicks = np.asarray(self.clicks, dtype=bool)
        if clicks.ndim != 2:
            raise ParameterRangeError("clicks must be a (frames, Q) matrix")
        object.__setattr__(self, "clicks", clicks)

    def __len__(self) -> int:
        return int(self.clicks.shape[0])

    @property
    def erasures(self) -> np.ndarray:
        return ~self.clicks.any(axis=1)

    def resolve_positions(self, seed: SeedLike) -> np.ndarray:
        """One click position per frame, uniform among the frame's clicks; ERASURE if none"""
        rng = as_generator(seed)
        scores = rng.random(self.clicks.shape)
        scores[~self.clicks] = -1.0
        positions = scores.argmax(axis=1).astype(np.int64)
        positions[self.erasures] = ERASURE
        return positions


class BobDecodeResult(NamedTuple):
    data_symbols: np.ndarray
    block_success: np.ndarray
    block_messages: List[Optional[np.ndarray]]
    received_symbols: np.ndarray
    erasures: int
    symbol_errors: int

    @property
    def block_failures(self) -> int:
        return int((~self.block_success).sum())


def usable_frame_count(n_selected: int, rs_n: int) -> int:
    return (n_selected // rs_n) * rs_n


def generate_secret(session: PpmSession, seed: SeedLike) -> SecretKey:
    rng = as_generator(seed)
    selected = np.flatnonzero(rng.random(session.n_frames) < session.zeta)
    key = rng.integers(0, session.Q, size=selected.size)
    return SecretKey(selected, key, session.Q)


def scramble(symbols: np.ndarray, key: np.ndarray, Q: int) -> np.ndarray:
    return (np.asarray(symbols, dtype=np.int64) + key) % Q


def unscramble(positions: np.ndarray, key: np.ndarray, Q: int) -> np.ndarray:
    return (np.asarray(positions, dtype=np.int64) - key) % Q


def encode_payload(data_symbols: Sequence[int], session: PpmSession) -> np.ndarray:
    """RS-encode raw Q-ary data, rs_k symbols in and rs_n symbols out per block"""
    data = np.asarray(data_symbols, dtype=np.int64)
    if data.size % session.rs_k != 0:
        raise ParameterRangeError(
            f"payload of {data.size} symbols is not a whole number of {session.rs_k}-symbol blocks",
            code="LENGTH_MISMATCH",
        )
    codec = get_codec(session.rs_n, session.rs_k)
    blocks = [codec.encode(block).symbols for block in data.reshape(-1, session.rs_k)]
    return np.concatenate(blocks) if blocks else np.zeros(0, dtype=np.int64)


def alice_encode(
    data_symbols: Sequence[int], key: SecretKey, session: PpmSession, rs_encoded: bool = True
) -> BinarySequence:
    """Place one pulse per used frame at (symbol + key) mod Q.

    With ``rs_encoded=False`` the raw data are RS-encoded first and must fill
    every usable block.
    """
    symbols = np.asarray(data_symbols, dtype=np.int64)
    if not rs_encoded:
        symbols = encode_payload(symbols, session)
    used = usable_frame_count(len(key), session.rs_n)
    if symbols.size != used:
        raise ParameterRangeError(
            f"{symbols.size} coded symbols given for {used} usable frames "
            f"({len(key)} selected, blocks of {session.rs_n})",
            code="LENGTH_MISMATCH",
        )
    if symbols.size and (symbols.min() < 0 or symbols.max() >= session.Q):
        raise ParameterRangeError(f"symbols must lie in 0..{session.Q - 1}")
    bits = np.zeros(session.n, dtype=np.uint8)
    positions = scramble(symbols, key.key[:used], session.Q)
    bits[key.selected[:used] * session.Q + positions] = 1
    return BinarySequence(bits, session.Q)


def interleave_with_silence(seq: BinarySequence) -> BinarySequence:
    """Signal block followed by an all-zero block of the same length"""
    return BinarySequence(np.concatenate([seq.bits, np.zeros_like(seq.bits)]), seq.Q)


def bob_decode(
    observations: BobFrameObservation, key: SecretKey, session: PpmSession, seed: SeedLike
) -> BobDecodeResult:
    """Resolve clicks, strip the key and RS-decode each used block"""
    used = usable_frame_count(len(key), session.rs_n)
    if len(observations) < used:
        raise ParameterRangeError(
            f"{len(observations)} observed frames, {used} needed", code="LENGTH_MISMATCH"
        )
    positions = observations.resolve_positions(seed)[:used]
    erased = positions == ERASURE
    received = np.where(erased, ERASURE, unscramble(positions, key.key[:used], session.Q))

    codec = get_codec(session.rs_n, session.rs_k)
    messages: List[Optional[np.ndarray]] = []
    success = np.zeros(used // session.rs_n, dtype=bool)
    corrected = 0
    for b in range(success.size):
        block = slice(b * session.rs_n, (b + 1) * session.rs_n)
        outcome = codec.decode(RsCodeword(np.where(erased[block], 0, received[block]), erased[block]))
        messages.append(outcome.message)
        success[b] = outcome.success
        if outcome.success:
            corrected += outcome.errors_corrected
        else:
            logger.debug(f"RS block {b} failed with {int(erased[block].sum())} erasures")

    decoded = [m for m in messages if m is not None]
    return BobDecodeResult(
        data_symbols=np.concatenate(decoded) if decoded else np.zeros(0, dtype=np.int64),
        block_success=success,
        block_messages=messages,
        received_symbols=received,
        erasures=int(erased.sum()),
        symbol_errors=corrected,
    )


# Bob's induced channel

class DmcRow(NamedTuple):
    p_correct: float
    p_erasure: float
    p_other: float


def dmc_symbol_probs(Q: int, p_D_b: float, nbar_det_b: float) -> DmcRow:
    """Per-frame outcome probabilities for a sent symbol x.

    Correct: x clicks (pulse detected, or missed and dark) and wins the
    uniform tie-break among the B ~ Binomial(Q-1, p_D_b) other dark clicks.
    Erasure: pulse missed and no dark click in any mode.
    """
    if Q < 2:
        raise ParameterRangeError(f"Q must be >= 2, got {Q}")
    if not 0.0 <= p_D_b < 1.0:
        raise ParameterRangeError(f"p_D_b must lie in [0, 1), got {p_D_b}")
    require_nonnegative("nbar_det_b", nbar_det_b)
    miss = float(np.exp(-nbar_det_b))
    others = np.arange(Q)
    tie_break = float(np.sum(binom.pmf(others, Q - 1, p_D_b) / (others + 1)))
    p_correct = (1.0 - miss) * tie_break + miss * p_D_b * tie_break
    p_erasure = miss * (1.0 - p_D_b) ** Q
    p_other = max(0.0, 1.0 - p_correct - p_erasure) / (Q - 1)
    return DmcRow(p_correct, p_erasure, p_other)


def erasure_probability(Q: int, p_D_b: float, nbar_det_b: float) -> float:
    return dmc_symbol_probs(Q, p_D_b, nbar_det_b).p_erasure


def dmc_transition_matrix(Q: int, p_D_b: float, nbar_det_b: float) -> np.ndarray:
    """Rows: sent symbol; columns: received symbol 0..Q-1, then erasure"""
    row = dmc_symbol_probs(Q, p_D_b, nbar_det_b)
    matrix = np.full((Q, Q + 1), row.p_other)
    np.fill_diagonal(matrix[:, :Q], row.p_correct)
    matrix[:, Q] = row.p_erasure
    return matrix


def dmc_capacity(Q: int, p_D_b: float, nbar_det_b: float) -> float:
    """C_s in bits per frame; the channel is symmetric so the uniform input is optimal"""
    row = dmc_symbol_probs(Q, p_D_b, nbar_det_b)
    conditional = np.concatenate([[row.p_correct], np.full(Q - 1, row.p_other), [row.p_erasure]])
    output = np.concatenate([np.full(Q, (1.0 - row.p_erasure) / Q), [row.p_erasure]])
    return float(max(0.0, entropy(output, base=2) - entropy(conditional, base=2)))


def blahut_arimoto_capacity(
    p_y_x: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000
) -> tuple:
    """Capacity in bits and the optimal input law of an arbitrary DMC"""
    p_y_x = np.asarray(p_y_x, dtype=float)
    if np.any(np.abs(p_y_x.sum(axis=1) - 1.0) > 1e-9):
        raise ParameterRangeError("transition matrix rows must sum to 1")
    r = np.full(p_y_x.shape[0], 1.0 / p_y_x.shape[0])
    for _ in range(max_iter):
        q = r[:, None] * p_y_x
        q = q / np.where(q.sum(axis=0) > 0, q.sum(axis=0), 1.0)
        log_r = np.sum(xlogy(p_y_x, np.where(p_y_x > 0, q, 1.0)), axis=1)
        r_next = np.exp(log_r - log_r.max())
        r_next /= r_next.sum()
        done = np.linalg.norm(r_next - r) < tol
        r = r_next
        if done:
            break
    p_y = r @ p_y_x
    ratio = np.where(p_y_x > 0, p_y_x / np.where(p_y > 0, p_y, 1.0)[None, :], 1.0)
    capacity = float(np.sum(r[:, None] * xlogy(p_y_x, ratio)) / np.log(2))
    return capacity, r


def max_throughput(C_s: float, zeta: float, n: int, Q: int) -> float:
    for name, value in (("C_s", C_s), ("zeta", zeta), ("n", n)):
        require_nonnegative(name, value)
    if Q <= 0:
        raise ParameterRangeError(f"Q must be positive, got {Q}")
    return C_s * zeta * n / Q
