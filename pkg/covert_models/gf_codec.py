"""
GF(2^m) arithmetic and a Reed-Solomon errors-and-erasures codec.

The default instance is the (31,15) code over GF(32) with primitive
polynomial x^5 + x^2 + 1 and generator roots alpha^1 .. alpha^16.
Codeword position p carries the coefficient of x^(n-1-p), so the first k
positions hold the message (systematic form).

Decoding: syndromes, erasure locator, Berlekamp-Massey seeded with the
erasure locator, Chien search, Forney's formula.
"""

import logging
from dataclasses import dataclass, field as dataclass_field
from functools import lru_cache
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterRangeError

logger = logging.getLogger(__name__)

DEFAULT_PRIMITIVE_POLYS = {
    2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89, 8: 0x11D, 9: 0x211,
    10: 0x409, 11: 0x805, 12: 0x1053, 13: 0x201B, 14: 0x4443, 15: 0x8003, 16: 0x1100B,
}


class GaloisField:
    """GF(2^m) with log/antilog tables, generator alpha = x"""

    def __init__(self, m: int = 5, prim_poly: Optional[int] = None):
        if m not in DEFAULT_PRIMITIVE_POLYS:
            raise ParameterRangeError(f"field degree m must lie in 2..16, got {m}")
        self.m = m
        self.order = 1 << m
        self.prim_poly = prim_poly if prim_poly is not None else DEFAULT_PRIMITIVE_POLYS[m]
        self.exp, self.log = self._build_tables()

    def _build_tables(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        period = self.order - 1
        exp = [0] * (2 * period)
        log = [-1] * self.order
        x = 1
        for i in range(period):
            if log[x] != -1:
                raise ParameterRangeError(
                    f"polynomial {self.prim_poly:#x} is not primitive for m={self.m}"
                )
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.order:
                x ^= self.prim_poly
        if x != 1:
            raise ParameterRangeError(f"polynomial {self.prim_poly:#x} is not primitive for m={self.m}")
        exp[period:] = exp[:period]
        return tuple(exp), tuple(log)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GaloisField) and (self.m, self.prim_poly) == (other.m, other.prim_poly)

    def __hash__(self) -> int:
        return hash((self.m, self.prim_poly))

    def __repr__(self) -> str:
        return f"GaloisField(m={self.m}, prim_poly={self.prim_poly:#x})"

    def _check(self, a: int) -> int:
        if not 0 <= a < self.order:
            raise ParameterRangeError(f"{a} is not an element of GF({self.order})")
        return a

    def element(self, value: int) -> "FieldElement":
        return FieldElement(self, value)

    def alpha_power(self, exponent: int) -> int:
        return self.exp[exponent % (self.order - 1)]

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def inverse(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return self.exp[(self.order - 1) - self.log[a]]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by zero in GF(2^m)")
        if a == 0:
            return 0
        return self.exp[(self.log[a] - self.log[b]) % (self.order - 1)]

    def power(self, a: int, exponent: int) -> int:
        if a == 0:
            if exponent < 0:
                raise ZeroDivisionError("zero has no negative powers")
            return 1 if exponent == 0 else 0
        return self.exp[(self.log[a] * exponent) % (self.order - 1)]

    # polynomial helpers: coefficient lists, convolution is order-agnostic

    def poly_scale(self, p: Sequence[int], x: int) -> List[int]:
        return [self.mul(c, x) for c in p]

    def poly_add(self, p: Sequence[int], q: Sequence[int]) -> List[int]:
        """Add two lowest-degree-first polynomials"""
        out = list(p) + [0] * max(0, len(q) - len(p))
        for i, c in enumerate(q):
            out[i] ^= c
        return out

    def poly_mul(self, p: Sequence[int], q: Sequence[int]) -> List[int]:
        out = [0] * (len(p) + len(q) - 1)
        for j, b in enumerate(q):
            if b == 0:
                continue
            for i, a in enumerate(p):
                if a:
                    out[i + j] ^= self.mul(a, b)
        return out

    def poly_eval_high(self, p: Sequence[int], x: int) -> int:
        """Horner evaluation, highest-degree coefficient first"""
        y = 0
        for c in p:
            y = self.mul(y, x) ^ c
        return y

    def poly_eval_low(self, p: Sequence[int], x: int) -> int:
        y = 0
        for c in reversed(p):
            y = self.mul(y, x) ^ c
        return y


class FieldElement:
    """A value of GF(2^m) bound to its field"""

    __slots__ = ("field", "value")

    def __init__(self, field: GaloisField, value: int):
        self.field = field
        self.value = field._check(int(value))

    def _coerce(self, other: object) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise ParameterRangeError("cannot mix elements of different fields")
            return other.value
        if isinstance(other, (int, np.integer)):
            return self.field._check(int(other))
        return NotImplemented

    def __add__(self, other: object) -> "FieldElement":
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        return FieldElement(self.field, self.value ^ b)

    __radd__ = __add__
    __sub__ = __add__
    __rsub__ = __add__

    def __mul__(self, other: object) -> "FieldElement":
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        return FieldElement(self.field, self.field.mul(self.value, b))

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> "FieldElement":
        b = self._coerce(other)
        if b is NotImplemented:
            return NotImplemented
        return FieldElement(self.field, self.field.div(self.value, b))

    def __pow__(self, exponent: int) -> "FieldElement":
        return FieldElement(self.field, self.field.power(self.value, exponent))

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field, self.field.inverse(self.value))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FieldElement):
            return self.field == other.field and self.value == other.value
        if isinstance(other, (int, np.integer)):
            return self.value == int(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.field, self.value))

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"FieldElement({self.value}, GF({self.field.order}))"


@dataclass(frozen=True)
class RsCodeword:
    symbols: np.ndarray
    erasure_mask: np.ndarray = dataclass_field(default=None)

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=np.int64)
        mask = (
            np.zeros(symbols.shape[0], dtype=bool)
            if self.erasure_mask is None
            else np.asarray(self.erasure_mask, dtype=bool)
        )
        if symbols.ndim != 1 or mask.shape != symbols.shape:
            raise ParameterRangeError(
                f"symbols and erasure_mask must be equal-length vectors, got {symbols.shape} and {mask.shape}",
                code="LENGTH_MISMATCH",
            )
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "erasure_mask", mask)

    @property
    def n_erasures(self) -> int:
        return int(self.erasure_mask.sum())

    def with_erasures(self, positions: Sequence[int]) -> "RsCodeword":
        mask = self.erasure_mask.copy()
        mask[list(positions)] = True
        return RsCodeword(self.symbols, mask)


class RsDecodeOutcome(NamedTuple):
    message: Optional[np.ndarray]
    success: bool
    errata_corrected: int = 0
    errors_corrected: int = 0


class ReedSolomonCodec:
    """Systematic narrow-sense RS(n, k) code over a GaloisField"""

    def __init__(self, field: Optional[GaloisField] = None, n: int = 31, k: int = 15, fcr: int = 1):
        self.field = field or GaloisField(5)
        if not (1 <= k < n <= self.field.order - 1):
            raise ParameterRangeError(
                f"RS parameters need 1 <= k < n <= {self.field.order - 1}, got n={n}, k={k}"
            )
        self.n = n
        self.k = k
        self.nsym = n - k
        self.fcr = fcr
        self.generator = self._generator_poly()

    def __repr__(self) -> str:
        return f"ReedSolomonCodec(n={self.n}, k={self.k}, {self.field!r})"

    def _generator_poly(self) -> List[int]:
        g = [1]
        for i in range(self.nsym):
            g = self.field.poly_mul(g, [1, self.field.alpha_power(self.fcr + i)])
        return g

    def encode(self, message: Sequence[int]) -> RsCodeword:
        msg = [self.field._check(int(v)) for v in message]
        if len(msg) != self.k:
            raise ParameterRangeError(
                f"message length must be {self.k}, got {len(msg)}", code="LENGTH_MISMATCH"
            )
        work = msg + [0] * self.nsym
        mul = self.field.mul
        for i in range(self.k):
            coef = work[i]
            if coef:
                for j in range(1, len(self.generator)):
                    work[i + j] ^= mul(self.generator[j], coef)
        return RsCodeword(np.asarray(msg + work[self.k:], dtype=np.int64))

    def syndromes(self, symbols: Sequence[int]) -> List[int]:
        return [
            self.field.poly_eval_high(symbols, self.field.alpha_power(self.fcr + i))
            for i in range(self.nsym)
        ]

    def check(self, symbols: Sequence[int]) -> bool:
        return not any(self.syndromes([int(v) for v in symbols]))

    def _berlekamp_massey(self, synd: List[int], gamma: List[int], rho: int) -> Tuple[List[int], int]:
        gf = self.field
        lam = list(gamma)
        prev = list(gamma)
        L = rho
        for r in range(rho + 1, self.nsym + 1):
            delta = 0
            for j in range(min(len(lam), r)):
                if lam[j]:
                    delta ^= gf.mul(lam[j], synd[r - 1 - j])
            shifted = [0] + prev
            if delta == 0:
                prev = shifted
                continue
            updated = gf.poly_add(lam, gf.poly_scale(shifted, delta))
            if 2 * L <= r - 1 + rho:
                prev = gf.poly_scale(lam, gf.inverse(delta))
                L = r - L + rho
            else:
                prev = shifted
            lam = updated
        return lam, L

    def decode(self, received: RsCodeword) -> RsDecodeOutcome:
        gf = self.field
        n = self.n
        if received.symbols.shape[0] != n:
            raise ParameterRangeError(
                f"received word length must be {n}, got {received.symbols.shape[0]}",
                code="LENGTH_MISMATCH",
            )
        failure = RsDecodeOutcome(None, False)
        erased = [int(p) for p in np.flatnonzero(received.erasure_mask)]
        rho = len(erased)
        if rho > self.nsym:
            return failure

        word = [int(v) for v in received.symbols]
        for p in erased:
            word[p] = 0
        if any(not 0 <= v < gf.order for v in word):
            raise ParameterRangeError(f"received symbols must lie in GF({gf.order})")

        synd = self.syndromes(word)
        if not any(synd):
            return RsDecodeOutcome(np.asarray(word[: self.k], dtype=np.int64), True, 0, 0)

        gamma = [1]
        for p in erased:
            gamma = gf.poly_mul(gamma, [1, gf.alpha_power(n - 1 - p)])

        lam, L = self._berlekamp_massey(synd, gamma, rho)
        while len(lam) > 1 and lam[-1] == 0:
            lam.pop()
        nu = len(lam) - 1
        if nu != L or 2 * L - rho > self.nsym:
            return failure

        period = gf.order - 1
        positions = [p for p in range(n) if gf.poly_eval_low(lam, gf.alpha_power(-(n - 1 - p))) == 0]
        if len(positions) != nu:
            return failure

        omega = gf.poly_mul(synd, lam)[: self.nsym]
        lam_prime = [lam[j] if j % 2 == 1 else 0 for j in range(1, len(lam))]
        errors = 0
        erased_set = set(erased)
        for p in positions:
            degree = n - 1 - p
            x_inv = gf.alpha_power(-degree)
            denom = gf.poly_eval_low(lam_prime, x_inv)
            if denom == 0:
                return failure
            magnitude = gf.div(gf.poly_eval_low(omega, x_inv), denom)
            if self.fcr != 1:
                magnitude = gf.mul(magnitude, gf.exp[(degree * (1 - self.fcr)) % period])
            word[p] ^= magnitude
            if p not in erased_set and magnitude:
                errors += 1

        if any(self.syndromes(word)):
            return failure
        return RsDecodeOutcome(np.asarray(word[: self.k], dtype=np.int64), True, nu, errors)


@lru_cache(maxsize=None)
def get_codec(rs_n: int = 31, rs_k: int = 15, m: Optional[int] = None) -> ReedSolomonCodec:
    """Shared codec instance; tables are built once per (n, k, m)"""
    degree = m if m is not None else (rs_n + 1).bit_length() - 1
    logger.debug(f"Building RS({rs_n},{rs_k}) codec over GF(2^{degree})")
    return ReedSolomonCodec(GaloisField(degree), n=rs_n, k=rs_k)


def rs_encode(message: Sequence[int], codec: Optional[ReedSolomonCodec] = None) -> RsCodeword:
    return (codec or get_codec()).encode(message)


def rs_decode(received: RsCodeword, codec: Optional[ReedSolomonCodec] = None) -> RsDecodeOutcome:
    return (codec or get_codec()).decode(received)
