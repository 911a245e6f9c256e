import numpy as np
import pytest

from covert_models.errors import ParameterRangeError
from covert_models.gf_codec import (
    GaloisField,
    ReedSolomonCodec,
    RsCodeword,
    get_codec,
    rs_decode,
    rs_encode,
)


def _corrupt(codeword, rng, errors, erasures):
    symbols = codeword.symbols.copy()
    positions = rng.choice(symbols.size, size=errors + erasures, replace=False)
    for p in positions[:errors]:
        symbols[p] ^= int(rng.integers(1, 32))
    mask = np.zeros(symbols.size, dtype=bool)
    mask[positions[errors:]] = True
    symbols[mask] = rng.integers(0, 32, size=erasures)
    return RsCodeword(symbols, mask)


def test_field_tables():
    gf = GaloisField(5)
    assert gf.order == 32
    assert sorted(gf.exp[:31]) == list(range(1, 32))
    for a in range(1, 32):
        assert gf.mul(a, gf.inverse(a)) == 1


def test_multiplication_distributes_over_addition():
    gf = GaloisField(5)
    for a in range(32):
        for b in range(32):
            ab = gf.mul(a, b)
            for c in range(32):
                assert gf.mul(a, b ^ c) == ab ^ gf.mul(a, c), (a, b, c)


def test_field_rejects_non_primitive_polynomial():
    # x^4 + x^3 + x^2 + x + 1 is irreducible but has order 5
    with pytest.raises(ParameterRangeError):
        GaloisField(4, prim_poly=0x1F)


def test_field_element_arithmetic():
    gf = GaloisField(5)
    a, b = gf.element(7), gf.element(19)
    assert (a + b).value == 7 ^ 19
    assert a - b == a + b
    assert (a * b) / b == a
    assert a * a.inverse() == 1
    assert a ** 31 == 1
    with pytest.raises(ParameterRangeError):
        a + GaloisField(4).element(3)


def test_zero_message_gives_zero_codeword():
    codeword = rs_encode([0] * 15)
    assert not codeword.symbols.any()


def test_systematic_encoding():
    rng = np.random.default_rng(0)
    message = rng.integers(0, 32, size=15)
    codeword = rs_encode(message)
    assert codeword.symbols.size == 31
    np.testing.assert_array_equal(codeword.symbols[:15], message)
    assert get_codec().check(codeword.symbols)


def test_clean_roundtrip():
    message = np.arange(15) * 2
    outcome = rs_decode(rs_encode(message))
    assert outcome.success
    np.testing.assert_array_equal(outcome.message, message)
    assert outcome.errata_corrected == 0


@pytest.mark.parametrize("errors, erasures", [(0, 16), (8, 0), (4, 8), (7, 2), (1, 14)])
def test_corrects_within_budget(errors, erasures):
    rng = np.random.default_rng(errors * 100 + erasures)
    codec = get_codec()
    for _ in range(200):
        message = rng.integers(0, 32, size=15)
        received = _corrupt(codec.encode(message), rng, errors, erasures)
        outcome = codec.decode(received)
        assert outcome.success
        np.testing.assert_array_equal(outcome.message, message)
        assert outcome.errors_corrected == errors


def test_too_many_erasures_fail():
    rng = np.random.default_rng(17)
    codec = get_codec()
    for _ in range(100):
        received = _corrupt(codec.encode(rng.integers(0, 32, size=15)), rng, 0, 17)
        outcome = codec.decode(received)
        assert not outcome.success
        assert outcome.message is None


def test_failures_are_flagged_not_raised():
    # beyond the budget the decoder either flags failure or returns some codeword
    rng = np.random.default_rng(5)
    codec = get_codec()
    for _ in range(200):
        received = _corrupt(codec.encode(rng.integers(0, 32, size=15)), rng, 12, 0)
        outcome = codec.decode(received)
        if outcome.success:
            assert codec.check(codec.encode(outcome.message).symbols)


def test_other_code_parameters():
    codec = ReedSolomonCodec(GaloisField(4), n=15, k=7)
    rng = np.random.default_rng(2)
    message = rng.integers(0, 16, size=7)
    received = _corrupt(codec.encode(message), rng, 0, 0).with_erasures([0, 3, 9])
    received.symbols[[0, 3, 9]] = 0
    outcome = codec.decode(received)
    assert outcome.success
    np.testing.assert_array_equal(outcome.message, message)


def test_shape_checks():
    with pytest.raises(ParameterRangeError):
        rs_encode([1] * 14)
    with pytest.raises(ParameterRangeError):
        rs_decode(RsCodeword(np.zeros(30, dtype=int)))
    with pytest.raises(ParameterRangeError):
        ReedSolomonCodec(GaloisField(5), n=32, k=15)
