"""Self-contained SHA-384 (FIPS 180-4) with a streaming API.

The compression function keeps an invocation counter on each hash object so
callers can observe exactly how many 1024-bit blocks a message costs,
including the blocks added by padding.  Padding doubles the block count the
moment the message crosses 112 bytes, which is visible as a step in
per-length timing curves; :func:`padding_zero_count` exposes the underlying
arithmetic for inspection and testing.
"""

from __future__ import annotations

import struct

DIGEST_SIZE = 48
BLOCK_SIZE = 128

_MASK64 = 0xFFFFFFFFFFFFFFFF

# SHA-384 initial hash value (FIPS 180-4, section 5.3.4).
_IV = (
    0xCBBB9D5DC1059ED8, 0x629A292A367CD507, 0x9159015A3070DD17, 0x152FECD8F70E5939,
    0x67332667FFC00B31, 0x8EB44A8768581511, 0xDB0C2E0D64F98FA7, 0x47B5481DBEFA4FA4,
)

# SHA-512 round constants (first 64 bits of the fractional parts of the cube
# roots of the first eighty primes).
_K = (
    0x428A2F98D728AE22, 0x7137449123EF65CD, 0xB5C0FBCFEC4D3B2F, 0xE9B5DBA58189DBBC,
    0x3956C25BF348B538, 0x59F111F1B605D019, 0x923F82A4AF194F9B, 0xAB1C5ED5DA6D8118,
    0xD807AA98A3030242, 0x12835B0145706FBE, 0x243185BE4EE4B28C, 0x550C7DC3D5FFB4E2,
    0x72BE5D74F27B896F, 0x80DEB1FE3B1696B1, 0x9BDC06A725C71235, 0xC19BF174CF692694,
    0xE49B69C19EF14AD2, 0xEFBE4786384F25E3, 0x0FC19DC68B8CD5B5, 0x240CA1CC77AC9C65,
    0x2DE92C6F592B0275, 0x4A7484AA6EA6E483, 0x5CB0A9DCBD41FBD4, 0x76F988DA831153B5,
    0x983E5152EE66DFAB, 0xA831C66D2DB43210, 0xB00327C898FB213F, 0xBF597FC7BEEF0EE4,
    0xC6E00BF33DA88FC2, 0xD5A79147930AA725, 0x06CA6351E003826F, 0x142929670A0E6E70,
    0x27B70A8546D22FFC, 0x2E1B21385C26C926, 0x4D2C6DFC5AC42AED, 0x53380D139D95B3DF,
    0x650A73548BAF63DE, 0x766A0ABB3C77B2A8, 0x81C2C92E47EDAEE6, 0x92722C851482353B,
    0xA2BFE8A14CF10364, 0xA81A664BBC423001, 0xC24B8B70D0F89791, 0xC76C51A30654BE30,
    0xD192E819D6EF5218, 0xD69906245565A910, 0xF40E35855771202A, 0x106AA07032BBD1B8,
    0x19A4C116B8D2D0C8, 0x1E376C085141AB53, 0x2748774CDF8EEB99, 0x34B0BCB5E19B48A8,
    0x391C0CB3C5C95A63, 0x4ED8AA4AE3418ACB, 0x5B9CCA4F7763E373, 0x682E6FF3D6B2B8A3,
    0x748F82EE5DEFB2FC, 0x78A5636F43172F60, 0x84C87814A1F0AB72, 0x8CC702081A6439EC,
    0x90BEFFFA23631E28, 0xA4506CEBDE82BDE9, 0xBEF9A3F7B2C67915, 0xC67178F2E372532B,
    0xCA273ECEEA26619C, 0xD186B8C721C0C207, 0xEADA7DD6CDE0EB1E, 0xF57D4F7FEE6ED178,
    0x06F067AA72176FBA, 0x0A637DC5A2C898A6, 0x113F9804BEF90DAE, 0x1B710B35131C471B,
    0x28DB77F523047D84, 0x32CAAB7B40C72493, 0x3C9EBE0A15C9BEBC, 0x431D67C49C100D4C,
    0x4CC5D4BECB3E42B6, 0x597F299CFC657E2A, 0x5FCB6FAB3AD6FAEC, 0x6C44198C4A475817,
)

_UNPACK_BLOCK = struct.Struct(">16Q").unpack


def padding_zero_count(bit_length: int) -> int:
    """Number of zero bits appended when padding a message of ``bit_length`` bits.

    Returns the smallest k >= 0 with (bit_length + 1 + k) mod 1024 == 896, so
    that the padded message (message, a single 1 bit, k zeros, and the
    128-bit length field) is a whole number of 1024-bit blocks.
    """
    if bit_length < 0:
        raise ValueError("bit length must be non-negative")
    return (896 - (bit_length + 1)) % 1024


class Sha384:
    """Streaming SHA-384 with an instrumented compression counter.

    ``compressions`` counts how many times the compression function has run
    for this object, including the one or two blocks processed while padding
    in :meth:`digest`.  Calling :meth:`digest` repeatedly does not recount;
    a subsequent :meth:`update` resumes the stream.
    """

    __slots__ = ("_h", "_buffer", "_length", "_final", "compressions")

    def __init__(self, data: bytes = b"") -> None:
        self._h = list(_IV)
        self._buffer = b""
        self._length = 0  # total message length in bytes
        self._final: bytes | None = None
        self.compressions = 0
        if data:
            self.update(data)

    def update(self, data: bytes) -> None:
        if not data:
            return
        self._final = None
        self._length += len(data)
        buf = self._buffer + data
        offset = 0
        end = len(buf) - BLOCK_SIZE
        while offset <= end:
            self._compress(buf[offset:offset + BLOCK_SIZE])
            offset += BLOCK_SIZE
        self._buffer = buf[offset:]

    def digest(self) -> bytes:
        if self._final is None:
            self._final = self._finalize()
        return self._final

    def hexdigest(self) -> str:
        return self.digest().hex()

    def copy(self) -> "Sha384":
        clone = Sha384()
        clone._h = list(self._h)
        clone._buffer = self._buffer
        clone._length = self._length
        clone._final = self._final
        clone.compressions = self.compressions
        return clone

    def _finalize(self) -> bytes:
        bit_length = self._length * 8
        zeros = padding_zero_count(bit_length)
        # 0x80 carries the mandatory 1 bit; zeros includes its 7 trailing 0s.
        padded = self._buffer + b"\x80" + b"\x00" * ((zeros - 7) // 8)
        padded += bit_length.to_bytes(16, "big")
        saved = list(self._h)
        for offset in range(0, len(padded), BLOCK_SIZE):
            self._compress(padded[offset:offset + BLOCK_SIZE])
        out = b"".join(word.to_bytes(8, "big") for word in self._h[:6])
        # padding must not disturb the running state; updates may continue
        self._h = saved
        return out

    def _compress(self, block: bytes) -> None:
        self.compressions += 1
        w = list(_UNPACK_BLOCK(block))
        for t in range(16, 80):
            w15 = w[t - 15]
            w2 = w[t - 2]
            s0 = ((w15 >> 1) | (w15 << 63)) ^ ((w15 >> 8) | (w15 << 56)) ^ (w15 >> 7)
            s1 = ((w2 >> 19) | (w2 << 45)) ^ ((w2 >> 61) | (w2 << 3)) ^ (w2 >> 6)
            w.append((w[t - 16] + s0 + w[t - 7] + s1) & _MASK64)

        a, b, c, d, e, f, g, h = self._h
        for t in range(80):
            s1 = ((e >> 14) | (e << 50)) ^ ((e >> 18) | (e << 46)) ^ ((e >> 41) | (e << 23))
            ch = (e & f) ^ (~e & g)
            t1 = (h + (s1 & _MASK64) + ch + _K[t] + w[t]) & _MASK64
            s0 = ((a >> 28) | (a << 36)) ^ ((a >> 34) | (a << 30)) ^ ((a >> 39) | (a << 25))
            maj = (a & b) ^ (a & c) ^ (b & c)
            t2 = ((s0 & _MASK64) + maj) & _MASK64
            h = g
            g = f
            f = e
            e = (d + t1) & _MASK64
            d = c
            c = b
            b = a
            a = (t1 + t2) & _MASK64

        hh = self._h
        hh[0] = (hh[0] + a) & _MASK64
        hh[1] = (hh[1] + b) & _MASK64
        hh[2] = (hh[2] + c) & _MASK64
        hh[3] = (hh[3] + d) & _MASK64
        hh[4] = (hh[4] + e) & _MASK64
        hh[5] = (hh[5] + f) & _MASK64
        hh[6] = (hh[6] + g) & _MASK64
        hh[7] = (hh[7] + h) & _MASK64


def sha384(data: bytes) -> bytes:
    """One-shot SHA-384 digest of ``data`` (48 bytes)."""
    return Sha384(data).digest()


def sha384_hex(data: bytes) -> str:
    return Sha384(data).hexdigest()
