"""Additive (exponent-encoded) ElGamal over a prime-order elliptic curve.

Messages live in the exponent: E(m) = (g^r, g^m h^r), so multiplying
ciphertexts adds plaintexts.  Decryption recovers the point g^m, never m
itself; the only plaintext question the system ever asks is whether m == 0,
answered by an identity test.  The secret key is split additively in two
shares so that decryption requires both parties in sequence.

Curve arithmetic uses Jacobian coordinates over gmpy2 integers.  Fixed bases
(the generator, long-lived public keys) can be given precomputed window
tables; everything else goes through a wNAF ladder.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import gmpy2
from gmpy2 import mpz

__all__ = [
    "CurveSpec",
    "GroupParams",
    "KeyMaterial",
    "Ciphertext",
    "PartialCiphertext",
    "CURVES",
    "DEFAULT_CURVE",
    "PAPER_PARITY_CURVE",
    "get_params",
    "keygen",
    "encrypt",
    "add",
    "scalar_mul",
    "partial_decrypt",
    "final_decrypt",
    "full_decrypt",
    "is_zero",
    "point_to_bytes",
    "point_from_bytes",
    "save_key_file",
    "load_key_file",
    "ROLE_PUBLIC",
    "ROLE_SERVICE",
    "ROLE_SENSOR",
]

# Affine point or None for the group identity.
Point = Optional[Tuple[mpz, mpz]]


@dataclass(frozen=True)
class CurveSpec:
    """Short-Weierstrass curve y^2 = x^3 + ax + b over F_p with prime order q."""

    name: str
    p: int
    a: int
    b: int
    gx: int
    gy: int
    q: int  # group order (prime, cofactor 1)

    @property
    def coord_size(self) -> int:
        return (self.p.bit_length() + 7) // 8


CURVES: Dict[str, CurveSpec] = {
    "secp256k1": CurveSpec(
        name="secp256k1",
        p=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F,
        a=0,
        b=7,
        gx=0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
        gy=0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
        q=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141,
    ),
    "secp112r1": CurveSpec(
        name="secp112r1",
        p=0xDB7C2ABF62E35E668076BEAD208B,
        a=0xDB7C2ABF62E35E668076BEAD2088,
        b=0x659EF8BA043916EEDE8911702B22,
        gx=0x09487239995A5EE76B55F9C2F098,
        gy=0xA89CE5AF8724C0A23E0E0FF77500,
        q=0xDB7C2ABF62E35E7628DFAC6561C5,
    ),
}

DEFAULT_CURVE = "secp256k1"
# Historical small curve; kept only for paper-parity benchmarking and fast
# bulk correctness sweeps, not for real deployments.
PAPER_PARITY_CURVE = "secp112r1"

_COMB_WINDOW = 8


class GroupParams:
    """A curve plus its point arithmetic and fixed-base precomputation."""

    def __init__(self, spec: CurveSpec) -> None:
        self.spec = spec
        self.p = mpz(spec.p)
        self.a = mpz(spec.a)
        self.b = mpz(spec.b)
        self.q = spec.q
        self.g: Point = (mpz(spec.gx), mpz(spec.gy))
        self._combs: Dict[Tuple[int, int], list] = {}
        self.precompute_base(self.g)

    # -- Jacobian core ----------------------------------------------------
    # (X, Y, Z) with x = X/Z^2, y = Y/Z^3; Z == 0 is the identity.

    def _jdbl(self, P):
        X1, Y1, Z1 = P
        p = self.p
        if Z1 == 0 or Y1 == 0:
            return (mpz(1), mpz(1), mpz(0))
        A = X1 * X1 % p
        B = Y1 * Y1 % p
        C = B * B % p
        t = X1 + B
        D = 2 * (t * t % p - A - C) % p
        if self.a == 0:
            E = 3 * A % p
        else:
            Z2 = Z1 * Z1 % p
            E = (3 * A + self.a * (Z2 * Z2 % p)) % p
        F = E * E % p
        X3 = (F - 2 * D) % p
        Y3 = (E * (D - X3) - 8 * C) % p
        Z3 = 2 * Y1 * Z1 % p
        return (X3, Y3, Z3)

    def _jadd(self, P, Q):
        if P[2] == 0:
            return Q
        if Q[2] == 0:
            return P
        p = self.p
        X1, Y1, Z1 = P
        X2, Y2, Z2 = Q
        Z1Z1 = Z1 * Z1 % p
        Z2Z2 = Z2 * Z2 % p
        U1 = X1 * Z2Z2 % p
        U2 = X2 * Z1Z1 % p
        S1 = Y1 * Z2 % p * Z2Z2 % p
        S2 = Y2 * Z1 % p * Z1Z1 % p
        H = (U2 - U1) % p
        r = (S2 - S1) % p
        if H == 0:
            if r == 0:
                return self._jdbl(P)
            return (mpz(1), mpz(1), mpz(0))
        HH = H * H % p
        HHH = H * HH % p
        V = U1 * HH % p
        X3 = (r * r % p - HHH - 2 * V) % p
        Y3 = (r * (V - X3) % p - S1 * HHH) % p
        Z3 = Z1 * Z2 % p * H % p
        return (X3, Y3, Z3)

    def _to_jacobian(self, P: Point):
        if P is None:
            return (mpz(1), mpz(1), mpz(0))
        return (P[0], P[1], mpz(1))

    def _to_affine(self, J) -> Point:
        X, Y, Z = J
        if Z == 0:
            return None
        p = self.p
        zi = gmpy2.invert(Z, p)
        zi2 = zi * zi % p
        return (X * zi2 % p, Y * zi2 % p * zi % p)

    # -- public point API --------------------------------------------------

    def point_add(self, P: Point, Q: Point) -> Point:
        return self._to_affine(self._jadd(self._to_jacobian(P), self._to_jacobian(Q)))

    def point_neg(self, P: Point) -> Point:
        if P is None:
            return None
        return (P[0], (-P[1]) % self.p)

    def is_on_curve(self, P: Point) -> bool:
        if P is None:
            return True
        x, y = P
        return (y * y - (x * x % self.p * x + self.a * x + self.b)) % self.p == 0

    def precompute_base(self, P: Point) -> None:
        """Build a fixed-base window table; makes point_mul(P, .) ~10x faster.
        Call once for long-lived bases (generator, public keys)."""
        if P is None:
            return
        key = (int(P[0]), int(P[1]))
        if key in self._combs:
            return
        w = _COMB_WINDOW
        n_rows = (self.q.bit_length() + w - 1) // w
        rows = []
        base = self._to_jacobian(P)
        for _ in range(n_rows):
            row = [None] * (1 << w)
            acc = (mpz(1), mpz(1), mpz(0))
            for d in range(1, 1 << w):
                acc = self._jadd(acc, base)
                row[d] = acc
            rows.append(row)
            for _ in range(w):
                base = self._jdbl(base)
        self._combs[key] = rows

    def _mul_fixed(self, rows, k: int):
        w = _COMB_WINDOW
        acc = (mpz(1), mpz(1), mpz(0))
        i = 0
        while k:
            d = k & ((1 << w) - 1)
            if d:
                acc = self._jadd(acc, rows[i][d])
            k >>= w
            i += 1
        return acc

    def point_mul(self, P: Point, k: int) -> Point:
        """k * P for any integer k (reduced mod the group order)."""
        k %= self.q
        if k == 0 or P is None:
            return None
        key = (int(P[0]), int(P[1]))
        rows = self._combs.get(key)
        if rows is not None:
            return self._to_affine(self._mul_fixed(rows, k))
        return self._to_affine(self._mul_wnaf(P, k))

    def _mul_wnaf(self, P: Point, k: int, w: int = 4):
        # Odd multiples P, 3P, ..., (2^w - 1)P.
        PJ = self._to_jacobian(P)
        dbl = self._jdbl(PJ)
        table = [PJ]
        for _ in range((1 << (w - 1)) - 1):
            table.append(self._jadd(table[-1], dbl))
        # wNAF digit expansion.
        digits = []
        while k:
            if k & 1:
                d = k & ((1 << (w + 1)) - 1)
                if d >= (1 << w):
                    d -= 1 << (w + 1)
                digits.append(d)
                k -= d
            else:
                digits.append(0)
            k >>= 1
        acc = (mpz(1), mpz(1), mpz(0))
        for d in reversed(digits):
            acc = self._jdbl(acc)
            if d > 0:
                acc = self._jadd(acc, table[d >> 1])
            elif d < 0:
                X, Y, Z = table[(-d) >> 1]
                acc = self._jadd(acc, (X, (-Y) % self.p, Z))
        return acc

    def mul_g(self, k: int) -> Point:
        return self.point_mul(self.g, k)


_PARAMS_CACHE: Dict[str, GroupParams] = {}


def get_params(curve: str = DEFAULT_CURVE) -> GroupParams:
    if curve not in CURVES:
        raise ValueError(f"unknown curve {curve!r}; available: {sorted(CURVES)}")
    if curve not in _PARAMS_CACHE:
        _PARAMS_CACHE[curve] = GroupParams(CURVES[curve])
    return _PARAMS_CACHE[curve]


# -- scheme types ----------------------------------------------------------


@dataclass(frozen=True)
class Ciphertext:
    c1: Point
    c2: Point


@dataclass(frozen=True)
class PartialCiphertext:
    c1: Point
    c2: Point


@dataclass(frozen=True)
class KeyMaterial:
    """Public key plus the additively split secret: a = a1 + a2 (mod q)."""

    h: Point
    a: int
    a1: int
    a2: int


def keygen(params: GroupParams, rng) -> KeyMaterial:
    q = params.q
    a = 1 + rng.randbelow(q - 1)
    a1 = rng.randbelow(q)
    a2 = (a - a1) % q
    h = params.mul_g(a)
    return KeyMaterial(h=h, a=a, a1=a1, a2=a2)


def encrypt(m: int, h: Point, params: GroupParams, rng) -> Ciphertext:
    """E(m) = (g^r, g^m h^r) with fresh r; m is reduced mod the group order."""
    q = params.q
    r = 1 + rng.randbelow(q - 1)
    c1 = params.mul_g(r)
    c2 = params.point_add(params.mul_g(m), params.point_mul(h, r))
    return Ciphertext(c1=c1, c2=c2)


def add(ct1: Ciphertext, ct2: Ciphertext, params: GroupParams) -> Ciphertext:
    """Homomorphic addition of plaintexts (component-wise group operation)."""
    return Ciphertext(c1=params.point_add(ct1.c1, ct2.c1),
                      c2=params.point_add(ct1.c2, ct2.c2))


def scalar_mul(ct: Ciphertext, r: int, params: GroupParams) -> Ciphertext:
    """Multiply the plaintext by r: (c1^r, c2^r).  r = 0 is rejected since it
    would map every plaintext to zero and break the zero test."""
    if not 1 <= r <= params.q - 1:
        raise ValueError("scalar_mul: r must be in [1, q-1]")
    return Ciphertext(c1=params.point_mul(ct.c1, r), c2=params.point_mul(ct.c2, r))


def partial_decrypt(ct: Ciphertext, a1: int, params: GroupParams) -> PartialCiphertext:
    """First decryption step: fold one key share into c2, keeping c1 so the
    other party can apply its share.  The result (c1, c2 * c1^-a1) is itself
    ciphertext-shaped: it is exactly an encryption of m under the public key
    of the remaining share."""
    c2p = params.point_add(ct.c2, params.point_mul(ct.c1, (-a1) % params.q))
    return PartialCiphertext(c1=ct.c1, c2=c2p)


def final_decrypt(pct: PartialCiphertext, a2: int, params: GroupParams) -> Point:
    """Second step: c2' * c1^-a2 = g^m.  Returns the message point, not m."""
    return params.point_add(pct.c2, params.point_mul(pct.c1, (-a2) % params.q))


def full_decrypt(ct: Ciphertext, a: int, params: GroupParams) -> Point:
    """Single-key decryption (tests and keygen sanity checks only)."""
    return params.point_add(params.point_mul(ct.c1, (-a) % params.q), ct.c2)


def is_zero(point: Point) -> bool:
    """m == 0 iff the decrypted point is the group identity."""
    return point is None


# -- serialization ---------------------------------------------------------


def point_to_bytes(P: Point, params: GroupParams) -> bytes:
    """Compressed encoding, fixed width: 02/03 prefix plus x.  The identity
    is a zero byte with zero padding to the same width."""
    size = params.spec.coord_size
    if P is None:
        return b"\x00" * (size + 1)
    x, y = P
    prefix = b"\x03" if y & 1 else b"\x02"
    return prefix + int(x).to_bytes(size, "big")


def point_from_bytes(data: bytes, params: GroupParams) -> Point:
    size = params.spec.coord_size
    if len(data) != size + 1:
        raise ValueError(f"point encoding must be {size + 1} bytes, got {len(data)}")
    if data[0] == 0x00:
        if any(data[1:]):
            raise ValueError("malformed identity encoding")
        return None
    if data[0] not in (0x02, 0x03):
        raise ValueError(f"bad point prefix {data[0]:#x}")
    p = params.p
    x = mpz(int.from_bytes(data[1:], "big"))
    if x >= p:
        raise ValueError("point x coordinate out of range")
    rhs = (x * x % p * x + params.a * x + params.b) % p
    y = gmpy2.powmod(rhs, (p + 1) // 4, p)  # p = 3 (mod 4) for all curves here
    if y * y % p != rhs:
        raise ValueError("x is not on the curve")
    if (y & 1) != (data[0] & 1):
        y = (-y) % p
    return (x, y)


def ciphertext_to_bytes(ct: Ciphertext, params: GroupParams) -> bytes:
    return point_to_bytes(ct.c1, params) + point_to_bytes(ct.c2, params)


def ciphertext_from_bytes(data: bytes, params: GroupParams) -> Ciphertext:
    n = params.spec.coord_size + 1
    if len(data) != 2 * n:
        raise ValueError(f"ciphertext encoding must be {2 * n} bytes, got {len(data)}")
    return Ciphertext(c1=point_from_bytes(data[:n], params),
                      c2=point_from_bytes(data[n:], params))


# -- key files -------------------------------------------------------------
#
# Layout: magic "BMK1", role byte, curve name (u8 length + utf-8), public key
# as a compressed point, then for share files the scalar as a fixed-width
# big-endian integer (same width as a coordinate).

_KEY_MAGIC = b"BMK1"
ROLE_PUBLIC = 0x00
ROLE_SERVICE = 0x01  # holds a1
ROLE_SENSOR = 0x02   # holds a2


def save_key_file(path: str, role: int, params: GroupParams, h: Point,
                  share: Optional[int] = None) -> None:
    if role not in (ROLE_PUBLIC, ROLE_SERVICE, ROLE_SENSOR):
        raise ValueError(f"bad key role {role}")
    if (share is None) != (role == ROLE_PUBLIC):
        raise ValueError("share required for share roles, forbidden for public")
    name = params.spec.name.encode()
    blob = _KEY_MAGIC + bytes([role, len(name)]) + name + point_to_bytes(h, params)
    if share is not None:
        blob += share.to_bytes(params.spec.coord_size, "big")
    with open(path, "wb") as f:
        f.write(blob)


def load_key_file(path: str) -> Tuple[int, GroupParams, Point, Optional[int]]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != _KEY_MAGIC:
        raise ValueError(f"{path}: not a key file")
    role = blob[4]
    name_len = blob[5]
    curve = blob[6:6 + name_len].decode()
    params = get_params(curve)
    off = 6 + name_len
    n = params.spec.coord_size + 1
    h = point_from_bytes(blob[off:off + n], params)
    off += n
    share = None
    if role != ROLE_PUBLIC:
        share = int.from_bytes(blob[off:off + params.spec.coord_size], "big")
    return role, params, h, share
