"""Sensor-device client: capture sources, the network client for enrollment
and verification, and feature-file parsing.

The sensor holds the second key share.  Only the identity claim and
ciphertexts ever leave the device; the verdict is computed locally from the
partially decrypted compare set.
"""

from __future__ import annotations

import socket
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import ec_elgamal as eg
from . import wire
from .protocol import (SystemConfig, build_tables, enroll, sensor_decide,
                       sensor_lookup_and_sum)
from .rng import SecureRng

__all__ = [
    "SensorError", "UnknownUserError", "LockedOutError",
    "SensorSession", "SyntheticCapture", "read_feature_file",
    "write_feature_file",
]


class SensorError(RuntimeError):
    pass


class UnknownUserError(SensorError):
    pass


class LockedOutError(SensorError):
    pass


class SyntheticCapture:
    """Simulated capture source: a per-user mean vector plus fresh noise,
    matching the Gaussian feature model."""

    def __init__(self, config: SystemConfig, seed: int) -> None:
        self._rho = np.asarray(config.rho)
        self._rng = np.random.default_rng(seed)
        self._means = {}

    def mean_for(self, user_id: str) -> np.ndarray:
        if user_id not in self._means:
            self._means[user_id] = self._rng.normal(0.0, np.sqrt(self._rho))
        return self._means[user_id]

    def capture(self, user_id: str) -> np.ndarray:
        noise = self._rng.normal(0.0, np.sqrt(1.0 - self._rho))
        return self.mean_for(user_id) + noise


def read_feature_file(path: str) -> List[np.ndarray]:
    """One comma-separated vector per line; the header line carries k."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or not lines[0].startswith("k="):
        raise SensorError(f"{path}: missing 'k=<n>' header line")
    k = int(lines[0][2:])
    vectors = []
    for i, ln in enumerate(lines[1:], start=2):
        vals = np.array([float(v) for v in ln.split(",")])
        if len(vals) != k:
            raise SensorError(f"{path}:{i}: expected {k} values, got {len(vals)}")
        vectors.append(vals)
    return vectors


def write_feature_file(path: str, vectors: Sequence[np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"k={len(vectors[0])}\n")
        for v in vectors:
            f.write(",".join(f"{x:.17g}" for x in v) + "\n")


@dataclass
class SensorSession:
    """One connection to the verification service, acting as the sensor."""

    config: SystemConfig
    params: eg.GroupParams
    public_key: object
    share_a2: int
    address: Tuple[str, int]
    rng: object = None

    def __post_init__(self) -> None:
        if self.rng is None:
            self.rng = SecureRng()
        self.params.precompute_base(self.public_key)
        self._tables = None

    @classmethod
    def from_key_file(cls, config: SystemConfig, keyshare_path: str,
                      address: Tuple[str, int], rng=None) -> "SensorSession":
        role, params, h, share = eg.load_key_file(keyshare_path)
        if role != eg.ROLE_SENSOR:
            raise SensorError(f"{keyshare_path}: not a sensor key share")
        if params.spec.name != config.curve:
            raise SensorError(f"key curve {params.spec.name} != config curve {config.curve}")
        return cls(config=config, params=params, public_key=h, share_a2=share,
                   address=address, rng=rng)

    def _tables_cached(self):
        if self._tables is None:
            self._tables = build_tables(self.config)
        return self._tables

    def _roundtrip(self, sock_file_r, sock, msg_type: int, payload: bytes) -> wire.Frame:
        sock.sendall(wire.pack_frame(msg_type, payload))
        reply = wire.read_frame(sock_file_r)
        if reply.msg_type == wire.MSG_UNKNOWN_USER:
            user_id, _ = wire.decode_user_id(reply.payload)
            raise UnknownUserError(user_id)
        if reply.msg_type == wire.MSG_LOCKED:
            user_id, _ = wire.decode_user_id(reply.payload)
            raise LockedOutError(user_id)
        if reply.msg_type == wire.MSG_MALFORMED:
            raise SensorError(f"service rejected request: {reply.payload.decode(errors='replace')}")
        return reply

    def enroll_user(self, user_id: str, features: Sequence[float]) -> None:
        tpl = enroll(features, user_id, self.config, self._tables_cached(),
                     self.public_key, self.params, self.rng)
        payload = wire.template_to_bytes(tpl, self.params)
        with socket.create_connection(self.address) as sock:
            rfile = sock.makefile("rb")
            reply = self._roundtrip(rfile, sock, wire.MSG_ENROLL_REQ, payload)
            if reply.msg_type != wire.MSG_ENROLL_ACK:
                raise SensorError(f"unexpected reply type {reply.msg_type:#x}")

    def verify_user(self, user_id: str, probe: Sequence[float]) -> bool:
        with socket.create_connection(self.address) as sock:
            rfile = sock.makefile("rb")
            reply = self._roundtrip(rfile, sock, wire.MSG_VERIFY_CLAIM,
                                    wire.encode_user_id(user_id))
            if reply.msg_type != wire.MSG_TEMPLATE:
                raise SensorError(f"unexpected reply type {reply.msg_type:#x}")
            tpl = wire.template_from_bytes(reply.payload, self.params)
            score_ct = sensor_lookup_and_sum(probe, tpl, self.config,
                                             self.public_key, self.params, self.rng)
            reply = self._roundtrip(rfile, sock, wire.MSG_SCORE,
                                    wire.score_to_bytes(score_ct, self.params))
            if reply.msg_type != wire.MSG_RESULTSET:
                raise SensorError(f"unexpected reply type {reply.msg_type:#x}")
            cset = wire.compare_set_from_bytes(reply.payload, self.params)
            return sensor_decide(cset, self.share_a2, self.params)
