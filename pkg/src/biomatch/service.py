"""The verification service: a TCP listener that stores encrypted templates
and runs the service side of the protocol.

The service holds only the first key share.  It never sees plaintext
features, scores or the comparison outcome: everything it touches is either
a ciphertext or the public identity claim.  A per-user attempt counter
implements brute-force lockout; since the service cannot observe outcomes,
it counts verification attempts, reset by re-enrollment.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from . import ec_elgamal as eg
from . import wire
from .protocol import SystemConfig, service_compare
from .rng import SecureRng
from .store import TemplateStore, UnknownUserError

__all__ = ["ServiceState", "Service", "serve"]

log = logging.getLogger("biomatch.service")


@dataclass
class ServiceState:
    config: SystemConfig
    params: eg.GroupParams
    public_key: object  # curve point
    share_a1: int
    store: TemplateStore
    lockout_n: int = 0  # 0 disables lockout
    rng: object = field(default_factory=SecureRng)
    _attempts: Dict[str, int] = field(default_factory=dict)
    _attempts_lock: threading.Lock = field(default_factory=threading.Lock)

    @classmethod
    def from_key_file(cls, config: SystemConfig, keyshare_path: str,
                      store: TemplateStore, lockout_n: int = 0) -> "ServiceState":
        role, params, h, share = eg.load_key_file(keyshare_path)
        if role != eg.ROLE_SERVICE:
            raise ValueError(f"{keyshare_path}: not a service key share")
        if params.spec.name != config.curve:
            raise ValueError(f"key curve {params.spec.name} != config curve {config.curve}")
        params.precompute_base(h)
        return cls(config=config, params=params, public_key=h, share_a1=share,
                   store=store, lockout_n=lockout_n)

    def note_attempt(self, user_id: str) -> bool:
        """Count a verification attempt; False once the user is locked out."""
        if self.lockout_n <= 0:
            return True
        with self._attempts_lock:
            n = self._attempts.get(user_id, 0) + 1
            self._attempts[user_id] = n
        return n <= self.lockout_n

    def reset_attempts(self, user_id: str) -> None:
        with self._attempts_lock:
            self._attempts.pop(user_id, None)


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        state: ServiceState = self.server.state  # type: ignore[attr-defined]
        try:
            while True:
                try:
                    frame = wire.read_frame(self.rfile)
                except wire.FrameError as exc:
                    if "connection closed" in str(exc):
                        return
                    log.warning("framing violation: %s", exc)
                    self._send(wire.MSG_MALFORMED, str(exc).encode())
                    return
                if not self._dispatch(state, frame):
                    return
        except (ConnectionError, BrokenPipeError):
            return

    def _send(self, msg_type: int, payload: bytes = b"") -> None:
        self.wfile.write(wire.pack_frame(msg_type, payload))
        self.wfile.flush()

    def _dispatch(self, state: ServiceState, frame: wire.Frame) -> bool:
        try:
            if frame.msg_type == wire.MSG_ENROLL_REQ:
                tpl = wire.template_from_bytes(frame.payload, state.params)
                if tpl.k != state.config.k or tpl.b != state.config.b:
                    raise wire.FrameError("template dimensions do not match config")
                # Stored byte-identical to the request payload.
                state.store.store(tpl.user_id, frame.payload)
                state.reset_attempts(tpl.user_id)
                log.info("enrolled user %s", tpl.user_id)
                self._send(wire.MSG_ENROLL_ACK)
                return True
            if frame.msg_type == wire.MSG_VERIFY_CLAIM:
                user_id, rest = wire.decode_user_id(frame.payload)
                if rest:
                    raise wire.FrameError("trailing bytes after user id")
                if not state.note_attempt(user_id):
                    log.info("user %s locked out", user_id)
                    self._send(wire.MSG_LOCKED, wire.encode_user_id(user_id))
                    return True
                try:
                    blob = state.store.fetch(user_id)
                except UnknownUserError:
                    log.info("unknown user %s", user_id)
                    self._send(wire.MSG_UNKNOWN_USER, wire.encode_user_id(user_id))
                    return True
                log.info("serving template for %s", user_id)
                self._send(wire.MSG_TEMPLATE, blob)
                return True
            if frame.msg_type == wire.MSG_SCORE:
                score_ct = wire.score_from_bytes(frame.payload, state.params)
                cset = service_compare(score_ct, state.config, state.public_key,
                                       state.share_a1, state.params, state.rng)
                log.info("compare set of %d elements returned", len(cset.elements))
                self._send(wire.MSG_RESULTSET,
                           wire.compare_set_to_bytes(cset, state.params))
                return True
            raise wire.FrameError(f"unexpected message type {frame.msg_type:#x}")
        except wire.FrameError as exc:
            log.warning("malformed request: %s", exc)
            self._send(wire.MSG_MALFORMED, str(exc).encode())
            return False


class _ThreadingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class Service:
    """Owns the listening socket; start()/shutdown() for embedding in tests,
    serve_forever() for the CLI."""

    def __init__(self, state: ServiceState, listen: Tuple[str, int]) -> None:
        self._server = _ThreadingServer(listen, _SessionHandler)
        self._server.state = state  # type: ignore[attr-defined]
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> Tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def serve(config: SystemConfig, keyshare_path: str, db_dir: str,
          listen: Tuple[str, int], lockout_n: int = 0) -> None:
    """Run the verification service until interrupted."""
    state = ServiceState.from_key_file(config, keyshare_path,
                                       TemplateStore(db_dir), lockout_n)
    svc = Service(state, listen)
    log.info("listening on %s:%d", *svc.address)
    try:
        svc.serve_forever()
    except KeyboardInterrupt:
        svc.shutdown()
