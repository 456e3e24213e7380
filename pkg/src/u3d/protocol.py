"""Client for external feature extractors and label oracles.

Wire protocol (little-endian), spoken over a child process's standard
streams or a TCP socket:

    handshake   server sends 8 bytes: magic "U3DX", version (1 byte),
                reserved 0 (1 byte), u16 layer count M
    request     u32 byte length, then one U3DT tensor (the clip window)
    response    M messages, each u32 byte length + one U3DT tensor

Any deviation — wrong magic, short read, oversized length, malformed
tensor, process exit — raises ProtocolError.  A per-message timeout
(default 30 s) guarantees no call hangs.

Oracles reuse the same protocol with M = 1 and a single-element response
tensor carrying the predicted label.
"""

from __future__ import annotations

import os
import select
import shlex
import socket
import struct
import subprocess
import threading
import time

import numpy as np

from .errors import ProtocolError, TensorFormatError, ValidationError
from .features import T_IN, FeatureExtractor
from .tensorio import VideoClip, apply_perturbation, tensor_bytes, tensor_from_bytes

PROTO_MAGIC = b"U3DX"
PROTO_VERSION = 1
DEFAULT_TIMEOUT = 30.0
# minimal legal message: 8-byte header + one u32 extent + one f32 value
MIN_MESSAGE = 16
MAX_MESSAGE = 2**31


class ProcessEndpoint:
    """Child process endpoint; requests on stdin, responses on stdout."""

    def __init__(self, argv):
        self.argv = list(argv)
        self.proc = subprocess.Popen(
            self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )

    def read_exact(self, n: int, deadline: float) -> bytes:
        fd = self.proc.stdout.fileno()
        buf = bytearray()
        while len(buf) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError(f"timed out reading from {self.argv[0]}")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise ProtocolError(f"timed out reading from {self.argv[0]}")
            chunk = os.read(fd, n - len(buf))
            if not chunk:
                raise ProtocolError(
                    f"endpoint {self.argv[0]} closed mid-message "
                    f"(exit code {self.proc.poll()})"
                )
            buf.extend(chunk)
        return bytes(buf)

    def write(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"endpoint {self.argv[0]} pipe broken: {exc}") from exc

    def close(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class SocketEndpoint:
    """TCP endpoint for an already-running extractor service."""

    def __init__(self, host: str, port: int):
        self.address = (host, int(port))
        self.sock = socket.create_connection(self.address)

    def read_exact(self, n: int, deadline: float) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError(f"timed out reading from {self.address}")
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(n - len(buf))
            except socket.timeout as exc:
                raise ProtocolError(f"timed out reading from {self.address}") from exc
            except OSError as exc:
                raise ProtocolError(f"socket error from {self.address}: {exc}") from exc
            if not chunk:
                raise ProtocolError(f"endpoint {self.address} closed mid-message")
            buf.extend(chunk)
        return bytes(buf)

    def write(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise ProtocolError(f"socket error to {self.address}: {exc}") from exc

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def connect_endpoint(target: str):
    """Open an endpoint from a target string.

    "tcp:HOST:PORT" connects a socket; anything else is treated as a
    command line to spawn.
    """
    if target.startswith("tcp:"):
        _, host, port = target.split(":", 2)
        return SocketEndpoint(host, int(port))
    argv = shlex.split(target)
    if not argv:
        raise ValidationError("empty endpoint command")
    return ProcessEndpoint(argv)


class _ProtocolClient:
    """Handshake plus length-prefixed tensor exchange over one endpoint.

    One in-flight request per handle: calls are serialized by a lock.
    """

    def __init__(self, endpoint, timeout: float = DEFAULT_TIMEOUT):
        if isinstance(endpoint, str):
            endpoint = connect_endpoint(endpoint)
        self.endpoint = endpoint
        self.timeout = float(timeout)
        self._lock = threading.Lock()
        self.num_layers_remote = self._handshake()

    def _deadline(self) -> float:
        return time.monotonic() + self.timeout

    def _handshake(self) -> int:
        head = self.endpoint.read_exact(8, self._deadline())
        if head[:4] != PROTO_MAGIC:
            raise ProtocolError(f"bad handshake magic {head[:4]!r}")
        version, reserved, m = struct.unpack("<BBH", head[4:])
        if version != PROTO_VERSION:
            raise ProtocolError(f"unsupported protocol version {version}")
        if reserved != 0:
            raise ProtocolError(f"nonzero reserved handshake byte {reserved}")
        if m < 1:
            raise ProtocolError("handshake declared zero layers")
        return m

    def _read_message(self) -> np.ndarray:
        deadline = self._deadline()
        (length,) = struct.unpack("<I", self.endpoint.read_exact(4, deadline))
        if not MIN_MESSAGE <= length <= MAX_MESSAGE:
            raise ProtocolError(f"implausible message length {length}")
        payload = self.endpoint.read_exact(length, deadline)
        try:
            return tensor_from_bytes(payload)
        except TensorFormatError as exc:
            raise ProtocolError(f"malformed tensor in response: {exc}") from exc

    def round_trip(self, tensor: np.ndarray) -> list:
        """Send one tensor, read num_layers_remote tensors back."""
        payload = tensor_bytes(tensor)
        with self._lock:
            self.endpoint.write(struct.pack("<I", len(payload)) + payload)
            return [self._read_message() for _ in range(self.num_layers_remote)]

    def close(self) -> None:
        self.endpoint.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ExternalExtractor(FeatureExtractor, _ProtocolClient):
    """Feature extractor served by an external process or socket."""

    def __init__(self, endpoint, timeout: float = DEFAULT_TIMEOUT, input_frames: int = T_IN):
        self._input_frames = int(input_frames)
        _ProtocolClient.__init__(self, endpoint, timeout)

    @property
    def num_layers(self) -> int:
        return self.num_layers_remote

    @property
    def input_frames(self) -> int:
        return self._input_frames

    def extract(self, clip: VideoClip) -> list:
        self._check_window(clip)
        return self.round_trip(clip.data)


def external_extract(clip: VideoClip, endpoint: ExternalExtractor) -> list:
    """Fetch all feature layers for a clip from an external extractor."""
    return endpoint.extract(clip)


class ExternalOracle(_ProtocolClient):
    """Label oracle over the same wire protocol (M must be 1).

    The response tensor's single element is the predicted class label.
    Clean labels for the query set are fetched once and cached; those
    calibration queries are tracked separately from per-volume queries.
    """

    def __init__(self, endpoint, query_videos, timeout: float = DEFAULT_TIMEOUT):
        _ProtocolClient.__init__(self, endpoint, timeout)
        if self.num_layers_remote != 1:
            raise ProtocolError(
                f"oracle endpoint must declare 1 layer, got {self.num_layers_remote}"
            )
        if not query_videos:
            raise ValidationError("oracle needs at least one query video")
        self.query_videos = list(query_videos)
        self.video_queries = 0
        self.calibration_queries = 0
        self._clean_labels = None

    @property
    def query_set_size(self) -> int:
        return len(self.query_videos)

    def label(self, clip: VideoClip) -> int:
        (tensor,) = self.round_trip(clip.data)
        if tensor.size != 1:
            raise ProtocolError(f"label tensor must hold 1 element, got {tensor.size}")
        return int(round(float(tensor.ravel()[0])))

    def _clean(self) -> list:
        if self._clean_labels is None:
            self._clean_labels = [self.label(v) for v in self.query_videos]
            self.calibration_queries += len(self.query_videos)
        return self._clean_labels

    def success_rate(self, volume) -> float:
        clean = self._clean()
        flips = 0
        for v, c in zip(self.query_videos, clean):
            adv = apply_perturbation(v, volume, 0)
            if self.label(adv) != c:
                flips += 1
            self.video_queries += 1
        return flips / len(self.query_videos)
