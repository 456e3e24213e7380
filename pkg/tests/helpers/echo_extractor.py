"""Stand-alone wire-protocol test double.

Speaks the extractor protocol over stdin/stdout using nothing but struct
and numpy, so tests exercise the real client against an independent
implementation.  The first argument selects a behaviour:

    echo            handshake M=1, answer each request with its own bytes
    layers N        handshake M=N, answer with N copies of the request
    oracle          handshake M=1, answer with a 1-element label tensor
    badmagic        corrupt handshake magic
    badversion      handshake version byte 9
    badreserved     handshake reserved byte 1
    zerolayers      handshake M=0
    short           handshake M=3 but send only 2 response tensors
    badlen          answer with an implausible length prefix
    sleep S         wait S seconds before answering each request
    exit            handshake, then quit before the first response
"""

import struct
import sys
import time

import numpy as np

MAGIC = b"U3DT"


def read_exact(n):
    buf = b""
    while len(buf) < n:
        chunk = sys.stdin.buffer.read(n - len(buf))
        if not chunk:
            sys.exit(0)
        buf += chunk
    return buf


def read_message():
    (length,) = struct.unpack("<I", read_exact(4))
    return read_exact(length)


def send(payload):
    sys.stdout.buffer.write(struct.pack("<I", len(payload)) + payload)
    sys.stdout.buffer.flush()


def parse_tensor(payload):
    magic, version, dtype, ndim, _ = struct.unpack("<4sBBBB", payload[:8])
    assert magic == MAGIC and version == 1 and dtype == 0
    dims = struct.unpack("<%dI" % ndim, payload[8 : 8 + 4 * ndim])
    data = np.frombuffer(payload[8 + 4 * ndim :], dtype="<f4")
    return data.reshape(dims)


def pack_tensor(arr):
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = struct.pack("<4sBBBB", MAGIC, 1, 0, arr.ndim, 0)
    dims = struct.pack("<%dI" % arr.ndim, *arr.shape)
    return head + dims + arr.tobytes()


def handshake(m, magic=b"U3DX", version=1, reserved=0):
    sys.stdout.buffer.write(magic + bytes([version, reserved]) + struct.pack("<H", m))
    sys.stdout.buffer.flush()


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "echo"
    if mode == "badmagic":
        handshake(1, magic=b"XXXX")
        read_message()
        return
    if mode == "badversion":
        handshake(1, version=9)
        read_message()
        return
    if mode == "badreserved":
        handshake(1, reserved=1)
        read_message()
        return
    if mode == "zerolayers":
        handshake(0)
        read_message()
        return
    if mode == "exit":
        handshake(1)
        return

    if mode == "layers":
        m = int(sys.argv[2])
    elif mode == "short":
        m = 3
    else:
        m = 1
    handshake(m)

    while True:
        payload = read_message()
        if mode in ("echo", "sleep"):
            if mode == "sleep":
                time.sleep(float(sys.argv[2]))
            send(payload)
        elif mode == "layers":
            for _ in range(m):
                send(payload)
        elif mode == "short":
            send(payload)
            send(payload)
            return
        elif mode == "badlen":
            sys.stdout.buffer.write(struct.pack("<I", 0xFFFFFFF0))
            sys.stdout.buffer.flush()
            return
        elif mode == "oracle":
            arr = parse_tensor(payload)
            label = int(np.floor(float(arr.mean()) * 8.0)) % 10
            send(pack_tensor(np.array([label], dtype=np.float32)))
        else:
            raise SystemExit("unknown mode %r" % mode)


if __name__ == "__main__":
    main()
