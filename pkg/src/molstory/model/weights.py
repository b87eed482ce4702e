"""Versioned binary weight files.

Layout (little endian): magic ``MSTW``, u32 version, u32 metadata length,
metadata as UTF-8 ``key=value`` lines, u32 tensor count, then per tensor
u16 name length, name, u8 rank, u32 dims, row-major f64 payload. A trailing
u32 CRC-32 covers every preceding byte.
"""
import struct
import zlib

import numpy as np

MAGIC = b"MSTW"
VERSION = 1


class WeightFormatError(ValueError):
    pass


def dump_weights(params, meta=None):
    out = [MAGIC, struct.pack("<I", VERSION)]
    text = "".join(f"{k}={v}\n" for k, v in sorted((meta or {}).items())).encode("utf-8")
    out += [struct.pack("<I", len(text)), text, struct.pack("<I", len(params))]
    for name in sorted(params):
        arr = np.asarray(params[name], dtype="<f8", order="C")
        raw = name.encode("utf-8")
        out += [struct.pack("<H", len(raw)), raw, struct.pack("<B", arr.ndim)]
        out += [struct.pack("<I", d) for d in arr.shape]
        out.append(arr.tobytes())
    body = b"".join(out)
    return body + struct.pack("<I", zlib.crc32(body))


def parse_weights(data):
    if len(data) < 16 or data[:4] != MAGIC:
        raise WeightFormatError("not a weight file")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise WeightFormatError("checksum mismatch")
    (version,) = struct.unpack_from("<I", body, 4)
    if version != VERSION:
        raise WeightFormatError(f"unsupported weight format version {version}")
    pos = 8
    (n,) = struct.unpack_from("<I", body, pos)
    pos += 4
    meta = {}
    for line in body[pos:pos + n].decode("utf-8").splitlines():
        k, _, v = line.partition("=")
        meta[k] = v
    pos += n
    (count,) = struct.unpack_from("<I", body, pos)
    pos += 4
    params = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos:pos + ln].decode("utf-8")
        pos += ln
        (rank,) = struct.unpack_from("<B", body, pos)
        pos += 1
        dims = struct.unpack_from(f"<{rank}I", body, pos)
        pos += 4 * rank
        size = int(np.prod(dims, dtype=np.int64)) * 8
        params[name] = np.frombuffer(body[pos:pos + size], dtype="<f8").reshape(dims).astype(float)
        pos += size
    if pos != len(body):
        raise WeightFormatError("trailing bytes in weight file")
    return params, meta


def save_weights(path, params, meta=None):
    with open(path, "wb") as fh:
        fh.write(dump_weights(params, meta))


def load_weights(path):
    with open(path, "rb") as fh:
        return parse_weights(fh.read())
