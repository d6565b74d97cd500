"""Magic + length-prefixed JSON header + little-endian payload framing."""

import json
import struct

_LEN = struct.Struct("<I")


class FormatError(ValueError):
    """A framed file is malformed: bad magic, bad header, or wrong payload size."""


def dump_header(header):
    return json.dumps(header, separators=(",", ":")).encode("utf-8")


def write_framed(path, magic, header, payload):
    head = dump_header(header)
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(_LEN.pack(len(head)))
        fh.write(head)
        fh.write(payload)


def read_framed(path, magic):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(magic) + _LEN.size or blob[: len(magic)] != magic:
        raise FormatError(f"{path}: expected magic {magic!r}")
    pos = len(magic)
    (hlen,) = _LEN.unpack_from(blob, pos)
    pos += _LEN.size
    if pos + hlen > len(blob):
        raise FormatError(f"{path}: header truncated")
    try:
        header = json.loads(blob[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header ({exc})") from None
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header must be a JSON object")
    return header, blob[pos + hlen :]
