"""Binary frame packets and text control messages.

Packet layout (all integers little-endian), 13-byte header:

    offset  size  field
    0       2     magic "VB"
    2       1     version (1)
    3       4     frame id (u32)
    7       1     eye (0 = L, 1 = R)
    8       2     width (u16)
    10      2     height (u16)
    12      1     encoding (0 = raw tone-mapped RGB8, 1 = PNG)
    13      ...   payload

Raw payloads are row-major, top-to-bottom RGB8. Control messages are JSON
text with a mandatory "type" field.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .imageio import tonemap

MAGIC = b"VB"
VERSION = 1
HEADER = struct.Struct("<2sBIBHHB")
HEADER_LEN = HEADER.size  # 13

ENCODING_RAW = 0
ENCODING_PNG = 1

EYE_INDEX = {"L": 0, "R": 1}
EYE_NAME = {0: "L", 1: "R"}

CONTROL_TYPES = ("pose", "volume_offset", "mode", "env", "env_upload", "tf",
                 "params")


class WireError(ValueError):
    pass


@dataclass(frozen=True)
class FramePacket:
    frame_id: int
    eye: int
    width: int
    height: int
    encoding: int
    payload: bytes

    @property
    def eye_name(self) -> str:
        return EYE_NAME[self.eye]


def encode_packet(image_u8, frame_id: int, eye, encoding: int = ENCODING_RAW) -> bytes:
    """Pack an (H, W, 3) uint8 image into one frame packet."""
    image_u8 = np.asarray(image_u8)
    if image_u8.dtype != np.uint8 or image_u8.ndim != 3 or image_u8.shape[2] != 3:
        raise WireError("encode_packet expects (H, W, 3) uint8")
    h, w = image_u8.shape[:2]
    eye_idx = EYE_INDEX[eye] if isinstance(eye, str) else int(eye)
    if encoding == ENCODING_RAW:
        payload = np.ascontiguousarray(image_u8).tobytes()
    elif encoding == ENCODING_PNG:
        buf = io.BytesIO()
        Image.fromarray(image_u8, mode="RGB").save(buf, format="PNG")
        payload = buf.getvalue()
    else:
        raise WireError(f"unknown encoding {encoding}")
    header = HEADER.pack(MAGIC, VERSION, int(frame_id) & 0xFFFFFFFF, eye_idx,
                         w, h, encoding)
    return header + payload


def encode_frame(linear_rgb, frame_id: int, eye, encoding: int = ENCODING_RAW) -> bytes:
    """Tone map a linear radiance image and pack it."""
    return encode_packet(tonemap(linear_rgb), frame_id, eye, encoding)


def decode_packet(data: bytes) -> FramePacket:
    if len(data) < HEADER_LEN:
        raise WireError(f"packet too short: {len(data)} < {HEADER_LEN} header bytes")
    magic, version, frame_id, eye, w, h, encoding = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise WireError(f"bad magic {magic!r}")
    if version != VERSION:
        raise WireError(f"unsupported version {version}")
    if eye not in (0, 1):
        raise WireError(f"bad eye {eye}")
    payload = data[HEADER_LEN:]
    if encoding == ENCODING_RAW:
        expected = w * h * 3
        if len(payload) != expected:
            raise WireError(f"raw payload length {len(payload)}, expected {expected}")
    elif encoding == ENCODING_PNG:
        if not payload.startswith(b"\x89PNG"):
            raise WireError("png payload lacks PNG signature")
    else:
        raise WireError(f"unknown encoding {encoding}")
    return FramePacket(frame_id, eye, w, h, encoding, payload)


def decode_image(packet: FramePacket):
    """Payload as an (H, W, 3) uint8 array."""
    if packet.encoding == ENCODING_RAW:
        return np.frombuffer(packet.payload, dtype=np.uint8).reshape(
            packet.height, packet.width, 3).copy()
    with Image.open(io.BytesIO(packet.payload)) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


# ---------------------------------------------------------------------------
# Control messages

def make_control(msg_type: str, **fields) -> str:
    if msg_type not in CONTROL_TYPES + ("stats", "error"):
        raise WireError(f"unknown control type {msg_type!r}")
    return json.dumps({"type": msg_type, **fields})


def parse_control(text: str) -> dict:
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WireError(f"control message is not valid JSON: {exc}")
    if not isinstance(msg, dict) or "type" not in msg:
        raise WireError("control message needs a 'type' field")
    if msg["type"] not in CONTROL_TYPES:
        raise WireError(f"unknown control type {msg['type']!r}")
    return msg
