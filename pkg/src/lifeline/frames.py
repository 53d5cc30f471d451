"""Wire codec for emergency message frames.

Frames are a small XML-like format with a fixed attribute order:

    <EMG v="1" id="P-7-12" type="SOS" prio="0" from="10.1.0.7"
         to="10.99.0.1" load="35" swaps="0"><info>...</info><body>...</body>
    <photo enc="base64">...</photo><trace>P-7,R-2</trace></EMG>

(shown wrapped; real frames are a single run of bytes).  The photo element
is optional.  Serialization is canonical: parse followed by serialize
reproduces the input bytes exactly, which the relays rely on since every
hop re-parses what arrives off the radio.

For relayed frames the trace element records the transmitters in order.
Location reply frames reuse the element as the remaining return route,
consumed one hop at a time.
"""

from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass, field

KIND_SOS = "SOS"
KIND_REPLY = "REPLY"
KIND_WHEREAMI = "WHEREAMI"
KIND_LOCREPLY = "LOCREPLY"
KIND_LOCADVERT = "LOCADVERT"
MESSAGE_KINDS = frozenset(
    (KIND_SOS, KIND_REPLY, KIND_WHEREAMI, KIND_LOCREPLY, KIND_LOCADVERT)
)

NUM_PRIORITIES = 5          # queues 0..4, 0 most urgent
MAX_PHOTO_BYTES = 65536

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")
_ADDR_RE = re.compile(r"^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$")

_HEAD_RE = re.compile(
    r'^<EMG v="1" id="([^"]*)" type="([^"]*)" prio="([^"]*)" '
    r'from="([^"]*)" to="([^"]*)" load="([^"]*)" swaps="([^"]*)">'
)
_BODY_RE = re.compile(
    r"^<info>(.*?)</info><body>(.*?)</body>"
    r'(?:<photo enc="base64">([^<]*)</photo>)?'
    r"<trace>([^<]*)</trace></EMG>$",
    re.DOTALL,
)


class FrameError(ValueError):
    """Raised for byte strings that claim to be frames but are malformed."""


@dataclass
class EmergencyMessage:
    id: str
    kind: str
    priority: int               # urgency set by the sender, 0 most urgent
    origin: str                 # dotted-quad source address
    dest: str
    source_load: int = 0        # queue occupancy percent at the origin
    personal_info: str = ""
    body: str = ""
    photo: bytes | None = None
    trace: list[str] = field(default_factory=list)
    swap_count: int = 0
    created_at: float = 0.0     # local bookkeeping, not serialized
    runtime_priority: int | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.runtime_priority is None:
            self.runtime_priority = self.priority

    def wire_fields(self) -> tuple:
        """Everything that travels in the frame, for equality checks."""
        return (
            self.id, self.kind, self.priority, self.origin, self.dest,
            self.source_load, self.personal_info, self.body, self.photo,
            tuple(self.trace), self.swap_count,
        )


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _unescape(text: str) -> str:
    if "<" in text or ">" in text:
        raise FrameError("unescaped angle bracket in text element")
    out = text.replace("&lt;", "<").replace("&gt;", ">")
    return out.replace("&amp;", "&")


def valid_node_id(node_id: str) -> bool:
    return bool(_ID_RE.match(node_id))


def valid_address(addr: str) -> bool:
    m = _ADDR_RE.match(addr)
    return bool(m) and all(int(part) <= 255 for part in m.groups())


def _check_fields(msg: EmergencyMessage) -> None:
    if not valid_node_id(msg.id):
        raise FrameError(f"bad message id {msg.id!r}")
    if msg.kind not in MESSAGE_KINDS:
        raise FrameError(f"unknown frame type {msg.kind!r}")
    if not 0 <= msg.priority < NUM_PRIORITIES:
        raise FrameError(f"priority {msg.priority} out of range")
    for addr in (msg.origin, msg.dest):
        if not valid_address(addr):
            raise FrameError(f"bad address {addr!r}")
    if not 0 <= msg.source_load <= 100:
        raise FrameError(f"load {msg.source_load} out of range")
    if msg.swap_count < 0:
        raise FrameError("negative swap count")
    if msg.photo is not None and len(msg.photo) > MAX_PHOTO_BYTES:
        raise FrameError("photo exceeds size cap")
    for hop in msg.trace:
        if not valid_node_id(hop):
            raise FrameError(f"bad trace entry {hop!r}")


def serialize_frame(msg: EmergencyMessage) -> bytes:
    _check_fields(msg)
    parts = [
        f'<EMG v="1" id="{msg.id}" type="{msg.kind}" prio="{msg.priority}"'
        f' from="{msg.origin}" to="{msg.dest}" load="{msg.source_load}"'
        f' swaps="{msg.swap_count}">',
        f"<info>{_escape(msg.personal_info)}</info>",
        f"<body>{_escape(msg.body)}</body>",
    ]
    if msg.photo is not None:
        b64 = base64.b64encode(msg.photo).decode("ascii")
        parts.append(f'<photo enc="base64">{b64}</photo>')
    parts.append(f"<trace>{','.join(msg.trace)}</trace></EMG>")
    return "".join(parts).encode("utf-8")


def parse_frame(data: bytes) -> EmergencyMessage | None:
    """Decode one frame.

    Returns None for traffic that is not an emergency frame at all;
    raises FrameError for frames that start correctly but break the
    grammar (wrong version, shuffled attributes, bad values).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        return None
    if not text.startswith("<EMG"):
        return None
    head = _HEAD_RE.match(text)
    if head is None:
        raise FrameError("malformed frame header")
    msg_id, kind, prio_s, origin, dest, load_s, swaps_s = head.groups()
    tail = _BODY_RE.match(text[head.end():])
    if tail is None:
        raise FrameError("malformed frame elements")
    info_raw, body_raw, photo_b64, trace_raw = tail.groups()

    if not prio_s.isdigit() or not load_s.isdigit() or not swaps_s.isdigit():
        raise FrameError("non-numeric header attribute")
    photo = None
    if photo_b64 is not None:
        try:
            photo = base64.b64decode(photo_b64, validate=True)
        except (ValueError, binascii.Error) as exc:
            raise FrameError(f"bad photo encoding: {exc}") from exc
    trace = trace_raw.split(",") if trace_raw else []
    msg = EmergencyMessage(
        id=msg_id,
        kind=kind,
        priority=int(prio_s),
        origin=origin,
        dest=dest,
        source_load=int(load_s),
        personal_info=_unescape(info_raw),
        body=_unescape(body_raw),
        photo=photo,
        trace=trace,
        swap_count=int(swaps_s),
    )
    _check_fields(msg)
    return msg
