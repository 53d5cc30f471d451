"""Wire codec tests against a hand-written golden frame."""

import pathlib

import pytest
from hypothesis import given, settings, strategies as st

from lifeline.frames import (
    KIND_SOS, MAX_PHOTO_BYTES, MESSAGE_KINDS,
    EmergencyMessage, FrameError, parse_frame, serialize_frame,
)

GOLDEN = pathlib.Path(__file__).parent / "data" / "sos_frame.xml"


def golden_message() -> EmergencyMessage:
    return EmergencyMessage(
        id="P-7-12", kind=KIND_SOS, priority=0,
        origin="10.1.0.7", dest="10.99.0.1", source_load=35,
        personal_info="name=Ada;blood=0+", body="trapped & hurt",
        photo=b"help", trace=["P-7", "R-2"], swap_count=0,
    )


def test_golden_frame_parses():
    msg = parse_frame(GOLDEN.read_bytes())
    assert msg is not None
    assert msg.id == "P-7-12"
    assert msg.kind == KIND_SOS
    assert msg.priority == 0
    assert msg.origin == "10.1.0.7"
    assert msg.dest == "10.99.0.1"
    assert msg.source_load == 35
    assert msg.personal_info == "name=Ada;blood=0+"
    assert msg.body == "trapped & hurt"
    assert msg.photo == b"help"
    assert msg.trace == ["P-7", "R-2"]
    assert msg.swap_count == 0


def test_golden_frame_serializes_to_exact_bytes():
    assert serialize_frame(golden_message()) == GOLDEN.read_bytes()


def test_non_emergency_payloads_are_classified_not_rejected():
    assert parse_frame(b"hello there") is None
    assert parse_frame(b"<xml><a/></xml>") is None
    assert parse_frame(b"\xff\xfe\x00garbage") is None
    assert parse_frame(b"") is None


@pytest.mark.parametrize("mutation", [
    lambda t: t.replace(b'prio="0"', b'prio="7"'),
    lambda t: t.replace(b'prio="0"', b'prio="-1"'),
    lambda t: t.replace(b'type="SOS"', b'type="DANCE"'),
    lambda t: t.replace(b'from="10.1.0.7"', b'from="10.1.0.999"'),
    lambda t: t.replace(b'load="35"', b'load="135"'),
    lambda t: t.replace(b'swaps="0"', b'swaps="-2"'),
    lambda t: t.replace(b"<info>", b"<oops>"),
    lambda t: t + b"trailing",
    lambda t: t.replace(b"</EMG>", b""),
])
def test_malformed_frames_raise(mutation):
    with pytest.raises(FrameError):
        parse_frame(mutation(GOLDEN.read_bytes()))


def test_photo_size_cap():
    msg = golden_message()
    msg.photo = b"x" * MAX_PHOTO_BYTES
    parsed = parse_frame(serialize_frame(msg))
    assert parsed.photo == msg.photo
    msg.photo = b"x" * (MAX_PHOTO_BYTES + 1)
    with pytest.raises(FrameError):
        serialize_frame(msg)


def test_empty_trace_and_body_round_trip():
    msg = EmergencyMessage(id="A-1", kind="REPLY", priority=4,
                           origin="10.99.0.1", dest="10.1.0.7")
    again = parse_frame(serialize_frame(msg))
    assert again.trace == []
    assert again.body == ""
    assert again.photo is None


node_ids = st.from_regex(r"[A-Za-z0-9][A-Za-z0-9._-]{0,8}", fullmatch=True)
addresses = st.tuples(*[st.integers(0, 255)] * 4).map(
    lambda q: ".".join(map(str, q)))
texts = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc")), max_size=80)


@settings(max_examples=120, deadline=None)
@given(
    msg_id=node_ids, kind=st.sampled_from(sorted(MESSAGE_KINDS)),
    priority=st.integers(0, 4), origin=addresses, dest=addresses,
    load=st.integers(0, 100), info=texts, body=texts,
    photo=st.none() | st.binary(max_size=1024),
    trace=st.lists(node_ids, max_size=6), swaps=st.integers(0, 9),
)
def test_round_trip_is_identity(msg_id, kind, priority, origin, dest, load,
                                info, body, photo, trace, swaps):
    msg = EmergencyMessage(
        id=msg_id, kind=kind, priority=priority, origin=origin, dest=dest,
        source_load=load, personal_info=info, body=body, photo=photo,
        trace=trace, swap_count=swaps,
    )
    data = serialize_frame(msg)
    again = parse_frame(data)
    assert again.wire_fields() == msg.wire_fields()
    assert serialize_frame(again) == data
