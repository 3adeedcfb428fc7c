"""Shared hypothesis strategies."""

from hypothesis import strategies as st

from pubsub_rv.events import RESERVED_KEYS, ChannelId, ChannelKind, Event

scalars = st.one_of(
    st.booleans(),
    st.integers(min_value=-(2**53), max_value=2**53),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(max_size=12),
)
field_keys = st.text(min_size=1, max_size=10).filter(lambda k: k not in RESERVED_KEYS)
channels = st.builds(
    ChannelId,
    st.sampled_from(list(ChannelKind)),
    st.text(min_size=1, max_size=16),
)
events = st.builds(
    Event,
    channels,
    st.integers(min_value=0, max_value=2**62),
    st.integers(min_value=0, max_value=2**31),
    st.dictionaries(field_keys, scalars, max_size=6),
)
