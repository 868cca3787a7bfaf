"""Session contract: construction, frame validation, byte output."""

import struct

import numpy as np
import pytest
from artifact import read_trace

from trace_exporter import (ExportError, ExportSession, FrameError,
                            IncompleteSessionError)

SHAPE = (1, 4, 4)
STEPS = (1000, 960, 920)
ABARS = (2e-4, 4e-4, 8e-4)


def make_session(tmp_path, shape=SHAPE, steps=STEPS, abars=ABARS,
                 name="t.bin", **kw):
    return ExportSession(shape, steps, abars, tmp_path / name, **kw)


def field(seed, shape=SHAPE):
    return np.random.default_rng(seed).standard_normal(shape)


def fill(session, base_seed=0):
    for i, t in enumerate(session.steps):
        state = field(base_seed + 2 * i) if session.record_states else None
        session.record(t, state=state, eps=field(base_seed + 2 * i + 1))


# construction

def test_shape_must_be_three_positive_dims(tmp_path):
    with pytest.raises(ExportError, match="channels, height, width"):
        make_session(tmp_path, shape=(4, 4))
    with pytest.raises(ExportError, match="positive"):
        make_session(tmp_path, shape=(1, 0, 4))


def test_step_list_must_be_nonempty_and_decreasing(tmp_path):
    with pytest.raises(ExportError, match="empty"):
        make_session(tmp_path, steps=(), abars=())
    with pytest.raises(ExportError, match="strictly decrease"):
        make_session(tmp_path, steps=(1000, 1000, 920))
    with pytest.raises(ExportError, match="strictly decrease"):
        make_session(tmp_path, steps=(920, 960, 1000))
    with pytest.raises(ExportError, match="nonnegative"):
        make_session(tmp_path, steps=(1000, 960, -1))


def test_alpha_bar_table_must_align_with_steps(tmp_path):
    with pytest.raises(ExportError, match="align"):
        make_session(tmp_path, abars=(2e-4, 4e-4))


@pytest.mark.parametrize("bad", [0.0, -0.5, 1.5, float("nan")])
def test_alpha_bar_values_must_lie_in_unit_interval(tmp_path, bad):
    with pytest.raises(ExportError, match=r"\(0, 1\]"):
        make_session(tmp_path, abars=(2e-4, bad, 8e-4))


# frame validation

def test_unknown_step_rejected(tmp_path):
    s = make_session(tmp_path)
    with pytest.raises(FrameError, match="not in the declared step list"):
        s.record(940, state=field(0), eps=field(1))


def test_frames_must_arrive_in_decreasing_order(tmp_path):
    s = make_session(tmp_path)
    s.record(960, state=field(0), eps=field(1))
    with pytest.raises(FrameError, match="strictly decrease"):
        s.record(1000, state=field(2), eps=field(3))


def test_duplicate_step_rejected(tmp_path):
    s = make_session(tmp_path)
    s.record(1000, state=field(0), eps=field(1))
    with pytest.raises(FrameError, match="strictly decrease"):
        s.record(1000, state=field(2), eps=field(3))


def test_exactly_one_of_score_or_eps(tmp_path):
    s = make_session(tmp_path)
    with pytest.raises(FrameError, match="exactly one"):
        s.record(1000, state=field(0), eps=field(1), score=field(2))
    with pytest.raises(FrameError, match="exactly one"):
        s.record(1000, state=field(0))


def test_state_presence_must_match_declaration(tmp_path):
    s = make_session(tmp_path)
    with pytest.raises(FrameError, match="records states"):
        s.record(1000, eps=field(1))
    bare = make_session(tmp_path, name="bare.bin", record_states=False)
    with pytest.raises(FrameError, match="without states"):
        bare.record(1000, state=field(0), eps=field(1))


def test_field_shape_checked_against_session(tmp_path):
    s = make_session(tmp_path)
    with pytest.raises(FrameError, match="eps has shape"):
        s.record(1000, state=field(0), eps=np.zeros((1, 4, 5)))
    with pytest.raises(FrameError, match="state has shape"):
        s.record(1000, state=np.zeros((2, 4, 4)), eps=field(1))


def test_non_finite_fields_rejected(tmp_path):
    s = make_session(tmp_path)
    bad = field(0)
    bad[0, 2, 2] = np.inf
    with pytest.raises(FrameError, match="non-finite"):
        s.record(1000, state=field(1), eps=bad)


def test_noise_prediction_undefined_at_alpha_bar_one(tmp_path):
    s = make_session(tmp_path, steps=(3, 2, 1), abars=(0.9, 0.95, 1.0))
    s.record(3, state=field(0), eps=field(1))
    s.record(2, state=field(2), eps=field(3))
    with pytest.raises(FrameError, match="does not define a score"):
        s.record(1, state=field(4), eps=field(5))
    # An explicit score is still fine there.
    s.record(1, state=field(4), score=field(5))
    assert s.finalize().exists()


# finalize

def test_finalize_names_every_missing_step(tmp_path):
    s = make_session(tmp_path)
    s.record(1000, state=field(0), eps=field(1))
    s.record(920, state=field(2), eps=field(3))
    with pytest.raises(IncompleteSessionError) as err:
        s.finalize()
    msg = str(err.value)
    assert "declared 3" in msg and "received 2" in msg and "960" in msg
    assert not (tmp_path / "t.bin").exists()


def test_finalize_is_idempotent(tmp_path):
    s = make_session(tmp_path)
    fill(s)
    first = s.finalize()
    blob = first.read_bytes()
    assert s.finalize() == first
    assert first.read_bytes() == blob


def test_no_frames_after_finalize(tmp_path):
    s = make_session(tmp_path)
    fill(s)
    s.finalize()
    with pytest.raises(FrameError, match="finalized"):
        s.record(1000, state=field(0), eps=field(1))


# byte output

def test_header_bytes_exact(tmp_path):
    s = make_session(tmp_path, shape=(2, 3, 4))
    for i, t in enumerate(STEPS):
        s.record(t, state=field(i, (2, 3, 4)), eps=field(10 + i, (2, 3, 4)))
    blob = s.finalize().read_bytes()
    assert blob[:8] == b"ASCTRACE"
    assert struct.unpack_from("<IIIIII", blob, 8) == (1, 2, 3, 4, 3, 3)
    assert struct.unpack_from("<I", blob, 32) == (3,)
    table = np.frombuffer(blob, dtype="<f8", count=3, offset=36)
    assert table.tobytes() == np.asarray(ABARS, dtype="<f8").tobytes()
    # No padding anywhere: header + table + 3 frames of u32 + 2 fields.
    assert len(blob) == 36 + 3 * 8 + 3 * (4 + 2 * 24 * 4)


def test_scores_only_flag_and_size(tmp_path):
    full = make_session(tmp_path, name="full.bin")
    bare = make_session(tmp_path, name="bare.bin", record_states=False)
    fill(full)
    for i, t in enumerate(STEPS):
        bare.record(t, eps=field(2 * i + 1))
    with_states = full.finalize().read_bytes()
    without = bare.finalize().read_bytes()
    assert struct.unpack_from("<I", without, 28) == (2,)
    assert len(with_states) - len(without) == 3 * 16 * 4
    rec = read_trace(bare.path)
    assert rec.states is None


def test_same_input_same_bytes(tmp_path):
    a = make_session(tmp_path, name="a.bin")
    b = make_session(tmp_path, name="b.bin")
    fill(a)
    fill(b)
    assert a.finalize().read_bytes() == b.finalize().read_bytes()


def test_constant_noise_field_converts_per_step(tmp_path):
    s = make_session(tmp_path)
    ones = np.ones(SHAPE)
    for t in STEPS:
        s.record(t, state=0.5 * ones, eps=ones)
    rec = read_trace(s.finalize())
    for i, abar in enumerate(ABARS):
        want = np.float32(-1.0 / np.sqrt(1.0 - abar))
        assert np.all(rec.scores[i] == want)


def test_score_frames_pass_through_untouched(tmp_path):
    s = make_session(tmp_path)
    scores = [field(40 + i) for i in range(3)]
    for t, sc in zip(STEPS, scores):
        s.record(t, state=field(50), score=sc)
    rec = read_trace(s.finalize())
    for i, sc in enumerate(scores):
        assert rec.scores[i].tobytes() == sc.astype("<f4").tobytes()


def test_narrowing_rounds_to_nearest_f32(tmp_path):
    s = make_session(tmp_path)
    value = 0.1  # not representable in f32
    for t in STEPS:
        s.record(t, state=np.full(SHAPE, value), score=np.full(SHAPE, value))
    rec = read_trace(s.finalize())
    assert rec.scores[0][0, 0, 0] == np.float32(0.1)
    assert rec.states[0][0, 0, 0] == np.float32(0.1)


def test_primary_reader_round_trips_everything(tmp_path):
    s = make_session(tmp_path)
    states, epss = [], []
    for i, t in enumerate(STEPS):
        st, ep = field(60 + i), field(70 + i)
        states.append(st)
        epss.append(ep)
        s.record(t, state=st, eps=ep)
    rec = read_trace(s.finalize())
    assert list(rec.timesteps) == list(STEPS)
    assert rec.alpha_bars.tobytes() == np.asarray(ABARS, dtype="<f8").tobytes()
    for i, abar in enumerate(ABARS):
        want = (-epss[i] / np.sqrt(1.0 - abar)).astype("<f4")
        assert rec.scores[i].tobytes() == want.tobytes()
        assert rec.states[i].tobytes() == states[i].astype("<f4").tobytes()
