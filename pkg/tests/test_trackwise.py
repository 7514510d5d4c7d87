import numpy as np
import pytest

from seld_toolkit.core.trackwise import (
    ClipLabels, EventInstance, collapse_tracks, events_to_tracks, extract_events,
    parse_metadata_csv, reorder_clipwise, reorder_events, serialize_metadata_csv,
)
from seld_toolkit.utils.exceptions import (
    InvariantError, ParseError, RangeError, ShapeError, TrackOverflowError, ValidationError,
)

from .conftest import unit


def _event(class_id, onset, offset, az=0.0, el=0.0, source_id=0):
    return EventInstance(class_id, onset, offset, unit(az, el), source_id)


class TestEventInstance:

    def test_direction_is_tiled(self):
        event = _event(3, 2, 6, 90, 0)
        assert event.directions.shape == (4, 3)
        assert event.length == 4

    def test_validation(self):
        with pytest.raises(ValidationError):
            _event(0, 5, 5)
        with pytest.raises(ShapeError):
            EventInstance(0, 0, 3, np.ones((2, 3)) / np.sqrt(3))
        with pytest.raises(InvariantError):
            EventInstance(0, 0, 2, np.array([1.0, 1.0, 0.0]))

    def test_crop(self):
        event = _event(0, 40, 60)
        head, tail = event.crop(0, 50), event.crop(50, 100)
        assert (head.onset_frame, head.offset_frame) == (40, 50)
        assert (tail.onset_frame, tail.offset_frame) == (0, 10)
        assert event.crop(70, 80) is None


class TestReorder:

    def test_onset_order(self):
        labels = reorder_events([_event(5, 18, 40), _event(0, 5, 15), _event(1, 0, 30)], n_tracks=3)
        assert labels.class_ids()[:, 20].tolist() == [1, -1, 5]
        assert labels.class_ids()[1, 5] == 0

    def test_class_breaks_onset_ties(self):
        labels = reorder_events([_event(7, 0, 10), _event(2, 0, 10)])
        assert labels.class_ids()[:2, 0].tolist() == [2, 7]

    def test_permutation_invariant(self, rng):
        events = [_event(1, 0, 10, 10), _event(1, 0, 10, 50), _event(0, 3, 8), _event(4, 3, 20, -30, 10)]
        reference = reorder_events(events)
        for _ in range(5):
            shuffled = [events[i] for i in rng.permutation(len(events))]
            labels = reorder_events(shuffled)
            assert np.array_equal(labels.sed, reference.sed)
            assert np.array_equal(labels.doa, reference.doa)

    def test_tracks_are_not_reused_within_clip(self):
        labels = reorder_events([_event(0, 0, 10), _event(0, 20, 30)])
        assert labels.active_mask()[1, 20:30].all()
        assert not labels.active_mask()[0, 20:30].any()

    def test_overflow(self):
        events = [_event(c, 0, 5) for c in range(4)]
        with pytest.raises(TrackOverflowError) as info:
            reorder_events(events, n_tracks=3)
        assert info.value.event.class_id == 3

    def test_class_out_of_range(self):
        with pytest.raises(RangeError):
            reorder_events([_event(13, 0, 5)])

    def test_event_must_fit(self):
        with pytest.raises(ValidationError):
            reorder_events([_event(0, 45, 55)], n_frames=50)

    def test_clipwise_frees_tracks_per_clip(self):
        events = [_event(0, 0, 10), _event(1, 20, 30), _event(2, 40, 60), _event(3, 70, 80)]
        labels = reorder_clipwise(events, n_tracks=3, n_frames=100, clip_frames=50)
        ids = labels.class_ids()

        assert labels.n_frames == 100
        assert ids[2, 45] == 2
        assert ids[0, 55] == 2
        assert ids[1, 75] == 3
        labels.validate()

    def test_clipwise_overflow_names_clip(self):
        events = [_event(c, 60, 70) for c in range(3)]
        with pytest.raises(TrackOverflowError, match='clip 1'):
            reorder_clipwise(events, n_tracks=2, n_frames=100)


class TestEventsToTracks:

    def test_source_is_track(self):
        labels = events_to_tracks([_event(4, 0, 10, source_id=2)], n_tracks=3, n_frames=20)
        assert labels.class_ids()[2, 0] == 4
        assert not labels.active_mask()[:2].any()

    def test_errors(self):
        with pytest.raises(TrackOverflowError):
            events_to_tracks([_event(0, 0, 5, source_id=3)], n_tracks=3)
        with pytest.raises(ValidationError):
            events_to_tracks([_event(0, 0, 5), _event(1, 4, 8)], n_tracks=3)
        with pytest.raises(ValidationError):
            events_to_tracks([_event(0, 45, 55)], n_frames=50)


class TestClipLabels:

    def test_collapse_and_extract(self):
        labels = reorder_events([_event(1, 0, 10, 30), _event(1, 5, 15, -30), _event(2, 12, 20)])
        activity = collapse_tracks(labels)
        assert activity.shape == (50, 13)
        assert activity[:15, 1].all() and not activity[15:, 1].any()

        events = extract_events(labels)
        assert [(e.class_id, e.onset_frame, e.offset_frame, e.source_id) for e in events] == [
            (1, 0, 10, 0), (1, 5, 15, 1), (2, 12, 20, 2)]
        assert np.allclose(events[1].directions[0], unit(-30, 0))

    def test_validate_rejects_broken_labels(self):
        labels = reorder_events([_event(0, 0, 10)])
        labels.doa[0, 20] = unit(0, 0)
        with pytest.raises(InvariantError):
            labels.validate()

        labels = reorder_events([_event(0, 0, 10)])
        labels.sed[0, 20, 3] = 1.0
        labels.doa[0, 20] = unit(0, 0)
        with pytest.raises(InvariantError, match='Track 0'):
            labels.validate()

        labels = ClipLabels.empty(1, 2, 2)
        labels.sed[0, 0, 0] = 1.5
        with pytest.raises(ValidationError):
            labels.validate()

    def test_shape_checks(self):
        with pytest.raises(ShapeError):
            ClipLabels(np.zeros((2, 5, 13)), np.zeros((2, 4, 3)))


class TestMetadataCsv:

    def test_parse_groups_rows(self):
        text = "10,1,0,30,10\n11,1,0,32,10\n12,1,0,34,10\n11,4,1,-180,0,1.5\n\n15,1,0,0,0\n"
        events = parse_metadata_csv(text)

        assert [(e.class_id, e.onset_frame, e.offset_frame, e.source_id) for e in events] == [
            (1, 10, 13, 0), (4, 11, 12, 1), (1, 15, 16, 0)]
        assert np.allclose(events[0].directions[2], unit(34, 10))
        assert np.allclose(events[1].directions[0], unit(180, 0))

    @pytest.mark.parametrize("text, line", [
        ("0,1,0,30\n", 1),
        ("0,1,0,30,10\n1,x,0,0,0\n", 2),
        ("-1,1,0,30,10\n", 1),
        ("0,1,0,30,10\n0,1,0,40,10\n", 2),
        ("0,1.5,0,30,10\n", 1),
    ])
    def test_parse_errors_carry_line(self, text, line):
        with pytest.raises(ParseError) as info:
            parse_metadata_csv(text)
        assert info.value.line_number == line
        assert str(info.value).startswith(f"line {line}:")

    @pytest.mark.parametrize("text", ["0,13,0,0,0\n", "0,1,0,181,0\n", "0,1,0,0,-91\n"])
    def test_parse_range_errors(self, text):
        with pytest.raises(RangeError):
            parse_metadata_csv(text)

    def test_serialize(self):
        events = [_event(2, 3, 5, 30.5, -10, source_id=1), _event(0, 4, 5, 180, 0)]
        assert serialize_metadata_csv(events) == (
            "3,2,1,30.5,-10\n"
            "4,0,0,180,0\n"
            "4,2,1,30.5,-10\n"
        )
        assert serialize_metadata_csv([]) == ''

    def test_serialized_rows_parse_back_to_same_events(self):
        text = "0,3,0,45,20\n1,3,0,45,20\n7,5,2,-120,-30\n"
        assert serialize_metadata_csv(parse_metadata_csv(text)) == text


def _random_events(rng, max_events=6, n_frames=50, n_class=13):
    events = []
    for _ in range(rng.integers(0, max_events + 1)):
        onset = int(rng.integers(0, n_frames))
        offset = int(rng.integers(onset + 1, n_frames + 1))
        az, el = rng.uniform(-179.0, 180.0), rng.uniform(-89.0, 89.0)
        events.append(_event(int(rng.integers(0, n_class)), onset, offset, az, el))
    return events


def test_reorder_random_sets(rng):
    for _ in range(10000):
        events = _random_events(rng)
        labels = reorder_events(events)
        labels.validate()

        expected = np.zeros((50, 13))
        for e in events:
            expected[e.onset_frame:e.offset_frame, e.class_id] = 1.0
        assert np.array_equal(collapse_tracks(labels), expected)

        extracted = sorted(e.key() for e in extract_events(labels))
        assert extracted == sorted(e.key() for e in events)

        shuffled = reorder_events([events[i] for i in rng.permutation(len(events))])
        assert np.array_equal(shuffled.sed, labels.sed)
        assert np.array_equal(shuffled.doa, labels.doa)
