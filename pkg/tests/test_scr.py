"""SCR detection, amplitude classes, and per-participant standardization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pedstress.decomposition import decompose
from pedstress.scr import (AmplitudeClass, ScrError, ScrEvent,
                           classify_amplitude, detect_scrs, events_to_frame,
                           participant_stats, standardize)

from conftest import T0, make_trace


def _event(pid="0001", sid="s1", no=1, amplitude=0.5, onset=0.0,
           annotation=None):
    return ScrEvent(participant_id=pid, session_id=sid,
                    onset_unix=T0 + onset, peak_unix=T0 + onset + 1.5,
                    amplitude=amplitude,
                    amplitude_class=classify_amplitude(amplitude),
                    detected_scr_no=no, annotation=annotation)


class TestClassify:
    @pytest.mark.parametrize("amp,expected", [
        (0.10, AmplitudeClass.SMALL),
        (0.39, AmplitudeClass.SMALL),
        (0.40, AmplitudeClass.MEDIUM),
        (0.69, AmplitudeClass.MEDIUM),
        (0.70, AmplitudeClass.LARGE),
        (0.99, AmplitudeClass.LARGE),
        (1.00, AmplitudeClass.VERY_LARGE),
        (3.50, AmplitudeClass.VERY_LARGE),
    ])
    def test_left_closed_bins(self, amp, expected):
        assert classify_amplitude(amp) is expected

    def test_below_threshold_rejected(self):
        with pytest.raises(ScrError):
            classify_amplitude(0.05)

    @given(st.floats(0.1, 5.0))
    @settings(max_examples=100, deadline=None)
    def test_every_amplitude_gets_one_class(self, amp):
        assert classify_amplitude(amp) in AmplitudeClass


class TestDetect:
    def test_three_injected_three_detected(self, clean_trace):
        events = detect_scrs(decompose(clean_trace))
        assert len(events) == 3
        assert [e.detected_scr_no for e in events] == [1, 2, 3]

    def test_onsets_near_truth(self, clean_trace):
        events = detect_scrs(decompose(clean_trace))
        onsets = [e.onset_unix - T0 for e in events]
        for got, want in zip(onsets, [10.0, 25.0, 42.0]):
            assert got == pytest.approx(want, abs=1.5)

    def test_amplitudes_near_truth(self, clean_trace):
        events = detect_scrs(decompose(clean_trace))
        amps = [e.amplitude for e in events]
        for got, want in zip(amps, [0.8, 0.5, 1.2]):
            assert got == pytest.approx(want, rel=0.2)

    def test_flat_trace_no_events(self, flat_trace):
        assert detect_scrs(decompose(flat_trace)) == []

    def test_subthreshold_not_reported(self):
        tr = make_trace(scrs=[(15.0, 0.05), (35.0, 0.05)])
        assert detect_scrs(decompose(tr)) == []

    def test_threshold_monotone(self):
        from pedstress.signal import gaussian_smooth
        tr = make_trace(scrs=[(10.0, 0.3), (25.0, 0.6), (42.0, 1.0)],
                        noise_sd=0.01, seed=8)
        d = decompose(gaussian_smooth(tr))
        counts = [len(detect_scrs(d, threshold=th))
                  for th in (0.1, 0.25, 0.5, 0.9, 2.0)]
        assert counts == sorted(counts, reverse=True)
        assert counts[0] == 3 and counts[-1] == 0

    def test_onset_precedes_peak_enforced(self):
        with pytest.raises(ScrError):
            ScrEvent("p", "s", T0 + 5.0, T0 + 5.0, 0.5,
                     AmplitudeClass.MEDIUM, 1)


class TestStandardize:
    def test_t_moments_exact(self):
        rng = np.random.default_rng(0)
        events = [_event(no=i + 1, amplitude=a, onset=5 * i)
                  for i, a in enumerate(rng.uniform(0.1, 2.0, 12))]
        standardize(events)
        ts = np.array([e.t_score for e in events])
        assert abs(ts.mean() - 50.0) < 1e-9
        assert abs(ts.std(ddof=0) - 10.0) < 1e-9

    def test_pooled_across_sessions(self):
        events = ([_event(sid="s1", no=i + 1, amplitude=0.2 + 0.1 * i,
                          onset=5 * i) for i in range(4)]
                  + [_event(sid="s2", no=i + 1, amplitude=1.0 + 0.1 * i,
                            onset=5 * i) for i in range(4)])
        standardize(events)
        # one pooled mean: s1 events sit below it, s2 events above
        assert all(e.t_score < 50 for e in events[:4])
        assert all(e.t_score > 50 for e in events[4:])

    def test_delete_excluded_from_stats(self):
        keep = [_event(no=1, amplitude=0.3), _event(no=2, amplitude=0.7,
                                                    onset=10)]
        deleted = _event(no=3, amplitude=5.0, onset=20, annotation="Delete")
        standardize(keep + [deleted])
        assert deleted.t_score is None
        ts = [e.t_score for e in keep]
        assert np.mean(ts) == pytest.approx(50.0, abs=1e-9)

    def test_single_event_unstandardizable(self):
        e = _event()
        standardize([e])
        assert not e.standardizable and e.t_score is None

    def test_zero_variance_unstandardizable(self):
        events = [_event(no=i + 1, amplitude=0.5, onset=5 * i)
                  for i in range(4)]
        standardize(events)
        assert all(not e.standardizable for e in events)

    @given(scale=st.floats(0.2, 4.0), shift=st.floats(0.1, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_affine_invariance(self, scale, shift):
        rng = np.random.default_rng(7)
        amps = rng.uniform(0.1, 1.5, 10)
        a = [_event(no=i + 1, amplitude=x, onset=5 * i)
             for i, x in enumerate(amps)]
        b = [_event(no=i + 1, amplitude=scale * x + shift, onset=5 * i)
             for i, x in enumerate(amps)]
        standardize(a)
        standardize(b)
        za = [e.z_score for e in a]
        zb = [e.z_score for e in b]
        np.testing.assert_allclose(za, zb, atol=1e-9)


class TestExport:
    def test_frame_layout(self):
        events = [_event(no=1), _event(no=2, onset=8.0, amplitude=1.1)]
        standardize(events)
        df = events_to_frame(events, {"s1": T0})
        assert list(df.columns) == [
            "participant_id", "session_id", "unix", "elapsed_time",
            "position", "scr_amplitude", "scr_onset_unix", "scr_t",
            "position_f", "amp_class", "detected_scr_no", "annotation"]
        assert df["elapsed_time"].iloc[0] == pytest.approx(1.5, abs=0.01)

    def test_participant_stats_excludes_delete(self):
        events = [_event(no=1, amplitude=0.4),
                  _event(no=2, amplitude=0.6, onset=8),
                  _event(no=3, amplitude=9.9, onset=16, annotation="Delete")]
        stats = participant_stats(events, "0001")
        assert stats.n_scrs == 2
        assert stats.mean_amplitude == pytest.approx(0.5)
