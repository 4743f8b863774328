"""Shared fixtures: synthetic EDA builders used across the suite."""

import numpy as np
import pytest

from pedstress.decomposition import ImpulseResponse
from pedstress.signal import EdaTrace

T0 = 1_700_000_000.0


def make_trace(duration_s=60.0, rate_hz=10.0, baseline=5.0,
               scrs=(), noise_sd=0.0, seed=0, tau1=0.75, tau2=2.0,
               participant_id="0001", session_id="s1",
               drift_slope=0.0) -> EdaTrace:
    """Baseline plus injected Bateman-kernel SCRs.

    ``scrs`` is a sequence of (onset_s, amplitude) pairs relative to the
    trace start.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate_hz))
    t = T0 + np.arange(n) / rate_hz
    sc = np.full(n, float(baseline))
    sc += drift_slope * (t - T0)
    kernel = ImpulseResponse(tau1=tau1, tau2=tau2).kernel(rate_hz)
    for onset_s, amp in scrs:
        i = int(round(onset_s * rate_hz))
        if not 0 <= i < n:
            raise ValueError(f"onset {onset_s}s outside trace")
        end = min(i + kernel.size, n)
        sc[i:end] += amp * kernel[:end - i]
    if noise_sd > 0:
        sc = sc + rng.normal(0.0, noise_sd, n)
    return EdaTrace(participant_id, session_id, t, sc, rate_hz)


@pytest.fixture
def clean_trace():
    return make_trace(scrs=[(10.0, 0.8), (25.0, 0.5), (42.0, 1.2)])


@pytest.fixture
def flat_trace():
    return make_trace()
