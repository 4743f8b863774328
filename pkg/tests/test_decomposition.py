"""Tonic/phasic decomposition and kernel fitting."""

import numpy as np
import pytest

from pedstress.decomposition import (DecompositionError, ImpulseResponse,
                                     decompose, optimize_taus,
                                     save_decomposition_csv)

from conftest import make_trace


class TestImpulseResponse:
    def test_unit_peak(self):
        ir = ImpulseResponse()
        k = ir.kernel(10.0)
        assert k.max() == pytest.approx(1.0)
        assert k.min() >= 0.0

    def test_peak_time_analytic(self):
        # argmax of e^(-t/tau2) - e^(-t/tau1) in closed form
        ir = ImpulseResponse(tau1=0.75, tau2=2.0)
        expected = (np.log(2.0 / 0.75) / (1 / 0.75 - 1 / 2.0))
        assert ir.peak_time() == pytest.approx(expected, rel=1e-6)

    def test_invalid_taus_rejected(self):
        with pytest.raises(DecompositionError):
            ImpulseResponse(tau1=3.0, tau2=2.0)
        with pytest.raises(DecompositionError):
            ImpulseResponse(tau1=-0.5, tau2=2.0)

    def test_kernel_truncated_at_decay(self):
        k = ImpulseResponse().kernel(10.0)
        # last retained sample sits just above the 1e-3 cutoff
        assert k[-1] < 5e-3
        assert k.size < ImpulseResponse().kernel(10.0).size + 1


class TestDecompose:
    def test_flat_trace_all_tonic(self, flat_trace):
        d = decompose(flat_trace)
        np.testing.assert_allclose(d.tonic, 5.0, atol=0.01)
        assert np.abs(d.phasic).max() < 0.02
        assert d.driver.max() < 0.01

    def test_ramp_goes_to_tonic(self):
        tr = make_trace(drift_slope=0.01)
        d = decompose(tr)
        assert np.abs(d.phasic).max() < 0.02

    def test_reconstruction_error_small(self, clean_trace):
        d = decompose(clean_trace)
        err = np.abs(clean_trace.sc - (d.tonic + d.phasic))
        assert err.max() < 0.05

    def test_driver_nonnegative(self, clean_trace):
        d = decompose(clean_trace)
        assert d.driver.min() >= -1e-12

    def test_two_kernels_ordering_preserved(self):
        tr = make_trace(scrs=[(20.0, 0.5), (28.0, 1.2)])
        d = decompose(tr)
        rate = tr.rate_hz
        mass_a = d.driver[int(18 * rate):int(24 * rate)].sum()
        mass_b = d.driver[int(26 * rate):int(32 * rate)].sum()
        assert 0 < mass_a < mass_b

    def test_peak_amplitudes_recovered(self):
        tr = make_trace(scrs=[(10.0, 0.8), (30.0, 0.4)])
        d = decompose(tr)
        rate = tr.rate_hz
        a = d.phasic[int(10 * rate):int(20 * rate)].max()
        b = d.phasic[int(30 * rate):int(40 * rate)].max()
        assert a == pytest.approx(0.8, rel=0.15)
        assert b == pytest.approx(0.4, rel=0.15)

    def test_tonic_follows_slow_drift(self):
        tr = make_trace(drift_slope=0.005, scrs=[(20.0, 0.6)])
        d = decompose(tr)
        lo = d.tonic[:50].mean()
        hi = d.tonic[-50:].mean()
        assert hi - lo == pytest.approx(0.005 * 55, rel=0.3)

    def test_too_short_trace_rejected(self):
        tr = make_trace(duration_s=3.0)
        with pytest.raises(DecompositionError):
            decompose(tr)

    def test_csv_export(self, tmp_path, clean_trace):
        d = decompose(clean_trace)
        save_decomposition_csv(d, tmp_path / "d.csv")
        header = (tmp_path / "d.csv").read_text().splitlines()[0]
        assert header == "unix_time,sc,tonic,phasic,driver"


class TestOptimizeTaus:
    def test_recovers_generating_kernel(self):
        tr = make_trace(duration_s=120.0, tau1=0.75, tau2=2.0,
                        scrs=[(10.0, 0.8), (30.0, 1.0), (50.0, 0.6),
                              (75.0, 0.9), (100.0, 0.7)])
        init = ImpulseResponse(tau1=0.4, tau2=5.0)
        fitted = optimize_taus(tr, init)
        assert fitted.tau1 == pytest.approx(0.75, rel=0.3)
        assert fitted.tau2 == pytest.approx(2.0, rel=0.3)

    def test_flat_signal_returns_init(self, flat_trace):
        init = ImpulseResponse(tau1=0.6, tau2=3.0)
        fitted = optimize_taus(flat_trace, init)
        assert fitted.tau1 == pytest.approx(0.6, rel=0.05)
        assert fitted.tau2 == pytest.approx(3.0, rel=0.05)

    def test_out_of_bounds_init_rejected(self, flat_trace):
        with pytest.raises(DecompositionError):
            optimize_taus(flat_trace, ImpulseResponse(tau1=0.5, tau2=25.0))
