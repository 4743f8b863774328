"""Scenario generator: traffic arithmetic, determinism, events, EDA synth."""

import numpy as np
import pytest

from pedstress.simulator import (AvatarBehaviour, EdaProfile, EventKind,
                                 ScenarioConfig, SimEvent, TrafficRegime,
                                 VEHICLE_LENGTH_M, generate_traffic,
                                 load_scenario_yaml, run_scenario,
                                 save_scenario_yaml, synthesize_eda)


class TestTraffic:
    def test_high_arrival_low_speed_stats(self):
        _, params, stats = generate_traffic(
            TrafficRegime.HIGH_ARRIVAL_LOW_SPEED, 600.0, seed=1)
        assert stats.flow_veh_h == pytest.approx(1200.0, abs=60)
        assert stats.mean_gap_s == pytest.approx(3.0, abs=0.15)
        assert stats.mean_clearance_m == pytest.approx(16.7, abs=1.0)
        assert stats.mean_speed_kmh == pytest.approx(20.0)

    def test_low_arrival_high_speed_stats(self):
        _, params, stats = generate_traffic(
            TrafficRegime.LOW_ARRIVAL_HIGH_SPEED, 600.0, seed=1)
        assert stats.flow_veh_h == pytest.approx(1113.0, abs=56)
        assert stats.mean_gap_s == pytest.approx(3.2, abs=0.16)
        assert stats.mean_clearance_m == pytest.approx(35.9, abs=1.8)

    def test_constant_headway(self):
        passes, params, _ = generate_traffic(
            TrafficRegime.HIGH_ARRIVAL_LOW_SPEED, 300.0, seed=4)
        for lane in (1, 2):
            gaps = np.diff(passes[lane])
            np.testing.assert_allclose(gaps, params.headway_s, atol=1e-9)


class TestDeterminism:
    def test_identical_seed_identical_outputs(self):
        cfg = ScenarioConfig(avatar=AvatarBehaviour.CONSERVATIVE, seed=9)
        a = run_scenario(cfg)
        b = run_scenario(cfg)
        assert a.trajectory.samples.equals(b.trajectory.samples)
        assert a.events == b.events

    def test_different_seed_differs(self):
        a = run_scenario(ScenarioConfig(seed=1))
        b = run_scenario(ScenarioConfig(seed=2))
        assert not a.trajectory.samples.equals(b.trajectory.samples)

    def test_eda_synthesis_deterministic(self):
        res = run_scenario(ScenarioConfig(seed=3))
        t1, g1 = synthesize_eda(res.events, "0001", "s", 3, res.t0, 60.0)
        t2, g2 = synthesize_eda(res.events, "0001", "s", 3, res.t0, 60.0)
        np.testing.assert_array_equal(t1.sc, t2.sc)
        assert g1 == g2


class TestDynamics:
    def test_no_vehicle_overlap_within_lane(self):
        res = run_scenario(ScenarioConfig(seed=5))
        df = res.trajectory.samples
        vehicles = df[df["entity_kind"].isin(["vehicle", "av"])]
        assert not vehicles.empty
        for (_, lane_y), frame in vehicles.groupby(["unix", "y"]):
            xs = np.sort(frame["x"].to_numpy())
            if xs.size > 1:
                assert np.diff(xs).min() > VEHICLE_LENGTH_M

    def test_most_sessions_cross(self):
        finished = sum(run_scenario(ScenarioConfig(seed=s)).finished
                       for s in range(10))
        assert finished >= 7

    def test_session_duration(self):
        res = run_scenario(ScenarioConfig(seed=6))
        assert res.duration_s == pytest.approx(60.0, abs=0.2)

    def test_avatar_crosses_when_mobile(self):
        res = run_scenario(ScenarioConfig(
            avatar=AvatarBehaviour.ADVENTUROUS, seed=7))
        kinds = {e.kind for e in res.events}
        assert EventKind.AVATAR_START_CROSS in kinds
        assert EventKind.AVATAR_FINISH_CROSS in kinds

    def test_standing_avatar_stays(self):
        res = run_scenario(ScenarioConfig(
            avatar=AvatarBehaviour.STANDING, seed=7))
        kinds = {e.kind for e in res.events}
        assert EventKind.AVATAR_START_CROSS not in kinds
        av = res.trajectory.samples.query("entity_id == 'avatar'")
        assert av["y"].max() - av["y"].min() < 0.01

    def test_accident_preceded_by_blackout_and_overlap(self):
        # hunt a seed that produces an accident
        found = None
        for s in range(60):
            res = run_scenario(ScenarioConfig(
                traffic_regime=TrafficRegime.LOW_ARRIVAL_HIGH_SPEED, seed=s))
            if res.accident:
                found = res
                break
        assert found is not None, "no accident in 60 seeds"
        kinds = [e.kind for e in found.events]
        i_acc = kinds.index(EventKind.ACCIDENT)
        assert EventKind.SCREEN_BLACKOUT in kinds[:i_acc]
        acc = found.events[i_acc]
        frame = found.trajectory.samples.query("unix == @acc.unix")
        ped = frame.query("entity_id == 'participant'").iloc[0]
        veh = frame.query("entity_id == @acc.payload['entity_id']").iloc[0]
        assert abs(ped.y - veh.y) < 2.0
        assert -VEHICLE_LENGTH_M - 0.5 < (ped.x - veh.x) < 0.5 or \
               -0.5 < (ped.x - veh.x) < VEHICLE_LENGTH_M + 0.5

    def test_lane_entry_events_ordered(self):
        res = run_scenario(ScenarioConfig(seed=11))
        order = [e.kind for e in res.events
                 if e.kind in (EventKind.PED_ENTER_LANE1,
                               EventKind.PED_ENTER_LANE2)]
        if len(order) >= 2:
            assert order[0] == EventKind.PED_ENTER_LANE1


class TestEdaSynthesis:
    def test_no_events_no_injections(self):
        trace, truth = synthesize_eda([], "0001", "s", 1,
                                      1_700_000_000.0, 60.0)
        assert truth == []
        assert trace.n == 6000

    def test_accident_amplitude_largest_in_profile(self):
        profile = EdaProfile()
        means = profile.amplitude_means
        assert means["Accident"] == max(means.values())
        assert means["Fear of accident"] > means["Traffic speed"]

    def test_one_accident_one_injection(self):
        t0 = 1_700_000_000.0
        ev = SimEvent(EventKind.ACCIDENT, t0 + 20.0, {})
        trace, truth = synthesize_eda([ev], "0001", "s", 2, t0, 60.0)
        assert len(truth) == 1
        assert truth[0].label == "Accident"
        assert truth[0].onset_unix == pytest.approx(t0 + 21.5, abs=0.1)

    def test_refractory_skips_close_onsets(self):
        t0 = 1_700_000_000.0
        evs = [SimEvent(EventKind.ACCIDENT, t0 + 20.0, {}),
               SimEvent(EventKind.NEAR_MISS, t0 + 20.5, {})]
        _, truth = synthesize_eda(evs, "0001", "s", 2, t0, 60.0)
        assert len(truth) == 1


class TestScenarioYaml:
    def test_roundtrip(self, tmp_path):
        cfg = ScenarioConfig(avatar=AvatarBehaviour.CONSERVATIVE,
                             median=True, seed=42)
        save_scenario_yaml(cfg, tmp_path / "s.yaml")
        back = load_scenario_yaml(tmp_path / "s.yaml")
        assert back.avatar == cfg.avatar
        assert back.median == cfg.median
        assert back.seed == 42
