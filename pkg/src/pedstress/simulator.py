"""Headless crossing-scenario generator.

Produces deterministic 10 Hz trajectories for vehicles, an optional avatar,
and a scripted pedestrian agent; emits scenario events (vehicle passes,
near misses, accidents, blackouts); and synthesizes 100 Hz electrodermal
traces with ground-truth SCR injections keyed to those events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import pandas as pd
import yaml

from .decomposition import ImpulseResponse
from .segmentation import CrossingGeometry, Segment, Trajectory, preset_geometry, segment_of
from .signal import EdaTrace

SIM_RATE_HZ = 10.0
EDA_RATE_HZ = 100.0
SESSION_DURATION_S = 60.0
BASE_EPOCH = 1_700_000_000.0

VEHICLE_LENGTH_M = 4.5
VEHICLE_WIDTH_M = 1.8
BRAKE_DECEL = 3.0
ACCEL = 2.0
NEAR_MISS_TTC_S = 1.5

WALK_SPEED_CONSERVATIVE = 1.0
RUN_SPEED_ADVENTUROUS = 2.0

SPAWN_DISTANCE_M = 120.0


class VehicleType(str, Enum):
    NORMAL = "Normal"
    AV_ROOF_SIGN = "AvRoofSign"
    AV_EHMI = "AvEhmi"


class AvatarBehaviour(str, Enum):
    NONE = "None"
    STANDING = "Standing"
    CONSERVATIVE = "Conservative"
    ADVENTUROUS = "Adventurous"


class TrafficRegime(str, Enum):
    HIGH_ARRIVAL_LOW_SPEED = "HighArrivalLowSpeed"
    LOW_ARRIVAL_HIGH_SPEED = "LowArrivalHighSpeed"


class TimeOfDay(str, Enum):
    DAY = "Day"
    NIGHT = "Night"


class Weather(str, Enum):
    CLEAR = "Clear"
    RAIN = "Rain"
    SNOW = "Snow"


class EventKind(str, Enum):
    VEHICLE_PASS = "VehiclePass"
    AVATAR_START_CROSS = "AvatarStartCross"
    AVATAR_FINISH_CROSS = "AvatarFinishCross"
    PED_ENTER_LANE1 = "PedestrianEnterLane1"
    PED_ENTER_LANE2 = "PedestrianEnterLane2"
    NEAR_MISS = "NearMiss"
    ACCIDENT = "Accident"
    SCREEN_BLACKOUT = "ScreenBlackout"


@dataclass(frozen=True)
class TrafficRegimeParams:
    """Per-lane stream parameters: target flow, cruise speed, and the
    spacing implied by constant-headway arrivals."""

    flow_veh_h: float
    max_speed_kmh: float

    @property
    def speed_ms(self) -> float:
        return self.max_speed_kmh / 3.6

    @property
    def headway_s(self) -> float:
        return 3600.0 / self.flow_veh_h

    @property
    def spacing_m(self) -> float:
        return self.speed_ms * self.headway_s


REGIME_PARAMS = {
    TrafficRegime.HIGH_ARRIVAL_LOW_SPEED: TrafficRegimeParams(1200.0, 20.0),
    TrafficRegime.LOW_ARRIVAL_HIGH_SPEED: TrafficRegimeParams(1113.0, 40.0),
}


@dataclass(frozen=True)
class PedestrianPolicy:
    """Gap-acceptance test fixture standing in for a human participant."""

    walk_speed: float = 1.4
    critical_gap_s: float = 2.5
    gap_noise_sd: float = 0.3
    # Probability the agent also checks the far lane before committing;
    # inattention is what produces lane-2 surprises.
    far_lane_attention: float = 0.9
    # Seconds of waiting per second of gap-threshold relaxation; keeps the
    # agent from standing at the curb forever under dense traffic.
    impatience_per_s: float = 0.05
    min_gap_s: float = 1.8


@dataclass(frozen=True)
class ScenarioConfig:
    """One session's factor levels."""

    vehicle_type: VehicleType = VehicleType.NORMAL
    avatar: AvatarBehaviour = AvatarBehaviour.NONE
    traffic_regime: TrafficRegime = TrafficRegime.HIGH_ARRIVAL_LOW_SPEED
    median: bool = False
    time_of_day: TimeOfDay = TimeOfDay.DAY
    weather: Weather = Weather.CLEAR
    av_share: float = 0.0
    duration_s: float = SESSION_DURATION_S
    seed: int = 0
    policy: PedestrianPolicy = field(default_factory=PedestrianPolicy)

    def to_dict(self) -> dict:
        return {
            "vehicle_type": self.vehicle_type.value,
            "avatar": self.avatar.value,
            "traffic_regime": self.traffic_regime.value,
            "median": self.median,
            "time_of_day": self.time_of_day.value,
            "weather": self.weather.value,
            "av_share": self.av_share,
            "duration_s": self.duration_s,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(
            vehicle_type=VehicleType(d.get("vehicle_type", "Normal")),
            avatar=AvatarBehaviour(d.get("avatar", "None")),
            traffic_regime=TrafficRegime(d.get("traffic_regime",
                                               "HighArrivalLowSpeed")),
            median=bool(d.get("median", False)),
            time_of_day=TimeOfDay(d.get("time_of_day", "Day")),
            weather=Weather(d.get("weather", "Clear")),
            av_share=float(d.get("av_share", 0.0)),
            duration_s=float(d.get("duration_s", SESSION_DURATION_S)),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class SimEvent:
    kind: EventKind
    unix: float
    payload: dict = field(default_factory=dict)


@dataclass
class TrafficStats:
    flow_veh_h: float
    mean_speed_kmh: float
    mean_gap_s: float
    mean_clearance_m: float


# ---------------------------------------------------------------------------
# Traffic streams


@dataclass
class _Vehicle:
    entity_id: str
    lane: int          # 1 = near lane, 2 = far lane
    direction: float   # +1 rightward, -1 leftward
    x: float           # front-bumper position
    speed: float
    vmax: float
    is_av: bool


def _lane_arrival_times(params: TrafficRegimeParams, duration: float,
                        offset: float) -> np.ndarray:
    """Front-bumper pass times at the crossing line (x = 0) for one
    constant-headway lane stream."""
    h = params.headway_s
    return np.arange(offset, duration, h)


def generate_traffic(regime: TrafficRegime, duration_s: float, seed: int):
    """Constant-headway vehicle streams for both lanes plus measured stats.

    Stats follow the regime-table arithmetic: flow from pass counts at the
    crossing line, gap as the time between successive vehicles in a lane,
    and clearance as the distance covered at cruise speed over that gap
    (speed x gap).
    """
    params = REGIME_PARAMS[TrafficRegime(regime)]
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(0.0, params.headway_s, size=2)
    passes = {lane: _lane_arrival_times(params, duration_s, offsets[lane - 1])
              for lane in (1, 2)}
    gaps = np.concatenate([np.diff(passes[1]), np.diff(passes[2])])
    n_passes = sum(len(p) for p in passes.values())
    flow = (n_passes / 2) / duration_s * 3600.0
    stats = TrafficStats(
        flow_veh_h=flow,
        mean_speed_kmh=params.max_speed_kmh,
        mean_gap_s=float(gaps.mean()) if gaps.size else math.nan,
        mean_clearance_m=float((gaps * params.speed_ms).mean())
        if gaps.size else math.nan,
    )
    return passes, params, stats


# ---------------------------------------------------------------------------
# Scenario stepping


@dataclass
class _Agent:
    x: float
    y: float
    speed: float = 0.0
    state: str = "approach"
    done: bool = False


class Simulation:
    """Deterministic 10 Hz stepper for one session."""

    def __init__(self, config: ScenarioConfig,
                 participant_id: str = "0001", session_id: str | None = None):
        self.config = config
        self.participant_id = participant_id
        self.session_id = session_id or (
            f"Participant_{participant_id}_seed_{config.seed}")
        self.geom = preset_geometry(config.median)
        self.params = REGIME_PARAMS[config.traffic_regime]
        self.rng = np.random.default_rng(config.seed)
        self.dt = 1.0 / SIM_RATE_HZ
        self.t0 = BASE_EPOCH + 1000.0 * (config.seed % 100000)

        self.lane_y = self._lane_centers()
        self.spawn_offsets = self.rng.uniform(0.0, self.params.headway_s,
                                              size=2)
        self.vehicles: list[_Vehicle] = []
        self._spawned = {1: 0, 2: 0}
        self.events: list[SimEvent] = []
        self.frames: list[tuple] = []
        self.accident = False
        self.finished = False

        policy = config.policy
        gap_noise = float(self.rng.normal(0.0, policy.gap_noise_sd))
        self._critical_gap = max(1.0, policy.critical_gap_s + gap_noise)
        self._checks_far_lane = bool(self.rng.random()
                                     < policy.far_lane_attention)
        self.ped = _Agent(x=0.0, y=0.0, speed=policy.walk_speed)
        self._ped_segment = Segment.SIDEWALK
        self._wait_s = 0.0
        # standing point just short of the far lane's vehicle strike zone
        self._lane2_check_y = self.lane_y[2] - VEHICLE_WIDTH_M / 2.0 - 0.5

        self.avatar: _Agent | None = None
        if config.avatar != AvatarBehaviour.NONE:
            self.avatar = _Agent(x=1.5, y=self.geom.sidewalk_depth + 0.3)
        self._avatar_speed = {
            AvatarBehaviour.STANDING: 0.0,
            AvatarBehaviour.CONSERVATIVE: WALK_SPEED_CONSERVATIVE,
            AvatarBehaviour.ADVENTUROUS: RUN_SPEED_ADVENTUROUS,
        }.get(config.avatar, 0.0)
        self._avatar_gap = {
            AvatarBehaviour.CONSERVATIVE: 2.0,
            AvatarBehaviour.ADVENTUROUS: 1.2,
        }.get(config.avatar, math.inf)

    # -- geometry helpers

    def _lane_centers(self) -> dict[int, float]:
        g = self.geom
        y1 = g.curb_y + g.lane_width / 2.0
        y2 = g.curb_y + g.lane_width + g.median_width + g.lane_width / 2.0
        return {1: y1, 2: y2}

    def _in_lane(self, y: float, lane: int, margin: float = 0.0) -> bool:
        c = self.lane_y[lane]
        half = self.geom.lane_width / 2.0 + margin
        return c - half <= y <= c + half

    # -- vehicle stream

    def _maybe_spawn(self, t_rel: float) -> None:
        h = self.params.headway_s
        speed = self.params.speed_ms
        travel = SPAWN_DISTANCE_M / speed
        for lane in (1, 2):
            direction = 1.0 if lane == 1 else -1.0
            while True:
                # scheduled front-bumper arrival at the crossing line
                due = self.spawn_offsets[lane - 1] + self._spawned[lane] * h
                if t_rel < due - travel:
                    break
                i = self._spawned[lane]
                is_av = bool(self.rng.random() < self.config.av_share) \
                    if 0 < self.config.av_share < 1 else self.config.av_share >= 1
                self.vehicles.append(_Vehicle(
                    entity_id=f"veh_l{lane}_{i}", lane=lane,
                    direction=direction, x=-direction * speed * (due - t_rel),
                    speed=speed, vmax=speed, is_av=is_av))
                self._spawned[lane] += 1

    def _conflict_agents(self, lane: int) -> list[_Agent]:
        out = []
        for agent in filter(None, [self.ped, self.avatar]):
            if agent.done:
                continue
            # committed crossers are visible a little before lane entry so
            # vehicles can yield rather than clip them at the lane edge
            margin = 1.8 if agent.state in ("crossing", "median_wait") else 0.0
            if self._in_lane(agent.y, lane, margin):
                out.append(agent)
            elif (self.config.vehicle_type == VehicleType.AV_EHMI
                  and agent is self.avatar
                  and agent.state == "waiting"):
                # eHMI AVs stop for avatars waiting at the curb
                out.append(agent)
        return out

    def _step_vehicles(self, t: float) -> None:
        by_lane: dict[int, list[_Vehicle]] = {1: [], 2: []}
        for v in self.vehicles:
            by_lane[v.lane].append(v)
        for lane, vs in by_lane.items():
            # sort by progress along travel direction, leaders first
            vs.sort(key=lambda v: -v.direction * v.x)
            leader: _Vehicle | None = None
            conflicts = self._conflict_agents(lane)
            for v in vs:
                target = v.vmax
                # obstruction ahead: agent in the lane ahead of the bumper
                brake = False
                for agent in conflicts:
                    ahead = (agent.x - v.x) * v.direction
                    if -1.0 < ahead < 40.0:
                        stop_gap = ahead - 2.0
                        if stop_gap <= 0.5:
                            brake = True
                        elif v.speed ** 2 > 2 * BRAKE_DECEL * stop_gap:
                            brake = True
                if leader is not None:
                    clearance = (leader.x - v.x) * v.direction - VEHICLE_LENGTH_M
                    if clearance < max(2.0, v.speed * 1.0):
                        target = min(target, leader.speed)
                        if clearance < 2.0:
                            brake = True
                if brake:
                    v.speed = max(0.0, v.speed - BRAKE_DECEL * self.dt)
                elif v.speed < target:
                    v.speed = min(target, v.speed + ACCEL * self.dt)
                else:
                    v.speed = target
                prev_x = v.x
                v.x += v.direction * v.speed * self.dt
                if (prev_x * v.direction < 0.0) and (v.x * v.direction >= 0.0):
                    self.events.append(SimEvent(
                        EventKind.VEHICLE_PASS, t,
                        {"entity_id": v.entity_id, "lane": lane}))
                leader = v
        self.vehicles = [v for v in self.vehicles
                         if abs(v.x) < SPAWN_DISTANCE_M + 2 * VEHICLE_LENGTH_M]

    # -- gap measurement as seen from the curb

    def _time_to_next_vehicle(self, lane: int) -> float:
        best = math.inf
        for v in self.vehicles:
            if v.lane != lane:
                continue
            dist = -v.x * v.direction   # distance of front bumper to x=0
            if dist > 0 and v.speed > 0.01:
                best = min(best, dist / v.speed)
            elif dist <= 0 and -dist < VEHICLE_LENGTH_M + 0.5:
                # a body is still sliding across the crossing line
                best = 0.0
        return best

    # -- avatar

    def _step_avatar(self, t: float) -> None:
        a = self.avatar
        if a is None or a.done:
            return
        g = self.geom
        if a.state == "approach":
            a.state = "waiting"
        elif a.state == "waiting":
            if self._avatar_speed > 0:
                # commits on the near-lane gap; far-lane vehicles yield
                if self._time_to_next_vehicle(1) >= self._avatar_gap:
                    a.state = "crossing"
                    self.events.append(SimEvent(
                        EventKind.AVATAR_START_CROSS, t, {"x": a.x}))
        elif a.state == "crossing":
            a.y += self._avatar_speed * self.dt
            if a.y >= g.curb_y + 6.0:
                a.state = "done"
                a.done = True
                self.events.append(SimEvent(
                    EventKind.AVATAR_FINISH_CROSS, t, {"x": a.x}))

    # -- pedestrian

    def _step_pedestrian(self, t: float) -> None:
        p = self.ped
        if p.done:
            return
        g = self.geom
        policy = self.config.policy
        if p.state in ("waiting", "median_wait"):
            self._wait_s += self.dt
        if p.state == "approach":
            p.y += policy.walk_speed * self.dt
            if p.y >= g.sidewalk_depth + g.waiting_depth / 2.0:
                p.state = "waiting"
        elif p.state == "waiting":
            if self._time_to_next_vehicle(1) >= self._relaxed_need():
                p.state = "crossing"
        elif p.state == "crossing":
            # resolve the far lane on arrival: pause at the median, or at
            # the lane boundary on an undivided road (if paying attention)
            if p.y < self._lane2_check_y <= p.y + policy.walk_speed * self.dt:
                if (self.config.median or self._checks_far_lane) \
                        and self._time_to_next_vehicle(2) < self._relaxed_need():
                    p.state = "median_wait"
            if p.state == "crossing":
                p.y += policy.walk_speed * self.dt
            if p.y >= g.curb_y + 6.0 + 0.5:
                p.state = "finished"
                p.done = True
                self.finished = True
        elif p.state == "median_wait":
            if self._time_to_next_vehicle(2) >= self._relaxed_need():
                p.state = "crossing"

        seg = segment_of((p.x, p.y), self.geom)
        if seg != self._ped_segment:
            if seg == Segment.LANE1:
                self.events.append(SimEvent(EventKind.PED_ENTER_LANE1, t,
                                            {"y": p.y}))
            elif seg == Segment.LANE2:
                self.events.append(SimEvent(EventKind.PED_ENTER_LANE2, t,
                                            {"y": p.y}))
            self._ped_segment = seg

    def _relaxed_need(self) -> float:
        """Accepted time gap, relaxed by time already spent standing."""
        policy = self.config.policy
        return max(policy.min_gap_s,
                   self._critical_gap
                   - policy.impatience_per_s * self._wait_s)

    # -- collision and near-miss checks

    def _check_conflicts(self, t: float) -> None:
        p = self.ped
        if p.done or self.accident:
            return
        for lane in (1, 2):
            # strike zone is the vehicle body width, not the whole lane
            if abs(p.y - self.lane_y[lane]) > VEHICLE_WIDTH_M / 2.0 + 0.3:
                continue
            for v in self.vehicles:
                if v.lane != lane:
                    continue
                rear = v.x - v.direction * VEHICLE_LENGTH_M
                x_lo, x_hi = min(v.x, rear), max(v.x, rear)
                overlap = (x_lo - 0.3 <= p.x <= x_hi + 0.3)
                if overlap:
                    # blackout just before the moment of impact
                    self.events.append(SimEvent(
                        EventKind.SCREEN_BLACKOUT, max(t - self.dt, self.t0),
                        {"entity_id": v.entity_id}))
                    self.events.append(SimEvent(
                        EventKind.ACCIDENT, t, {"entity_id": v.entity_id}))
                    self.accident = True
                    p.done = True
                    return
                approach = (p.x - v.x) * v.direction
                if approach > 0 and v.speed > 0.01:
                    ttc = approach / v.speed
                    if ttc < NEAR_MISS_TTC_S:
                        recent = [e for e in self.events
                                  if e.kind == EventKind.NEAR_MISS
                                  and t - e.unix < 2.0]
                        if not recent:
                            self.events.append(SimEvent(
                                EventKind.NEAR_MISS, t,
                                {"entity_id": v.entity_id, "ttc": ttc}))

    # -- main loop

    def run(self) -> "SessionResult":
        n_steps = int(round(self.config.duration_s * SIM_RATE_HZ))
        for step in range(n_steps):
            t_rel = step * self.dt
            t = self.t0 + t_rel
            self._maybe_spawn(t_rel)
            self._step_vehicles(t)
            self._step_avatar(t)
            self._step_pedestrian(t)
            self._check_conflicts(t)
            self._record_frame(t)
        traj = self._trajectory()
        return SessionResult(
            participant_id=self.participant_id,
            session_id=self.session_id,
            config=self.config,
            trajectory=traj,
            events=list(self.events),
            accident=self.accident,
            finished=self.finished,
            t0=self.t0,
            duration_s=(self.frames[-1][0] - self.t0 + self.dt)
            if self.frames else 0.0,
        )

    def _record_frame(self, t: float) -> None:
        self.frames.append((t, "participant", "pedestrian",
                            self.ped.x, self.ped.y, math.pi / 2))
        if self.avatar is not None:
            self.frames.append((t, "avatar", "avatar",
                                self.avatar.x, self.avatar.y, math.pi / 2))
        for v in self.vehicles:
            kind = "av" if v.is_av else "vehicle"
            heading = 0.0 if v.direction > 0 else math.pi
            self.frames.append((t, v.entity_id, kind, v.x,
                                self.lane_y[v.lane], heading))

    def _trajectory(self) -> Trajectory:
        df = pd.DataFrame(self.frames, columns=[
            "unix", "entity_id", "entity_kind", "x", "y", "heading"])
        return Trajectory(self.session_id, df)


@dataclass
class SessionResult:
    participant_id: str
    session_id: str
    config: ScenarioConfig
    trajectory: Trajectory
    events: list[SimEvent]
    accident: bool
    finished: bool
    t0: float
    duration_s: float


def run_scenario(config: ScenarioConfig, participant_id: str = "0001",
                 session_id: str | None = None) -> SessionResult:
    return Simulation(config, participant_id, session_id).run()


# ---------------------------------------------------------------------------
# Synthetic electrodermal traces


EVENT_LABELS = {
    EventKind.VEHICLE_PASS: "Traffic speed",
    EventKind.AVATAR_START_CROSS: "Avatar's action",
    EventKind.AVATAR_FINISH_CROSS: "Avatar's action",
    EventKind.PED_ENTER_LANE1: "Decision to cross",
    EventKind.PED_ENTER_LANE2: "Crossing",
    EventKind.NEAR_MISS: "Fear of accident",
    EventKind.ACCIDENT: "Accident",
    EventKind.SCREEN_BLACKOUT: None,
}


@dataclass(frozen=True)
class EdaProfile:
    """Per-participant generator settings for the synthetic sensor.

    Amplitude means are per stimulus label; accident and fear responses
    dominate by construction. A fraction of vehicle passes elicit no
    response at all (habituation), keeping event counts realistic.
    """

    baseline_us: float = 5.0
    noise_sd_us: float = 0.02
    drift_sd_us: float = 0.003
    latency_s: float = 1.5
    amplitude_means: dict = field(default_factory=lambda: {
        "Accident": 2.0,
        "Fear of accident": 1.6,
        "Crossing": 1.1,
        "Decision to cross": 0.9,
        "Avatar's action": 0.5,
        "Traffic speed": 0.35,
    })
    amplitude_rel_sd: float = 0.2
    min_amplitude: float = 0.15
    vehicle_pass_response_p: float = 0.25
    min_inter_onset_s: float = 2.0


@dataclass(frozen=True)
class GroundTruthScr:
    onset_unix: float
    amplitude: float
    label: str


def synthesize_eda(events: list[SimEvent], participant_id: str,
                   session_id: str, seed: int,
                   t0: float, duration_s: float = SESSION_DURATION_S,
                   profile: EdaProfile | None = None,
                   ir: ImpulseResponse | None = None,
                   ) -> tuple[EdaTrace, list[GroundTruthScr]]:
    """100 Hz synthetic sensor output plus the exact injected responses.

    The tonic level is a slow random walk around the profile baseline;
    each qualifying stimulus injects one biexponential SCR whose amplitude
    is drawn from the per-label distribution. Onsets closer than the
    profile's refractory spacing to the previous injection are skipped so
    ground truth stays resolvable.
    """
    if profile is None:
        profile = EdaProfile()
    if ir is None:
        ir = ImpulseResponse()
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * EDA_RATE_HZ))
    t = t0 + np.arange(n) / EDA_RATE_HZ

    drift = np.cumsum(rng.normal(0.0, profile.drift_sd_us, n)) / np.sqrt(EDA_RATE_HZ)
    tonic = profile.baseline_us + drift - drift.mean()

    kernel = ir.kernel(EDA_RATE_HZ)
    sc = tonic.copy()
    truth: list[GroundTruthScr] = []
    last_onset = -math.inf
    for ev in sorted(events, key=lambda e: e.unix):
        label = EVENT_LABELS.get(ev.kind)
        if label is None:
            continue
        if (ev.kind == EventKind.VEHICLE_PASS
                and rng.random() > profile.vehicle_pass_response_p):
            continue
        onset = ev.unix + profile.latency_s
        if onset - last_onset < profile.min_inter_onset_s:
            continue
        idx = int(round((onset - t0) * EDA_RATE_HZ))
        if idx < 0 or idx >= n - 10:
            continue
        mean = profile.amplitude_means.get(label, 0.4)
        amp = max(profile.min_amplitude,
                  float(rng.normal(mean, profile.amplitude_rel_sd * mean)))
        end = min(idx + kernel.size, n)
        sc[idx:end] += amp * kernel[:end - idx]
        truth.append(GroundTruthScr(float(t[idx]), amp, label))
        last_onset = onset

    sc += rng.normal(0.0, profile.noise_sd_us, n)
    sc = np.maximum(sc, 0.0)
    trace = EdaTrace(participant_id, session_id, t, sc, EDA_RATE_HZ,
                     meta={"synthetic": True, "seed": seed})
    return trace, truth


# ---------------------------------------------------------------------------
# File export


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    return value


def save_events_csv(events: list[SimEvent], path) -> None:
    df = pd.DataFrame(
        [{"unix": e.unix, "kind": e.kind.value,
          "payload": yaml.safe_dump({k: _plain(v) for k, v in e.payload.items()},
                                    default_flow_style=True).strip()}
         for e in events], columns=["unix", "kind", "payload"])
    df.to_csv(path, index=False)


def save_ground_truth_csv(truth: list[GroundTruthScr], participant_id: str,
                          session_id: str, path, t0: float | None = None) -> None:
    """SCR-table schema plus the generator's exact amplitude."""
    from .scr import SCR_EXPORT_COLUMNS, classify_amplitude
    rows = []
    for i, g in enumerate(sorted(truth, key=lambda g: g.onset_unix), start=1):
        rows.append({
            "participant_id": participant_id, "session_id": session_id,
            "unix": g.onset_unix,
            "elapsed_time": g.onset_unix - t0 if t0 is not None else math.nan,
            "position": "", "scr_amplitude": g.amplitude,
            "scr_onset_unix": g.onset_unix, "scr_t": math.nan,
            "position_f": "", "amp_class": classify_amplitude(g.amplitude).value
            if g.amplitude >= 0.1 else "",
            "detected_scr_no": i, "annotation": g.label,
            "true_amplitude": g.amplitude})
    df = pd.DataFrame(rows, columns=SCR_EXPORT_COLUMNS + ["true_amplitude"])
    df.to_csv(path, index=False)


def save_scenario_yaml(config: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False)


def load_scenario_yaml(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as f:
        return ScenarioConfig.from_dict(yaml.safe_load(f))
