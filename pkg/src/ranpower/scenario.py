"""Deployment geometry, traffic arrivals, and per-step network state.

A :class:`Scenario` owns the mutable simulation state (pending volumes,
current power levels, user positions).  Each time step it freezes the
physics into a :class:`StepContext`: which users are scheduled, the gain of
every site towards every scheduled user, and the full-power reference rates.
Agents then evaluate candidate joint power assignments against that frozen
context without touching the scenario, and the runner applies exactly one
accepted assignment per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DistanceTooSmall, InvalidConfig
from .radio import (
    MIN_DISTANCE_M,
    MIN_POWER_DBW,
    SPEED_OF_LIGHT_M_S,
    Position,
    dbw_to_watts,
)

SECTOR_WIDTH_DEG = 120.0
MIN_DROP_RADIUS_M = 10.0


@dataclass(frozen=True, eq=False)
class Topology:
    """Static cell grid: site positions, sectorisation and the power set."""

    site_positions: tuple[Position, ...]
    isd_m: float
    power_levels_dbw: np.ndarray
    sectors_per_site: int = 3
    boresights_deg: tuple[float, ...] = (0.0, 120.0, 240.0)
    backlobe_atten_db: float = 25.0

    def __post_init__(self) -> None:
        if self.isd_m <= 0.0:
            raise InvalidConfig(f"inter-site distance {self.isd_m} must be positive")
        if self.sectors_per_site != len(self.boresights_deg):
            raise InvalidConfig("one boresight per sector is required")
        levels = np.asarray(self.power_levels_dbw, dtype=float)
        if levels.size < 2:
            raise InvalidConfig("at least two power levels are required")
        if np.any(np.diff(levels) <= 0.0):
            raise InvalidConfig("power levels must be strictly ascending")
        if levels[0] < MIN_POWER_DBW:
            raise InvalidConfig(
                f"lowest power level {levels[0]} dBW is below the "
                f"{MIN_POWER_DBW} dBW guard"
            )
        object.__setattr__(self, "power_levels_dbw", levels)

    @property
    def n_sites(self) -> int:
        return len(self.site_positions)

    @property
    def n_levels(self) -> int:
        return int(self.power_levels_dbw.size)

    @property
    def p_max_dbw(self) -> float:
        return float(self.power_levels_dbw[-1])


@dataclass(frozen=True)
class RadioParams:
    """Antenna, spectrum and noise constants shared by every link."""

    fc_hz: float = 2.6e9
    tx_gain_dbi: float = 17.0
    rx_gain_dbi: float = 0.0
    path_loss_exponent: float = 1.0
    bandwidth_hz: float = 1e7
    noise_dbw: float = -125.0
    bs_height_m: float = 25.0
    user_height_m: float = 1.5

    @property
    def tx_gain_lin(self) -> float:
        return 10.0 ** (self.tx_gain_dbi / 10.0)

    @property
    def rx_gain_lin(self) -> float:
        return 10.0 ** (self.rx_gain_dbi / 10.0)

    @property
    def noise_w(self) -> float:
        return dbw_to_watts(self.noise_dbw)


def power_level_set(p_max_dbw: float, delta_p_max_db: float, n_levels: int) -> np.ndarray:
    """Evenly spaced dBW levels on [p_max - delta_p_max, p_max], ascending."""
    if n_levels < 2:
        raise InvalidConfig(f"need at least 2 power levels, got {n_levels}")
    if delta_p_max_db <= 0.0:
        raise InvalidConfig(f"power adjustment range {delta_p_max_db} must be positive")
    lo = p_max_dbw - delta_p_max_db
    if lo < MIN_POWER_DBW:
        raise InvalidConfig(
            f"lowest level {lo} dBW would undercut the {MIN_POWER_DBW} dBW guard"
        )
    return np.linspace(lo, p_max_dbw, n_levels)


def hex_site_positions(rings: int, isd_m: float, height_m: float) -> tuple[Position, ...]:
    """Hexagonal grid positions: 1 + 3*rings*(rings+1) sites, centre first."""
    if rings < 0:
        raise InvalidConfig(f"ring count {rings} must be non-negative")
    sites: list[tuple[int, float, float, float]] = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            s = -q - r
            ring = max(abs(q), abs(r), abs(s))
            if ring > rings:
                continue
            x = isd_m * (q + 0.5 * r)
            y = isd_m * (math.sqrt(3.0) / 2.0) * r
            sites.append((ring, math.atan2(y, x) % (2.0 * math.pi), x, y))
    sites.sort(key=lambda t: (t[0], t[1]))
    return tuple(Position(x, y, height_m) for _, _, x, y in sites)


def build_topology(
    rings: int,
    isd_m: float,
    p_max_dbw: float,
    delta_p_max_db: float,
    n_levels: int,
    bs_height_m: float = 25.0,
    sectors_per_site: int = 3,
    backlobe_atten_db: float = 25.0,
) -> Topology:
    """Standard hex deployment with per-site sectors and a shared power set."""
    if sectors_per_site < 1:
        raise InvalidConfig(f"sector count {sectors_per_site} must be positive")
    boresights = tuple(
        i * 360.0 / sectors_per_site for i in range(sectors_per_site)
    )
    return Topology(
        site_positions=hex_site_positions(rings, isd_m, bs_height_m),
        isd_m=isd_m,
        power_levels_dbw=power_level_set(p_max_dbw, delta_p_max_db, n_levels),
        sectors_per_site=sectors_per_site,
        boresights_deg=boresights,
        backlobe_atten_db=backlobe_atten_db,
    )


def drop_users(
    topo: Topology,
    per_sector: int,
    rng: np.random.Generator,
    user_height_m: float = 1.5,
) -> list[Position]:
    """Drop ``per_sector`` users uniformly in each sector's annular wedge.

    Radii span [10 m, isd/2] with uniform density in area; azimuths stay
    inside the sector's 120-degree arc around its boresight.
    """
    if per_sector < 1:
        raise InvalidConfig(f"per-sector user count {per_sector} must be positive")
    r_lo = MIN_DROP_RADIUS_M
    r_hi = topo.isd_m / 2.0
    if r_hi <= r_lo:
        raise InvalidConfig(f"isd {topo.isd_m} m leaves no room for the user annulus")
    users: list[Position] = []
    half = SECTOR_WIDTH_DEG / 2.0
    for site in topo.site_positions:
        for boresight in topo.boresights_deg:
            for _ in range(per_sector):
                radius = math.sqrt(rng.uniform(r_lo**2, r_hi**2))
                azim = math.radians(boresight + rng.uniform(-half, half))
                users.append(
                    Position(
                        site.x + radius * math.cos(azim),
                        site.y + radius * math.sin(azim),
                        user_height_m,
                    )
                )
    return users


def sector_gain_matrix(
    topo: Topology,
    radio: RadioParams,
    user_xy: np.ndarray,
    user_h: float,
    clamp: bool = False,
) -> np.ndarray:
    """Channel gain from every (site, sector) to every user, shape (B, S, U).

    The antenna pattern is ideal: full transmit gain inside the sector's arc
    and a flat backlobe attenuation outside it.  With ``clamp`` the distance
    is floored at the model minimum instead of raising; the moving-user path
    uses that so a drifting user cannot crash a long run.
    """
    site_xy = np.array([[p.x, p.y] for p in topo.site_positions])
    dxy = user_xy[None, :, :] - site_xy[:, None, :]
    planar = np.hypot(dxy[:, :, 0], dxy[:, :, 1])
    dz = user_h - radio.bs_height_m
    dist = np.sqrt(planar**2 + dz**2)
    if clamp:
        dist = np.maximum(dist, MIN_DISTANCE_M)
    elif np.any(dist < MIN_DISTANCE_M):
        raise DistanceTooSmall("a user sits closer to a site than the model allows")

    angles = np.degrees(np.arctan2(dxy[:, :, 1], dxy[:, :, 0])) % 360.0
    boresights = np.asarray(topo.boresights_deg)
    offset = (angles[:, None, :] - boresights[None, :, None] + SECTOR_WIDTH_DEG / 2.0) % 360.0
    in_arc = offset < SECTOR_WIDTH_DEG
    pattern = np.where(in_arc, 1.0, 10.0 ** (-topo.backlobe_atten_db / 10.0))
    path = (
        SPEED_OF_LIGHT_M_S / (4.0 * math.pi * radio.fc_hz * dist)
    ) ** radio.path_loss_exponent
    return radio.tx_gain_lin * pattern * path[:, None, :] * radio.rx_gain_lin


def associate_max_rsrp(
    topo: Topology, radio: RadioParams, user_positions: Sequence[Position]
) -> tuple[np.ndarray, np.ndarray]:
    """Attach each user to the (site, sector) with the strongest full-power RSRP.

    Ties resolve to the lowest site id, then the lowest sector id.
    """
    user_xy = np.array([[p.x, p.y] for p in user_positions])
    gains = sector_gain_matrix(topo, radio, user_xy, radio.user_height_m)
    n_users = user_xy.shape[0]
    flat = gains.reshape(-1, n_users)
    best = np.argmax(flat, axis=0)
    return best // topo.sectors_per_site, best % topo.sectors_per_site


@dataclass(frozen=True)
class ArrivalConfig:
    """Bernoulli request arrivals with a slow sinusoidal load modulation."""

    p0: float = 0.3
    period_steps: int = 500
    volume_lo_bits: float = 2e4
    volume_hi_bits: float = 2e5

    def __post_init__(self) -> None:
        if not 0.0 <= self.p0 <= 1.0:
            raise InvalidConfig(f"arrival probability {self.p0} must lie in [0, 1]")
        if self.period_steps < 0:
            raise InvalidConfig("modulation period must be non-negative")
        if self.volume_lo_bits <= 0.0 or self.volume_hi_bits < self.volume_lo_bits:
            raise InvalidConfig("traffic volume range is empty or non-positive")

    def probability(self, t: int) -> float:
        if self.period_steps == 0:
            return self.p0
        p = self.p0 * (1.0 + 0.5 * math.sin(2.0 * math.pi * t / self.period_steps))
        return min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class TrafficRequest:
    user: int
    volume_bits: float
    arrival_step: int


def generate_traffic(
    t: int,
    idle_users: np.ndarray,
    rng: np.random.Generator,
    cfg: ArrivalConfig,
) -> list[TrafficRequest]:
    """Draw this step's new requests for the currently idle users."""
    if idle_users.size == 0:
        return []
    p = cfg.probability(t)
    hits = rng.random(idle_users.size) < p
    volumes = rng.uniform(cfg.volume_lo_bits, cfg.volume_hi_bits, idle_users.size)
    return [
        TrafficRequest(int(u), float(v), t)
        for u, v, hit in zip(idle_users, volumes, hits)
        if hit
    ]


@dataclass(frozen=True, eq=False)
class StepEval:
    """Outcome of one candidate joint power assignment on a frozen step."""

    power_idx: np.ndarray
    power_dbw: np.ndarray
    user_rates_bps: np.ndarray
    rate_bps: np.ndarray
    power_delta_db: np.ndarray
    rate_delta_bps: np.ndarray
    rate_delta_sum: float
    link_ee: np.ndarray
    network_ee: float


@dataclass(frozen=True, eq=False)
class StepContext:
    """Frozen physics of one time step, shared by every candidate evaluation."""

    t: int
    n_sites: int
    phi: np.ndarray
    active_sites: np.ndarray
    power_levels_dbw: np.ndarray
    power_levels_w: np.ndarray
    sched_users: np.ndarray
    sched_site: np.ndarray
    serving_gain: np.ndarray
    site_to_user_gain: np.ndarray
    residual_bits: np.ndarray
    ref_rate_bps: np.ndarray
    features: np.ndarray
    noise_w: float
    bandwidth_hz: float
    slot_s: float
    volume_scale_bits: float
    rsrp_floor_dbw: float

    @property
    def n_levels(self) -> int:
        return int(self.power_levels_dbw.size)

    @property
    def any_active(self) -> bool:
        return bool(self.active_sites.size)

    def _user_rates(self, power_w: np.ndarray) -> np.ndarray:
        total = power_w @ self.site_to_user_gain
        cols = np.arange(self.sched_users.size)
        own = power_w[self.sched_site] * self.site_to_user_gain[self.sched_site, cols]
        serving = power_w[self.sched_site] * self.serving_gain
        snr = serving / (total - own + self.noise_w)
        return self.bandwidth_hz * np.log2(1.0 + snr)

    def evaluate(self, power_idx: np.ndarray) -> StepEval:
        """Rates, deltas and efficiencies under one joint power assignment.

        Sleeping sites neither transmit nor count toward averages regardless
        of the index they carry.
        """
        power_idx = np.asarray(power_idx)
        power_dbw = self.power_levels_dbw[power_idx]
        power_w = self.power_levels_w[power_idx] * self.phi
        rates = self._user_rates(power_w)
        rate_b = np.bincount(
            self.sched_site, weights=rates, minlength=self.n_sites
        )
        power_delta = self.phi * (self.power_levels_dbw[-1] - power_dbw)
        rate_delta = self.phi * (self.ref_rate_bps - rate_b)
        link_ee = self.phi * (rate_b / 1e6) / power_dbw
        n_active = self.phi.sum()
        network_ee = float(link_ee.sum() / n_active) if n_active else 0.0
        return StepEval(
            power_idx=power_idx,
            power_dbw=power_dbw,
            user_rates_bps=rates,
            rate_bps=rate_b,
            power_delta_db=power_delta,
            rate_delta_bps=rate_delta,
            rate_delta_sum=float(rate_delta.sum()),
            link_ee=link_ee,
            network_ee=network_ee,
        )

    def drained_residual(self, ev: StepEval) -> np.ndarray:
        """Pending volume of each scheduled user after serving one slot."""
        return np.maximum(self.residual_bits - ev.user_rates_bps * self.slot_s, 0.0)

    def next_features(self, ev: StepEval) -> np.ndarray:
        """Per-site (volume, RSRP) features after applying ``ev``, shape (B, 2)."""
        return self._site_features(
            self.drained_residual(ev), self.power_levels_w[ev.power_idx]
        )

    def _site_features(self, residual: np.ndarray, power_w: np.ndarray) -> np.ndarray:
        feats = np.zeros((self.n_sites, 2))
        if self.sched_users.size == 0:
            return feats
        volume_b = np.bincount(
            self.sched_site, weights=residual, minlength=self.n_sites
        )
        rsrp_u = power_w[self.sched_site] * self.serving_gain
        rsrp_sum = np.bincount(
            self.sched_site, weights=rsrp_u, minlength=self.n_sites
        )
        counts = np.bincount(self.sched_site, minlength=self.n_sites)
        act = counts > 0
        feats[act, 0] = volume_b[act] / self.volume_scale_bits
        mean_rsrp = rsrp_sum[act] / counts[act]
        rsrp_dbw = 10.0 * np.log10(mean_rsrp)
        feats[act, 1] = (rsrp_dbw - self.rsrp_floor_dbw) / -self.rsrp_floor_dbw
        return feats


class Scenario:
    """Mutable simulation state plus the machinery to freeze each step."""

    def __init__(
        self,
        topo: Topology,
        radio: RadioParams,
        user_positions: Sequence[Position],
        arrival: ArrivalConfig,
        slot_s: float = 1e-3,
        user_speed_mps: float = 0.0,
    ) -> None:
        self.topo = topo
        self.radio = radio
        self.arrival = arrival
        self.slot_s = slot_s
        self.user_speed_mps = user_speed_mps
        self.n_users = len(user_positions)
        if self.n_users == 0:
            raise InvalidConfig("a scenario needs at least one user")
        self.user_xy = np.array([[p.x, p.y] for p in user_positions])
        self.user_h = radio.user_height_m
        self.serving_site, self.serving_sector = associate_max_rsrp(
            topo, radio, user_positions
        )
        self._refresh_gains()
        self.residual_bits = np.zeros(self.n_users)
        self.arrival_step = np.full(self.n_users, -1, dtype=int)
        self.current_power_idx = np.full(topo.n_sites, topo.n_levels - 1, dtype=int)
        self.t = 0
        self._waypoints: np.ndarray | None = None

    def _refresh_gains(self) -> None:
        moving = self.user_speed_mps > 0.0
        self.gains = sector_gain_matrix(
            self.topo, self.radio, self.user_xy, self.user_h, clamp=moving
        )
        users = np.arange(self.n_users)
        self.serving_gain_u = self.gains[self.serving_site, self.serving_sector, users]

    @property
    def idle_users(self) -> np.ndarray:
        return np.flatnonzero(self.residual_bits <= 0.0)

    def spawn_arrivals(self, rng: np.random.Generator) -> int:
        """Draw new requests for idle users; returns how many arrived."""
        requests = generate_traffic(self.t, self.idle_users, rng, self.arrival)
        for req in requests:
            self.residual_bits[req.user] = req.volume_bits
            self.arrival_step[req.user] = req.arrival_step
        return len(requests)

    def _schedule(self) -> tuple[np.ndarray, np.ndarray]:
        """Pick one pending user per sector, oldest request first."""
        pending = np.flatnonzero(self.residual_bits > 0.0)
        order = sorted(pending, key=lambda u: (self.arrival_step[u], u))
        taken: dict[tuple[int, int], int] = {}
        for u in order:
            key = (int(self.serving_site[u]), int(self.serving_sector[u]))
            taken.setdefault(key, u)
        sched = sorted(taken.values(), key=lambda u: (self.serving_site[u], u))
        sched_users = np.asarray(sched, dtype=int)
        phi = np.zeros(self.topo.n_sites)
        if sched_users.size:
            phi[self.serving_site[sched_users]] = 1.0
        return sched_users, phi

    def build_step(self, volume_scale_bits: float) -> StepContext:
        """Freeze the current step: scheduling, gains, reference rates, features."""
        sched_users, phi = self._schedule()
        sched_site = self.serving_site[sched_users]
        n_sites = self.topo.n_sites

        sector_active = np.zeros((n_sites, self.topo.sectors_per_site), dtype=bool)
        for u in sched_users:
            sector_active[self.serving_site[u], self.serving_sector[u]] = True
        site_gain = np.where(sector_active[:, :, None], self.gains[:, :, sched_users], 0.0)
        site_to_user = site_gain.sum(axis=1) if sched_users.size else np.zeros(
            (n_sites, 0)
        )

        levels = self.topo.power_levels_dbw
        ctx = StepContext(
            t=self.t,
            n_sites=n_sites,
            phi=phi,
            active_sites=np.flatnonzero(phi),
            power_levels_dbw=levels,
            power_levels_w=10.0 ** (levels / 10.0),
            sched_users=sched_users,
            sched_site=sched_site,
            serving_gain=self.serving_gain_u[sched_users],
            site_to_user_gain=site_to_user,
            residual_bits=self.residual_bits[sched_users].copy(),
            ref_rate_bps=np.zeros(n_sites),
            features=np.zeros((n_sites, 2)),
            noise_w=self.radio.noise_w,
            bandwidth_hz=self.radio.bandwidth_hz,
            slot_s=self.slot_s,
            volume_scale_bits=volume_scale_bits,
            rsrp_floor_dbw=self.radio.noise_dbw,
        )
        if sched_users.size:
            full = np.full(n_sites, self.topo.n_levels - 1)
            ref = ctx.evaluate(full)
            ctx.ref_rate_bps[:] = ref.rate_bps
            ctx.features[:] = ctx._site_features(
                ctx.residual_bits, ctx.power_levels_w[self.current_power_idx]
            )
        return ctx

    def apply(self, ctx: StepContext, ev: StepEval, rng: np.random.Generator | None = None) -> None:
        """Advance the state by one slot under the accepted assignment."""
        if ctx.sched_users.size:
            self.residual_bits[ctx.sched_users] = ctx.drained_residual(ev)
            done = ctx.sched_users[self.residual_bits[ctx.sched_users] <= 0.0]
            self.arrival_step[done] = -1
            active = ctx.active_sites
            self.current_power_idx[active] = ev.power_idx[active]
        self.t += 1
        if self.user_speed_mps > 0.0 and rng is not None:
            self._move_users(rng)

    def _move_users(self, rng: np.random.Generator) -> None:
        """Random-waypoint drift: walk toward a waypoint, redraw on arrival."""
        if self._waypoints is None:
            self._waypoints = self._draw_waypoints(rng, np.arange(self.n_users))
        step = self.user_speed_mps * self.slot_s
        delta = self._waypoints - self.user_xy
        dist = np.hypot(delta[:, 0], delta[:, 1])
        arrived = dist <= step
        far = ~arrived & (dist > 0.0)
        self.user_xy[far] += delta[far] * (step / dist[far])[:, None]
        self.user_xy[arrived] = self._waypoints[arrived]
        if np.any(arrived):
            self._waypoints[arrived] = self._draw_waypoints(
                rng, np.flatnonzero(arrived)
            )
        self._refresh_gains()

    def _draw_waypoints(self, rng: np.random.Generator, users: np.ndarray) -> np.ndarray:
        sites = np.array([[p.x, p.y] for p in self.topo.site_positions])
        anchors = sites[self.serving_site[users]]
        radius = np.sqrt(
            rng.uniform(MIN_DROP_RADIUS_M**2, (self.topo.isd_m / 2.0) ** 2, users.size)
        )
        theta = rng.uniform(0.0, 2.0 * math.pi, users.size)
        return anchors + np.stack(
            [radius * np.cos(theta), radius * np.sin(theta)], axis=1
        )
