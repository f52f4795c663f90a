"""Event-driven simulation of a fully connected network of pulse oscillators.

Phases advance at unit rate.  A node reaching phase 1 fires and resets.
Every pulse reaching a node whose state is at least ``1 - epsilon`` makes
it fire at once (absorption); otherwise the state jumps by ``epsilon``.
Absorptions cascade within one instant: each firing node emits its own
pulse, delivered to the remaining nodes in ascending node order.

Nodes that fire in the same instant are merged into a group that shares a
single phase value from then on.  With propagation delays that merge is
not exact, so the delayed engine tracks every node on its own.

A *full cycle* ``i`` runs from the instant every node has fired ``i - 1``
times to the instant every node has fired ``i`` times.  The network is
synchronised at the first instant in which all nodes fire together; the
reported count ``M`` is the full cycle containing that instant.
"""

from __future__ import annotations

import heapq
import json
import math
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .phase import PhaseFunction

ABSORB_SLACK = 1e-12
FIRE = "fire"
ABSORBED = "absorbed"
JAM = "jam"
JAMMER_NODE = -1


@dataclass(frozen=True)
class CouplingConfig:
    n: int
    epsilon: float
    rho: float = 0.0
    delay: tuple | None = None
    cycle_cap: int = 1000

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 2):
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}", "n")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon!r}", "epsilon")
        if not (self.rho >= 0.0):
            raise ConfigError("rho must be non-negative", "rho")
        if not (isinstance(self.cycle_cap, int) and self.cycle_cap >= 1):
            raise ConfigError("cycle_cap must be a positive integer", "cycle_cap")
        if self.delay is not None:
            d = np.asarray(self.delay, dtype=float)
            if d.shape != (self.n, self.n):
                raise ConfigError(f"delay must be a {self.n}x{self.n} matrix", "delay")
            if not np.allclose(d, d.T, rtol=0.0, atol=0.0):
                raise ConfigError("delay matrix must be symmetric", "delay")
            if np.any(d < 0.0) or np.any(d >= 0.5):
                raise ConfigError("delays must lie in [0, 0.5)", "delay")
            object.__setattr__(self, "delay", tuple(tuple(float(v) for v in row) for row in d))

    @property
    def delayed(self) -> bool:
        return self.delay is not None and any(v > 0.0 for row in self.delay for v in row)


@dataclass
class SessionTrace:
    """Everything recorded about one session.

    ``fire_counts`` counts every pulse a node transmitted.  ``counts`` is
    the node's own tally at synchronisation (or at the cap): pulses it
    fired on reaching threshold by itself, i.e. excluding firings forced by
    absorption.  For two nodes ``max(counts) == M``.
    """

    n: int
    pulse_times: list
    fire_counts: list
    counts: list
    sync_cycle: int | None
    sync_time: float | None
    cycles: int
    jam_log: list
    events: list = field(default_factory=list)
    boundary_phases: list = field(default_factory=list)
    boundary_times: list = field(default_factory=list)
    local_sync_times: list = field(default_factory=list)
    max_gap: int = 0

    @property
    def M(self):
        return self.sync_cycle

    @property
    def S(self):
        m = self.sync_cycle
        return [0 if m is None or i < m else 1 for i in range(1, self.cycles + 1)]

    def to_json(self) -> str:
        doc = {
            "nodes": self.n,
            "events": [{"time": t, "node": v, "kind": k} for t, v, k in self.events],
            "S": self.S,
            "M": self.M,
        }
        return json.dumps(doc)


class CycleState:
    """What a jammer sees at the start of a full cycle."""

    def __init__(self, engine, index):
        self._engine = engine
        self.index = index
        self.time = engine.t
        self.phases = engine.node_phases()
        self.pf = engine.pf
        self.epsilon = engine.cfg.epsilon

    def nominal_length(self) -> float:
        """Duration of this cycle if no pulse is injected."""
        return self._engine.clone().time_to_next_cycle()


class _Group:
    __slots__ = ("members", "phase", "last_fire", "fired")

    def __init__(self, members, phase):
        self.members = members
        self.phase = phase
        self.last_fire = -math.inf
        self.fired = False


class _Engine:
    """Zero-delay engine over merged groups."""

    def __init__(self, pf, cfg, phases, record=True):
        self.pf = pf
        self.cfg = cfg
        self.thr = 1.0 - cfg.epsilon - ABSORB_SLACK
        self.record = record
        n = cfg.n
        by_phase = {}
        for i, p in enumerate(phases):
            by_phase.setdefault(float(p), []).append(i)
        self.groups = sorted((_Group(m, ph) for ph, m in by_phase.items()),
                             key=lambda g: g.members[0])
        self.t = 0.0
        self.fire_counts = [0] * n
        self.key_counts = [0] * n
        self.pulse_times = [[] for _ in range(n)]
        self.events = []
        self.received = [False] * n
        self.has_fired = [False] * n
        self.local_sync = [None] * n
        self.synced = False

    def clone(self):
        other = _Engine.__new__(_Engine)
        other.__dict__.update(self.__dict__)
        other.record = False
        other.groups = []
        for g in self.groups:
            c = _Group(g.members, g.phase)
            c.last_fire = g.last_fire
            other.groups.append(c)
        other.fire_counts = list(self.fire_counts)
        other.key_counts = list(self.key_counts)
        other.received = list(self.received)
        other.has_fired = list(self.has_fired)
        other.local_sync = list(self.local_sync)
        other.pulse_times = [[] for _ in self.pulse_times]
        other.events = []
        return other

    def node_phases(self):
        out = [0.0] * self.cfg.n
        for g in self.groups:
            for m in g.members:
                out[m] = g.phase
        return out

    def next_fire_time(self):
        return self.t + (1.0 - max(g.phase for g in self.groups))

    def step(self, jam_at=None):
        """Advance to the next instant and resolve it; return True if it was a jam."""
        lead = max(g.phase for g in self.groups)
        dt = 1.0 - lead
        if jam_at is not None and jam_at < self.t + dt:
            dt = jam_at - self.t
            for g in self.groups:
                g.phase += dt
            self.t = jam_at
            if self.record:
                self.events.append((self.t, JAMMER_NODE, JAM))
            self._resolve([], jam=True)
            return True
        leaders = []
        for g in self.groups:
            if g.phase == lead:
                g.phase = 1.0
                leaders.append(g)
            else:
                g.phase += dt
        self.t += dt
        self._resolve(leaders, jam=False)
        return False

    def _resolve(self, leaders, jam):
        f, inv, eps, thr = self.pf.f, self.pf.inverse, self.cfg.epsilon, self.thr
        rho, t = self.cfg.rho, self.t
        fired = []
        queue = deque()
        if jam:
            queue.append(1)
        for g in leaders:
            g.fired = True
            fired.append((g, FIRE))
            queue.append(len(g.members))
        touched = []
        while queue:
            for _ in range(queue.popleft()):
                for g in self.groups:
                    if g.fired or (rho > 0.0 and t - g.last_fire < rho):
                        continue
                    x = f(g.phase)
                    if x >= thr:
                        g.fired = True
                        fired.append((g, ABSORBED))
                        queue.append(len(g.members))
                    else:
                        g.phase = inv(min(x + eps, 1.0))
                        touched.append(g)
        for g in touched:
            if not g.fired:
                for m in g.members:
                    self.received[m] = True
        if not fired:
            return
        members = []
        for g, kind in fired:
            for m in g.members:
                self.fire_counts[m] += 1
                if kind == FIRE and not self.synced:
                    self.key_counts[m] += 1
                if self.has_fired[m] and not self.received[m] and self.local_sync[m] is None:
                    self.local_sync[m] = t
                self.has_fired[m] = True
                self.received[m] = False
                if self.record:
                    self.pulse_times[m].append(t)
                    self.events.append((t, m, kind))
            members.extend(g.members)
        merged = _Group(sorted(members), 0.0)
        merged.last_fire = t
        rest = [g for g in self.groups if not g.fired]
        rest.append(merged)
        rest.sort(key=lambda g: g.members[0])
        self.groups = rest
        if len(rest) == 1 and not self.synced:
            self.synced = True

    def time_to_next_cycle(self):
        start, target = self.t, min(self.fire_counts) + 1
        while min(self.fire_counts) < target:
            self.step()
        return self.t - start


class _DelayedEngine:
    """Per-node engine with pulse arrival events offset by propagation delay."""

    def __init__(self, pf, cfg, phases, record=True):
        self.pf = pf
        self.cfg = cfg
        self.thr = 1.0 - cfg.epsilon - ABSORB_SLACK
        self.record = record
        n = cfg.n
        self.phase = [float(p) for p in phases]
        self.last_fire = [-math.inf] * n
        self.heap = []
        self.seq = 0
        self.t = 0.0
        self.fire_counts = [0] * n
        self.key_counts = [0] * n
        self.pulse_times = [[] for _ in range(n)]
        self.events = []
        self.received = [False] * n
        self.has_fired = [False] * n
        self.local_sync = [None] * n
        self.synced = False

    def clone(self):
        other = _DelayedEngine.__new__(_DelayedEngine)
        other.__dict__.update(self.__dict__)
        other.record = False
        for name in ("phase", "last_fire", "heap", "fire_counts", "key_counts",
                     "received", "has_fired", "local_sync"):
            setattr(other, name, list(getattr(self, name)))
        other.pulse_times = [[] for _ in self.pulse_times]
        other.events = []
        return other

    def node_phases(self):
        return list(self.phase)

    def _advance(self, t_new):
        dt = t_new - self.t
        self.phase = [p + dt for p in self.phase]
        self.t = t_new

    def _fire(self, i, kind):
        t = self.t
        self.phase[i] = 0.0
        self.last_fire[i] = t
        self.fire_counts[i] += 1
        if kind == FIRE and not self.synced:
            self.key_counts[i] += 1
        if self.has_fired[i] and not self.received[i] and self.local_sync[i] is None:
            self.local_sync[i] = t
        self.has_fired[i] = True
        self.received[i] = False
        if self.record:
            self.pulse_times[i].append(t)
            self.events.append((t, i, kind))
        delay = self.cfg.delay
        for j in range(self.cfg.n):
            if j != i:
                self.seq += 1
                heapq.heappush(self.heap, (t + delay[i][j], self.seq, j))

    def _arrive(self, j):
        if self.t - self.last_fire[j] < self.cfg.rho or self.last_fire[j] == self.t:
            return
        x = self.pf.f(min(self.phase[j], 1.0))
        if x >= self.thr:
            self._fire(j, ABSORBED)
        else:
            self.phase[j] = self.pf.inverse(min(x + self.cfg.epsilon, 1.0))
            self.received[j] = True

    def step(self, jam_at=None):
        lead = max(self.phase)
        t_fire = self.t + (1.0 - lead)
        t_arr = self.heap[0][0] if self.heap else math.inf
        t_jam = math.inf if jam_at is None else jam_at
        if t_jam < min(t_fire, t_arr):
            self._advance(t_jam)
            if self.record:
                self.events.append((self.t, JAMMER_NODE, JAM))
            for j in range(self.cfg.n):
                self._arrive(j)
            self._check_sync()
            return True
        if t_arr <= t_fire:
            self._advance(t_arr)
            while self.heap and self.heap[0][0] <= self.t:
                _, _, j = heapq.heappop(self.heap)
                self._arrive(j)
        else:
            leaders = [i for i, p in enumerate(self.phase) if p == lead]
            self._advance(t_fire)
            for i in leaders:
                if self.last_fire[i] != self.t:
                    self._fire(i, FIRE)
        self._check_sync()
        return False

    def _check_sync(self):
        if not self.synced and all(s is not None for s in self.local_sync):
            self.synced = True

    def time_to_next_cycle(self):
        start, target = self.t, min(self.fire_counts) + 1
        while min(self.fire_counts) < target:
            self.step()
        return self.t - start


def _validate_phases(phases, n):
    if len(phases) != n:
        raise ConfigError(f"expected {n} initial phases, got {len(phases)}", "initial_phases")
    for p in phases:
        if not (0.0 <= p < 1.0):
            raise ConfigError(f"initial phase {p!r} outside [0, 1)", "initial_phases")


def simulate_session(pf: PhaseFunction, config: CouplingConfig, initial_phases,
                     jammer=None, rng_seed=None, *, rng=None, stop_at_sync=True,
                     record=True) -> SessionTrace:
    """Run one session until global synchronisation or ``config.cycle_cap`` cycles.

    ``jammer`` is any object with ``plan(state, rng) -> offset | None``,
    consulted at the start of every full cycle; a returned offset schedules
    one pulse that many time units into the cycle.  With
    ``stop_at_sync=False`` the session runs on to the cycle cap.
    """
    _validate_phases(initial_phases, config.n)
    if rng is None:
        rng = np.random.default_rng(rng_seed)
    cls = _DelayedEngine if config.delayed else _Engine
    eng = cls(pf, config, initial_phases, record=record)

    cycles = 0
    sync_cycle = sync_time = None
    key_snapshot = None
    boundary = []
    boundary_t = []
    jam_log = []
    max_gap = 0

    def plan():
        if jammer is None:
            return None
        off = jammer.plan(CycleState(eng, cycles + 1), rng)
        return None if off is None else eng.t + off

    jam_at = plan()
    while True:
        was_jam = eng.step(jam_at)
        if was_jam:
            jam_log.append(eng.t)
            jam_at = None
        fc = eng.fire_counts
        gap = max(fc) - min(fc)
        if gap > max_gap:
            max_gap = gap
        if eng.synced and sync_cycle is None:
            sync_cycle = min(fc)
            sync_time = eng.t
            key_snapshot = list(eng.key_counts)
        done = min(fc)
        if done > cycles:
            cycles = done
            if record:
                boundary.append(eng.node_phases())
                boundary_t.append(eng.t)
            if sync_cycle is not None and stop_at_sync:
                break
            if cycles >= config.cycle_cap:
                break
            jam_at = plan()

    return SessionTrace(
        n=config.n,
        pulse_times=eng.pulse_times,
        fire_counts=list(eng.fire_counts),
        counts=key_snapshot if key_snapshot is not None else list(eng.key_counts),
        sync_cycle=sync_cycle,
        sync_time=sync_time,
        cycles=cycles,
        jam_log=jam_log,
        events=eng.events,
        boundary_phases=boundary,
        boundary_times=boundary_t,
        local_sync_times=list(eng.local_sync),
        max_gap=max_gap,
    )


def run_one_cycle(pf: PhaseFunction, epsilon: float, phases, jam_offset=None):
    """Simulate a single full cycle of a two-node network.

    Returns ``(tau_end, synced)`` where ``tau_end`` is the phase of the node
    that did not complete the cycle, measured at the completing firing
    (0 when the nodes fired together).
    """
    cfg = CouplingConfig(n=2, epsilon=epsilon, cycle_cap=1)
    eng = _Engine(pf, cfg, phases, record=False)
    jam_at = None if jam_offset is None else float(jam_offset)
    while min(eng.fire_counts) < 1:
        if eng.step(jam_at):
            jam_at = None
    if eng.synced:
        return 0.0, True
    return max(eng.node_phases()), False


def full_cycle_index(trace: SessionTrace, time: float) -> int:
    """Full cycle in progress at ``time`` (cycles end on their completing firing)."""
    return 1 + min(sum(1 for s in times if s < time) for times in trace.pulse_times)


def pairwise_count_gap(trace: SessionTrace) -> int:
    """Largest ``|m_i - m_j|`` over all instants, from the recorded firing times."""
    if trace.n < 2:
        return 0
    stamps = sorted({t for times in trace.pulse_times for t in times})
    if not stamps:
        return 0
    idx = [0] * trace.n
    counts = [0] * trace.n
    worst = 0
    for t in stamps:
        for i, times in enumerate(trace.pulse_times):
            while idx[i] < len(times) and times[idx[i]] <= t:
                idx[i] += 1
            counts[i] = idx[i]
        worst = max(worst, max(counts) - min(counts))
    return worst


# -- Monte Carlo -------------------------------------------------------------

DIFFERENCE = "difference"
IID = "iid"


def session_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent counter-based stream for session ``index``."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & 0xFFFFFFFFFFFFFFFF,
                                                     (int(stream) << 40) | int(index)]))


def sample_initial_phases(n: int, rng: np.random.Generator, mode: str = DIFFERENCE):
    """Initial phases for one session.

    ``difference`` pins node 0 at phase 0 and draws the others uniformly, so
    for two nodes the initial phase difference is uniform on [0, 1).
    ``iid`` draws every phase uniformly.
    """
    if mode == DIFFERENCE:
        return [0.0] + [float(x) for x in rng.random(n - 1)]
    if mode == IID:
        return [float(x) for x in rng.random(n)]
    raise ConfigError(f"unknown phase sampling mode {mode!r}", "phase_sampling")


@dataclass
class MonteCarloResult:
    counts: dict
    failures: int
    max_gap: int
    gap_violations: int
    trials: int

    def pmf(self) -> dict:
        total = sum(self.counts.values()) + self.failures
        return {m: c / total for m, c in sorted(self.counts.items())}


def _mc_chunk(args):
    pf, config, lo, hi, seed, mode, jammer, stream = args
    counts = Counter()
    failures = max_gap = violations = 0
    for idx in range(lo, hi):
        rng = session_rng(seed, idx, stream)
        phases = sample_initial_phases(config.n, rng, mode)
        trace = simulate_session(pf, config, phases, jammer=jammer, rng=rng, record=False)
        if trace.sync_cycle is None:
            failures += 1
        else:
            counts[trace.sync_cycle] += 1
        max_gap = max(max_gap, trace.max_gap)
        violations += trace.max_gap > 1
    return counts, failures, max_gap, violations


def monte_carlo_distribution(pf: PhaseFunction, config: CouplingConfig, trials: int,
                             rng_seed: int = 0, *, sampling: str = DIFFERENCE,
                             jammer=None, workers: int = 1, stream: int = 0) -> MonteCarloResult:
    """Empirical distribution of the synchronisation cycle over independent sessions.

    Session ``k`` draws from its own stream keyed by ``(rng_seed, stream, k)``,
    so the result does not depend on ``workers``.
    """
    if trials < 1:
        raise ConfigError("trials must be at least 1", "trials")
    workers = max(1, int(workers))
    nchunks = min(trials, workers * 4) if workers > 1 else 1
    edges = np.linspace(0, trials, nchunks + 1).astype(int)
    jobs = [(pf, config, int(edges[k]), int(edges[k + 1]), rng_seed, sampling, jammer, stream)
            for k in range(nchunks)]
    if workers == 1:
        parts = [_mc_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_mc_chunk, jobs))
    counts = Counter()
    failures = max_gap = violations = 0
    for c, fl, g, v in parts:
        counts.update(c)
        failures += fl
        max_gap = max(max_gap, g)
        violations += v
    return MonteCarloResult(dict(sorted(counts.items())), failures, max_gap, violations, trials)
