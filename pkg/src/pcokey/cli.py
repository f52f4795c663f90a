"""Command-line entry point: ``pcokey {analyze,simulate,keyrate,jam}``."""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config, parse_config
from .distribution import (
    entropy, entropy_bounds, pulse_count_distribution, truncated_session_distribution)
from .dynamics import DynamicsMaps
from .errors import ConfigError, NumericError, PCOError, SizeError
from .jamming import JamMaps, JammerStrategy, audit_cycles
from .network import CouplingConfig, monte_carlo_distribution, session_rng, simulate_session
from .phase import PhaseFunction, validate_phase_function
from .report import write_csv, write_json
from .secrecy import (
    MAX_EXACT, conditional_entropy_exact, conditional_entropy_mc, key_rate_lower_bound)

CMD_ANALYZE, CMD_SIMULATE, CMD_KEYRATE, CMD_JAM = 1, 2, 3, 4
TRACE_SESSIONS = 5


def _phase_function(cfg: ExperimentConfig) -> PhaseFunction:
    pc = cfg.phase_function
    pf = PhaseFunction.peskin(pc.gamma) if pc.kind == "peskin" else PhaseFunction.tabulated(pc.table)
    report = validate_phase_function(pf)
    if not report.valid:
        raise ConfigError("; ".join(report.violations), "phase_function")
    return pf


def _coupling(cfg: ExperimentConfig, n=None) -> CouplingConfig:
    delay = None if cfg.delay is None else tuple(tuple(r) for r in cfg.delay)
    return CouplingConfig(n=cfg.n if n is None else n, epsilon=cfg.epsilon, rho=cfg.rho,
                          delay=delay, cycle_cap=cfg.cycle_cap)


def _maps(cfg, pf):
    return DynamicsMaps.build(pf, cfg.epsilon, tol=cfg.tolerances.fixed_point)


def _embedded(cfg):
    # the output location is not part of the experiment
    doc = cfg.model_dump(mode="json")
    doc.pop("out_dir", None)
    return doc


def _pool_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _chunks(total, workers):
    k = 1 if workers <= 1 else min(total, workers * 4)
    edges = np.linspace(0, total, k + 1).astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(k)]


# -- analyze -----------------------------------------------------------------

def cmd_analyze(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    pf = _phase_function(cfg)
    dm = _maps(cfg, pf)
    dist = pulse_count_distribution(dm, cfg.tolerances.boundary)
    h, tail = entropy(dist)
    lower, upper = entropy_bounds(dm, dist)
    conf = _embedded(cfg)
    write_json(out / "dynamics.json", {
        "delta": dm.delta, "h_inv_delta": dm.h_inv_delta, "tau_star": dm.tau_star,
        "lambda0": dm.lambda0, "lambda1": dm.lambda1, "lambda2": dm.lambda2, "config": conf})
    rows = [(i, dist.tau_seq[i], dist.tau_prime_seq[i], dist.probs[i - 1])
            for i in range(1, len(dist.tau_seq))]
    write_csv(out / "distribution.csv", ["i", "tau_i", "tau_prime_i", "p_i"], rows)
    doc = {"entropy_bits": h, "tail_bound_bits": tail, "lower_bits": lower, "upper_bits": upper,
           "p1": float(dist.probs[0]), "truncation_index": dist.truncation_index,
           "tail_mass": dist.tail_mass, "config": conf}
    write_json(out / "entropy.json", doc)
    return doc


# -- simulate ----------------------------------------------------------------

def _tv_two_node(dist, mc):
    k = len(dist.probs)
    emp = np.zeros(k + 1)
    for m, c in mc.counts.items():
        emp[min(m, k + 1) - 1] += c
    emp[k] += mc.failures
    emp /= mc.trials
    ana = np.append(np.asarray(dist.probs), dist.tail_mass)
    return 0.5 * float(np.abs(emp - ana).sum())


def cmd_simulate(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    pf = _phase_function(cfg)
    coupling = _coupling(cfg)
    jammer = None if cfg.jammer == "none" else JammerStrategy(cfg.jammer, cfg.jam_grid_points)
    mc = monte_carlo_distribution(pf, coupling, cfg.trials, cfg.seed, sampling=cfg.phase_sampling,
                                  jammer=jammer, workers=workers, stream=CMD_SIMULATE)
    conf = _embedded(cfg)
    rows = [(m, c, c / cfg.trials) for m, c in sorted(mc.counts.items())]
    write_csv(out / "empirical_pmf.csv", ["M", "count", "probability"], rows)
    write_json(out / "lemma1_gap.json", {
        "max_gap": mc.max_gap, "sessions_with_gap_above_1": mc.gap_violations,
        "trials": cfg.trials, "n": cfg.n, "config": conf})
    summary = {"trials": cfg.trials, "sync_failures": mc.failures, "tv_distance": None,
               "config": conf}
    if cfg.n == 2:
        dist = pulse_count_distribution(_maps(cfg, pf), cfg.tolerances.boundary)
        summary["tv_distance"] = _tv_two_node(dist, mc)
    write_json(out / "summary.json", summary)
    return summary


# -- keyrate -----------------------------------------------------------------

def _keyrate_row(args):
    idx, p, mt, pi, lam1, lam2, exact, mc_trials, seed = args
    ex = conditional_entropy_exact(pi, p) if exact else math.nan
    bound = key_rate_lower_bound(lam1, lam2, p, mt)
    est, err = conditional_entropy_mc(pi, p, mc_trials, seed, stream=(CMD_KEYRATE << 16) | idx)
    return p, mt, ex, bound, est, err


def cmd_keyrate(cfg: ExperimentConfig, out: Path, workers: int = 1) -> list:
    if cfg.keyrate_exact and cfg.m_tilde > MAX_EXACT:
        raise SizeError(f"exact mode supports m_tilde <= {MAX_EXACT}, got {cfg.m_tilde}")
    pf = _phase_function(cfg)
    dm = _maps(cfg, pf)
    dist = pulse_count_distribution(dm, cfg.tolerances.boundary)
    jobs = []
    for p in cfg.p_grid:
        for mt in range(1, cfg.m_tilde + 1):
            pi = truncated_session_distribution(dist, mt)
            jobs.append((len(jobs), p, mt, pi, dm.lambda1, dm.lambda2, cfg.keyrate_exact,
                         cfg.mc_trials, cfg.seed))
    rows = _pool_map(_keyrate_row, jobs, workers)
    for p, mt, ex, bound, _, _ in rows:
        if cfg.keyrate_exact and bound > ex:
            raise NumericError(f"key-rate bound {bound!r} exceeds H(M|Z) = {ex!r} at p={p}, m_tilde={mt}")
    write_csv(out / "keyrate.csv",
              ["p", "m_tilde", "exact_bits", "bound_bits", "mc_bits", "mc_stderr"],
              [(p, mt, None if math.isnan(ex) else ex, b, e, s) for p, mt, ex, b, e, s in rows])
    write_json(out / "keyrate_config.json", {"config": _embedded(cfg)})
    return rows


# -- jam ---------------------------------------------------------------------

def _jam_chunk(args):
    pf, coupling, kind, grid_points, seed, stream, lo, hi = args
    jammer = None if kind == "none" else JammerStrategy(kind, grid_points)
    rows = []
    for idx in range(lo, hi):
        rng = session_rng(seed, idx, stream)
        tau = float(rng.random())
        tr = simulate_session(pf, coupling, [0.0, tau], jammer=jammer, rng=rng, record=False)
        rows.append((idx, tau, tr.sync_cycle))
    return rows


def cmd_jam(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    if cfg.n != 2:
        raise ConfigError("jam analysis is defined for two nodes", "n")
    pf = _phase_function(cfg)
    dm = _maps(cfg, pf)
    jm = JamMaps.build(dm, tol=cfg.tolerances.fixed_point)
    cond = jm.hypothesis_value()
    holds = cond < dm.delta
    window = prob = None
    if holds:
        sr = jm.safe_region(cfg.tolerances.fixed_point)
        window, prob = list(sr.window), sr.probability
    grid = np.linspace(0.0, 1.0, cfg.tau_buckets + 1)
    envelope = [{"tau": float(t), "lo": jm.jam_interval(float(t))[0],
                 "hi": jm.jam_interval(float(t))[1]} for t in grid]
    conf = _embedded(cfg)
    region = {"hypothesis_value": cond, "delta": dm.delta, "hypothesis_holds": bool(holds),
              "lambda0": dm.lambda0, "tau_star": dm.tau_star, "window": window,
              "probability_bound": prob, "envelope": envelope, "config": conf}
    write_json(out / "jam_region.json", region)

    coupling = _coupling(cfg)
    session_rows, bucket_rows, trace_rows = [], [], []
    for s_idx, kind in enumerate(cfg.jam_strategies):
        stream = (CMD_JAM << 8) | s_idx
        jobs = [(pf, coupling, kind, cfg.jam_grid_points, cfg.seed, stream, lo, hi)
                for lo, hi in _chunks(cfg.jam_sessions, workers)]
        results = [r for part in _pool_map(_jam_chunk, jobs, workers) for r in part]
        buckets = {}
        for idx, tau, m in results:
            b = min(int(tau * cfg.tau_buckets), cfg.tau_buckets - 1)
            outside = window is not None and not (window[0] < tau < window[1])
            session_rows.append((kind, idx, tau, b, outside, m is not None, m))
            buckets.setdefault(b, []).append(m)
        for b in sorted(buckets):
            ms = buckets[b]
            lo, hi = b / cfg.tau_buckets, (b + 1) / cfg.tau_buckets
            outside = window is not None and (hi <= window[0] or lo >= window[1])
            synced = [m for m in ms if m is not None]
            bucket_rows.append((kind, b, lo, hi, outside, len(ms), len(synced),
                                len(synced) / len(ms),
                                float(np.mean(synced)) if synced else None))
        jammer = None if kind == "none" else JammerStrategy(kind, cfg.jam_grid_points)
        for idx in range(min(TRACE_SESSIONS, cfg.jam_sessions)):
            rng = session_rng(cfg.seed, idx, stream)
            tau = float(rng.random())
            tr = simulate_session(pf, coupling, [0.0, tau], jammer=jammer, rng=rng)
            for c, a in enumerate(audit_cycles(jm, tr, tau), start=1):
                trace_rows.append((kind, idx, c, a.tau, a.tau_end, a.lo, a.hi, a.inside,
                                   a.forced))

    write_csv(out / "jam_sim.csv",
              ["strategy", "session", "tau0", "bucket", "outside_window", "synced", "M"],
              session_rows)
    write_csv(out / "jam_buckets.csv",
              ["strategy", "bucket", "tau_lo", "tau_hi", "outside_window", "sessions", "synced",
               "sync_rate", "mean_M"], bucket_rows)
    write_csv(out / "jam_traces.csv",
              ["strategy", "session", "cycle", "tau_start", "tau_end", "envelope_lo",
               "envelope_hi", "inside_envelope", "jam_forced_absorption"], trace_rows)
    return region


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "keyrate": cmd_keyrate,
            "jam": cmd_jam}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pcokey", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, default=None, help="JSON experiment config")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="master seed (u64)")
        sp.add_argument("--workers", type=int, default=1, help="worker processes")
    return ap


def resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    doc = cfg.model_dump(mode="json")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["out_dir"] = str(args.out)
    return parse_config(doc)


def run(command: str, cfg: ExperimentConfig, workers: int = 1):
    if workers < 1:
        raise ConfigError("must be at least 1", "workers")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[command](cfg, out, workers)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        run(args.command, cfg, args.workers)
    except PCOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
