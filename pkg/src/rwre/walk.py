"""Quenched walk simulation and Monte Carlo exit-probability estimates.

The walk at site x jumps to x + e with probability omega(x, e) from the
environment.  Slab runs stop when x.l crosses either threshold; box runs
stop on leaving the box, with the exit labeled positive/other by the
geometry predicates.  A step cap keeps heavy-tailed exit times from
hanging runs; cap hits are tallied separately and never folded into either
outcome.

All randomness is counter-based (see rng): replica r uses environment seed
hash(seed, ENV, r) and walk stream hash(seed, WALK, r), and step n draws
uniform(walk_seed, n).  A batch of replicas therefore produces the same
counts however it is chunked or threaded, and a single ``run_slab`` with
the derived seeds reproduces row r of an estimate exactly.

The estimated event is always the back exit (exit through the face the
drift points away from), the quantity the ballisticity conditions bound.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .env import Environment, EnvironmentLaw, direction_vectors, sample_sites
from .geometry import BoxSpec, classify, in_box, on_positive_side

_ENV_TAG = 0x456E76
_WALK_TAG = 0x57616C6B

CHUNK = 1 << 16

EXIT_PLUS = "exit_plus"
EXIT_MINUS = "exit_minus"
EXIT_POSITIVE = "exit_positive_boundary"
EXIT_OTHER = "exit_other_boundary"
CAP_HIT = "cap_hit"

_Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int) -> tuple[float, float]:
    """95% Wilson score interval; proper even at n = 1 or p_hat in {0, 1}."""
    if n <= 0:
        return (0.0, 1.0)
    z2 = _Z95 * _Z95
    p = successes / n
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = _Z95 * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    # the bound is exactly 0 (resp. 1) at the sample extremes; without the
    # clamp, cancellation residue would certify a spurious nonzero rate
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return (lo, hi)


@dataclass(frozen=True)
class WalkOutcome:
    label: str
    steps: int
    final_site: tuple


@dataclass(frozen=True)
class ExitStats:
    replicas: int
    successes: int
    cap_hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    unreliable: bool = False
    metadata: dict = field(default_factory=dict, compare=False)


def _tally(successes: int, replicas: int, cap_hits: int, metadata: dict) -> ExitStats:
    lo, hi = wilson_interval(successes, replicas)
    return ExitStats(
        replicas=replicas,
        successes=successes,
        cap_hits=cap_hits,
        p_hat=successes / replicas,
        ci_low=lo,
        ci_high=hi,
        unreliable=cap_hits > 0.01 * replicas,
        metadata=metadata,
    )


def default_slab_cap(L: float) -> int:
    return int(100 * L * L) if L > 1 else 100


def default_box_cap(B: BoxSpec) -> int:
    return int(100 * (B.L_minus + B.L_plus) ** 2)


def _choose_directions(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF direction choice per row; u in [0, 1)."""
    cum = np.cumsum(probs, axis=1)
    j = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(j, probs.shape[1] - 1)


def _probs_at(law: EnvironmentLaw, env_seeds, pos) -> np.ndarray:
    """Transition vectors for row i at pos[i] under realization env_seeds[i].

    Same arithmetic as env.sample_sites, but with a per-row realization
    seed so annealed batches stay one vectorized call.
    """
    from .env import DirichletFloor, Homogeneous, TwoPoint
    from scipy.special import gammaincinv

    d, kappa = law.d, law.kappa
    n = pos.shape[0]
    fam = law.family
    if isinstance(fam, Homogeneous):
        return np.broadcast_to(np.asarray(fam.probs, dtype=np.float64), (n, 2 * d))
    coord_words = [pos[:, i] for i in range(d)]
    if isinstance(fam, TwoPoint):
        u = rng.uniform(env_seeds, *coord_words, 0)
        return np.where(
            np.asarray(u)[:, None] < fam.w,
            np.asarray(fam.v_plus, dtype=np.float64),
            np.asarray(fam.v_minus, dtype=np.float64),
        )
    conc = np.asarray(fam.concentrations, dtype=np.float64)
    g = np.empty((n, 2 * d), dtype=np.float64)
    for j in range(2 * d):
        u = np.asarray(rng.uniform(env_seeds, *coord_words, j), dtype=np.float64)
        g[:, j] = gammaincinv(conc[j], u)
    p = g / g.sum(axis=1, keepdims=True)
    return kappa + (1.0 - 2 * d * kappa) * p


def _run_slab_batch(law, env_seeds, walk_seeds, l, b_minus, b_plus, start, cap):
    """Synchronous vectorized slab walk; returns (n_plus, n_minus, n_cap)."""
    m = len(env_seeds)
    d = law.d
    steps = direction_vectors(d)
    l = np.asarray(l, dtype=np.float64)
    pos = np.broadcast_to(np.asarray(start, dtype=np.int64), (m, d)).copy()
    active_env = np.asarray(env_seeds, dtype=np.uint64)
    active_walk = np.asarray(walk_seeds, dtype=np.uint64)
    n_plus = n_minus = 0
    for n in range(cap):
        if pos.shape[0] == 0:
            break
        probs = _probs_at(law, active_env, pos)
        u = np.asarray(rng.u01(rng.hash_words(active_walk, n)), dtype=np.float64)
        pos = pos + steps[_choose_directions(probs, u)]
        f = pos @ l
        out_plus = f >= b_plus
        out_minus = f <= -b_minus
        exited = out_plus | out_minus
        n_plus += int(out_plus.sum())
        n_minus += int(out_minus.sum())
        keep = ~exited
        pos, active_env, active_walk = pos[keep], active_env[keep], active_walk[keep]
    return n_plus, n_minus, pos.shape[0]


def _run_box_batch(law, env_seeds, walk_seeds, B: BoxSpec, start, cap, offset=None):
    """Synchronous vectorized box walk; returns (n_positive, n_other, n_cap).

    ``offset`` shifts environment lookups (translated environments); the
    walk itself stays in box coordinates.
    """
    m = len(env_seeds)
    d = law.d
    steps = direction_vectors(d)
    pos = np.broadcast_to(np.asarray(start, dtype=np.int64), (m, d)).copy()
    off = np.zeros(d, dtype=np.int64) if offset is None else np.asarray(offset, dtype=np.int64)
    active_env = np.asarray(env_seeds, dtype=np.uint64)
    active_walk = np.asarray(walk_seeds, dtype=np.uint64)
    n_pos = n_other = 0
    for n in range(cap):
        if pos.shape[0] == 0:
            break
        probs = _probs_at(law, active_env, pos + off)
        u = np.asarray(rng.u01(rng.hash_words(active_walk, n)), dtype=np.float64)
        pos = pos + steps[_choose_directions(probs, u)]
        exited = ~in_box(B, pos)
        if exited.any():
            pos_side = on_positive_side(B, pos[exited])
            n_pos += int(pos_side.sum())
            n_other += int((~pos_side).sum())
            keep = ~exited
            pos, active_env, active_walk = pos[keep], active_env[keep], active_walk[keep]
    return n_pos, n_other, pos.shape[0]


def run_slab(env: Environment, l, b_minus: float, b_plus: float, start, cap: int, walk_seed) -> WalkOutcome:
    """One quenched slab walk, stepped site by site."""
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    l = np.asarray(l, dtype=np.float64)
    x = np.asarray(start, dtype=np.int64).copy()
    f0 = float(x @ l)
    if not (-b_minus < f0 < b_plus):
        raise ValueError("start must lie strictly between the slab thresholds")
    steps = direction_vectors(env.law.d)
    for n in range(cap):
        probs = sample_sites(env, x[None, :])
        u = np.asarray(rng.u01(rng.hash_words(walk_seed, n)))
        j = int(_choose_directions(probs, np.atleast_1d(u))[0])
        x = x + steps[j]
        f = float(x @ l)
        if f >= b_plus:
            return WalkOutcome(EXIT_PLUS, n + 1, tuple(int(c) for c in x))
        if f <= -b_minus:
            return WalkOutcome(EXIT_MINUS, n + 1, tuple(int(c) for c in x))
    return WalkOutcome(CAP_HIT, cap, tuple(int(c) for c in x))


def run_box(env: Environment, B: BoxSpec, start, cap: int, walk_seed) -> WalkOutcome:
    """One quenched box walk; exit labeled by the boundary predicates."""
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    if classify(B, start) != "interior":
        raise ValueError("start must be an interior site of the box")
    x = np.asarray(start, dtype=np.int64).copy()
    steps = direction_vectors(env.law.d)
    for n in range(cap):
        probs = sample_sites(env, x[None, :])
        u = np.asarray(rng.u01(rng.hash_words(walk_seed, n)))
        j = int(_choose_directions(probs, np.atleast_1d(u))[0])
        x = x + steps[j]
        if not bool(in_box(B, x[None, :])[0]):
            label = EXIT_POSITIVE if bool(on_positive_side(B, x[None, :])[0]) else EXIT_OTHER
            return WalkOutcome(label, n + 1, tuple(int(c) for c in x))
    return WalkOutcome(CAP_HIT, cap, tuple(int(c) for c in x))


def _replica_seeds(seed, lo: int, hi: int, env_seed=None):
    reps = np.arange(lo, hi, dtype=np.int64)
    walk_seeds = rng.hash_words(seed, _WALK_TAG, reps)
    if env_seed is None:
        env_seeds = rng.hash_words(seed, _ENV_TAG, reps)
    else:
        env_seeds = np.full(hi - lo, np.uint64(env_seed), dtype=np.uint64)
    return env_seeds, walk_seeds


def _parallel_batches(worker, replicas: int, threads: int | None):
    ranges = [(lo, min(lo + CHUNK, replicas)) for lo in range(0, replicas, CHUNK)]
    if threads is not None and threads <= 1 or len(ranges) == 1:
        return [worker(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: worker(*r), ranges))


def mc_slab_estimate(
    law: EnvironmentLaw,
    l,
    L: float,
    replicas: int,
    mode: str = "annealed",
    cap: int | None = None,
    seed: int = 0,
    env_count: int = 1,
    walks_per_env: int | None = None,
    threads: int | None = None,
) -> ExitStats:
    """Monte Carlo back-exit probability P(T~_{-L} < T_L) from the origin.

    Annealed mode draws a fresh environment per replica; quenched mode runs
    walks_per_env walks in each of env_count fixed realizations and reports
    per-environment tallies in the metadata alongside the pooled estimate.
    Successes count exit_minus.
    """
    if L < 1 or replicas < 1:
        raise ValueError("need L >= 1 and replicas >= 1")
    if cap is None:
        cap = default_slab_cap(L)
    if cap <= 0:
        raise ValueError("cap must be positive")
    d = law.d
    start = np.zeros(d, dtype=np.int64)
    meta = {"mode": mode, "cap": cap, "seed": seed, "L": L}

    if mode == "annealed":
        def worker(lo, hi):
            env_seeds, walk_seeds = _replica_seeds(seed, lo, hi)
            return _run_slab_batch(law, env_seeds, walk_seeds, l, L, L, start, cap)

        parts = _parallel_batches(worker, replicas, threads)
        n_minus = sum(p[1] for p in parts)
        n_cap = sum(p[2] for p in parts)
        return _tally(n_minus, replicas, n_cap, meta)

    if mode == "quenched":
        if walks_per_env is None:
            walks_per_env = max(1, replicas // max(env_count, 1))
        per_env = []
        total_minus = total_cap = total_reps = 0
        for e in range(env_count):
            env_seed = rng.hash_words(seed, _ENV_TAG, e)

            def worker(lo, hi, _es=env_seed, _e=e):
                base = _e * walks_per_env
                env_seeds, _ = _replica_seeds(seed, base + lo, base + hi, env_seed=_es)
                reps = np.arange(base + lo, base + hi, dtype=np.int64)
                walk_seeds = rng.hash_words(seed, _WALK_TAG, reps)
                return _run_slab_batch(law, env_seeds, walk_seeds, l, L, L, start, cap)

            parts = _parallel_batches(worker, walks_per_env, threads)
            n_minus = sum(p[1] for p in parts)
            n_cap = sum(p[2] for p in parts)
            per_env.append({"env": e, "replicas": walks_per_env, "successes": n_minus, "cap_hits": n_cap})
            total_minus += n_minus
            total_cap += n_cap
            total_reps += walks_per_env
        meta["per_env"] = per_env
        return _tally(total_minus, total_reps, total_cap, meta)

    raise ValueError(f"unknown mode {mode!r}")


def mc_box_estimate(
    env: Environment,
    B: BoxSpec,
    start,
    replicas: int,
    cap: int | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> ExitStats:
    """Quenched positive-boundary exit frequency for one fixed environment.

    Successes count exit through the positive boundary (the solver's p).
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if classify(B, start) != "interior":
        raise ValueError("start must be an interior site of the box")
    if cap is None:
        cap = default_box_cap(B)
    law = env.law

    def worker(lo, hi):
        reps = np.arange(lo, hi, dtype=np.int64)
        walk_seeds = rng.hash_words(seed, _WALK_TAG, reps)
        env_seeds = np.full(hi - lo, np.uint64(env.realization_seed), dtype=np.uint64)
        return _run_box_batch(law, env_seeds, walk_seeds, B, start, cap, offset=env.offset)

    parts = _parallel_batches(worker, replicas, threads)
    n_pos = sum(p[0] for p in parts)
    n_cap = sum(p[2] for p in parts)
    return _tally(n_pos, replicas, n_cap, {"cap": cap, "seed": seed})


def mc_box_annealed(
    law: EnvironmentLaw,
    B: BoxSpec,
    replicas: int,
    cap: int | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> ExitStats:
    """Annealed probability of leaving the box off the positive boundary.

    Fresh environment per replica, started from the origin.  Successes
    count every exit with x.l still below the front face (back and side
    faces together) -- the event the polynomial condition bounds.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    start = np.zeros(law.d, dtype=np.int64)
    if classify(B, start) != "interior":
        raise ValueError("origin is not interior to the box")
    if cap is None:
        cap = default_box_cap(B)

    def worker(lo, hi):
        env_seeds, walk_seeds = _replica_seeds(seed, lo, hi)
        return _run_box_batch(law, env_seeds, walk_seeds, B, start, cap)

    parts = _parallel_batches(worker, replicas, threads)
    n_other = sum(p[1] for p in parts)
    n_cap = sum(p[2] for p in parts)
    meta = {"cap": cap, "seed": seed, "L_minus": B.L_minus, "L_plus": B.L_plus, "L_tilde": B.L_tilde}
    return _tally(n_other, replicas, n_cap, meta)
