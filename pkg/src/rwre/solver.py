"""Exact quenched box-exit probabilities via the absorbing-chain system.

For a fixed environment, h(x) = P_{x,omega}(exit through the positive
boundary) is the unique function that is omega-harmonic on the interior of
the box with h = 1 on the positive boundary and h = 0 on the rest of the
boundary.  Enumerating the interior and eliminating the boundary gives the
sparse linear system (I - W) h = b, with W the interior-to-interior jump
weights and b the one-step mass sent straight to the positive boundary.

Systems up to ``DIRECT_LIMIT`` interior sites go through a sparse direct
solve; larger ones through Gauss-Seidel sweeps in lexicographic site order
(successive displacement).  Substochasticity of W at the boundary makes the
sweep a contraction, so no preconditioning is needed.  Either way the
returned residual is the max harmonic defect max_x |b + (W h)(x) - h(x)|,
recomputed after the solve, and must meet ``RESIDUAL_TOL``.

rho_moment averages rho^a = (q/p)^a over independent environment draws,
which is the Monte Carlo half of the one-box criteria; the per-environment
solve itself is exact.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve, spsolve_triangular

from . import rng
from .env import Environment, EnvironmentLaw, direction_vectors, sample_sites
from .geometry import BoxSpec, box_sites, in_box, on_positive_side

_MOMENT_TAG = 0x52686F  # tag for per-environment realization indices

DIRECT_LIMIT = 10_000
MAX_INTERIOR = 10_000_000
RESIDUAL_TOL = 1e-12
MAX_SWEEPS = 1_000_000


class SolverError(Exception):
    """Base class for exact-exit failures."""


class SolverConvergenceError(SolverError):
    """Relaxation did not reach the residual tolerance in the sweep budget."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class BoxSolution:
    """Exit split from one site of one environment.

    p is the probability of leaving through the positive boundary, q = 1 - p
    by construction, rho = q/p.  residual is the max harmonic defect of the
    solved h over the interior.
    """

    p: float
    q: float
    rho: float
    residual: float
    interior_size: int


@dataclass(frozen=True)
class RhoMoment:
    """Monte Carlo average of rho^a over environment realizations."""

    mean: float
    stderr: float
    env_count: int
    failures: int
    metadata: dict = field(compare=False, default_factory=dict)


def _interior_index(interior):
    """Linear keys for interior sites plus a lookup into their row order.

    Sites are keyed by their C-order position inside the interior bounding
    box; lexicographic site order makes the key array strictly increasing,
    so membership and position both come from one searchsorted.
    """
    lo = interior.min(axis=0)
    shape = interior.max(axis=0) - lo + 1
    keys = np.ravel_multi_index((interior - lo).T, shape)
    return lo, shape, keys


def _lookup(keys, lo, shape, sites):
    """Row indices of ``sites`` in the interior ordering, -1 if absent."""
    shifted = sites - lo
    inside = ((shifted >= 0) & (shifted < shape)).all(axis=-1)
    flat = np.where(inside.ravel())[0]
    cand = np.ravel_multi_index(shifted.reshape(-1, sites.shape[-1])[flat].T, shape)
    pos = np.searchsorted(keys, cand)
    pos[pos >= len(keys)] = len(keys) - 1
    hit = keys[pos] == cand
    idx = np.full(sites.shape[:-1], -1, dtype=np.int64).ravel()
    idx[flat[hit]] = pos[hit]
    return idx.reshape(sites.shape[:-1])


def _assemble(env, B):
    """Interior sites, jump weights W (sparse), and positive-boundary mass b."""
    d = env.law.d
    interior = box_sites(B)
    n = len(interior)
    if n == 0:
        raise SolverError("box has no interior sites")
    if n > MAX_INTERIOR:
        raise SolverError(
            f"box too large: {n} interior sites exceeds the {MAX_INTERIOR} limit"
        )
    steps = direction_vectors(d)
    omega = sample_sites(env, interior)

    nbrs = interior[:, None, :] + steps[None, :, :]
    lo, shape, keys = _interior_index(interior)
    nbr_idx = _lookup(keys, lo, shape, nbrs)

    exterior = nbr_idx < 0
    # Every exterior neighbor of an interior site is a boundary site of B,
    # so the h values there are decided by the positive-side predicate alone.
    pos = np.zeros(exterior.shape, dtype=bool)
    if exterior.any():
        pos[exterior] = on_positive_side(B, nbrs[exterior])
    b = (omega * pos).sum(axis=1)

    rows, cols = np.nonzero(~exterior)
    W = sp.csr_matrix(
        (omega[rows, cols], (rows, nbr_idx[rows, cols])), shape=(n, n)
    )
    return interior, keys, lo, shape, W, b


def _defect(W, b, h):
    return float(np.abs(b + W @ h - h).max())


def _relax(W, b, h0=None, tol=RESIDUAL_TOL, max_sweeps=MAX_SWEEPS):
    """Lexicographic Gauss-Seidel until the defect meets tol.

    One sweep solves (I - L) h_new = b + U h_old with L/U the strictly
    lower/upper parts of W in site order, which is exactly successive
    displacement through the sites in lexicographic order.
    """
    n = W.shape[0]
    L = sp.tril(W, k=-1, format="csr")
    U = sp.triu(W, k=1, format="csr")
    A_low = (sp.identity(n, format="csr") - L).tocsr()
    h = np.zeros(n) if h0 is None else h0.copy()
    res = _defect(W, b, h)
    sweeps = 0
    while res > tol:
        if sweeps >= max_sweeps:
            raise SolverConvergenceError(
                f"relaxation stalled at residual {res:.3e} after {sweeps} sweeps",
                residual=res,
            )
        h = spsolve_triangular(A_low, b + U @ h, lower=True, unit_diagonal=True)
        res = _defect(W, b, h)
        sweeps += 1
    return h, res, sweeps


def exact_exit(env: Environment, B: BoxSpec, start, method: str = "auto") -> BoxSolution:
    """Solve for p = h(start), the positive-boundary exit probability.

    method "auto" picks direct elimination up to DIRECT_LIMIT interior sites
    and relaxation above; "direct"/"relax" force a path (the cross-check the
    solver tests rely on).
    """
    if method not in ("auto", "direct", "relax"):
        raise ValueError(f"unknown method {method!r}")
    start = np.asarray(start, dtype=np.int64)
    if start.shape != (env.law.d,):
        raise ValueError("start must be a single lattice site")
    if not bool(in_box(B, start)):
        raise SolverError(f"start site {start.tolist()} is not interior to the box")

    interior, keys, lo, shape, W, b = _assemble(env, B)
    n = len(interior)
    start_idx = int(_lookup(keys, lo, shape, start[None, :])[0])

    if method == "direct" or (method == "auto" and n <= DIRECT_LIMIT):
        A = sp.identity(n, format="csc") - W.tocsc()
        h = spsolve(A, b)
        res = _defect(W, b, h)
        if res > RESIDUAL_TOL:
            # Direct solves on large/ill-scaled systems can sit a hair above
            # tolerance; a few polish sweeps from the direct solution fix it.
            h, res, _ = _relax(W, b, h0=h)
    else:
        h, res, _ = _relax(W, b)

    p = float(min(max(h[start_idx], 0.0), 1.0))
    q = 1.0 - p
    rho = math.inf if p == 0.0 else q / p
    return BoxSolution(p=p, q=q, rho=rho, residual=res, interior_size=n)


def rho_moment(
    law: EnvironmentLaw,
    B: BoxSpec,
    a: float,
    env_count: int,
    seed: int = 0,
    start=None,
    threads: int | None = None,
) -> RhoMoment:
    """Mean of rho_B^a over env_count independent environment realizations.

    Accumulation is positional (values land in a preallocated array indexed
    by replicate, reduced by numpy's pairwise sum), so the result does not
    depend on thread scheduling.  More than 1% failed solves aborts: a
    moment over a censored sample would be silently biased.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError(f"moment exponent a={a} outside (0, 1]")
    if env_count < 1:
        raise ValueError("env_count must be at least 1")
    if start is None:
        start = np.zeros(law.d, dtype=np.int64)

    vals = np.full(env_count, np.nan)
    failures = []

    def solve_one(i):
        realization = int(rng.hash_words(seed, _MOMENT_TAG, i))
        try:
            sol = exact_exit(law.realize(realization), B, start)
        except SolverError as exc:
            failures.append((i, str(exc)))
            return
        if sol.p == 0.0:
            failures.append((i, "p underflowed to zero"))
            return
        vals[i] = sol.rho**a

    if threads is not None and threads > 1 and env_count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(solve_one, range(env_count)))
    else:
        for i in range(env_count):
            solve_one(i)

    if len(failures) > 0.01 * env_count:
        raise SolverError(
            f"{len(failures)}/{env_count} environments unsolved "
            f"(first: {failures[0][1]})"
        )
    good = vals[~np.isnan(vals)]
    mean = float(np.mean(good))
    stderr = float(np.std(good, ddof=1) / math.sqrt(len(good))) if len(good) > 1 else 0.0
    return RhoMoment(
        mean=mean,
        stderr=stderr,
        env_count=env_count,
        failures=len(failures),
        metadata={
            "a": a,
            "seed": seed,
            "solved": int(len(good)),
            "failure_messages": [m for _, m in failures[:5]],
        },
    )
