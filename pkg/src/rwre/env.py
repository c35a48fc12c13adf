"""I.i.d. uniformly elliptic environment laws and lazy realizations.

An environment assigns every lattice site x in Z^d a transition vector
omega(x) = (omega(x, e))_e over the 2d nearest-neighbor steps, in the fixed
direction order (+e_1, -e_1, +e_2, -e_2, ...).  Sites are independent and
identically distributed, and every entry is at least the law's ellipticity
floor kappa.

Realizations are never materialized: ``sample_site`` is a pure function of
(law, realization_seed, site), built on counter-based hashing (see rng), so
a box with 10^8 sites costs nothing until the walk actually visits a site,
and a revisited site always sees the same vector.

Three families:

- ``Homogeneous``: one fixed vector everywhere (the classical random walk).
- ``TwoPoint``: vector v_plus with probability w, else v_minus.
- ``DirichletFloor``: Dirichlet(concentrations) pushed away from the
  boundary by p <- kappa + (1 - 2 d kappa) p, which keeps the floor exact
  and the sum at one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincinv

from . import rng

PROB_SUM_TOL = 1e-12


def direction_vectors(d: int) -> np.ndarray:
    """The 2d unit steps in order (+e_1, -e_1, +e_2, -e_2, ...)."""
    steps = np.zeros((2 * d, d), dtype=np.int64)
    for i in range(d):
        steps[2 * i, i] = 1
        steps[2 * i + 1, i] = -1
    return steps


def validate_transition_vector(probs, d: int, kappa: float) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (2 * d,):
        raise ValueError(f"expected {2 * d} transition probabilities, got shape {probs.shape}")
    if probs.min() < kappa:
        raise ValueError(
            f"transition vector violates ellipticity: min entry {probs.min()!r} < kappa {kappa!r}"
        )
    if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"transition probabilities sum to {probs.sum()!r}, not 1")
    return probs


@dataclass(frozen=True)
class Homogeneous:
    probs: tuple

    def validate(self, d: int, kappa: float) -> None:
        validate_transition_vector(self.probs, d, kappa)


@dataclass(frozen=True)
class TwoPoint:
    v_plus: tuple
    v_minus: tuple
    w: float

    def validate(self, d: int, kappa: float) -> None:
        validate_transition_vector(self.v_plus, d, kappa)
        validate_transition_vector(self.v_minus, d, kappa)
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"mixture weight must lie in [0, 1], got {self.w!r}")


@dataclass(frozen=True)
class DirichletFloor:
    concentrations: tuple

    def validate(self, d: int, kappa: float) -> None:
        conc = np.asarray(self.concentrations, dtype=np.float64)
        if conc.shape != (2 * d,):
            raise ValueError(f"expected {2 * d} concentrations, got shape {conc.shape}")
        if conc.min() <= 0.0:
            raise ValueError("Dirichlet concentrations must be positive")


@dataclass(frozen=True)
class EnvironmentLaw:
    d: int
    kappa: float
    family: Homogeneous | TwoPoint | DirichletFloor
    master_seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"dimension must be at least 2, got {self.d}")
        if not 0.0 < self.kappa <= 1.0 / (2 * self.d):
            raise ValueError(
                f"kappa must lie in (0, 1/(2d)] = (0, {1.0 / (2 * self.d)}], got {self.kappa!r}"
            )
        self.family.validate(self.d, self.kappa)

    def realize(self, index: int) -> "Environment":
        """The index-th i.i.d. environment realization of this law."""
        return Environment(self, rng.derive(self.master_seed, index))


@dataclass(frozen=True)
class Environment:
    law: EnvironmentLaw
    realization_seed: int
    offset: tuple = field(default=None)  # translation, in lattice units

    def __post_init__(self):
        if self.offset is None:
            object.__setattr__(self, "offset", (0,) * self.law.d)
        elif len(self.offset) != self.law.d:
            raise ValueError("offset dimension mismatch")


def translate(env: Environment, x) -> Environment:
    """Environment shifted so the new origin sits at x of the old one."""
    x = tuple(int(c) for c in x)
    if len(x) != env.law.d:
        raise ValueError(f"translation vector has dimension {len(x)}, law has {env.law.d}")
    return Environment(env.law, env.realization_seed, tuple(a + b for a, b in zip(env.offset, x)))


def sample_sites(env: Environment, xs) -> np.ndarray:
    """Transition vectors at an (n, d) array of lattice sites, shape (n, 2d).

    Pure in (law, realization_seed, offset, xs); scalar and batched calls
    agree bit for bit because they share the hashing arithmetic.
    """
    law = env.law
    d, kappa = law.d, law.kappa
    xs = np.asarray(xs, dtype=np.int64)
    if xs.ndim == 1:
        xs = xs[None, :]
    if xs.shape[1] != d:
        raise ValueError(f"sites have dimension {xs.shape[1]}, law has {d}")
    n = xs.shape[0]
    xs = xs + np.asarray(env.offset, dtype=np.int64)
    fam = law.family

    if isinstance(fam, Homogeneous):
        return np.broadcast_to(np.asarray(fam.probs, dtype=np.float64), (n, 2 * d)).copy()

    coord_words = [xs[:, i] for i in range(d)]
    if isinstance(fam, TwoPoint):
        u = rng.uniform(env.realization_seed, *coord_words, 0)
        pick = np.asarray(u) < fam.w
        out = np.where(
            pick[:, None],
            np.asarray(fam.v_plus, dtype=np.float64),
            np.asarray(fam.v_minus, dtype=np.float64),
        )
        return out

    # DirichletFloor: inverse-CDF Gamma draws per direction, normalized,
    # then pushed off the boundary to enforce the kappa floor exactly
    conc = np.asarray(fam.concentrations, dtype=np.float64)
    g = np.empty((n, 2 * d), dtype=np.float64)
    for j in range(2 * d):
        u = np.asarray(rng.uniform(env.realization_seed, *coord_words, j), dtype=np.float64)
        g[:, j] = gammaincinv(conc[j], u)
    p = g / g.sum(axis=1, keepdims=True)
    return kappa + (1.0 - 2 * d * kappa) * p


def sample_site(env: Environment, x) -> np.ndarray:
    """Transition vector at a single site, shape (2d,)."""
    return sample_sites(env, np.asarray(x, dtype=np.int64)[None, :])[0]


# ---------------------------------------------------------------------------
# JSON law specs, e.g.
#   {"d": 2, "kappa": 0.25,
#    "family": {"homogeneous": {"probs": [0.4, 0.1, 0.25, 0.25]}},
#    "seed": 12345}
# ---------------------------------------------------------------------------


def law_from_dict(obj: dict) -> EnvironmentLaw:
    fam_spec = obj["family"]
    if len(fam_spec) != 1:
        raise ValueError(f"family block must name exactly one family, got {sorted(fam_spec)}")
    (name, params), = fam_spec.items()
    if name == "homogeneous":
        family = Homogeneous(probs=tuple(params["probs"]))
    elif name == "two_point":
        family = TwoPoint(
            v_plus=tuple(params["v_plus"]),
            v_minus=tuple(params["v_minus"]),
            w=float(params["w"]),
        )
    elif name == "dirichlet_floor":
        family = DirichletFloor(concentrations=tuple(params["concentrations"]))
    else:
        raise ValueError(f"unknown environment family {name!r}")
    return EnvironmentLaw(
        d=int(obj["d"]),
        kappa=float(obj["kappa"]),
        family=family,
        master_seed=int(obj.get("seed", 0)),
    )


def law_from_json(text: str) -> EnvironmentLaw:
    return law_from_dict(json.loads(text))


def law_to_dict(law: EnvironmentLaw) -> dict:
    fam = law.family
    if isinstance(fam, Homogeneous):
        fam_spec = {"homogeneous": {"probs": list(fam.probs)}}
    elif isinstance(fam, TwoPoint):
        fam_spec = {
            "two_point": {"v_plus": list(fam.v_plus), "v_minus": list(fam.v_minus), "w": fam.w}
        }
    else:
        fam_spec = {"dirichlet_floor": {"concentrations": list(fam.concentrations)}}
    return {"d": law.d, "kappa": law.kappa, "family": fam_spec, "seed": law.master_seed}
