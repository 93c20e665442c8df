"""Coupled cat-map dynamics on the L-fold 2-torus.

Concrete map family: a linear cat map per site, coupled by a position kick
through the pair potential v(q, q') = cos(2*pi*(q - q' + offset)).  The
first-order interaction observable is w(x, y) = cos(2*pi*(q_x - q_y)), a
mean-zero pair function whose correlation functions vanish identically for
any nonzero site-wise time shift (trigonometric observables of a hyperbolic
linear map never return to their own Fourier mode).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .util import mod1, mod1f, philox

TWO_PI = 2.0 * math.pi

NEAREST_NEIGHBOUR = "nearest-neighbour-periodic"
ALL_TO_ALL = "all-to-all"
TOPOLOGIES = (NEAREST_NEIGHBOUR, ALL_TO_ALL)
INTERACTIONS = ("cosine",)


class SpecError(ValueError):
    """Invalid system specification."""


@dataclass(frozen=True)
class TorusPoint:
    """Phase-space point on the 2-torus; coordinates reduced into [0, 1)."""

    q: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "q", mod1f(float(self.q)))
        object.__setattr__(self, "p", mod1f(float(self.p)))


@dataclass(frozen=True)
class ManyBodyPoint:
    """Point on the L-fold product torus."""

    sites: tuple[TorusPoint, ...]

    def __post_init__(self):
        if len(self.sites) < 1:
            raise SpecError("ManyBodyPoint needs at least one site")
        object.__setattr__(self, "sites", tuple(self.sites))

    def __len__(self) -> int:
        return len(self.sites)

    def qs(self) -> np.ndarray:
        return np.array([s.q for s in self.sites])

    def ps(self) -> np.ndarray:
        return np.array([s.p for s in self.sites])

    @classmethod
    def from_arrays(cls, q: Sequence[float], p: Sequence[float]) -> "ManyBodyPoint":
        return cls(tuple(TorusPoint(float(a), float(b)) for a, b in zip(q, p)))


@dataclass(frozen=True)
class CatMapSpec:
    """Integer unimodular matrix [[a, b], [c, d]]; hyperbolic: |a + d| > 2."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for v in (self.a, self.b, self.c, self.d):
            if not isinstance(v, int):
                raise SpecError("cat-map entries must be integers")
        if self.a * self.d - self.b * self.c != 1:
            raise SpecError("cat map must have determinant 1")
        if abs(self.a + self.d) <= 2:
            raise SpecError("cat map must be hyperbolic: |a + d| > 2")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=np.int64)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}


DEFAULT_MAP = CatMapSpec(2, 1, 1, 1)


@dataclass(frozen=True)
class SystemSpec:
    """Coupled system: L homogeneous cat-map sites plus a pair interaction."""

    L: int
    subsystem: CatMapSpec = DEFAULT_MAP
    interaction: str = "cosine"
    amplitude: float = 1.0
    topology: str = NEAREST_NEIGHBOUR
    epsilon: float = 0.0

    def __post_init__(self):
        if self.L < 1:
            raise SpecError("L must be >= 1")
        if self.interaction not in INTERACTIONS:
            raise SpecError(f"unknown interaction {self.interaction!r}")
        if self.topology not in TOPOLOGIES:
            raise SpecError(f"unknown topology {self.topology!r}")
        if self.topology == NEAREST_NEIGHBOUR and self.L < 2:
            raise SpecError("nearest-neighbour-periodic topology requires L >= 2")
        if self.epsilon < 0:
            raise SpecError("epsilon must be >= 0")

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "subsystem": self.subsystem.to_dict(),
            "interaction": self.interaction,
            "amplitude": self.amplitude,
            "topology": self.topology,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        sub = d.get("subsystem")
        m = CatMapSpec(**sub) if sub else DEFAULT_MAP
        return cls(
            L=int(d["L"]),
            subsystem=m,
            interaction=d.get("interaction", "cosine"),
            amplitude=float(d.get("amplitude", 1.0)),
            topology=d.get("topology", NEAREST_NEIGHBOUR),
            epsilon=float(d.get("epsilon", 0.0)),
        )


@dataclass(frozen=True)
class CorrelationEstimate:
    """Monte Carlo estimate of C_w(shift) with the mean subtracted."""

    shift: tuple[int, ...]
    value: float
    std_error: float
    samples: int
    seed: int

    def __post_init__(self):
        if self.std_error < 0:
            raise SpecError("std_error must be >= 0")


# ---------------------------------------------------------------------------
# elementary steps


def subsystem_step(x: TorusPoint, m: CatMapSpec) -> TorusPoint:
    """One application of the linear torus map to a single site."""
    return TorusPoint(mod1f(m.a * x.q + m.b * x.p), mod1f(m.c * x.q + m.d * x.p))


def step_arrays(q: np.ndarray, p: np.ndarray, m: CatMapSpec):
    """Vectorized subsystem step; same IEEE operations as subsystem_step."""
    return mod1(m.a * q + m.b * p), mod1(m.c * q + m.d * p)


def pair_potential(q: np.ndarray, spec: SystemSpec, offsets=None) -> np.ndarray:
    """V(q) = sum over bonds of amplitude * cos(2*pi*(q_l - q_{l+1} + offset_l)).

    q has shape (..., L); returns shape (...).  offsets (length L, one per
    bond (l, l+1 mod L)) realize the translation family used by the quantum
    ensemble; None means all zero.
    """
    q = np.asarray(q, dtype=float)
    L = q.shape[-1]
    if spec.topology == ALL_TO_ALL:
        if offsets is not None:
            raise SpecError("bond offsets are defined for nearest-neighbour topology only")
        tot = np.zeros(q.shape[:-1])
        for i in range(L):
            for j in range(L):
                if i != j:
                    tot += np.cos(TWO_PI * (q[..., i] - q[..., j]))
        return spec.amplitude * tot
    if offsets is None:
        offsets = np.zeros(L)
    tot = np.zeros(q.shape[:-1])
    for l in range(L):
        tot += np.cos(TWO_PI * (q[..., l] - q[..., (l + 1) % L] + offsets[l]))
    return spec.amplitude * tot


def pair_gradient(q: np.ndarray, spec: SystemSpec, offsets=None) -> np.ndarray:
    """dV/dq_l, shape (..., L)."""
    q = np.asarray(q, dtype=float)
    L = q.shape[-1]
    grad = np.zeros_like(q)
    if spec.topology == ALL_TO_ALL:
        for i in range(L):
            for j in range(L):
                if i != j:
                    s = np.sin(TWO_PI * (q[..., i] - q[..., j]))
                    grad[..., i] -= TWO_PI * s
                    grad[..., j] += TWO_PI * s
        return spec.amplitude * grad
    if offsets is None:
        offsets = np.zeros(L)
    for l in range(L):
        s = np.sin(TWO_PI * (q[..., l] - q[..., (l + 1) % L] + offsets[l]))
        grad[..., l] -= TWO_PI * s
        grad[..., (l + 1) % L] += TWO_PI * s
    return spec.amplitude * grad


def pair_hessian(q: np.ndarray, spec: SystemSpec, offsets=None) -> np.ndarray:
    """d^2 V / dq_i dq_j for a single configuration q of shape (L,)."""
    q = np.asarray(q, dtype=float)
    L = q.shape[-1]
    H = np.zeros((L, L))
    if offsets is None:
        offsets = np.zeros(L)
    if spec.topology == ALL_TO_ALL:
        pairs = [(i, j, 0.0) for i in range(L) for j in range(L) if i != j]
    else:
        pairs = [(l, (l + 1) % L, offsets[l]) for l in range(L)]
    for i, j, off in pairs:
        c = -(TWO_PI**2) * math.cos(TWO_PI * (q[i] - q[j] + off))
        H[i, i] += c
        H[j, j] += c
        H[i, j] -= c
        H[j, i] -= c
    return spec.amplitude * H


def coupled_step_unreduced(q: np.ndarray, p: np.ndarray, spec: SystemSpec, offsets=None):
    """Kick-then-rotate composition without modular reduction (for lifts/Jacobians)."""
    m = spec.subsystem
    pk = p + spec.epsilon * pair_gradient(q, spec, offsets)
    return m.a * q + m.b * pk, m.c * q + m.d * pk


def coupled_step(x: ManyBodyPoint, spec: SystemSpec) -> ManyBodyPoint:
    """One step of the coupled map: momentum kick by eps * dV/dq, then cat maps."""
    if len(x) != spec.L:
        raise SpecError("point has wrong number of sites")
    q, p = x.qs(), x.ps()
    pk = mod1(p + spec.epsilon * pair_gradient(q, spec))
    qn, pn = step_arrays(q, pk, spec.subsystem)
    return ManyBodyPoint.from_arrays(qn, pn)


def interaction_derivative(x, spec: SystemSpec, offsets=None):
    """d/d(eps) of the generating function at eps = 0: the pair potential V(q).

    Accepts a ManyBodyPoint (returns float) or an array of positions with
    shape (..., L) (returns shape (...)).
    """
    if isinstance(x, ManyBodyPoint):
        if len(x) != spec.L:
            raise SpecError("point has wrong number of sites")
        return float(pair_potential(x.qs(), spec, offsets))
    return pair_potential(x, spec, offsets)


# ---------------------------------------------------------------------------
# Monte Carlo correlation estimator


def _site_positions_at(q0, p0, m, times_needed):
    """Evolve a batch and snapshot positions at the requested step counts."""
    snaps = {}
    q, p = q0, p0
    t = 0
    t_max = max(times_needed)
    if t in times_needed:
        snaps[0] = q.copy()
    while t < t_max:
        q, p = step_arrays(q, p, m)
        t += 1
        if t in times_needed:
            snaps[t] = q.copy()
    return snaps


def estimate_correlation(
    spec: SystemSpec,
    shift: Sequence[int],
    samples: int,
    seed: int,
    batch: int = 1 << 17,
) -> CorrelationEstimate:
    """C_w(shift) = <W(phi^shift x) W(x)> - <W>^2 for W the interaction derivative.

    Uniform (Lebesgue = SRB) initial conditions.  Negative shift components
    are handled by translating both factors with a synchronous offset, using
    the invariance of the measure.
    """
    shift = tuple(int(s) for s in shift)
    if len(shift) != spec.L:
        raise SpecError("shift must have one component per site")
    if samples <= 0:
        raise SpecError("samples must be positive")
    rng = philox(seed)
    m_off = max(0, -min(shift))
    base_t = m_off
    shifted_t = [m_off + s for s in shift]
    needed = sorted({base_t, *shifted_t})

    n_done = 0
    s_p = s_p2 = s_a = s_b = 0.0
    while n_done < samples:
        n = min(batch, samples - n_done)
        q0 = rng.random((n, spec.L))
        p0 = rng.random((n, spec.L))
        snaps = _site_positions_at(q0, p0, spec.subsystem, set(needed))
        a = pair_potential(snaps[base_t], spec)
        qs = np.column_stack([snaps[shifted_t[l]][:, l] for l in range(spec.L)])
        b = pair_potential(qs, spec)
        prod = a * b
        s_p += prod.sum()
        s_p2 += (prod * prod).sum()
        s_a += a.sum()
        s_b += b.sum()
        n_done += n

    mean_p = s_p / samples
    value = mean_p - (s_a / samples) * (s_b / samples)
    var_p = max(s_p2 / samples - mean_p**2, 0.0)
    std_error = math.sqrt(var_p / samples)
    return CorrelationEstimate(shift=shift, value=float(value),
                               std_error=float(std_error), samples=samples, seed=seed)
