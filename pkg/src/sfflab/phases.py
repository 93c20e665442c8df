"""First-order phase statistics along orbit families.

Phase differences between shifted orbits of a family, their rescaled (CLT)
distribution, and the shift-dependent variances computed two independent
ways: the ergodic time average and the two-sided correlation series.  Also
hosts the finite-coupling orbit continuation used to check that continued
action differences are first-order in the coupling.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .dynamics import (
    NEAREST_NEIGHBOUR,
    CatMapSpec,
    SpecError,
    SystemSpec,
    coupled_step_unreduced,
    estimate_correlation,
    pair_hessian,
    pair_potential,
    step_arrays,
)
from .orbits import OrbitFamily, ShiftVector, _as_shift, enumerate_lattice, periodic_point_count
from .util import philox, spawn_seeds

TWO_PI = 2.0 * math.pi


class SeriesError(ValueError):
    """Correlation series cannot be summed (non-decaying fit)."""


class TableError(ValueError):
    """Variance table is incomplete or inconsistent."""


@dataclass(frozen=True)
class PhaseSample:
    family_id: int
    r: tuple[int, ...] | None
    s: tuple[int, ...]
    phi: float
    phi_tilde: float


@dataclass
class PhaseSampleSet:
    """Batch of rescaled phases Phi/sqrt(T) with sampling provenance."""

    phi_tilde: np.ndarray
    T: int
    s: tuple[int, ...]
    mode: str  # "exact" (periodic points) or "proxy" (uniform initial conditions)
    seed: int

    def samples(self) -> list[PhaseSample]:
        rt = math.sqrt(self.T)
        return [
            PhaseSample(family_id=i, r=None, s=self.s, phi=float(v * rt), phi_tilde=float(v))
            for i, v in enumerate(self.phi_tilde)
        ]


@dataclass
class CltReport:
    n: int
    skewness: float
    excess_kurtosis: float
    ks_distance: float
    fitted_variance: float
    degenerate: bool = False


@dataclass
class VarianceEstimate:
    sigma2: float
    std_error: float
    horizon: int
    plateau_ok: bool
    ladder: tuple  # ((horizon, sigma2, err), ...)
    s: tuple[int, ...]
    seed: int


@dataclass
class SeriesVariance:
    sigma2: float
    std_error: float
    truncation_bound: float
    eta_hat: float
    t_max: int
    s: tuple[int, ...]
    seed: int


@dataclass
class VarianceTable:
    """Per-relative-shift variances; the sole dynamical input to the SFF."""

    T: int
    kind: str  # "per-bond" | "full-shift"
    values: dict  # key -> (sigma2, std_error)

    def __post_init__(self):
        if self.kind not in ("per-bond", "full-shift"):
            raise TableError(f"unknown table kind {self.kind!r}")
        if self.kind == "per-bond" and 0 in self.values:
            s0, _ = self.values[0]
            if s0 != 0.0:
                raise TableError("per-bond table must have sigma2(0) = 0")
        for k, (v, e) in self.values.items():
            if v < -3.0 * e - 1e-12:
                raise TableError(f"negative variance at shift {k}")

    @classmethod
    def potts(cls, T: int, sigma2_phi: float) -> "VarianceTable":
        vals = {0: (0.0, 0.0)}
        for st in range(1, T):
            vals[st] = (float(sigma2_phi), 0.0)
        return cls(T=T, kind="per-bond", values=vals)

    @classmethod
    def from_profile(cls, T: int, profile: Callable[[int], float]) -> "VarianceTable":
        vals = {st: (float(profile(st)), 0.0) for st in range(T)}
        vals[0] = (0.0, 0.0)
        return cls(T=T, kind="per-bond", values=vals)

    def sigma2_array(self) -> np.ndarray:
        missing = [st for st in range(self.T) if st not in self.values]
        if missing:
            raise TableError(f"table missing relative shifts {missing}")
        return np.array([self.values[st][0] for st in range(self.T)])

    def err_array(self) -> np.ndarray:
        missing = [st for st in range(self.T) if st not in self.values]
        if missing:
            raise TableError(f"table missing relative shifts {missing}")
        return np.array([self.values[st][1] for st in range(self.T)])


# ---------------------------------------------------------------------------
# phase differences along families


def _family_position_matrix(family: OrbitFamily, shift: ShiftVector, m: CatMapSpec) -> np.ndarray:
    """Q[t, l] = position of site l at time t + shift_l along the family cycle."""
    T = family.period
    cols = []
    for orbit, off in zip(family.reps, shift.components):
        cyc = orbit.position_cycle(m)
        cols.append(np.roll(cyc, -off))
    return np.column_stack(cols)


def phase_difference(family: OrbitFamily, r, s, spec: SystemSpec) -> float:
    """Phi between the orbits phi_0^r Gamma_0 and phi_0^s Gamma_0.

    Summed with math.fsum so that synchronous pairs (s - r parallel to the
    diagonal) cancel exactly: the two sums then contain identical floating
    terms as multisets.
    """
    T = family.period
    if family.L != spec.L:
        raise SpecError("family size does not match the system")
    rv = _as_shift(r, family.L, T)
    sv = _as_shift(s, family.L, T)
    m = spec.subsystem
    v_r = pair_potential(_family_position_matrix(family, rv, m), spec)
    v_s = pair_potential(_family_position_matrix(family, sv, m), spec)
    return math.fsum(v_r.tolist() + (-v_s).tolist())


# ---------------------------------------------------------------------------
# finite-coupling orbit continuation (first-order identity)


@dataclass
class ContinuationResult:
    eps: tuple[float, ...]
    deltas: tuple[float, ...]
    residuals: tuple[float, ...]
    phi: float
    exponent: float
    converged: tuple[bool, ...]
    r: tuple[int, ...]
    s: tuple[int, ...]

    @property
    def all_converged(self) -> bool:
        return all(self.converged)


def _orbit_lift(family: OrbitFamily, shift: ShiftVector, m: CatMapSpec):
    """Unperturbed orbit as floats plus the exact integer lift offsets.

    Returns Y0 of shape (T, 2L) with per-time layout [q_0..q_{L-1}, p_0..p_{L-1}]
    and n_off (T, 2L) integers with phi_unreduced(x_t) + n_t = x_{t+1} exactly.
    """
    T, L = family.period, family.L
    lat = []
    for orbit, off in zip(family.reps, shift.components):
        qs, ps, den = orbit.cycle_lattice(m)
        qs = qs[off:] + qs[:off]
        ps = ps[off:] + ps[:off]
        lat.append((qs, ps, den))
    Y0 = np.empty((T, 2 * L))
    n_off = np.zeros((T, 2 * L))
    for l, (qs, ps, den) in enumerate(lat):
        for t in range(T):
            Y0[t, l] = qs[t] / den
            Y0[t, L + l] = ps[t] / den
            qi = m.a * qs[t] + m.b * ps[t]
            pi = m.c * qs[t] + m.d * ps[t]
            tn = (t + 1) % T
            if (qs[tn] - qi) % den or (ps[tn] - pi) % den:
                raise SpecError("representative cycle is not exactly periodic")
            n_off[t, l] = (qs[tn] - qi) // den
            n_off[t, L + l] = (ps[tn] - pi) // den
    return Y0, n_off


def _periodicity_residual(Y, n_off, spec: SystemSpec):
    L = Y.shape[1] // 2
    q, p = Y[:, :L], Y[:, L:]
    qn, pn = coupled_step_unreduced(q, p, spec)
    img = np.concatenate([qn, pn], axis=1) + n_off
    return img - np.roll(Y, -1, axis=0)


def _newton_periodic(Y0, n_off, spec: SystemSpec, tol=1e-12, max_iter=60):
    """Damped Newton on the T-step periodicity system in the fixed lift."""
    T, twoL = Y0.shape
    L = twoL // 2
    m = spec.subsystem
    Y = Y0.copy()
    G = _periodicity_residual(Y, n_off, spec)
    res = np.abs(G).max()
    for _ in range(max_iter):
        if res < tol:
            return Y, True
        J = np.zeros((T * twoL, T * twoL))
        eye = np.eye(L)
        for t in range(T):
            H = spec.epsilon * pair_hessian(Y[t, :L], spec)
            block = np.block([
                [m.a * eye + m.b * H, m.b * eye],
                [m.c * eye + m.d * H, m.d * eye],
            ])
            r0 = t * twoL
            J[r0:r0 + twoL, r0:r0 + twoL] = block
            c1 = ((t + 1) % T) * twoL
            J[r0:r0 + twoL, c1:c1 + twoL] -= np.eye(twoL)
        try:
            dY = np.linalg.solve(J, -G.reshape(-1)).reshape(T, twoL)
        except np.linalg.LinAlgError:
            return Y, False
        improved = False
        for alpha in (1.0, 0.5, 0.25, 0.125, 0.0625):
            Y_try = Y + alpha * dY
            G_try = _periodicity_residual(Y_try, n_off, spec)
            r_try = np.abs(G_try).max()
            if r_try < res:
                Y, G, res = Y_try, G_try, r_try
                improved = True
                break
        if not improved:
            return Y, res < tol
    return Y, res < tol


def _orbit_action(Y, n_off, spec: SystemSpec) -> float:
    """Action of the continued orbit in its fixed lift, winding-corrected.

    Uses the position-only form: the step's first argument is rebuilt from
    the next orbit position and the fixed winding integers, never from the
    dynamics (which would smuggle an explicit epsilon-dependence into the
    kinetic terms).  On the torus that sum is stationary under orbit motion
    only up to the integer momentum windings; adding sum_t n_p(t) * q_{t+1}
    makes it critical, so its epsilon-derivative is the explicit interaction
    term alone.  Every term is a function of the single orbit point at its
    time slot, so two shifts of one family sum identical multisets at
    eps = 0 and the action difference vanishes exactly there.
    """
    L = Y.shape[1] // 2
    m = spec.subsystem
    q = Y[:, :L]
    q_next = np.roll(q, -1, axis=0)
    q_img = q_next - n_off[:, :L]
    w0 = (m.d * q_img**2 - 2.0 * q_img * q + m.a * q**2) / (2.0 * m.b)
    v = spec.epsilon * pair_potential(q, spec)
    wind = n_off[:, L:] * q_next
    return math.fsum(w0.ravel().tolist() + v.tolist() + wind.ravel().tolist())


def action_difference_identity_check(
    family: OrbitFamily,
    spec: SystemSpec,
    eps_list: Sequence[float],
    r,
    s,
    tol: float = 1e-12,
) -> ContinuationResult:
    """Continue the orbit pair (phi^r, phi^s) in eps and test Delta = eps*Phi + O(eps^2)."""
    T = family.period
    m = spec.subsystem
    rv = _as_shift(r, family.L, T)
    sv = _as_shift(s, family.L, T)
    phi = phase_difference(family, rv, sv, spec)
    lift_r = _orbit_lift(family, rv, m)
    lift_s = _orbit_lift(family, sv, m)

    deltas, residuals, converged = [], [], []
    for eps in eps_list:
        spec_e = dataclasses.replace(spec, epsilon=float(eps))
        Yr, ok_r = _newton_periodic(lift_r[0], lift_r[1], spec_e, tol=tol)
        Ys, ok_s = _newton_periodic(lift_s[0], lift_s[1], spec_e, tol=tol)
        ok = ok_r and ok_s
        d = (
            _orbit_action(Yr, lift_r[1], spec_e) - _orbit_action(Ys, lift_s[1], spec_e)
            if ok
            else float("nan")
        )
        deltas.append(d)
        residuals.append(abs(d - eps * phi) if ok else float("nan"))
        converged.append(ok)

    pts = [
        (e, res)
        for e, res, ok in zip(eps_list, residuals, converged)
        if ok and e > 0 and res > 0
    ]
    if len(pts) >= 2:
        le = np.log10([p[0] for p in pts])
        lr = np.log10([p[1] for p in pts])
        exponent = float(np.polyfit(le, lr, 1)[0])
    else:
        exponent = float("nan")
    return ContinuationResult(
        eps=tuple(float(e) for e in eps_list),
        deltas=tuple(deltas),
        residuals=tuple(residuals),
        phi=phi,
        exponent=exponent,
        converged=tuple(converged),
        r=rv.components,
        s=sv.components,
    )


# ---------------------------------------------------------------------------
# phase-distribution sampling and CLT diagnostics


def sample_phase_distribution(
    spec: SystemSpec,
    T: int,
    s,
    budget: int,
    seed: int,
    mode: str = "auto",
    exact_limit: int = 20000,
    batch: int = 1 << 15,
) -> PhaseSampleSet:
    """Draw rescaled phases Phi_s/sqrt(T) with stability-amplitude weights.

    For linear maps the amplitude weights are uniform, so "exact" mode draws
    periodic points uniformly from the enumerated period-T set.  For periods
    where enumeration is infeasible, "proxy" mode samples uniform initial
    conditions instead (the amplitude-squared measure is Lebesgue); the mode
    is recorded on the returned set.
    """
    if budget <= 0:
        raise SpecError("sampling budget must be positive")
    sv = _as_shift(s, spec.L, T)
    if mode == "auto":
        mode = "exact" if periodic_point_count(T, spec.subsystem) <= exact_limit else "proxy"
    if mode not in ("exact", "proxy"):
        raise SpecError(f"unknown sampling mode {mode!r}")
    rng = philox(seed)
    out = np.empty(budget)
    done = 0
    while done < budget:
        n = min(batch, budget - done)
        if mode == "exact":
            out[done:done + n] = _exact_phase_batch(spec, T, sv, n, rng)
        else:
            out[done:done + n] = _proxy_phase_batch(spec, T, sv, n, rng)
        done += n
    return PhaseSampleSet(phi_tilde=out / math.sqrt(T), T=T, s=sv.components, mode=mode, seed=seed)


def _exact_phase_batch(spec, T, sv, n, rng):
    m = spec.subsystem
    nq_all, np_all, den = enumerate_lattice(T, m)
    L = spec.L
    idx = rng.integers(0, len(nq_all), size=(n, L))
    nq = nq_all[idx].astype(np.int64)
    np_ = np_all[idx].astype(np.int64)
    Q = np.empty((T, n, L))
    for t in range(T):
        Q[t] = nq / den
        nq, np_ = (m.a * nq + m.b * np_) % den, (m.c * nq + m.d * np_) % den
    phi = np.zeros(n)
    for t in range(T):
        qs = np.column_stack([Q[(t + sv.components[l]) % T, :, l] for l in range(L)])
        phi += pair_potential(Q[t], spec) - pair_potential(qs, spec)
    return phi


def _proxy_phase_batch(spec, T, sv, n, rng):
    m = spec.subsystem
    L = spec.L
    q = rng.random((n, L))
    p = rng.random((n, L))
    qs, ps = q.copy(), p.copy()
    for l in range(L):
        for _ in range(sv.components[l]):
            qs[:, l], ps[:, l] = step_arrays(qs[:, l], ps[:, l], m)
    phi = np.zeros(n)
    for _ in range(T):
        phi += pair_potential(q, spec) - pair_potential(qs, spec)
        q, p = step_arrays(q, p, m)
        qs, ps = step_arrays(qs, ps, m)
    return phi


def _extract_values(samples) -> np.ndarray:
    if isinstance(samples, PhaseSampleSet):
        return np.asarray(samples.phi_tilde, dtype=float)
    if len(samples) and isinstance(samples[0], PhaseSample):
        return np.array([s.phi_tilde for s in samples])
    return np.asarray(samples, dtype=float)


def clt_diagnostics(samples) -> CltReport:
    """Moments and KS distance against the centered normal with the sample variance."""
    vals = _extract_values(samples)
    if len(vals) < 1000:
        raise SpecError("clt_diagnostics needs at least 1000 samples")
    if np.abs(vals).max() < 1e-13:
        return CltReport(n=len(vals), skewness=0.0, excess_kurtosis=0.0,
                         ks_distance=0.0, fitted_variance=0.0, degenerate=True)
    sigma = float(vals.std())
    ks = stats.kstest(vals, "norm", args=(0.0, sigma)).statistic
    return CltReport(
        n=len(vals),
        skewness=float(stats.skew(vals)),
        excess_kurtosis=float(stats.kurtosis(vals)),
        ks_distance=float(ks),
        fitted_variance=sigma * sigma,
        degenerate=False,
    )


# ---------------------------------------------------------------------------
# variance estimators


def variance_time_average(
    spec: SystemSpec,
    s,
    horizon: int,
    samples: int,
    seed: int,
    batch: int = 1 << 15,
) -> VarianceEstimate:
    """Ergodic estimator: sigma^2 = (1/T) < [sum_t v_s(phi^t x)]^2 > at T = horizon.

    Reports a ladder of horizons (quarter, half, full); the plateau flag is
    set when the last three rungs agree pairwise within one combined
    standard error.
    """
    if horizon < 4:
        raise SpecError("horizon must be >= 4")
    s_t = tuple(int(v) for v in s)
    if len(s_t) != spec.L or any(v < 0 for v in s_t):
        raise SpecError("shift must be a length-L tuple of nonnegative integers")
    rng = philox(seed)
    checkpoints = sorted({max(1, horizon // 4), max(1, horizon // 2), horizon})
    sums = {c: 0.0 for c in checkpoints}
    sums2 = {c: 0.0 for c in checkpoints}
    m = spec.subsystem
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        q = rng.random((n, spec.L))
        p = rng.random((n, spec.L))
        qs, ps = q.copy(), p.copy()
        for l in range(spec.L):
            for _ in range(s_t[l]):
                qs[:, l], ps[:, l] = step_arrays(qs[:, l], ps[:, l], m)
        acc = np.zeros(n)
        for t in range(1, horizon + 1):
            acc += pair_potential(q, spec) - pair_potential(qs, spec)
            q, p = step_arrays(q, p, m)
            qs, ps = step_arrays(qs, ps, m)
            if t in sums:
                vals = acc * acc / t
                sums[t] += vals.sum()
                sums2[t] += (vals * vals).sum()
        done += n

    ladder = []
    for c in checkpoints:
        mean = sums[c] / samples
        var = max(sums2[c] / samples - mean * mean, 0.0)
        ladder.append((c, float(mean), float(math.sqrt(var / samples))))
    plateau_ok = True
    for (c1, v1, e1), (c2, v2, e2) in zip(ladder, ladder[1:]):
        if abs(v1 - v2) > math.sqrt(e1 * e1 + e2 * e2):
            plateau_ok = False
    _, sig2, err = ladder[-1]
    return VarianceEstimate(sigma2=sig2, std_error=err, horizon=horizon,
                            plateau_ok=plateau_ok, ladder=tuple(ladder), s=s_t, seed=seed)


def variance_series(
    spec: SystemSpec,
    s,
    t_max: int,
    samples: int,
    seed: int,
) -> SeriesVariance:
    """Green-Kubo style series: sigma^2 = 2 sum_t [C_w(t*1) - C_w(t*1 + s)]."""
    s_t = tuple(int(v) for v in s)
    if len(s_t) != spec.L:
        raise SpecError("shift must have one component per site")
    seeds = spawn_seeds(seed, (t_max + 1) + (2 * t_max + 1))
    sync = [
        estimate_correlation(spec, (t,) * spec.L, samples, seeds[t])
        for t in range(t_max + 1)
    ]
    shifted = [
        estimate_correlation(
            spec, tuple(t + v for v in s_t), samples, seeds[t_max + 1 + (t + t_max)]
        )
        for t in range(-t_max, t_max + 1)
    ]
    total = sync[0].value + 2.0 * sum(c.value for c in sync[1:]) - sum(c.value for c in shifted)
    sigma2 = 2.0 * total
    var = sync[0].std_error**2 + sum((2.0 * c.std_error) ** 2 for c in sync[1:])
    var += sum(c.std_error**2 for c in shifted)
    err = 2.0 * math.sqrt(var)

    eta_hat, bound = _fit_tail([c.value for c in sync], [c.std_error for c in sync])
    return SeriesVariance(sigma2=float(sigma2), std_error=float(err),
                          truncation_bound=bound, eta_hat=eta_hat,
                          t_max=t_max, s=s_t, seed=seed)


def _fit_tail(c_vals, c_errs):
    """Geometric tail bound from the fitted decay of the synchronous correlations."""
    usable = [
        (t, abs(v)) for t, (v, e) in enumerate(zip(c_vals, c_errs))
        if t >= 1 and abs(v) > 3.0 * e
    ]
    if len(usable) < 2:
        floor = float(np.median(c_errs[1:])) if len(c_errs) > 1 else 0.0
        return 0.0, 8.0 * floor
    ts = np.array([u[0] for u in usable], dtype=float)
    lv = np.log([u[1] for u in usable])
    slope = float(np.polyfit(ts, lv, 1)[0])
    eta = math.exp(slope)
    if eta >= 1.0:
        raise SeriesError(f"fitted correlations do not decay (eta = {eta:.3f})")
    c_last = usable[-1][1]
    return eta, 8.0 * c_last * eta / (1.0 - eta)


def series_from_correlations(
    c_sync: Callable[[int], float],
    c_shift: Callable[[int], float],
    t_max: int,
):
    """Pure-arithmetic series path for synthetic correlation models.

    c_sync(t) is C_w(t*1); c_shift(t) is C_w(t*1 + s).  Returns
    (sigma2, truncation_bound, eta_hat).
    """
    terms = [c_sync(t) - c_shift(t) for t in range(-t_max, t_max + 1)]
    sigma2 = 2.0 * math.fsum(terms)
    tail_vals = [abs(c_sync(t)) for t in range(1, t_max + 1)]
    nz = [(t, v) for t, v in enumerate(tail_vals, start=1) if v > 0]
    if len(nz) < 2:
        return sigma2, 0.0, 0.0
    eta = (nz[-1][1] / nz[-2][1]) ** (1.0 / (nz[-1][0] - nz[-2][0]))
    if eta >= 1.0:
        raise SeriesError(f"correlations do not decay (eta = {eta:.3f})")
    c_last = abs(c_sync(t_max)) + abs(c_shift(t_max)) + abs(c_shift(-t_max))
    return sigma2, 4.0 * c_last * eta / (1.0 - eta), eta


def quotient_projection(s, T: int | None = None) -> tuple[int, ...]:
    """pi(s) = (s_2 - s_1, ..., s_L - s_1) mod T: the class of s in Z_T^{L-1}."""
    if isinstance(s, ShiftVector):
        comp, T = s.components, s.modulus
    else:
        if T is None:
            raise SpecError("quotient_projection needs the modulus T")
        comp = tuple(int(v) for v in s)
    return tuple((c - comp[0]) % T for c in comp[1:])


# ---------------------------------------------------------------------------
# per-bond variances (two-site problem)


def _bond_w(qx, qy, amplitude):
    return amplitude * np.cos(TWO_PI * (qx - qy))


def bond_variance_time_average(
    m: CatMapSpec,
    s_tilde: int,
    horizon: int,
    samples: int,
    seed: int,
    amplitude: float = 1.0,
    batch: int = 1 << 15,
):
    """Time-average variance of v_{s~}(x, y) = w(x, y) - w(psi^{s~} x, y)."""
    rng = philox(seed)
    total = total2 = 0.0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        q = rng.random((n, 2))
        p = rng.random((n, 2))
        qs, ps = q.copy(), p.copy()
        for _ in range(s_tilde):
            qs[:, 0], ps[:, 0] = step_arrays(qs[:, 0], ps[:, 0], m)
        acc = np.zeros(n)
        for _ in range(horizon):
            acc += _bond_w(q[:, 0], q[:, 1], amplitude) - _bond_w(qs[:, 0], qs[:, 1], amplitude)
            q[:, 0], p[:, 0] = step_arrays(q[:, 0], p[:, 0], m)
            q[:, 1], p[:, 1] = step_arrays(q[:, 1], p[:, 1], m)
            qs[:, 0], ps[:, 0] = step_arrays(qs[:, 0], ps[:, 0], m)
            qs[:, 1], ps[:, 1] = step_arrays(qs[:, 1], ps[:, 1], m)
        vals = acc * acc / horizon
        total += vals.sum()
        total2 += (vals * vals).sum()
        done += n
    mean = total / samples
    var = max(total2 / samples - mean * mean, 0.0)
    return float(mean), float(math.sqrt(var / samples))


def _bond_correlation(m, shift2, samples, seed, amplitude=1.0, batch=1 << 17):
    """C_w(shift2) on the two-site bond problem (observable = single w)."""
    rng = philox(seed)
    m_off = max(0, -min(shift2))
    t0 = m_off
    t1x, t1y = m_off + shift2[0], m_off + shift2[1]
    needed = sorted({t0, t1x, t1y})
    s_p = s_p2 = s_a = s_b = 0.0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        q = rng.random((n, 2))
        p = rng.random((n, 2))
        snaps = {}
        t = 0
        if t in needed:
            snaps[0] = q.copy()
        while t < needed[-1]:
            q, p = step_arrays(q, p, m)
            t += 1
            if t in needed:
                snaps[t] = q.copy()
        a = _bond_w(snaps[t0][:, 0], snaps[t0][:, 1], amplitude)
        b = _bond_w(snaps[t1x][:, 0], snaps[t1y][:, 1], amplitude)
        prod = a * b
        s_p += prod.sum()
        s_p2 += (prod * prod).sum()
        s_a += a.sum()
        s_b += b.sum()
        done += n
    mean_p = s_p / samples
    val = mean_p - (s_a / samples) * (s_b / samples)
    var = max(s_p2 / samples - mean_p**2, 0.0)
    return float(val), float(math.sqrt(var / samples))


def bond_variance_series(
    m: CatMapSpec,
    s_tilde: int,
    t_max: int,
    samples: int,
    seed: int,
    amplitude: float = 1.0,
):
    """Series estimator of the bond variance: 2 sum_t [C(t,t) - C(t+s~, t)]."""
    seeds = spawn_seeds(seed, (t_max + 1) + (2 * t_max + 1))
    sync = [_bond_correlation(m, (t, t), samples, seeds[t], amplitude) for t in range(t_max + 1)]
    shifted = [
        _bond_correlation(m, (t + s_tilde, t), samples, seeds[t_max + 1 + (t + t_max)], amplitude)
        for t in range(-t_max, t_max + 1)
    ]
    total = sync[0][0] + 2.0 * sum(v for v, _ in sync[1:]) - sum(v for v, _ in shifted)
    var = sync[0][1] ** 2 + sum((2.0 * e) ** 2 for _, e in sync[1:])
    var += sum(e**2 for _, e in shifted)
    return 2.0 * total, 2.0 * math.sqrt(var)


def per_bond_variance_table(
    spec: SystemSpec,
    T: int,
    estimator: str = "time-average",
    samples: int = 20000,
    seed: int = 0,
    horizon: int | None = None,
    t_max: int = 10,
) -> VarianceTable:
    """sigma^2_{v_{s~}} for s~ = 0..T-1 on the two-site bond problem."""
    if spec.topology != NEAREST_NEIGHBOUR:
        raise SpecError("per-bond table requires nearest-neighbour-periodic topology")
    if estimator not in ("time-average", "series"):
        raise SpecError(f"unknown estimator {estimator!r}")
    horizon = horizon or max(256, 8 * T)
    seeds = spawn_seeds(seed, T)
    values = {0: (0.0, 0.0)}
    for st in range(1, T):
        if estimator == "time-average":
            v, e = bond_variance_time_average(
                spec.subsystem, st, horizon, samples, seeds[st], spec.amplitude
            )
        else:
            v, e = bond_variance_series(
                spec.subsystem, st, t_max, samples, seeds[st], spec.amplitude
            )
        values[st] = (v, e)
    return VarianceTable(T=T, kind="per-bond", values=values)
