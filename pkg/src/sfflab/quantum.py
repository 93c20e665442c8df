"""Exact quantization of the coupled cat-map circuit and numerical SFF.

Convention: position-kernel quantization of a unit-b cat map,

    U[k', k] = (i b N)^(-1/2) exp(i pi (a k^2 - 2 k' k + d k'^2) / (b N)),

with hbar = 1/(2 pi N).  Consistency on the torus requires a*N and d*N even
(even N for the default map).  The averaging ensemble combines fractional
torus translations per site (exact quantizations of affine cat maps, which
share the linear map's orbit counts, amplitudes, and correlation structure)
with random phase offsets in the pair-potential argument; both preserve the
classical statistics entering the variance tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ALL_TO_ALL, NEAREST_NEIGHBOUR, CatMapSpec, DEFAULT_MAP, SpecError, SystemSpec, pair_potential
from .potts import SffPrediction
from .util import philox, run_tasks, window_average

CONVENTION = "position-kernel-unit-b"


class ConventionError(ValueError):
    """Map/dimension combination not representable in this convention."""


class MemoryBudgetError(RuntimeError):
    """Requested circuit would exceed the configured memory budget."""


class GridError(ValueError):
    """Comparison grids do not overlap."""


@dataclass
class QuantizedMap:
    N: int
    matrix: np.ndarray
    provenance: dict


@dataclass(frozen=True)
class EnsembleSpec:
    """Averaging recipe: member count, seed, and which families to randomize."""

    members: int = 1
    seed: int = 0
    translations: bool = True
    bond_offsets: bool = True


@dataclass(frozen=True)
class CircuitSpec:
    """L-site circuit at subsystem dimension N; coupling via epsilon or Lambda."""

    L: int
    N: int
    subsystem: CatMapSpec = DEFAULT_MAP
    epsilon: float | None = None
    lam: float | None = None
    amplitude: float = 1.0
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    memory_budget_bytes: int = 2 << 30
    eig_crossover: int = 2048

    def __post_init__(self):
        if self.L < 1 or self.N < 2:
            raise SpecError("need L >= 1 and N >= 2")
        if (self.epsilon is None) == (self.lam is None):
            raise SpecError("specify exactly one of epsilon or lam")

    @property
    def dim(self) -> int:
        return self.N**self.L

    @property
    def T_H(self) -> int:
        return self.N**self.L

    @property
    def hbar(self) -> float:
        return 1.0 / (2.0 * math.pi * self.N)

    @property
    def eps_effective(self) -> float:
        if self.lam is not None:
            return math.sqrt(self.lam) * self.hbar / math.sqrt(self.T_H)
        return self.epsilon

    def system(self) -> SystemSpec:
        topo = NEAREST_NEIGHBOUR if self.L >= 2 else ALL_TO_ALL
        return SystemSpec(L=self.L, subsystem=self.subsystem, amplitude=self.amplitude,
                          topology=topo, epsilon=self.eps_effective)


@dataclass(frozen=True)
class MemberRealization:
    """One ensemble member: per-site translations and per-bond potential offsets."""

    site_translations: tuple  # ((vq, vp), ...) length L
    bond_offsets: tuple  # length L


@dataclass
class SffSeries:
    """Numerical K(t): window-averaged values plus the raw ensemble means."""

    times: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    raw_values: np.ndarray
    raw_errors: np.ndarray
    meta: dict = field(default_factory=dict)
    member_values: np.ndarray | None = None  # windowed rows, one per member

    def __post_init__(self):
        if np.any(self.raw_values < 0) or np.any(self.errors < 0):
            raise SpecError("SFF series values and errors must be nonnegative")

    def band_mean(self, t_lo: float, t_hi: float) -> tuple[float, float]:
        """Ensemble mean and standard error of the series averaged over a band.

        Uses the per-member rows so correlations across nearby times do not
        understate the error; requires member_values.
        """
        if self.member_values is None:
            raise SpecError("band_mean needs a series built with keep_members=True")
        sel = (self.times >= t_lo) & (self.times <= t_hi)
        if not sel.any():
            raise SpecError("empty time band")
        per_member = self.member_values[:, sel].mean(axis=1)
        n = len(per_member)
        return float(per_member.mean()), float(per_member.std(ddof=1) / math.sqrt(n))


def quantize_subsystem(m: CatMapSpec, N: int) -> QuantizedMap:
    """Discretized e^{iW/hbar} kernel of the linear map; unitary by Gauss sums."""
    if N < 2:
        raise ConventionError("need N >= 2")
    if abs(m.b) != 1:
        raise ConventionError(
            f"convention {CONVENTION!r} supports |b| = 1 cat maps only; got b = {m.b}"
        )
    if (m.a * N) % 2 != 0 or (m.d * N) % 2 != 0:
        raise ConventionError(
            f"convention {CONVENTION!r} requires a*N and d*N even; "
            f"got a = {m.a}, d = {m.d}, N = {N} (use even N for this map)"
        )
    k = np.arange(N, dtype=np.int64)
    kk, kp = k[None, :], k[:, None]
    modulus = 2 * abs(m.b) * N
    ph = (m.a * kk * kk - 2 * kp * kk + m.d * kp * kp) % modulus
    U = np.exp(1j * np.pi * ph / (m.b * N)) / np.sqrt(1j * m.b * N)
    return QuantizedMap(N=N, matrix=U,
                        provenance={"map": m.to_dict(), "convention": CONVENTION})


def torus_translation(N: int, vq: float, vp: float) -> np.ndarray:
    """Quantized phase-space translation x -> x + (vq, vp); vq, vp real."""
    n = np.arange(N)
    boost = np.exp(2j * np.pi * vp * n)
    F = np.exp(-2j * np.pi * np.outer(n, n) / N) / math.sqrt(N)
    mom = np.where(n <= N // 2, n, n - N)
    shift = F.conj().T @ (np.exp(-2j * np.pi * vq * mom)[:, None] * F)
    return boost[:, None] * shift


def position_grid(N: int, L: int) -> np.ndarray:
    """All positions q in {0, 1/N, ...}^L, shape (N^L, L), row-major in k."""
    idx = np.indices((N,) * L).reshape(L, -1).T
    return idx / N


def coupling_operator(spec: CircuitSpec, offsets=None) -> np.ndarray:
    """Diagonal entries exp(i eps V(q) / hbar) on the position grid."""
    if spec.L < 2:
        return np.ones(spec.dim, dtype=complex)
    q = position_grid(spec.N, spec.L)
    v = pair_potential(q, spec.system(), offsets)
    return np.exp(1j * spec.eps_effective * v / spec.hbar)


def ensemble_members(spec: CircuitSpec) -> list[MemberRealization]:
    """Seeded member realizations.

    For L = 2 the two bonds of the periodic chain act on the same site pair;
    constraining the offsets to differ by a quarter period keeps the member's
    full-shift variance at the per-bond table value 2*sigma2_phi (the
    unconstrained two-bond sum interferes and would rescale the damping).
    """
    rng = philox(spec.ensemble.seed)
    out = []
    for _ in range(spec.ensemble.members):
        tr = rng.random((spec.L, 2)) if spec.ensemble.translations else np.zeros((spec.L, 2))
        if spec.ensemble.bond_offsets and spec.L >= 2:
            base = rng.random(spec.L)
            if spec.L == 2:
                off = (float(base[0]), float((base[0] - 0.25) % 1.0))
            else:
                off = tuple(float(b) for b in base)
        else:
            off = (0.0,) * spec.L
        out.append(MemberRealization(
            site_translations=tuple((float(a), float(b)) for a, b in tr),
            bond_offsets=off,
        ))
    return out


def _check_budget(spec: CircuitSpec, factor: int = 3) -> None:
    need = factor * 16 * spec.dim * spec.dim
    if need > spec.memory_budget_bytes:
        raise MemoryBudgetError(
            f"circuit of dimension {spec.dim} needs ~{need / 2**30:.1f} GiB "
            f"(budget {spec.memory_budget_bytes / 2**30:.1f} GiB)"
        )


def subsystem_unitaries(spec: CircuitSpec, member: MemberRealization | None = None):
    base = quantize_subsystem(spec.subsystem, spec.N).matrix
    if member is None:
        return [base] * spec.L
    out = []
    for vq, vp in member.site_translations:
        if vq == 0.0 and vp == 0.0:
            out.append(base)
        else:
            out.append(torus_translation(spec.N, vq, vp) @ base)
    return out


def build_circuit(spec: CircuitSpec, member: MemberRealization | None = None) -> np.ndarray:
    """U = (tensor of subsystem maps) * diagonal coupling; exact kron at eps = 0."""
    _check_budget(spec)
    subs = subsystem_unitaries(spec, member)
    U = subs[0]
    for u in subs[1:]:
        U = np.kron(U, u)
    if spec.eps_effective != 0.0:
        coup = coupling_operator(spec, member.bond_offsets if member else None)
        U = U * coup[None, :]
    return U


def trace_powers(U: np.ndarray, t_max: int, eig_crossover: int = 2048) -> np.ndarray:
    """tr U^t for t = 1..t_max, by eigenphases below the crossover dimension."""
    dim = U.shape[0]
    out = np.empty(t_max, dtype=complex)
    if dim <= eig_crossover:
        ev = np.linalg.eigvals(U)
        cur = np.ones_like(ev)
        for t in range(t_max):
            cur = cur * ev
            out[t] = cur.sum()
    else:
        P = U.copy()
        out[0] = np.trace(P)
        for t in range(1, t_max):
            P = P @ U
            out[t] = np.trace(P)
    return out


def _member_sff_task(args) -> np.ndarray:
    """|tr U^t|^2 for one ensemble member (top-level for process pools)."""
    spec, member, t_max = args
    U = build_circuit(spec, member)
    tr = trace_powers(U, t_max, spec.eig_crossover)
    return np.abs(tr) ** 2


def sff_numeric(spec: CircuitSpec, t_max: int, workers: int = 1,
                keep_members: bool = False) -> SffSeries:
    """Ensemble- and window-averaged K(t) = <|tr U^t|^2>, t = 1..t_max.

    Members are independent tasks; the reduction order is fixed by the
    member list, so the worker count never changes the result.
    """
    if t_max < 1:
        raise SpecError("t_max must be >= 1")
    members = ensemble_members(spec)
    times = np.arange(1, t_max + 1)
    rows = run_tasks(_member_sff_task, [(spec, mem, t_max) for mem in members], workers)
    raw = np.stack(rows)
    win = np.empty_like(raw)
    for i in range(len(members)):
        win[i] = window_average(raw[i], times)
    n = len(members)
    sem = np.sqrt(np.maximum(win.var(axis=0, ddof=1), 0.0) / n) if n > 1 else np.zeros(t_max)
    sem_raw = np.sqrt(np.maximum(raw.var(axis=0, ddof=1), 0.0) / n) if n > 1 else np.zeros(t_max)
    return SffSeries(
        times=times,
        values=win.mean(axis=0),
        errors=sem,
        raw_values=raw.mean(axis=0),
        raw_errors=sem_raw,
        member_values=win if keep_members else None,
        meta={
            "N": spec.N,
            "L": spec.L,
            "epsilon": spec.eps_effective,
            "Lambda": spec.lam,
            "members": n,
            "window": "max(5, t/10)",
            "translations": spec.ensemble.translations,
            "bond_offsets": spec.ensemble.bond_offsets,
            "seed": spec.ensemble.seed,
        },
    )


@dataclass
class LambdaSweepResult:
    lam: float
    series: dict  # N -> SffSeries
    tau_grid: np.ndarray
    kappa: dict  # N -> (values, errors) on tau_grid


def lambda_sweep(
    L: int,
    N_list,
    lam: float,
    members: int,
    seed: int,
    subsystem: CatMapSpec = DEFAULT_MAP,
    t_max_factor: float = 1.25,
    tau_points: int = 64,
    amplitude: float = 1.0,
) -> LambdaSweepResult:
    """Run sff_numeric at fixed Lambda across N and rescale onto a common tau grid."""
    series = {}
    for i, N in enumerate(sorted(N_list)):
        spec = CircuitSpec(
            L=L, N=int(N), subsystem=subsystem, lam=lam, amplitude=amplitude,
            ensemble=EnsembleSpec(members=members, seed=seed + i),
        )
        series[int(N)] = sff_numeric(spec, int(round(t_max_factor * spec.T_H)))
    tau_lo = max(1.0 / (int(n) ** L) for n in N_list)
    tau_grid = np.linspace(max(0.05, 2 * tau_lo), min(t_max_factor, 1.0), tau_points)
    kappa = {}
    for N, s in series.items():
        T_H = N**L
        tau = s.times / T_H
        kappa[N] = (
            np.interp(tau_grid, tau, s.values / T_H),
            np.interp(tau_grid, tau, s.errors / T_H),
        )
    return LambdaSweepResult(lam=lam, series=series, tau_grid=tau_grid, kappa=kappa)


@dataclass
class CompareReport:
    times: np.ndarray
    series_values: np.ndarray
    prediction_values: np.ndarray
    ratio: np.ndarray
    abs_deviation: np.ndarray
    chi2_per_point: float
    median_ratio: float
    late_window: tuple
    late_mean_ratio: float
    slope_series: float
    slope_prediction: float
    slope_ok: bool
    bump_time: int | None
    thouless_tau: float | None

    def to_dict(self) -> dict:
        return {
            "chi2_per_point": self.chi2_per_point,
            "median_ratio": self.median_ratio,
            "late_window": list(self.late_window),
            "late_mean_ratio": self.late_mean_ratio,
            "slope_series": self.slope_series,
            "slope_prediction": self.slope_prediction,
            "slope_ok": self.slope_ok,
            "bump_time": self.bump_time,
            "thouless_tau": self.thouless_tau,
            "n_points": int(len(self.times)),
        }


def _interp_prediction(prediction: SffPrediction, times: np.ndarray) -> np.ndarray:
    pt = np.asarray(prediction.times, dtype=float)
    if np.array_equal(pt, np.asarray(times, dtype=float)):
        return prediction.values.copy()
    if times.min() < pt.min() - 1e-9 or times.max() > pt.max() + 1e-9:
        raise GridError("series times fall outside the prediction grid")
    logv = np.interp(np.log(times), np.log(pt), prediction.log_values)
    return np.exp(logv)


def compare(
    series: SffSeries,
    prediction: SffPrediction,
    late_window: tuple = (0.4, 1.0),
    T_H: float | None = None,
    slope_tol: float = 0.25,
    thouless_tau: float | None = None,
) -> CompareReport:
    """Per-time deviation of a numerical series from an analytic prediction.

    The late-time ramp slopes are compared with an absolute normalization,
    |slope_s - slope_p| <= slope_tol * max(1, |slope_p|), which stays
    meaningful when the reference curve is nearly flat.
    """
    t = np.asarray(series.times, dtype=float)
    pv = _interp_prediction(prediction, t)
    sv = series.values
    ratio = sv / np.maximum(pv, np.finfo(float).tiny)
    absdev = np.abs(sv - pv)
    err = np.asarray(series.errors)
    mask = err > 0
    chi2 = float(np.mean(((sv[mask] - pv[mask]) / err[mask]) ** 2)) if mask.any() else 0.0

    if T_H is None:
        meta = series.meta
        T_H = float(meta["N"] ** meta["L"]) if "N" in meta and "L" in meta else float(t[-1])
    lo, hi = late_window[0] * T_H, late_window[1] * T_H
    late = (t >= lo) & (t <= hi)
    if late.sum() >= 2:
        slope_s = float(np.polyfit(t[late], sv[late], 1)[0])
        slope_p = float(np.polyfit(t[late], pv[late], 1)[0])
        late_mean_ratio = float(np.mean(ratio[late]))
    else:
        slope_s = slope_p = float("nan")
        late_mean_ratio = float("nan")
    slope_ok = bool(abs(slope_s - slope_p) <= slope_tol * max(1.0, abs(slope_p))) if late.sum() >= 2 else False

    early = t <= max(2.0 * T_H ** (1.0 / series.meta.get("L", 1)), t[0])
    bump_time = int(t[early][np.argmax(sv[early])]) if early.any() else None

    return CompareReport(
        times=t,
        series_values=sv,
        prediction_values=pv,
        ratio=ratio,
        abs_deviation=absdev,
        chi2_per_point=chi2,
        median_ratio=float(np.median(ratio)),
        late_window=tuple(late_window),
        late_mean_ratio=late_mean_ratio,
        slope_series=slope_s,
        slope_prediction=slope_p,
        slope_ok=slope_ok,
        bump_time=bump_time,
        thouless_tau=thouless_tau,
    )


def series_from_prediction(prediction: SffPrediction) -> SffSeries:
    """Wrap an analytic curve as a zero-error series (self-comparison oracle)."""
    vals = prediction.values.copy()
    z = np.zeros_like(vals)
    return SffSeries(times=prediction.times.copy(), values=vals, errors=z,
                     raw_values=vals.copy(), raw_errors=z,
                     meta={"mode": prediction.mode, **prediction.params})
