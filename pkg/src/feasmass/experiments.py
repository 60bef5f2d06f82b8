"""Experiment orchestration: lattice angle averages, moment sweeps, grid
searches, parameter transfer, shot histograms, depth sweeps and the twirl
existence check.

Grid points are embarrassingly parallel; set FEASMASS_THREADS > 1 to fan the
generic grid search out over processes.  Results are assembled by index, so
the output is independent of worker scheduling.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .fullspace import (AngleSchedule, apply_cost_phase, apply_x_mixer,
                        feasible_mass, init_plus, mixer_kernel_rows,
                        run_generic, sample_counts)
from .instance import (CapacityError, DiagonalCost, ProblemInstance,
                       build_cost, enumerate_feasible, feasible_indices)
from .subspace import (best_block_relabeling, run_ce, subspace_feasible_mass,
                       subspace_to_full_labels, twirl_average)

_PHASE_CHUNK_ELEMS = 1 << 22
MAX_LATTICE_POINTS = 10_000_000


@dataclass(frozen=True)
class GridSpec:
    """Angle grid: point counts and closed ranges (radians) per axis."""

    gamma_points: int
    beta_points: int
    gamma_range: tuple = (0.0, math.pi)
    beta_range: tuple = (0.0, math.pi)

    def __post_init__(self):
        if self.gamma_points < 1 or self.beta_points < 1:
            raise ValueError("point counts must be >= 1")
        for count, (lo, hi) in ((self.gamma_points, self.gamma_range),
                                (self.beta_points, self.beta_range)):
            if hi < lo:
                raise ValueError("ranges must be ordered")
            if count > 1 and hi == lo:
                raise ValueError("range must have positive length for more than one point")

    def gammas(self) -> np.ndarray:
        lo, hi = self.gamma_range
        return np.linspace(lo, hi, self.gamma_points)

    def betas(self) -> np.ndarray:
        lo, hi = self.beta_range
        return np.linspace(lo, hi, self.beta_points)


@dataclass
class ExperimentResult:
    """Named metrics of one experiment run (wall clock stays out of files)."""

    name: str
    instance: str
    params: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    seed: int | None = None
    wall_clock: float | None = None

    def to_json_dict(self) -> dict:
        out = {"experiment": self.name, "instance": self.instance,
               "params": self.params, "metrics": self.metrics}
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _as_cost(instance, include_penalty=True) -> DiagonalCost:
    if isinstance(instance, DiagonalCost):
        return instance
    return build_cost(instance, include_penalty=include_penalty)


def _instance_name(instance) -> str:
    return instance.name if isinstance(instance, ProblemInstance) else "cost"


# ---------------------------------------------------------------------------
# exact lattice averaging (single layer)

def lattice_feasible_masses(cost: DiagonalCost, betas, L: int | None = None,
                            tie_break: bool = True) -> np.ndarray:
    """Feasible mass at every grid angle gamma_k = 2 pi k / L, k = 0..L-1.

    The grid lives on the integer cost lattice; L must exceed the lattice
    spread so every nonzero cost difference averages to zero exactly.  With
    ``tie_break`` the lattice is refined to split degenerate cost levels
    (equal-cost pairs survive every average and shift the mean off baseline;
    see DiagonalCost.tie_broken_vector).

    ``betas`` may be a scalar or a sequence; the returned array has shape
    (len(betas), L) in the sequence case, (L,) for a scalar.  One pass over
    the grid serves all mixer angles.
    """
    n = cost.n
    if n > 4:
        raise ValueError("lattice averaging capped at n=4")
    N = cost.num_qubits
    scalar = np.isscalar(betas)
    beta_list = [float(betas)] if scalar else [float(b) for b in betas]
    h = cost.tie_broken_vector() if tie_break else cost.cost_vector().astype(np.int64)
    h = h - h.min()
    spread = int(h.max())
    if L is None:
        L = spread + 1
    elif L <= spread:
        raise ValueError(f"lattice grid of {L} points is too small: "
                         f"need at least spread+1 = {spread + 1}")
    if L > MAX_LATTICE_POINTS:
        raise CapacityError(
            f"lattice grid needs {L} points (cap {MAX_LATTICE_POINTS}); "
            f"large-spread instances are out of exact-averaging reach"
            + (" - consider tie_break=False" if tie_break else ""))
    rows = feasible_indices(n)
    nfeas = len(rows)
    # kernel rows for all betas side by side: one phase pass serves them all
    B = np.concatenate([mixer_kernel_rows(rows, b, N).T for b in beta_list],
                       axis=1) * 2.0 ** (-N / 2)
    roots = np.exp((-2j * math.pi / L) * np.arange(L))
    masses = np.empty((len(beta_list), L), dtype=np.float64)
    chunk = max(1, _PHASE_CHUNK_ELEMS // (1 << N))
    for lo in range(0, L, chunk):
        ks = np.arange(lo, min(lo + chunk, L), dtype=np.int64)
        units = (ks[:, None] * h[None, :]) % L
        amps = roots[units] @ B
        p = np.abs(amps) ** 2
        for bi in range(len(beta_list)):
            masses[bi, lo:lo + len(ks)] = p[:, bi * nfeas:(bi + 1) * nfeas].sum(axis=1)
    return masses[0] if scalar else masses


def exact_angle_average(instance, beta: float, L: int | None = None,
                        tie_break: bool = True,
                        include_penalty: bool = True) -> ExperimentResult:
    """Grid-exact mean of the single-layer feasible mass; contract: equals
    n!/2**(n**2) within 1e-10 on the tie-broken lattice."""
    cost = _as_cost(instance, include_penalty)
    t0 = time.perf_counter()
    masses = lattice_feasible_masses(cost, beta, L=L, tie_break=tie_break)
    mean = float(masses.mean())
    base = math.factorial(cost.n) / 2.0 ** cost.num_qubits
    return ExperimentResult(
        name="exact_angle_average", instance=_instance_name(instance),
        params={"beta": beta, "L": len(masses), "tie_break": tie_break},
        metrics={"mean": mean, "baseline": base, "deviation": abs(mean - base),
                 "max_point": float(masses.max())},
        wall_clock=time.perf_counter() - t0)


def markov_fraction(instance, beta: float, t: float, L: int | None = None,
                    tie_break: bool = True,
                    include_penalty: bool = True) -> ExperimentResult:
    """Exact grid measure of {gamma : P >= t * baseline}; contract <= 1/t."""
    if t <= 0:
        raise ValueError("t must be positive")
    cost = _as_cost(instance, include_penalty)
    t0 = time.perf_counter()
    masses = lattice_feasible_masses(cost, beta, L=L, tie_break=tie_break)
    base = math.factorial(cost.n) / 2.0 ** cost.num_qubits
    frac = float(np.mean(masses >= t * base))
    return ExperimentResult(
        name="markov_fraction", instance=_instance_name(instance),
        params={"beta": beta, "t": t, "L": len(masses), "tie_break": tie_break},
        metrics={"fraction": frac, "bound": 1.0 / t,
                 "satisfied": frac <= 1.0 / t + 1e-12},
        wall_clock=time.perf_counter() - t0)


def _batched_x_mixer(mat: np.ndarray, beta: float, num_qubits: int) -> np.ndarray:
    c = math.cos(beta)
    ms = -1j * math.sin(beta)
    for q in range(num_qubits):
        v = mat.reshape(mat.shape[0], -1, 2, 1 << q)
        a0 = v[:, :, 0, :].copy()
        v[:, :, 0, :] = c * a0 + ms * v[:, :, 1, :]
        v[:, :, 1, :] = ms * a0 + c * v[:, :, 1, :]
    return mat


def l4_sweep(instance, betas, L: int | None = None,
             include_penalty: bool = True) -> ExperimentResult:
    """Exact grid mean of sum_x |a_x|^4 per beta against the analytic envelope.

    Fourth powers pair cost differences twice, so the exact grid needs
    L >= 2*spread + 1 on the raw lattice; that reproduces the continuous
    angle average including degenerate quadruples.
    """
    cost = _as_cost(instance, include_penalty)
    n = cost.n
    if n > 3:
        raise ValueError("fourth-moment sweep capped at n=3")
    N = cost.num_qubits
    h = cost.cost_vector().astype(np.int64)
    h = h - h.min()
    spread = int(h.max())
    if L is None:
        L = 2 * spread + 1
    elif L < 2 * spread + 1:
        raise ValueError(f"need L >= 2*spread+1 = {2 * spread + 1}")
    t0 = time.perf_counter()
    ks = np.arange(L, dtype=np.int64)
    per_beta = {}
    for beta in betas:
        total = 0.0
        chunk = max(1, _PHASE_CHUNK_ELEMS // (1 << N))
        for lo in range(0, L, chunk):
            kb = ks[lo:lo + chunk]
            units = (kb[:, None] * h[None, :]) % L
            amps = np.exp((-2j * math.pi / L) * units) * 2.0 ** (-N / 2)
            _batched_x_mixer(amps, beta, N)
            p = np.abs(amps) ** 2
            total += float(np.sum(p * p))
        mean = total / L
        envelope = math.exp(bounds.l4_envelope(N, beta))
        per_beta[float(beta)] = {"mean": mean, "envelope": envelope,
                                 "satisfied": mean <= envelope + 1e-9}
    return ExperimentResult(
        name="l4_sweep", instance=_instance_name(instance),
        params={"L": L, "betas": [float(b) for b in betas]},
        metrics={"per_beta": per_beta},
        wall_clock=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# grid search and parameter transfer

@dataclass
class GridSearchResult:
    gammas: np.ndarray
    betas: np.ndarray
    surface: np.ndarray      # shape (len(gammas), len(betas))
    best_gamma: float
    best_beta: float
    best_mass: float


def _surface_row(args):
    dist, penalty, include_penalty, gamma, betas, precision = args
    cost = DiagonalCost(n=len(dist), penalty_weight=penalty,
                        dist=np.asarray(dist), include_penalty=include_penalty)
    out = []
    for beta in betas:
        state = run_generic(cost, AngleSchedule.single(gamma, beta), precision)
        out.append(feasible_mass(state, cost.n))
    return out


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("FEASMASS_THREADS", "1")))
    except ValueError:
        return 1


def grid_search_generic(instance, grid: GridSpec, precision: str = "f64",
                        include_penalty: bool = True) -> GridSearchResult:
    """Single-layer feasible mass at every grid point; lexicographically-first
    argmax by (gamma index, beta index)."""
    cost = _as_cost(instance, include_penalty)
    gammas, betas = grid.gammas(), grid.betas()
    tasks = [(cost.dist.tolist(), cost.penalty_weight, cost.include_penalty,
              float(g), [float(b) for b in betas], precision) for g in gammas]
    workers = _worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_surface_row, tasks))
    else:
        table = cost.cost_vector()
        rows = []
        for g in gammas:
            row = []
            for b in betas:
                state = init_plus(cost.num_qubits,
                                  dtype=np.complex64 if precision == "f32" else np.complex128)
                apply_cost_phase(state, table, g)
                apply_x_mixer(state, b)
                row.append(feasible_mass(state, cost.n))
            rows.append(row)
    surface = np.array(rows, dtype=np.float64)
    gi, bi = np.unravel_index(int(np.argmax(surface)), surface.shape)
    return GridSearchResult(gammas=gammas, betas=betas, surface=surface,
                            best_gamma=float(gammas[gi]), best_beta=float(betas[bi]),
                            best_mass=float(surface[gi, bi]))


def parameter_transfer(instance, grid: GridSpec, precision: str = "f64",
                       include_penalty: bool = True) -> ExperimentResult:
    """Reuse the generic grid argmax inside the manifold (unnormalized mixer).

    Reports the measured ratio against the dimension factor 2**(n**2)/n**n;
    the ``satisfied`` metric records whether the ratio clears the factor.
    """
    cost = _as_cost(instance, include_penalty)
    t0 = time.perf_counter()
    search = grid_search_generic(cost, grid, precision)
    ce_state = run_ce(cost, AngleSchedule.single(search.best_gamma, search.best_beta),
                      normalized=False)
    p_ce = subspace_feasible_mass(ce_state)
    n = cost.n
    factor = 2.0 ** (n * n) / float(n) ** n
    ratio = p_ce / search.best_mass if search.best_mass > 0 else math.inf
    return ExperimentResult(
        name="parameter_transfer", instance=_instance_name(instance),
        params={"grid": [grid.gamma_points, grid.beta_points],
                "gamma_range": list(grid.gamma_range),
                "beta_range": list(grid.beta_range), "precision": precision},
        metrics={"p_gen_max": search.best_mass, "gamma_star": search.best_gamma,
                 "beta_star": search.best_beta, "p_ce": p_ce, "ratio": ratio,
                 "factor": factor, "satisfied": ratio >= factor},
        wall_clock=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# shot histograms

def binomial_consistent(count: int, shots: int, p: float, nsigma: float = 5.0) -> bool:
    sigma = math.sqrt(max(p * (1 - p), 1e-300) * shots)
    return abs(count - shots * p) <= nsigma * sigma


def feasible_histogram(instance, method: str, schedule: AngleSchedule,
                       shots: int, seed: int, normalized: bool = True,
                       precision: str = "f64",
                       include_penalty: bool = True) -> ExperimentResult:
    """Sample the chosen ansatz and count feasible outcomes per tour label."""
    cost = _as_cost(instance, include_penalty)
    n = cost.n
    t0 = time.perf_counter()
    if method == "generic":
        state = run_generic(cost, schedule, precision)
        p_exact = feasible_mass(state, n)
        counts = sample_counts(state, shots, seed) if shots else {}
        label_of = {x: x for x in enumerate_feasible(n)}
    elif method == "ce":
        state = run_ce(cost, schedule, normalized=normalized)
        p_exact = subspace_feasible_mass(state)
        raw = sample_counts(state, shots, seed) if shots else {}
        labels = subspace_to_full_labels(n)
        counts = {}
        for idx, c in raw.items():
            counts[int(labels[idx])] = counts.get(int(labels[idx]), 0) + c
        label_of = {x: x for x in enumerate_feasible(n)}
    else:
        raise ValueError(f"unknown method {method!r}")
    feas_counts = {x: counts.get(x, 0) for x in label_of}
    feas_total = sum(feas_counts.values())
    frac = feas_total / shots if shots else 0.0
    return ExperimentResult(
        name="feasible_histogram", instance=_instance_name(instance),
        params={"method": method, "shots": shots,
                "gammas": list(schedule.gammas), "betas": list(schedule.betas),
                "normalized_mixer": normalized},
        metrics={"statevector_mass": p_exact, "feasible_fraction": frac,
                 "feasible_total": feas_total,
                 "consistent_5sigma": (binomial_consistent(feas_total, shots, p_exact)
                                       if shots else True),
                 "counts": {x: c for x, c in feas_counts.items()}},
        seed=seed, wall_clock=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# depth sweep and twirl existence

def ce_depth_sweep(instance, p_max: int, points_per_angle: int = 4,
                   gamma_range=(0.0, math.pi), beta_range=(0.0, math.pi),
                   normalized: bool = True,
                   include_penalty: bool = True) -> ExperimentResult:
    """Best grid feasible mass per depth p = 1..p_max (exhaustive per-layer grid).

    The per-layer grids start at zero angles, so depth p+1 contains every
    depth-p circuit extended by an identity layer; the maxima are
    non-decreasing by construction.
    """
    if points_per_angle > 6:
        raise ValueError("per-angle grid capped at 6 points")
    if p_max > 3:
        raise ValueError("depth sweep capped at p_max=3")
    cost = _as_cost(instance, include_penalty)
    if cost.n > 4:
        raise ValueError("depth sweep capped at n=4")
    gs = np.linspace(*gamma_range, points_per_angle)
    bs = np.linspace(*beta_range, points_per_angle)
    if gs[0] != 0.0 or bs[0] != 0.0:
        raise ValueError("per-layer grids must contain the zero angle")
    t0 = time.perf_counter()
    per_depth = []
    for p in range(1, p_max + 1):
        best = (-1.0, None)
        layer_choices = [(g, b) for g in gs for b in bs]
        stack = [()]
        for _ in range(p):
            stack = [prefix + (choice,) for prefix in stack for choice in layer_choices]
        for combo in stack:
            sched = AngleSchedule(gammas=tuple(c[0] for c in combo),
                                  betas=tuple(c[1] for c in combo))
            mass = subspace_feasible_mass(run_ce(cost, sched, normalized=normalized))
            if mass > best[0]:
                best = (mass, combo)
        per_depth.append({"p": p, "best_mass": best[0],
                          "angles": [list(c) for c in best[1]]})
    return ExperimentResult(
        name="ce_depth_sweep", instance=_instance_name(instance),
        params={"p_max": p_max, "points_per_angle": points_per_angle,
                "normalized_mixer": normalized},
        metrics={"per_depth": per_depth,
                 "monotone": all(per_depth[i + 1]["best_mass"] >= per_depth[i]["best_mass"] - 1e-15
                                 for i in range(len(per_depth) - 1))},
        wall_clock=time.perf_counter() - t0)


def twirl_existence_experiment(instance, schedule: AngleSchedule, target=None,
                               normalized: bool = True,
                               include_penalty: bool = True) -> ExperimentResult:
    """Exact relabeling-average (must equal 1/n**n) and the best relabeling."""
    cost = _as_cost(instance, include_penalty)
    n = cost.n
    if target is None:
        target = tuple(range(n))
    t0 = time.perf_counter()
    mean = twirl_average(cost, schedule, target, normalized=normalized)
    _, best_p = best_block_relabeling(cost, schedule, target, normalized=normalized)
    bound = 1.0 / float(n) ** n
    return ExperimentResult(
        name="twirl_existence", instance=_instance_name(instance),
        params={"target": list(target), "gammas": list(schedule.gammas),
                "betas": list(schedule.betas), "normalized_mixer": normalized},
        metrics={"mean": mean, "best": best_p, "bound": bound,
                 "mean_error": abs(mean - bound),
                 "satisfied": abs(mean - bound) <= 1e-12 and best_p >= bound - 1e-12},
        wall_clock=time.perf_counter() - t0)


def envelope_excess_report(instance, grid: GridSpec,
                           include_penalty: bool = True) -> ExperimentResult:
    """Measured max of P * 2**N / n! over the grid (strict-envelope diagnostic).

    The single-layer strict envelope P <= n!/2**N holds with equality at zero
    angles but is exceeded at tuned angles on small instances; this reports
    the measured excess instead of asserting the inequality.
    """
    cost = _as_cost(instance, include_penalty)
    if cost.n > 3:
        raise ValueError("envelope report capped at n=3")
    search = grid_search_generic(cost, grid)
    base = math.factorial(cost.n) / 2.0 ** cost.num_qubits
    return ExperimentResult(
        name="envelope_excess", instance=_instance_name(instance),
        params={"grid": [grid.gamma_points, grid.beta_points]},
        metrics={"max_over_baseline": search.best_mass / base,
                 "best_gamma": search.best_gamma, "best_beta": search.best_beta})
