"""CE-QAOA simulation inside the n**n block-one-hot manifold.

A subspace state is a 1-D complex ndarray of length n**n.  Flat index and
symbol tuple are related by C-order ravel over shape [n]*n, i.e. block 0 is
the most significant digit: index(j_1..j_n) = sum_b j_b * n**(n-1-b).
Block b maps to full-space bits [b*n, (b+1)*n); symbol j in block b sets bit
b*n + j.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .fullspace import AngleSchedule, init_plus, run_generic
from .instance import CapacityError, DiagonalCost, build_cost

MAX_BLOCK_SIZE = 8   # n**n amplitudes
MAX_EMBED_SIZE = 4   # embedding needs the 2**(n*n) space too


def subspace_dim(n: int) -> int:
    return n ** n


def tuple_to_index(symbols, n: int) -> int:
    idx = 0
    for j in symbols:
        idx = idx * n + int(j)
    return idx


def index_to_tuple(idx: int, n: int) -> tuple:
    out = []
    for _ in range(n):
        out.append(idx % n)
        idx //= n
    return tuple(reversed(out))


def tuple_to_label(symbols, n: int) -> int:
    """Full-space basis label with bit b*n + j_b set per block."""
    return sum(1 << (b * n + int(j)) for b, j in enumerate(symbols))


@lru_cache(maxsize=None)
def subspace_to_full_labels(n: int) -> np.ndarray:
    """Bijection subspace index -> full-space label, as an index array.

    The labels themselves are cheap for any n <= 8; only materializing the
    full space (embed_to_full) is capped at n = 4.
    """
    if n > MAX_BLOCK_SIZE:
        raise CapacityError(f"subspace capped at n={MAX_BLOCK_SIZE}")
    out = np.empty(n ** n, dtype=np.int64)
    for k, t in enumerate(itertools.product(range(n), repeat=n)):
        out[k] = tuple_to_label(t, n)
    return out


@lru_cache(maxsize=None)
def feasible_subspace_indices(n: int) -> np.ndarray:
    """Indices of the n! all-distinct symbol tuples (lexicographic order)."""
    out = [tuple_to_index(p, n) for p in itertools.permutations(range(n))]
    return np.array(out, dtype=np.int64)


def init_w_product(n: int, dtype=np.complex128) -> np.ndarray:
    """Product of per-block uniform single-excitation states: all amps n**(-n/2)."""
    if n > MAX_BLOCK_SIZE:
        raise CapacityError(f"subspace capped at n={MAX_BLOCK_SIZE}, got {n}")
    return np.full(n ** n, float(n) ** (-n / 2), dtype=dtype)


# ---------------------------------------------------------------------------
# cost on the manifold

def subspace_cost_table(cost: DiagonalCost) -> np.ndarray:
    """C restricted to one-hot tuples, built directly on the [n]*n tensor.

    Row one-hot penalties vanish structurally; the column part reduces to
    2*A per colliding block pair; the tour term couples adjacent blocks.
    Agrees with cost.value on embedded labels (tested for n <= 3).
    """
    n = cost.n
    if n > MAX_BLOCK_SIZE:
        raise CapacityError(f"subspace capped at n={MAX_BLOCK_SIZE}, got {n}")
    d = np.asarray(cost.dist, dtype=np.int64)
    eye = np.eye(n, dtype=np.int64)

    def on_pair(mat, a, b):
        # mat indexed [j_a, j_b] with a != b; axis index == block index
        shape = [1] * n
        shape[a] = n
        shape[b] = n
        return mat.reshape(shape) if a < b else mat.T.reshape(shape)

    total = np.zeros([n] * n, dtype=np.int64)
    for b in range(n):
        total += on_pair(d, b, (b + 1) % n)
    if cost.include_penalty:
        for a in range(n):
            for b in range(a + 1, n):
                total += 2 * cost.penalty_weight * on_pair(eye, a, b)
    return total.reshape(-1)


def apply_subspace_cost_phase(state: np.ndarray, cost, gamma: float) -> np.ndarray:
    table = cost if isinstance(cost, np.ndarray) else subspace_cost_table(cost)
    state *= np.exp((-1j * gamma) * table).astype(state.dtype, copy=False)
    return state


# ---------------------------------------------------------------------------
# block XY mixer

@lru_cache(maxsize=None)
def block_mixer_sector(n: int, normalized: bool):
    """Single-excitation sector of the block XY Hamiltonian, eigen-analyzed.

    Built numerically from the dense Pauli sum on 2**n dimensions, then
    restricted to the weight-1 labels.  The sector must split into the
    uniform vector plus a degenerate complement; both eigenvalues are
    returned together with the sector matrix.
    """
    if n > MAX_BLOCK_SIZE:
        raise CapacityError(f"block size capped at {MAX_BLOCK_SIZE}")
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
    dim = 1 << n
    H = np.zeros((dim, dim), dtype=np.complex128)

    def one_site(op, q):
        mats = [op if k == q else np.eye(2) for k in range(n)]
        out = mats[0]
        for mm in mats[1:]:
            out = np.kron(mm, out)  # qubit 0 = least significant bit
        return out

    for a in range(n):
        for b in range(a + 1, n):
            H += one_site(X, a) @ one_site(X, b) + one_site(Y, a) @ one_site(Y, b)
    if normalized:
        H /= (n - 1)
    weight1 = [1 << j for j in range(n)]
    sector = H[np.ix_(weight1, weight1)].real.copy()

    u = np.full(n, n ** -0.5)
    lam_u = float(u @ sector @ u)
    resid = np.abs(sector @ u - lam_u * u).max()
    if resid > 1e-9:
        raise AssertionError("uniform vector is not a sector eigenvector")
    proj = np.outer(u, u)
    rest = sector - lam_u * proj
    # complement must be a single eigenvalue times (I - P_uniform)
    comp = np.eye(n) - proj
    lam_p = float(np.trace(rest @ comp) / (n - 1))
    if np.abs(rest - lam_p * comp).max() > 1e-9:
        raise AssertionError("sector is not two-eigenspace")
    return sector, lam_u, lam_p


def apply_block_xy_mixer(state: np.ndarray, n: int, beta: float,
                         normalized: bool = True) -> np.ndarray:
    """Per-block sector exponential via the two-eigenspace closed form.

    exp(-i b H_sec) = e^{-i b l_perp} I + (e^{-i b l_unif} - e^{-i b l_perp}) P_unif,
    so one mean along each block axis suffices.
    """
    _, lam_u, lam_p = block_mixer_sector(n, normalized)
    eu = complex(np.exp(-1j * beta * lam_u))
    ep = complex(np.exp(-1j * beta * lam_p))
    arr = state.reshape([n] * n)
    for axis in range(n):
        m = arr.mean(axis=axis, keepdims=True)
        arr *= ep
        arr += (eu - ep) * m
    return state


def block_mixer_unitary(n: int, beta: float, normalized: bool = True) -> np.ndarray:
    """Dense n x n sector unitary (for oracle comparisons)."""
    _, lam_u, lam_p = block_mixer_sector(n, normalized)
    proj = np.full((n, n), 1.0 / n)
    return (np.exp(-1j * beta * lam_p) * (np.eye(n) - proj)
            + np.exp(-1j * beta * lam_u) * proj)


def run_ce(instance, schedule: AngleSchedule, normalized: bool = True,
           include_penalty: bool = True) -> np.ndarray:
    """Depth-p CE-QAOA: alternate cost phase and block mixer from the W product."""
    cost = instance if isinstance(instance, DiagonalCost) else build_cost(
        instance, include_penalty=include_penalty)
    table = subspace_cost_table(cost)
    state = init_w_product(cost.n)
    for gamma, beta in zip(schedule.gammas, schedule.betas):
        apply_subspace_cost_phase(state, table, gamma)
        apply_block_xy_mixer(state, cost.n, beta, normalized)
    return state


def subspace_feasible_mass(state: np.ndarray) -> float:
    """Probability on all-distinct symbol tuples."""
    n = _infer_n(state.shape[0])
    return float(np.sum(np.abs(state[feasible_subspace_indices(n)]) ** 2))


def _infer_n(dim: int) -> int:
    n = 2
    while n ** n < dim:
        n += 1
    if n ** n != dim:
        raise ValueError(f"length {dim} is not of the form n**n")
    return n


# ---------------------------------------------------------------------------
# blockwise relabelings

def identity_relabeling(n: int) -> tuple:
    return tuple(tuple(range(n)) for _ in range(n))


def invert_relabeling(perms) -> tuple:
    out = []
    for p in perms:
        inv = [0] * len(p)
        for src, dst in enumerate(p):
            inv[dst] = src
        out.append(tuple(inv))
    return tuple(out)


def apply_block_permutation(state: np.ndarray, perms) -> np.ndarray:
    """Move amplitude at (j_1..j_n) to (P_1(j_1)..P_n(j_n)); returns a new array."""
    n = len(perms)
    arr = state.reshape([n] * n)
    for axis, p in enumerate(perms):
        inv = np.argsort(np.asarray(p))
        arr = np.take(arr, inv, axis=axis)
    return arr.reshape(-1)


def relabeled_target_probability(state: np.ndarray, perms, target) -> float:
    """|<target| P^dag |state>|^2 = |state[(P_b(t_b))_b]|^2."""
    n = len(perms)
    moved = tuple(perms[b][t] for b, t in enumerate(target))
    return float(np.abs(state[tuple_to_index(moved, n)]) ** 2)


def _one_layer_state(instance, schedule, normalized, include_penalty):
    if schedule is None:
        raise ValueError("a schedule is required")
    return run_ce(instance, schedule, normalized=normalized,
                  include_penalty=include_penalty)


def twirl_average(instance, schedule: AngleSchedule, target,
                  normalized: bool = True, include_penalty: bool = True,
                  samples: int = 100_000, seed: int = 0) -> float:
    """Mean target-overlap probability over blockwise symbol relabelings.

    Exact enumeration of all (n!)**n relabelings for n <= 3; Monte Carlo with
    the declared sample count and seed beyond that.
    """
    cost = instance if isinstance(instance, DiagonalCost) else build_cost(
        instance, include_penalty=include_penalty)
    n = cost.n
    state = _one_layer_state(cost, schedule, normalized, include_penalty)
    if n <= 3:
        perms = list(itertools.permutations(range(n)))
        total = 0.0
        for combo in itertools.product(perms, repeat=n):
            total += relabeled_target_probability(state, combo, target)
        return total / len(perms) ** n
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(samples):
        combo = tuple(tuple(rng.permutation(n)) for _ in range(n))
        total += relabeled_target_probability(state, combo, target)
    return total / samples


def best_block_relabeling(instance, schedule: AngleSchedule, target,
                          normalized: bool = True, include_penalty: bool = True,
                          samples: int = 20_000, seed: int = 0):
    """Argmax relabeling and its probability; exact for n <= 3, sampled n <= 5.

    Exact mode guarantees probability >= 1/n**n (a max dominates the mean).
    """
    cost = instance if isinstance(instance, DiagonalCost) else build_cost(
        instance, include_penalty=include_penalty)
    n = cost.n
    state = _one_layer_state(cost, schedule, normalized, include_penalty)
    best_p = -1.0
    best = None
    if n <= 3:
        perms = list(itertools.permutations(range(n)))
        for combo in itertools.product(perms, repeat=n):
            p = relabeled_target_probability(state, combo, target)
            if p > best_p:
                best_p, best = p, combo
        return best, best_p
    if n > 5:
        raise CapacityError("sampled relabeling search capped at n=5")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        combo = tuple(tuple(rng.permutation(n)) for _ in range(n))
        p = relabeled_target_probability(state, combo, target)
        if p > best_p:
            best_p, best = p, combo
    return best, best_p


# ---------------------------------------------------------------------------
# bridge to the full space

def embed_to_full(state: np.ndarray, n: int, dtype=np.complex128) -> np.ndarray:
    """Copy amplitudes to their bijective full-space labels, zero elsewhere."""
    if n > MAX_EMBED_SIZE:
        raise CapacityError(f"embedding capped at n={MAX_EMBED_SIZE}")
    full = np.zeros(1 << (n * n), dtype=dtype)
    full[subspace_to_full_labels(n)] = state
    return full


def project_to_subspace(full_state: np.ndarray, n: int) -> np.ndarray:
    """Gather the one-hot-sector amplitudes of a full state (subspace order)."""
    return np.array(full_state[subspace_to_full_labels(n)], dtype=np.complex128)


def overlap_generic_ce(instance, gamma: float, beta: float,
                       order: str = "commuting",
                       include_penalty: bool = True) -> complex:
    """Subspace-projected overlap between one CE layer and one generic layer.

    With ``order="commuting"`` each side applies its mixer to its own initial
    state first and the diagonal cost phase second.  Both initial states are
    mixer eigenstates, and the two cost phases meet across the diagonal
    one-hot projector and cancel, so the modulus is pinned at
    n**(n/2) / 2**(n**2/2) for every angle pair.  With ``order="standard"``
    (cost phase first, as in the layered circuits) the cancellation is broken
    and the returned value genuinely depends on the angles.

    The CE side uses the unnormalized block mixer.
    """
    cost = instance if isinstance(instance, DiagonalCost) else build_cost(
        instance, include_penalty=include_penalty)
    n = cost.n
    if n > MAX_EMBED_SIZE:
        raise CapacityError(f"overlap capped at n={MAX_EMBED_SIZE}")
    sched = AngleSchedule.single(gamma, beta)
    if order == "standard":
        gen = run_generic(cost, sched)
        ce = run_ce(cost, sched, normalized=False)
    elif order == "commuting":
        from .fullspace import apply_cost_phase, apply_x_mixer
        gen = init_plus(cost.num_qubits)
        apply_x_mixer(gen, beta)
        apply_cost_phase(gen, cost.cost_vector(), gamma)
        ce = init_w_product(n)
        apply_block_xy_mixer(ce, n, beta, normalized=False)
        apply_subspace_cost_phase(ce, subspace_cost_table(cost), gamma)
    else:
        raise ValueError(f"unknown order {order!r}")
    return complex(np.vdot(ce, project_to_subspace(gen, n)))


# ---------------------------------------------------------------------------
# mixer leakage across the permutation set

def subspace_mixer_hamiltonian(n: int, normalized: bool = False) -> np.ndarray:
    """Block mixer restricted to the manifold: kron-sum of sector matrices."""
    if n > 3:
        raise CapacityError("dense subspace operator capped at n=3")
    sector, _, _ = block_mixer_sector(n, normalized)
    dim = n ** n
    H = np.zeros((dim, dim))
    for b in range(n):
        mats = [sector if k == b else np.eye(n) for k in range(n)]
        term = mats[0]
        for mm in mats[1:]:
            term = np.kron(term, mm)
        H += term
    return H


def double_commutator_gram(n: int, normalized: bool = False, mixer=None):
    """Minimum eigenvalue of 2 P H (I-P) H P on the manifold.

    P projects onto all-distinct tuples, H is the block mixer restricted to
    the manifold (overridable for diagnostics).  The operator has the form
    2 A^dag A, so the contract is min eigenvalue >= -1e-9.
    """
    H = subspace_mixer_hamiltonian(n, normalized) if mixer is None else np.asarray(mixer)
    dim = n ** n
    pdiag = np.zeros(dim)
    pdiag[feasible_subspace_indices(n)] = 1.0
    P = np.diag(pdiag)
    G = 2.0 * P @ H @ (np.eye(dim) - P) @ H @ P
    return float(np.linalg.eigvalsh((G + G.T.conj()) / 2).min()), G
