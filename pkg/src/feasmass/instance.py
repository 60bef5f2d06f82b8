"""Problem instances, the permutation-feasibility test, and the diagonal cost.

A problem of size ``n`` is encoded on ``N = n**2`` binary variables laid out
row-major: bit ``i*n + j`` of a basis label says whether city ``j`` sits at
tour position ``i``.  A label is feasible exactly when that 0/1 matrix is a
permutation matrix.

Instance files are plain text: the first non-comment line holds ``n``, the
next ``n`` lines hold ``n`` non-negative integers each.  Lines starting with
``#`` are ignored anywhere in the file.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

MAX_ENUM_SIZE = 8          # factorial enumeration guard
MAX_DENSE_COST_SIZE = 5    # full 2**(n*n) cost tables


class CapacityError(ValueError):
    """Requested size exceeds the configured desk-scale budget."""


class InstanceFormatError(ValueError):
    """Instance file could not be parsed."""


class InstanceDimensionError(InstanceFormatError):
    """Distance matrix is not square / does not match the declared size."""


def default_penalty_weight(dist) -> int:
    """Big-M weight n*max(dist)+1: any constraint violation outweighs any tour."""
    d = np.asarray(dist)
    return int(d.shape[0] * d.max() + 1)


@dataclass(frozen=True)
class ProblemInstance:
    """A permutation-constrained instance: city count, distances, penalty weight."""

    n: int
    dist: tuple
    penalty_weight: int
    name: str = "unnamed"

    def __post_init__(self):
        d = np.asarray(self.dist)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InstanceDimensionError(f"distance matrix must be square, got shape {d.shape}")
        if d.shape[0] != self.n:
            raise InstanceDimensionError(f"matrix is {d.shape[0]}x{d.shape[1]} but n={self.n}")
        if self.n < 2:
            raise ValueError("need at least two cities")
        if (d < 0).any():
            raise ValueError("distances must be non-negative integers")
        if np.diag(d).any():
            raise ValueError("distance matrix must have a zero diagonal")
        if self.penalty_weight < 1:
            raise ValueError("penalty weight must be positive")
        object.__setattr__(self, "dist", tuple(tuple(int(v) for v in row) for row in d))

    @property
    def num_qubits(self) -> int:
        return self.n * self.n

    def dist_array(self) -> np.ndarray:
        return np.asarray(self.dist, dtype=np.int64)


def make_instance(dist, penalty_weight=None, name="unnamed") -> ProblemInstance:
    d = np.asarray(dist)
    if penalty_weight is None:
        penalty_weight = default_penalty_weight(d)
    return ProblemInstance(n=d.shape[0], dist=tuple(map(tuple, d.tolist())),
                           penalty_weight=int(penalty_weight), name=name)


def synthetic_instance(n: int, seed: int = 0, high: int = 9, name=None) -> ProblemInstance:
    """Deterministic symmetric instance with integer entries in [1, high]."""
    rng = np.random.default_rng(seed + 1009 * n)
    d = rng.integers(1, high + 1, size=(n, n))
    d = (d + d.T) // 2
    d = np.maximum(d, 1)
    np.fill_diagonal(d, 0)
    return make_instance(d, name=name or f"synthetic-n{n}-s{seed}")


def load_instance(path, penalty_weight=None) -> ProblemInstance:
    """Parse an instance file (format documented in the module docstring).

    Raises InstanceFormatError with the offending line number on bad input and
    InstanceDimensionError when the matrix does not match the declared size.
    """
    path = Path(path)
    tokens = []  # (line_number, value)
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            for tok in body.split():
                try:
                    val = int(tok)
                except ValueError:
                    raise InstanceFormatError(
                        f"{path}:{lineno}: expected an integer, got {tok!r}") from None
                tokens.append((lineno, val))
    if not tokens:
        raise InstanceFormatError(f"{path}: empty instance file")
    n = tokens[0][1]
    if n < 2:
        raise InstanceFormatError(f"{path}:{tokens[0][0]}: city count must be >= 2, got {n}")
    body = tokens[1:]
    if len(body) != n * n:
        lineno = body[-1][0] if body else tokens[0][0]
        raise InstanceDimensionError(
            f"{path}:{lineno}: expected {n}x{n}={n * n} matrix entries, got {len(body)}")
    d = np.array([v for _, v in body], dtype=np.int64).reshape(n, n)
    return make_instance(d, penalty_weight=penalty_weight, name=path.stem)


# ---------------------------------------------------------------------------
# bit-layout helpers

def bit_index(position: int, city: int, n: int) -> int:
    return position * n + city


def bitstring_str(x: int, n: int) -> str:
    """Render a basis label with bit k=i*n+j at string position k (left to right)."""
    return "".join("1" if (x >> k) & 1 else "0" for k in range(n * n))


def parse_bitstring(s: str) -> int:
    return sum(1 << k for k, ch in enumerate(s) if ch == "1")


def bits_to_matrix(x: int, n: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            m[i, j] = (x >> bit_index(i, j, n)) & 1
    return m


def is_permutation_feasible(x: int, n: int) -> bool:
    """True iff every row and every column of the n x n bit matrix sums to 1."""
    row_mask = (1 << n) - 1
    cols = 0
    for i in range(n):
        row = (x >> (i * n)) & row_mask
        if row.bit_count() != 1:
            return False
        if cols & row:
            return False
        cols |= row
    return cols == row_mask


@lru_cache(maxsize=None)
def enumerate_feasible(n: int) -> tuple:
    """All n! feasible labels, in lexicographic permutation order."""
    if n > MAX_ENUM_SIZE:
        raise CapacityError(f"feasible enumeration capped at n={MAX_ENUM_SIZE}, got {n}")
    out = []
    for perm in itertools.permutations(range(n)):
        out.append(sum(1 << bit_index(pos, city, n) for pos, city in enumerate(perm)))
    return tuple(out)


def feasible_indices(n: int) -> np.ndarray:
    return np.array(enumerate_feasible(n), dtype=np.int64)


# ---------------------------------------------------------------------------
# diagonal cost

@dataclass
class DiagonalCost:
    """Diagonal cost C(y) = A*(one-hot penalties) + cyclic bilinear tour length.

    The spectrum lies on the unit integer lattice (omega = 1), which is what
    makes exact finite-grid angle averaging possible.
    """

    n: int
    penalty_weight: int
    dist: np.ndarray
    include_penalty: bool = True
    omega: int = 1
    _vector: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def num_qubits(self) -> int:
        return self.n * self.n

    def value(self, y: int) -> int:
        """Scalar evaluation by bit arithmetic; exact integer."""
        n = self.n
        row_mask = (1 << n) - 1
        rows = [(y >> (i * n)) & row_mask for i in range(n)]
        cost = 0
        if self.include_penalty:
            pen = sum((r.bit_count() - 1) ** 2 for r in rows)
            for j in range(n):
                col = sum((r >> j) & 1 for r in rows)
                pen += (col - 1) ** 2
            cost += self.penalty_weight * pen
        d = self.dist
        for t in range(n):
            rt, rt1 = rows[t], rows[(t + 1) % n]
            for u in range(n):
                if not (rt >> u) & 1:
                    continue
                for v in range(n):
                    if (rt1 >> v) & 1:
                        cost += int(d[u, v])
        return cost

    def cost_vector(self, dtype=None) -> np.ndarray:
        """Dense table C over all 2**(n*n) labels (index = integer label)."""
        if self._vector is not None and (dtype is None or self._vector.dtype == dtype):
            return self._vector
        n = self.n
        if n > MAX_DENSE_COST_SIZE:
            raise CapacityError(f"dense cost table capped at n={MAX_DENSE_COST_SIZE}, got {n}")
        if dtype is None:
            dtype = np.int32 if n == 5 else np.int64
        vec = _dense_cost(n, self.dist, self.penalty_weight, self.include_penalty, dtype)
        self._vector = vec
        return vec

    def tie_broken_vector(self) -> np.ndarray:
        """Injective lattice refinement C*2**N + y.

        Degenerate cost levels defeat exact angle averaging (equal-cost pairs
        keep phase 1 under every average); spacing the lattice by 2**N and
        adding the label index splits every level while staying on an integer
        lattice, so the finite-grid average is exact again.
        """
        N = self.num_qubits
        base = self.cost_vector().astype(np.int64)
        return base * (1 << N) + np.arange(1 << N, dtype=np.int64)

    @property
    def spread(self) -> int:
        """Max pairwise cost difference; exact scan for n <= 4, analytic above."""
        if self.n <= 4:
            vec = self.cost_vector()
            return int(vec.max() - vec.min())
        n = self.n
        d = self.dist
        pen_max = 2 * n * (n - 1) ** 2 if self.include_penalty else 0
        tour_max = n * int(d.sum())
        return self.penalty_weight * pen_max + tour_max

    def min_feasible_value(self) -> int:
        return min(self.value(x) for x in enumerate_feasible(self.n))


def _dense_cost(n, dist, A, include_penalty, dtype):
    # One axis per row block, axis k holding row (n-1-k) so that C-order
    # flattening reproduces the integer label y = sum_i r_i << (i*n).
    m = 1 << n
    bits = ((np.arange(m)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)
    popc = bits.sum(axis=1)
    row_pen = (popc - 1) ** 2
    and_popc = bits @ bits.T
    tour = bits @ np.asarray(dist, dtype=np.int64) @ bits.T

    def on_row(vec1d, i):
        shape = [1] * n
        shape[n - 1 - i] = m
        return vec1d.reshape(shape)

    def on_pair(mat, i, j):
        # mat is indexed [r_i, r_j]; C-order reshape feeds the lower axis first
        ai, aj = n - 1 - i, n - 1 - j
        shape = [1] * n
        shape[ai] = m
        shape[aj] = m
        return mat.reshape(shape) if ai < aj else mat.T.reshape(shape)

    total = np.zeros([m] * n, dtype=np.int64)
    if include_penalty:
        for i in range(n):
            total += A * on_row(row_pen, i)
        # column part: A * (n - sum_i |r_i| + 2 sum_{i<i'} |r_i & r_i'|)
        total += A * n
        for i in range(n):
            total -= A * on_row(popc, i)
        for i in range(n):
            for j in range(i + 1, n):
                total += 2 * A * on_pair(and_popc, i, j)
    for t in range(n):
        total += on_pair(tour, t, (t + 1) % n)
    return total.reshape(-1).astype(dtype, copy=False)


def build_cost(instance: ProblemInstance, include_penalty: bool = True) -> DiagonalCost:
    return DiagonalCost(n=instance.n, penalty_weight=instance.penalty_weight,
                        dist=instance.dist_array(), include_penalty=include_penalty)
