from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, TypeVar, Union

import numpy as np

from spectra_select.errors import ConvergenceError, PreconditionError

T = TypeVar("T")

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-9
SIGN_TOL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """
    Seeded PCG64 stream with keyed sub-streams.

    `child(*key)` derives an independent stream from (seed, key) alone, so a
    sub-stream per tree or per (feature, repeat) gives the same numbers
    whether the work runs serially or in parallel. A stream is single-owner.
    """

    seed: int
    key: Tuple[int, ...] = ()
    _generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.seed < 0 or self.seed >= 2**64:
            raise PreconditionError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        object.__setattr__(self, "_generator", np.random.Generator(np.random.PCG64(sequence)))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def child(self, *key: int) -> "RngStream":
        return RngStream(seed=self.seed, key=self.key + tuple(int(k) for k in key))


def as_matrix(a: Union[np.ndarray, Sequence[Sequence[float]]]) -> np.ndarray:
    """Validate and return a finite 2-D float64 array."""
    m = np.array(a, dtype=np.float64, copy=True)
    if m.ndim != 2:
        raise PreconditionError(f"expected a matrix, got array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PreconditionError("matrix contains non-finite entries")
    return m


def permute(values: Union[Sequence[T], np.ndarray], rng: RngStream) -> Union[List[T], np.ndarray]:
    """Fisher-Yates rearrangement of `values` driven by `rng`."""
    order = rng.generator.permutation(len(values))
    if isinstance(values, np.ndarray):
        return values[order]
    return [values[i] for i in order]


def covariance(x: np.ndarray) -> np.ndarray:
    """Unbiased (n - 1) d x d covariance of an n x d sample matrix."""
    x = as_matrix(x)
    if x.shape[0] < 2:
        raise PreconditionError(f"covariance needs at least 2 samples, got {x.shape[0]}")
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    return (cov + cov.T) / 2.0


def _round_robin_pairs(n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Tournament ordering of all (p, q) pairs: each round holds disjoint pairs,
    and the rounds together cover every pair exactly once.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p_idx, q_idx = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a >= n or b >= n:
                continue
            p_idx.append(min(a, b))
            q_idx.append(max(a, b))
        rounds.append((np.array(p_idx, dtype=np.intp), np.array(q_idx, dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def sym_eig(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition a = Q diag(w) Q^T of a symmetric matrix.

    Cyclic Jacobi rotations, swept in tournament order so each round rotates
    disjoint index pairs at once. Eigenvalues come back descending; each
    eigenvector's first nonzero entry is non-negative.
    """
    a = as_matrix(a)
    n, cols = a.shape
    if n != cols:
        raise PreconditionError(f"sym_eig needs a square matrix, got {a.shape}")
    asym = np.abs(a - a.T)
    if np.any(asym > SYMMETRY_TOL * np.maximum(1.0, np.abs(a))):
        raise PreconditionError(f"matrix is not symmetric (max asymmetry {asym.max():.3e})")

    a = (a + a.T) / 2.0
    v = np.eye(n)
    scale = float(np.linalg.norm(a))
    if n == 1 or scale == 0.0:
        return _sorted_eig(np.diag(a).copy(), v)

    rounds = _round_robin_pairs(n)
    for _ in range(JACOBI_MAX_SWEEPS):
        if _off_norm(a) <= JACOBI_TOL * scale:
            break
        for p, q in rounds:
            if len(p) == 0:
                continue
            apq = a[p, q]
            rotate = apq != 0.0
            safe_apq = np.where(rotate, apq, 1.0)
            theta = (a[q, q] - a[p, p]) / (2.0 * safe_apq)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(rotate, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    else:
        if _off_norm(a) > JACOBI_TOL * scale:
            raise ConvergenceError(
                f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )

    return _sorted_eig(np.diag(a).copy(), v)


def _sorted_eig(w: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-w, kind="stable")
    w = w[order]
    q = v[:, order].copy()
    for k in range(q.shape[1]):
        nonzero = np.flatnonzero(np.abs(q[:, k]) > SIGN_TOL)
        if len(nonzero) and q[nonzero[0], k] < 0:
            q[:, k] = -q[:, k]
    return w, q
