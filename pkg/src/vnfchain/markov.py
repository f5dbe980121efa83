"""Finite discrete-time Markov chains and their stationary distributions.

A chain is stored as a row-stochastic matrix plus a tuple of state labels;
row ``k`` of the matrix belongs to ``labels[k]``. Labels are whatever the
builder finds natural: an int for a single queue, an ``(i, j)`` pair for
two queues in tandem, a 6-tuple for the joint oracle chain.

Memory is dominated by the dense matrix: a tandem with buffers ``M1, M2``
has ``(M1 + 1) * (M2 + 1)`` states, so ``M1 = M2 = 50`` gives 2601 states
and a 54 MB matrix. Chains above a few thousand states should be passed in
as ``scipy.sparse`` matrices, which every solver except the EVD one accepts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph  # noqa: F401  (registers sp.csgraph)
import scipy.sparse.linalg as spla

ROW_SUM_TOL = 1e-12
NORMALIZATION_TOL = 1e-10
RESIDUAL_TOL = 1e-10
CLAMP_TOL = 1e-9
EIGENVALUE_TOL = 1e-8

# above this many states the direct solver factorizes a sparse copy
SPARSE_THRESHOLD = 400


class SolverError(RuntimeError):
    """A steady-state solve failed; ``residual`` is ``||pi P - pi||_inf`` when known."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class NonUniqueSteadyStateError(SolverError):
    """The chain has more than one recurrent class."""


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    entries: Any  # np.ndarray or scipy.sparse matrix
    labels: tuple[Hashable, ...]
    _index: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        entries = self.entries
        if sp.issparse(entries):
            entries = sp.csr_matrix(entries, dtype=float, copy=True)
            data = entries.data
        else:
            entries = np.array(entries, dtype=float)
            data = entries
        if data.size and (data.min() < -ROW_SUM_TOL or data.max() > 1.0 + ROW_SUM_TOL):
            raise ValueError("transition probabilities must lie in [0, 1]")
        np.clip(data, 0.0, 1.0, out=data)  # absorb roundoff in summed boundary terms
        if not sp.issparse(entries):
            entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "labels", tuple(self.labels))

        n = len(self.labels)
        if entries.shape != (n, n):
            raise ValueError(f"matrix shape {entries.shape} does not match {n} labels")
        index = {label: k for k, label in enumerate(self.labels)}
        if len(index) != n:
            raise ValueError("state labels must be unique")
        object.__setattr__(self, "_index", index)

        row_sums = np.asarray(entries.sum(axis=1)).ravel()
        worst = np.max(np.abs(row_sums - 1.0)) if n else 0.0
        if worst > ROW_SUM_TOL:
            raise ValueError(f"rows must sum to 1 (worst deviation {worst:.3e})")

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.entries)

    def index(self, label: Hashable) -> int:
        return self._index[label]

    def __getitem__(self, key: tuple[Hashable, Hashable]) -> float:
        src, dst = key
        return float(self.entries[self._index[src], self._index[dst]])

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.entries.toarray()
        return self.entries


@dataclass(frozen=True, eq=False)
class SteadyState:
    probs: np.ndarray
    labels: tuple[Hashable, ...]

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", tuple(self.labels))
        if probs.shape != (len(self.labels),):
            raise ValueError("probability vector and labels differ in length")
        if abs(probs.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        if probs.size and probs.min() < -1e-12:
            raise ValueError("negative probability in steady state")

    def __len__(self) -> int:
        return len(self.labels)

    def as_dict(self) -> dict[Hashable, float]:
        return dict(zip(self.labels, self.probs.tolist()))

    def prob(self, label: Hashable) -> float:
        return float(self.probs[self.labels.index(label)])

    def coordinate(self, position: int | None = None) -> np.ndarray:
        """Label coordinate per state; ``position=None`` for scalar labels."""
        if position is None:
            return np.asarray(self.labels, dtype=float)
        return np.asarray([lab[position] for lab in self.labels], dtype=float)


def _finish(probs: np.ndarray, P: TransitionMatrix) -> SteadyState:
    """Clamp round-off negatives, renormalize and check the fixed point."""
    if not np.all(np.isfinite(probs)):
        raise SolverError("solver produced non-finite probabilities")
    total = probs.sum()
    if total == 0 or not np.isfinite(total):
        raise SolverError("solver produced a zero vector")
    probs = probs / total
    negative_mass = -probs[probs < 0].sum()
    if negative_mass > CLAMP_TOL:
        raise NonUniqueSteadyStateError(
            f"steady state has {negative_mass:.3e} negative mass; chain is not unichain"
        )
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    residual = float(np.max(np.abs(P.entries.T @ probs - probs)))
    if residual > RESIDUAL_TOL:
        raise SolverError(f"steady-state residual {residual:.3e} too large", residual)
    return SteadyState(probs, P.labels)


def solve_steady_state_direct(P: TransitionMatrix, sparse: bool | None = None) -> SteadyState:
    """Solve ``pi P = pi, sum(pi) = 1`` by a single linear solve.

    The balance equation of state 0 is replaced by the normalization, which
    leaves a nonsingular system whenever the chain has exactly one recurrent
    class. Transient states come out with zero mass.
    """
    n = P.n_states
    if sparse is None:
        sparse = P.is_sparse or n > SPARSE_THRESHOLD
    rhs = np.zeros(n)
    rhs[0] = 1.0
    if sparse:
        system = sp.csr_matrix(P.entries).T.tocsr() - sp.identity(n, format="csr")
        system = sp.vstack([sp.csr_matrix(np.ones((1, n))), system[1:]], format="csc")
        with np.errstate(all="ignore"):
            try:
                probs = spla.splu(system).solve(rhs)
            except RuntimeError as exc:  # exactly singular factor
                raise NonUniqueSteadyStateError(f"singular balance system: {exc}") from exc
    else:
        system = P.dense().T - np.eye(n)
        system[0, :] = 1.0
        try:
            probs = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise NonUniqueSteadyStateError(f"singular balance system: {exc}") from exc
    return _finish(probs, P)


def solve_steady_state_evd(P: TransitionMatrix) -> SteadyState:
    """Stationary distribution as the left eigenvector for eigenvalue 1."""
    if P.is_sparse:
        raise SolverError("eigendecomposition needs a dense matrix")
    values, vectors = scipy.linalg.eig(P.entries.T)
    close = np.flatnonzero(np.abs(values - 1.0) <= EIGENVALUE_TOL)
    if close.size == 0:
        raise SolverError("no eigenvalue within 1e-8 of 1")
    if close.size > 1:
        raise NonUniqueSteadyStateError(
            f"eigenvalue 1 has multiplicity {close.size}; chain is reducible"
        )
    vec = vectors[:, close[0]]
    vec = np.real(vec * np.exp(-1j * np.angle(vec[np.argmax(np.abs(vec))])))
    return _finish(vec, P)


def reachable_states(P: TransitionMatrix, start: int = 0) -> np.ndarray:
    """Sorted indices of the states reachable from ``start``."""
    graph = sp.csr_matrix(P.entries) > 0
    order = sp.csgraph.breadth_first_order(graph, start, directed=True, return_predecessors=False)
    return np.sort(order)


def solve_from_start(P: TransitionMatrix, solver: Callable[[TransitionMatrix], SteadyState],
                     start: int = 0) -> SteadyState:
    """Steady state of the chain started in ``start``, restricted to what it can reach.

    A chain with several recurrent classes has a unique long-run law once the
    initial state is fixed, provided only one class is reachable from it.
    """
    keep = reachable_states(P, start)
    if len(keep) == P.n_states:
        return solver(P)
    sub = P.entries[keep][:, keep]
    sub_labels = [P.labels[k] for k in keep]
    inner = solver(TransitionMatrix(sub, sub_labels))
    probs = np.zeros(P.n_states)
    probs[keep] = inner.probs
    return SteadyState(probs, P.labels)


def marginal_probability(ss: SteadyState, predicate: Callable[[Hashable], bool]) -> float:
    mask = np.fromiter((bool(predicate(lab)) for lab in ss.labels), dtype=bool, count=len(ss))
    return float(np.clip(ss.probs[mask].sum(), 0.0, 1.0))


def expectation(ss: SteadyState, position: int | None = None) -> float:
    """Mean of one label coordinate (the queue length for queue ``position``)."""
    return float(ss.probs @ ss.coordinate(position))


def stationary_residual(P: TransitionMatrix, ss: SteadyState) -> float:
    return float(np.max(np.abs(P.entries.T @ ss.probs - ss.probs)))


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())
