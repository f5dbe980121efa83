"""Transition matrices and steady states of the four subsystem types.

All queues are slotted with early departure / late arrival: a departure
happens at the start of a slot, arrivals join at its end, so a same-slot
departure frees one buffer place for a same-slot arrival.

* tandem: a processing queue feeding a transmission queue (QBD chain)
* single: one finite queue with Bernoulli arrivals
* superposed: one server fed by two independent Bernoulli streams
* core: two CPUs fed by four independent Bernoulli streams
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .markov import SolverError, SteadyState, TransitionMatrix, marginal_probability

INFINITE = None  # buffer size of an unbounded queue

TRUNCATION_MASS = 1e-10
DEFAULT_STATE_CAP = 10**6
A_MAX_CORE = 4


class ParameterError(ValueError):
    pass


class TruncationError(SolverError):
    pass


def _check_prob(name: str, value: float, *, positive: bool = False) -> None:
    if not 0.0 <= value <= 1.0 or (positive and value == 0.0):
        bound = "(0, 1]" if positive else "[0, 1]"
        raise ParameterError(f"{name}={value!r} must lie in {bound}")


def _check_buffer(name: str, value: int, minimum: int = 1) -> None:
    if int(value) != value or value < minimum:
        raise ParameterError(f"{name}={value!r} must be an integer >= {minimum}")


@dataclass(frozen=True)
class TandemSpec:
    lam: float
    mu_first: float
    mu_second: float
    m_first: int
    m_second: int

    def __post_init__(self):
        _check_prob("lam", self.lam)
        _check_prob("mu_first", self.mu_first, positive=True)
        _check_prob("mu_second", self.mu_second, positive=True)
        _check_buffer("m_first", self.m_first)
        _check_buffer("m_second", self.m_second)


@dataclass(frozen=True)
class SingleQueueSpec:
    lam: float
    mu: float
    m: int

    def __post_init__(self):
        _check_prob("lam", self.lam)
        _check_prob("mu", self.mu, positive=True)
        _check_buffer("m", self.m)


@dataclass(frozen=True)
class SuperposedQueueSpec:
    lam_a: float
    lam_b: float
    mu: float
    m: int | None  # None means an infinite buffer

    def __post_init__(self):
        _check_prob("lam_a", self.lam_a)
        _check_prob("lam_b", self.lam_b)
        _check_prob("mu", self.mu, positive=True)
        if self.m is not INFINITE:
            _check_buffer("m", self.m, minimum=2)

    @property
    def infinite(self) -> bool:
        return self.m is INFINITE

    @property
    def batch_pmf(self) -> tuple[float, float, float]:
        """Probabilities of 0, 1 and 2 arrivals in a slot."""
        a, b = self.lam_a, self.lam_b
        return ((1 - a) * (1 - b), a * (1 - b) + b * (1 - a), a * b)

    @property
    def transition_terms(self) -> tuple[float, float, float, float]:
        """(b0, b1, b2, b3): a busy server moves the queue by -1, 0, +1, +2."""
        a, b, mu = self.lam_a, self.lam_b, self.mu
        b0 = (1 - a) * (1 - b) * mu
        b1 = (1 - b) * (1 - a) * (1 - mu) + (1 - b) * a * mu + b * (1 - a) * mu
        b2 = a * (1 - b) * (1 - mu) + (1 - a) * b * (1 - mu) + a * b * mu
        b3 = a * b * (1 - mu)
        return b0, b1, b2, b3


@dataclass(frozen=True)
class CoreQueueSpec:
    lambdas: tuple[float, float, float, float]
    mu: float
    m: int
    n_cpus: int = 2

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if len(self.lambdas) != 4:
            raise ParameterError("the core queue takes exactly 4 arrival streams")
        for k, lam in enumerate(self.lambdas):
            _check_prob(f"lambdas[{k}]", lam)
        _check_prob("mu", self.mu, positive=True)
        if self.n_cpus != 2:
            raise ParameterError("only the 2-CPU core is implemented")
        _check_buffer("m", self.m, minimum=A_MAX_CORE)


# --- tandem (QBD) -----------------------------------------------------------

def tandem_phase_matrices(mu_second: float, m_second: int) -> tuple[np.ndarray, np.ndarray]:
    """Phase transitions of the second queue without / with an arrival from the first.

    The first matrix is ``P^(1)`` (no task handed over), the second ``P^(2)``
    (one task handed over at the end of the slot). ``Fraction`` inputs give
    object arrays with exact entries.
    """
    n = m_second + 1
    dtype = object if isinstance(mu_second, Fraction) else float
    no_input = np.zeros((n, n), dtype=dtype)
    with_input = np.zeros((n, n), dtype=dtype)
    no_input[0, 0] = 1
    with_input[0, 1] = 1
    for j in range(1, n):
        no_input[j, j - 1] = mu_second
        no_input[j, j] = 1 - mu_second
        if j < m_second:
            with_input[j, j] = mu_second
            with_input[j, j + 1] = 1 - mu_second
    with_input[m_second, m_second] = 1  # full: a departure frees the slot, else the task is dropped
    return no_input, with_input


def tandem_blocks(spec: TandemSpec) -> dict[str, np.ndarray]:
    lam, mu1 = spec.lam, spec.mu_first
    p1, p2 = tandem_phase_matrices(spec.mu_second, spec.m_second)
    return {
        "B": (1 - lam) * p1,
        "C": lam * p1,
        "E": (1 - lam) * mu1 * p2,
        "A0": lam * (1 - mu1) * p1,
        "A1": (1 - lam) * (1 - mu1) * p1 + lam * mu1 * p2,
        "A2": (1 - lam) * mu1 * p2,
    }


def assemble_tandem(blocks: dict[str, np.ndarray], m_first: int) -> np.ndarray:
    """Place the blocks on the level grid; keeps the blocks' dtype."""
    n_lev, n_ph = m_first + 1, blocks["B"].shape[0]
    P = np.zeros((n_lev * n_ph, n_lev * n_ph), dtype=blocks["B"].dtype)

    def put(row: int, col: int, block: np.ndarray) -> None:
        P[row * n_ph:(row + 1) * n_ph, col * n_ph:(col + 1) * n_ph] += block

    put(0, 0, blocks["B"])
    put(0, 1, blocks["C"])
    for i in range(1, n_lev):
        put(i, i - 1, blocks["E"] if i == 1 else blocks["A2"])
        if i < m_first:
            put(i, i, blocks["A1"])
            put(i, i + 1, blocks["A0"])
        else:
            put(i, i, blocks["A0"] + blocks["A1"])
    return P


def build_tandem_matrix(spec: TandemSpec) -> TransitionMatrix:
    """Block-tridiagonal kernel over ``(i, j)``, level ``i`` outermost."""
    n_lev, n_ph = spec.m_first + 1, spec.m_second + 1
    P = assemble_tandem(tandem_blocks(spec), spec.m_first).astype(float)
    labels = [(i, j) for i in range(n_lev) for j in range(n_ph)]
    return TransitionMatrix(P, labels)


def busy_probability(ss: SteadyState, position: int | None = None) -> float:
    """Pr{queue > 0}; ``position`` picks the queue inside a tuple label."""
    if position is None:
        return marginal_probability(ss, lambda lab: lab > 0)
    return marginal_probability(ss, lambda lab: lab[position] > 0)


def effective_arrival_rate(ss: SteadyState, mu_first: float, position: int | None = 0) -> float:
    """Rate handed downstream: Pr{queue non-empty} * service probability."""
    return busy_probability(ss, position) * mu_first


# --- single finite queue ----------------------------------------------------

def build_single_queue_matrix(spec: SingleQueueSpec) -> TransitionMatrix:
    lam, mu, m = spec.lam, spec.mu, spec.m
    P = np.zeros((m + 1, m + 1))
    P[0, 0] = 1 - lam
    P[0, 1] = lam
    for i in range(1, m + 1):
        P[i, i - 1] = (1 - lam) * mu
        if i < m:
            P[i, i] = lam * mu + (1 - lam) * (1 - mu)
            P[i, i + 1] = lam * (1 - mu)
        else:
            P[i, i] = (1 - lam) * (1 - mu) + lam
    return TransitionMatrix(P, range(m + 1))


def single_queue_closed_form(spec: SingleQueueSpec) -> SteadyState:
    """Balance-equation solution ``pi_i = lam^i (1-mu)^(i-1) / ((1-lam)^i mu^i) * pi_0``."""
    lam, mu = spec.lam, spec.mu
    if lam == 1.0:
        raise ParameterError("closed form needs lam < 1")
    weights = [1.0] + [
        lam**i * (1 - mu) ** (i - 1) / ((1 - lam) ** i * mu**i) for i in range(1, spec.m + 1)
    ]
    weights = np.asarray(weights)
    return SteadyState(weights / weights.sum(), range(spec.m + 1))


# --- superposed Bernoulli arrivals, one server -----------------------------

def build_superposed_queue_matrix(spec: SuperposedQueueSpec) -> TransitionMatrix:
    if spec.infinite:
        raise ParameterError("an infinite buffer has no finite transition matrix")
    m = spec.m
    p00, p01, p02 = spec.batch_pmf
    b0, b1, b2, b3 = spec.transition_terms
    P = np.zeros((m + 1, m + 1))
    P[0, :3] = (p00, p01, p02)
    for i in range(1, m + 1):
        P[i, i - 1] = b0
        if i <= m - 2:
            P[i, i:i + 3] = (b1, b2, b3)
        elif i == m - 1:
            P[i, i:i + 2] = (b1, b2 + b3)
        else:
            P[i, i] = b1 + b2 + b3
    return TransitionMatrix(P, range(m + 1))


@dataclass(frozen=True)
class InfiniteQueueSolution:
    stable: bool
    steady_state: SteadyState | None
    empty_probability: float | None
    residual_mass: float | None

    @property
    def n_states(self) -> int:
        return 0 if self.steady_state is None else len(self.steady_state)


def infinite_superposed_steady_state(
    spec: SuperposedQueueSpec,
    tol: float = TRUNCATION_MASS,
    state_cap: int = DEFAULT_STATE_CAP,
) -> InfiniteQueueSolution:
    """Unbounded queue: empty probability from the z-transform, tail by recursion.

    Returns ``stable=False`` and no distribution when ``lam_a + lam_b >= mu``.
    The distribution is truncated at the first state where the remaining mass
    drops below ``tol``.
    """
    lam_total = spec.lam_a + spec.lam_b
    if lam_total >= spec.mu:
        return InfiniteQueueSolution(False, None, None, None)

    a = spec.batch_pmf
    b = spec.transition_terms
    # A'(1) and B'(1) of A(z) = sum a_i z^-i, B(z) = sum b_i z^-i
    dA = -sum(i * a_i for i, a_i in enumerate(a))
    dB = -sum(i * b_i for i, b_i in enumerate(b))
    pi0 = (1 + dB) / (1 + dB - dA)

    probs = [pi0]
    remaining = 1.0 - pi0
    i = 0
    while remaining >= tol:
        if len(probs) > state_cap:
            raise TruncationError(f"tail mass still {remaining:.3e} after {state_cap} states")
        # pi_i = a_i pi_0 + sum_{j=1}^{i+1} b_{i-j+1} pi_j, solved for pi_{i+1}
        acc = probs[i] - (a[i] * pi0 if i < 3 else 0.0)
        for j in range(max(1, i - 2), i + 1):
            acc -= b[i - j + 1] * probs[j]
        nxt = acc / b[0]
        if not math.isfinite(nxt) or nxt < -tol:
            raise TruncationError(f"recursion diverged at state {i + 1}")
        nxt = max(nxt, 0.0)
        probs.append(nxt)
        remaining -= nxt
        i += 1
    probs_arr = np.asarray(probs)
    residual = 1.0 - probs_arr.sum()
    ss = SteadyState(probs_arr / probs_arr.sum(), range(len(probs_arr)))
    return InfiniteQueueSolution(True, ss, pi0, max(residual, 0.0))


# --- core server: 4 feeds, 2 CPUs -------------------------------------------

def binomial_departure_pmf(n_cpus: int, mu: float, k: int) -> float:
    if not 0 <= k <= n_cpus:
        raise ParameterError(f"k={k} outside 0..{n_cpus}")
    return math.comb(n_cpus, k) * mu**k * (1 - mu) ** (n_cpus - k)


def core_arrival_batch_pmf(lambdas: Sequence[float]) -> np.ndarray:
    """Distribution of the number of arrivals from four independent Bernoulli feeds."""
    if len(lambdas) != 4:
        raise ParameterError("expected 4 arrival probabilities")
    l2, l5, l8, l11 = lambdas
    n2, n5, n8, n11 = (1 - l2), (1 - l5), (1 - l8), (1 - l11)
    p00 = n2 * n5 * n8 * n11
    p01 = l2 * n5 * n8 * n11 + n2 * l5 * n8 * n11 + n2 * n5 * l8 * n11 + n2 * n5 * n8 * l11
    p02 = (l2 * l5 * n8 * n11 + l2 * n5 * l8 * n11 + l2 * n5 * n8 * l11
           + n2 * l5 * l8 * n11 + n2 * l5 * n8 * l11 + n2 * n5 * l8 * l11)
    p03 = l2 * l5 * l8 * n11 + l2 * l5 * n8 * l11 + n2 * l5 * l8 * l11 + l2 * n5 * l8 * l11
    p04 = l2 * l5 * l8 * l11
    return np.array([p00, p01, p02, p03, p04])


ROW_ONE_MODES = ("printed", "single_cpu")


def core_transition_terms(spec: CoreQueueSpec, row_one: str = "printed") -> dict[str, np.ndarray]:
    """Boundary rows ``p0k``, ``p1k`` and the repeated band ``b0..b6``.

    With ``row_one="printed"`` a lone task leaves when either CPU completes,
    probability ``1 - (1 - mu)^2``. ``"single_cpu"`` lets only the CPU holding
    it complete, probability ``mu``, which is what the simulator does.
    """
    if row_one not in ROW_ONE_MODES:
        raise ParameterError(f"row_one must be one of {ROW_ONE_MODES}")
    p = core_arrival_batch_pmf(spec.lambdas)
    x0, x1, x2 = (binomial_departure_pmf(2, spec.mu, k) for k in range(3))
    x_any = 1 - x0 if row_one == "printed" else spec.mu
    x_none = 1 - x_any
    p1 = np.array([
        p[0] * x_any,
        p[0] * x_none + p[1] * x_any,
        p[1] * x_none + p[2] * x_any,
        p[2] * x_none + p[3] * x_any,
        p[3] * x_none + p[4] * x_any,
        p[4] * x_none,
    ])
    b = np.array([
        p[4] * x0,
        p[3] * x0 + p[4] * x1,
        p[2] * x0 + p[3] * x1 + p[4] * x2,
        p[1] * x0 + p[2] * x1 + p[3] * x2,
        p[0] * x0 + p[1] * x1 + p[2] * x2,
        p[0] * x1 + p[1] * x2,
        p[0] * x2,
    ])
    return {"p0": p, "p1": p1, "b": b}


def build_core_queue_matrix(spec: CoreQueueSpec, row_one: str = "printed") -> TransitionMatrix:
    """Banded kernel: at most 2 departures and 4 arrivals per slot.

    Row 0 takes the arrival batch pmf, row 1 lets its single task leave when
    any CPU completes, rows ``i >= 2`` repeat ``b6 .. b0`` from column
    ``i - 2``. Mass that would overflow the buffer lands in column ``m``.
    """
    terms = core_transition_terms(spec, row_one)
    m = spec.m
    P = np.zeros((m + 1, m + 1))
    for k, val in enumerate(terms["p0"]):
        P[0, min(k, m)] += val
    for k, val in enumerate(terms["p1"]):
        P[1, min(k, m)] += val
    band = terms["b"][::-1]  # b6 (down 2) ... b0 (up 4)
    for i in range(2, m + 1):
        for offset, val in enumerate(band):
            P[i, min(i - 2 + offset, m)] += val
    return TransitionMatrix(P, range(m + 1))


def enumerate_core_batches(lambdas: Sequence[float]) -> np.ndarray:
    """Reference pmf by summing over all 2^4 arrival patterns."""
    pmf = np.zeros(5)
    for pattern in product((0, 1), repeat=4):
        pr = 1.0
        for hit, lam in zip(pattern, lambdas):
            pr *= lam if hit else 1 - lam
        pmf[sum(pattern)] += pr
    return pmf
