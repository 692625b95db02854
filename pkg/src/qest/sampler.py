"""Metropolis sampling from ratio oracles and quantum-walk gap diagnostics.

The sampler only ever sees ratios mu(x')/mu(x), so any overall scale of the
target measure is irrelevant. The walk side builds the bipartite reflection
operator for a reversible chain and reads mixing information out of its
eigenphases, which sit at plus or minus arccos of the chain eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DomainError, UnitaryOperator

ROW_SUM_TOL = 1e-12
BALANCE_TOL = 1e-10
PROPOSALS = ("uniform", "single-bit-flip")

# Hard cap on the edge-space dimension N_S^2 for walk construction.
MAX_WALK_DIM = 2 ** 16

# Eigenphases below this magnitude count as zero when the phase gap is taken.
PHASE_ZERO_TOL = 1e-9


class SamplerError(RuntimeError):
    """The chain could not produce samples (for example an all-zero target)."""


@dataclass(frozen=True)
class MarkovChain:
    """Row-stochastic transition matrix with an optional stationary vector."""

    transition: np.ndarray
    stationary: np.ndarray | None = None

    def __post_init__(self):
        p = np.array(self.transition, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise DomainError(f"transition matrix must be square, got {p.shape}")
        if p.min() < 0:
            raise DomainError(f"negative transition probability {p.min():.3e}")
        rows = p.sum(axis=1)
        if np.abs(rows - 1).max() > ROW_SUM_TOL:
            raise DomainError(
                f"rows must sum to 1, worst deviation {np.abs(rows - 1).max():.3e}"
            )
        p.flags.writeable = False
        object.__setattr__(self, "transition", p)
        if self.stationary is not None:
            pi = np.array(self.stationary, dtype=float)
            if pi.shape != (p.shape[0],) or pi.min() < 0 or abs(pi.sum() - 1) > 1e-10:
                raise DomainError("stationary vector is not a distribution")
            if np.abs(pi @ p - pi).max() > BALANCE_TOL:
                raise DomainError("claimed stationary vector is not stationary")
            detailed = pi[:, None] * p - (pi[:, None] * p).T
            if np.abs(detailed).max() > BALANCE_TOL:
                raise DomainError("chain violates detailed balance")
            pi.flags.writeable = False
            object.__setattr__(self, "stationary", pi)

    @property
    def dim(self) -> int:
        return self.transition.shape[0]

    def to_json(self) -> dict:
        obj = {"dim": self.dim, "transition": self.transition.tolist()}
        if self.stationary is not None:
            obj["stationary"] = self.stationary.tolist()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "MarkovChain":
        stat = obj.get("stationary")
        return cls(
            np.array(obj["transition"], dtype=float),
            None if stat is None else np.array(stat, dtype=float),
        )


@dataclass(frozen=True)
class ChainConfig:
    """Proposal kind, schedule, and seed for one Metropolis run."""

    n_steps: int
    seed: int
    proposal: str = "single-bit-flip"
    burn_in: int = 1000
    thinning: int = 1

    def __post_init__(self):
        if self.proposal not in PROPOSALS:
            raise DomainError(f"proposal must be one of {PROPOSALS}")
        if self.n_steps < 1:
            raise DomainError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.burn_in < 0 or self.thinning < 1:
            raise DomainError("burn_in must be >= 0 and thinning >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must fit in 64 bits")


@dataclass(frozen=True)
class ChainRun:
    """Recorded trajectory plus acceptance bookkeeping."""

    samples: list
    n_proposed: int
    n_accepted: int

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposed if self.n_proposed else 0.0


def _bit_count(dim: int) -> int:
    n_bits = dim.bit_length() - 1
    if 2 ** n_bits != dim:
        raise DomainError(
            f"single-bit-flip proposal needs a power-of-two dimension, got {dim}"
        )
    return n_bits


def run_chain(ratio, dim: int, config: ChainConfig) -> ChainRun:
    """Metropolis walk over states 0 .. dim-1 driven by a ratio oracle.

    ratio(x, y) must return mu(y)/mu(x); it may return inf when mu(x) = 0
    and nan when both measures vanish. The chain starts at state 0, runs
    burn_in transitions, then records every thinning-th state until n_steps
    samples exist. A start from which only nan ratios are seen within the
    retry budget means the target is identically zero.
    """
    if dim < 1:
        raise DomainError(f"dimension must be >= 1, got {dim}")
    n_bits = _bit_count(dim) if config.proposal == "single-bit-flip" else 0
    rng = np.random.default_rng(config.seed)

    x = 0
    samples = []
    n_proposed = 0
    n_accepted = 0
    ever_accepted = False
    nan_streak = 0
    nan_budget = 100 + 10 * dim
    total = config.burn_in + config.n_steps * config.thinning
    for step in range(total):
        if config.proposal == "uniform":
            y = int(rng.integers(0, dim))
        else:
            y = x ^ (1 << int(rng.integers(0, n_bits)))
        r = float(ratio(x, y))
        n_proposed += 1
        if np.isnan(r):
            if not ever_accepted:
                nan_streak += 1
                if nan_streak > nan_budget:
                    raise SamplerError(
                        "target measure looks identically zero: no move "
                        f"accepted after {nan_streak} undefined ratios"
                    )
            accept = False
            rng.random()  # keep the draw stream aligned with accepted paths
        else:
            if r < 0:
                raise DomainError(f"ratio oracle returned negative value {r}")
            accept = rng.random() < min(1.0, r)
        if accept:
            x = y
            n_accepted += 1
            ever_accepted = True
        if step >= config.burn_in and (step - config.burn_in) % config.thinning == (
            config.thinning - 1
        ):
            samples.append(x)
    if not ever_accepted and nan_streak == n_proposed:
        # Short runs can end before the streak budget trips.
        raise SamplerError(
            "target measure looks identically zero: every ratio was undefined"
        )
    return ChainRun(samples, n_proposed, n_accepted)


def metropolis_sample(ratio, dim: int, config: ChainConfig) -> list:
    """Trajectory only; see run_chain for the kernel contract."""
    return run_chain(ratio, dim, config).samples


def ratio_from_weights(mu):
    """Ratio oracle for an explicit weight vector (0/0 becomes nan)."""
    mu = np.asarray(mu, dtype=float)
    if mu.min() < 0:
        raise DomainError("weights must be nonnegative")

    def ratio(x, y):
        with np.errstate(divide="ignore", invalid="ignore"):
            return mu[y] / mu[x]

    return ratio


def build_metropolis_matrix(mu, proposal: str = "single-bit-flip") -> MarkovChain:
    """Dense Metropolis transition matrix for the target weights mu.

    Off-diagonal entries are q(x, y) * min(1, mu_y / mu_x) and the diagonal
    absorbs the remainder; the normalized weights are attached as the
    stationary distribution, which also forces the detailed-balance check.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.shape[0] < 2:
        raise DomainError("mu must be a vector of at least two weights")
    if mu.min() < 0 or not np.all(np.isfinite(mu)):
        raise DomainError("weights must be finite and nonnegative")
    if mu.sum() <= 0:
        raise DomainError("weights must not be identically zero")
    dim = mu.shape[0]

    if proposal == "uniform":
        q = np.full((dim, dim), 1.0 / dim)
    elif proposal == "single-bit-flip":
        n_bits = _bit_count(dim)
        q = np.zeros((dim, dim))
        for x in range(dim):
            for bit in range(n_bits):
                q[x, x ^ (1 << bit)] = 1.0 / n_bits
    else:
        raise DomainError(f"proposal must be one of {PROPOSALS}")

    with np.errstate(divide="ignore", invalid="ignore"):
        accept = np.minimum(1.0, mu[None, :] / mu[:, None])
    accept[np.isnan(accept)] = 1.0  # 0/0 pairs carry no stationary weight
    p = q * accept
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(p, 1.0 - p.sum(axis=1))
    return MarkovChain(p, mu / mu.sum())


def chain_eigenvalues(chain: MarkovChain) -> np.ndarray:
    """Real eigenvalues of a reversible chain, descending.

    Uses the symmetrization diag(sqrt(pi)) P diag(1/sqrt(pi)) on the support
    of pi, which keeps the eigenproblem Hermitian and accurate.
    """
    pi = _stationary(chain)
    _check_reversible(chain, pi)
    p = chain.transition
    support = pi > 0
    if support.all():
        root = np.sqrt(pi)
        sym = (root[:, None] * p) / root[None, :]
        vals = np.linalg.eigvalsh((sym + sym.T) / 2)
    else:
        vals = np.linalg.eigvals(p)
        if np.abs(vals.imag).max() > 1e-9:
            raise DomainError("reversible chain produced complex eigenvalues")
        vals = vals.real
    return np.sort(vals)[::-1]


def spectral_gap(chain: MarkovChain) -> float:
    """delta = |lambda_1| - |lambda_2| over the eigenvalue magnitudes."""
    mags = np.sort(np.abs(chain_eigenvalues(chain)))[::-1]
    return float(mags[0] - mags[1])


def _stationary(chain: MarkovChain) -> np.ndarray:
    if chain.stationary is not None:
        return chain.stationary
    vals, vecs = np.linalg.eig(chain.transition.T)
    idx = int(np.argmin(np.abs(vals - 1)))
    if abs(vals[idx] - 1) > 1e-8:
        raise DomainError("chain has no eigenvalue 1; not a stochastic matrix?")
    pi = vecs[:, idx].real
    pi = np.abs(pi)
    total = pi.sum()
    if total <= 0:
        raise DomainError("failed to extract a stationary distribution")
    return pi / total


def _check_reversible(chain: MarkovChain, pi: np.ndarray) -> None:
    flow = pi[:, None] * chain.transition
    dev = np.abs(flow - flow.T).max()
    if dev > BALANCE_TOL:
        raise DomainError(
            f"chain is not reversible: detailed balance violated by {dev:.3e}"
        )


def _edge_space_isometries(chain: MarkovChain):
    """Columns |x>|p_x> and their swaps |q_y>|y> as N^2 x N isometries."""
    p = chain.transition
    n = chain.dim
    root = np.sqrt(p)
    a = np.zeros((n * n, n))
    b = np.zeros((n * n, n))
    for x in range(n):
        a[x * n:(x + 1) * n, x] = root[x, :]
        b[x::n, x] = root[x, :]
    return a, b


def szegedy_walk_operator(chain: MarkovChain) -> UnitaryOperator:
    """Walk unitary on the doubled space: swap times the edge reflection.

    W = S (2 Pi_A - 1) with Pi_A the projector onto span{|x>|p_x>} and S the
    register swap. Its square is the product of the reflections about the
    two edge subspaces; taking the swap form keeps the eigenphases at plus
    or minus arccos of the chain eigenvalues instead of twice that.
    """
    n = chain.dim
    if n * n > MAX_WALK_DIM:
        raise DomainError(
            f"edge space dimension {n * n} exceeds the cap {MAX_WALK_DIM}"
        )
    a, _ = _edge_space_isometries(chain)
    reflect = 2 * (a @ a.T) - np.eye(n * n)
    w = reflect.reshape(n, n, n * n).transpose(1, 0, 2).reshape(n * n, n * n)
    return UnitaryOperator(w)


def _invariant_subspace_basis(chain: MarkovChain) -> np.ndarray:
    a, b = _edge_space_isometries(chain)
    stacked = np.hstack([a, b])
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    return u[:, s > 1e-10]


def walk_eigenphases(walk: UnitaryOperator, chain: MarkovChain) -> np.ndarray:
    """Sorted eigenphases of the walk on its invariant edge subspace."""
    basis = _invariant_subspace_basis(chain)
    if walk.dim != basis.shape[0]:
        raise DomainError("walk dimension does not match the chain")
    sub = basis.conj().T @ walk.entries @ basis
    dev = np.abs(sub @ sub.conj().T - np.eye(sub.shape[0])).max()
    if dev > 1e-8:
        raise DomainError(
            f"edge subspace is not invariant under the walk (deviation {dev:.3e})"
        )
    return np.sort(np.angle(np.linalg.eigvals(sub)))


def phase_gap(walk: UnitaryOperator, chain: MarkovChain) -> float:
    """Smallest nonzero eigenphase magnitude of the walk.

    For a reversible chain this equals arccos(lambda_2) and dominates
    sqrt(2 delta), the quadratic speedup relation.
    """
    phases = np.abs(walk_eigenphases(walk, chain))
    nonzero = phases[phases > PHASE_ZERO_TOL]
    if nonzero.size == 0:
        raise DomainError("walk spectrum is degenerate: no nonzero eigenphase")
    return float(nonzero.min())


def trajectory_to_csv(samples) -> str:
    """CSV with header step,x; steps are 0-based recording indices."""
    lines = ["step,x"]
    lines.extend(f"{i},{x}" for i, x in enumerate(samples))
    return "\n".join(lines) + "\n"
