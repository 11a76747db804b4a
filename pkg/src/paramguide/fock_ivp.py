"""Initial-value (time-domain) down-conversion in a truncated Fock basis.

One pair of modes (V, H) driven from vacuum by the interaction
M c+_V c+_H + h.c. only ever populates the diagonal states |n, n>, so the
evolution reduces to a tridiagonal problem on the amplitudes C_n. With the
convention d|psi>/dt = -(i/hbar) H_int |psi> and H_int = -(M S+ + M* S-)
the first-order state is |0> + i (M t/hbar) |1,1>, and the exact result is
the two-mode squeezed vacuum

    C_n = (i e^{i Arg M} tanh r)^n / cosh r,   r = |M| t / hbar.

Distinct pairs share no operator, so a multi-pair state is a tensor product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import linalg

from .errors import InvalidParameterError, PreconditionError, TruncationError
from .model import HBAR

DEFAULT_NMAX = 60
MIN_NMAX = 8
LEAK_TOLERANCE = 1e-9
SCHMIDT_THRESHOLD = 1e-10
PHASE_CONVENTION = "C_1/C_0 = +i M t / hbar (first order)"


@dataclass(frozen=True)
class PairState:
    """Amplitudes C_n on |n_V, n_H>, n = 0..N_max."""

    amplitudes: np.ndarray
    squeeze_arg: complex
    leak: float

    @property
    def n_max(self) -> int:
        return self.amplitudes.size - 1

    @property
    def r(self) -> float:
        return abs(self.squeeze_arg)


def tanh_law(squeeze_arg: complex, n_max: int) -> np.ndarray:
    """Analytic two-mode squeezed vacuum amplitudes C_0..C_nmax."""
    r = abs(squeeze_arg)
    ratio = 1j * np.exp(1j * np.angle(squeeze_arg)) * math.tanh(r)
    return ratio ** np.arange(n_max + 1) / math.cosh(r)


def _generator(squeeze_arg: complex, size: int) -> np.ndarray:
    # S+ |n,n> = (n+1) |n+1,n+1>; the generator is i (M S+ + M* S-)
    n = np.arange(size - 1)
    up = (n + 1.0) * squeeze_arg
    A = np.zeros((size, size), dtype=complex)
    A[n + 1, n] = 1j * up
    A[n, n + 1] = 1j * np.conj(up)
    return A


def evolve_pair(squeeze_arg: complex, n_max: int = DEFAULT_NMAX,
                tolerance: float = LEAK_TOLERANCE) -> PairState:
    """Exact evolution from vacuum by a matrix exponential of the pair generator.

    The exponential is taken on a guard basis twice as large, so the leak
    1 - sum_{n <= n_max} |C_n|^2 measures population the cut-off misses.
    """
    if n_max < MIN_NMAX:
        raise InvalidParameterError(f"n_max must be >= {MIN_NMAX}")
    squeeze_arg = complex(squeeze_arg)
    size = 2 * (n_max + 1)
    psi = linalg.expm(_generator(squeeze_arg, size))[:, 0]
    amps = psi[: n_max + 1].copy()
    leak = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    if leak > tolerance:
        # tanh^(2(n+1)) tail below tolerance
        t2 = math.tanh(abs(squeeze_arg)) ** 2
        suggest = None
        if 0 < t2 < 1:
            suggest = max(int(math.ceil(math.log(tolerance) / math.log(t2))), n_max + 1)
        hint = f"; try n_max >= {suggest}" if suggest else ""
        raise TruncationError(f"truncation leak {leak:.3e} exceeds {tolerance:g} at n_max = {n_max}{hint}",
                              suggested_nmax=suggest)
    return PairState(amps, squeeze_arg, leak)


def squeeze_argument(m_abs: float, m_arg: float, t_int: float) -> complex:
    """M t / hbar from |M| (erg), Arg M and the interaction time (s)."""
    if m_abs < 0 or t_int < 0:
        raise InvalidParameterError("|M| and t_int must be >= 0")
    return m_abs * t_int / HBAR * complex(math.cos(m_arg), math.sin(m_arg))


@dataclass(frozen=True)
class MultiPairState:
    """Independent pairs; the joint state is the tensor product of the pair states.

    Mode ordering in :meth:`full_state` is (V_1, H_1, V_2, H_2, ...), each mode
    truncated at ``n_max`` photons.
    """

    pairs: tuple[PairState, ...]

    def __len__(self):
        return len(self.pairs)

    def pair(self, k: int) -> PairState:
        return self.pairs[k]

    def pair_tensor(self, k: int) -> np.ndarray:
        """Amplitude matrix of pair k over (n_V, n_H); diagonal for SPDC."""
        return np.diag(self.pairs[k].amplitudes)

    def full_state(self, floor: float = 1e-17) -> np.ndarray:
        """Dense amplitude tensor with one axis per mode.

        Photon numbers whose amplitude is below ``floor`` in every pair are
        trimmed so the tensor stays small.
        """
        keep = 1 + max(int(np.nonzero(np.abs(p.amplitudes) >= floor)[0].max()) for p in self.pairs)
        mats = [self.pair_tensor(k)[:keep, :keep] for k in range(len(self.pairs))]
        return reduce(np.multiply.outer, mats)

    def single_pair_excitations(self) -> np.ndarray:
        """First-order amplitudes C_1 / C_0 of each pair, with the vacuum dropped."""
        return np.array([p.amplitudes[1] / p.amplitudes[0] for p in self.pairs])


def multi_pair_state(couplings, n_max: int = DEFAULT_NMAX,
                     tolerance: float = LEAK_TOLERANCE) -> MultiPairState:
    return MultiPairState(tuple(evolve_pair(c, n_max, tolerance) for c in couplings))


def schmidt_rank_check(state, cut: int, threshold: float = SCHMIDT_THRESHOLD):
    """Schmidt rank across a bipartition after the first ``cut`` modes.

    For a :class:`MultiPairState` the cut counts modes (two per pair) and
    must fall on a pair boundary; raw amplitude tensors accept any cut.
    Returns (rank, singular values in descending order).
    """
    if isinstance(state, MultiPairState):
        if cut % 2:
            raise PreconditionError("cut falls inside a pair; use an even mode index")
        tensor = state.full_state()
    else:
        tensor = np.asarray(state)
    if not 0 < cut < tensor.ndim:
        raise PreconditionError(f"cut must lie in 1..{tensor.ndim - 1}")
    left = int(np.prod(tensor.shape[:cut]))
    sv = linalg.svdvals(tensor.reshape(left, -1))
    return int(np.sum(sv > threshold)), sv
