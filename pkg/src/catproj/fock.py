"""Truncated Fock-space states and operators.

Everything in this package lives in the span of |0>..|n_max>.  States are
dense complex amplitude vectors, operators are dense complex matrices.
Values are immutable after construction (arrays are marked read-only), so
they can be shared freely between threads.

Conventions fixed here and used everywhere else:

* displacement D(beta) = exp(beta a^dag - beta* a), so D(beta)|0> = |beta>
  with amplitudes e^{-|beta|^2/2} beta^n / sqrt(n!);
* cat vectors |C+-> = (|alpha> +- |-alpha>)/N_pm carry exactly alternating
  parity support, and the lowest nonzero Fock amplitude is made real
  positive so vector equality is testable;
* factorials are handled as log-factorials throughout (no overflow up to
  any practical cutoff).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammainc, gammaln

__all__ = [
    "COHERENT_TAIL_TOL",
    "DISPLACEMENT_GUARD_TOL",
    "NORM_TOL",
    "CutoffTooSmallError",
    "DimensionMismatchError",
    "TruncationDim",
    "StateVector",
    "FockOperator",
    "ScsMeasurementSpec",
    "as_dim",
    "coherent_state",
    "number_state",
    "cat_basis",
    "cat_norm_factors",
    "scs_projectors",
    "displacement_operator",
    "displacement_defect",
    "max_guarded_amplitude",
    "identity_operator",
    "inner",
    "expect",
    "apply_operator",
]

# Maximum photon-number tail mass allowed outside the truncated basis when
# embedding a coherent amplitude.
COHERENT_TAIL_TOL = 1e-8

# Maximum unitarity defect of D(beta)^dag D(beta) - I on the guarded
# upper-left (n_max//2)^2 block.  Measured defects at n_max=20 grow from
# ~8e-6 at |beta|=0.9 to ~6e-5 at |beta|=1.0, so a useful guard has to sit
# above that envelope; 1e-4 admits every amplitude the optimizers need
# while still rejecting clearly under-truncated requests.
DISPLACEMENT_GUARD_TOL = 1e-4

# Constructor tolerance on state normalization.
NORM_TOL = 1e-9


class DimensionMismatchError(ValueError):
    """Operands live on different truncated spaces."""


class CutoffTooSmallError(ValueError):
    """The requested amplitude does not fit in the truncated space."""


@dataclass(frozen=True)
class TruncationDim:
    """Photon-number cutoff; the basis is |0>..|n_max>, dimension n_max+1."""

    n_max: int

    def __post_init__(self) -> None:
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def size(self) -> int:
        return self.n_max + 1


def as_dim(dim) -> TruncationDim:
    """Accept either a TruncationDim or a bare integer n_max."""
    if isinstance(dim, TruncationDim):
        return dim
    return TruncationDim(dim)


def _require_same_dim(a: TruncationDim, b: TruncationDim) -> None:
    if a != b:
        raise DimensionMismatchError(f"dimension mismatch: n_max {a.n_max} vs {b.n_max}")


@dataclass(frozen=True, eq=False)
class StateVector:
    """Dense ket on the truncated basis.

    With ``normalized=True`` (the default) the constructor enforces
    sum |c_n|^2 = 1 within ``NORM_TOL``.  Pass ``normalized=False`` for
    intermediate unnormalized vectors.
    """

    dim: TruncationDim
    amps: np.ndarray
    normalized: bool = True

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=complex, copy=True)
        if amps.shape != (self.dim.size,):
            raise DimensionMismatchError(
                f"amplitude vector has shape {amps.shape}, expected ({self.dim.size},)"
            )
        if self.normalized:
            nrm = float(np.sum(np.abs(amps) ** 2))
            if abs(nrm - 1.0) > NORM_TOL:
                raise ValueError(f"state marked normalized but has norm^2 = {nrm!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense operator (matrix of theta_mn entries) on the truncated basis."""

    dim: TruncationDim
    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=complex, copy=True)
        if entries.shape != (self.dim.size, self.dim.size):
            raise DimensionMismatchError(
                f"operator has shape {entries.shape}, expected "
                f"({self.dim.size}, {self.dim.size})"
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return float(np.max(np.abs(self.entries - self.entries.conj().T))) <= tol

    def is_positive_semidefinite(self, tol: float = 1e-9) -> bool:
        # eigvalsh reads the lower triangle; symmetrize first so the test is
        # meaningful for almost-Hermitian input too.
        h = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(h)[0]) >= -tol


@dataclass(frozen=True)
class ScsMeasurementSpec:
    """Target projection basis: pi0 = c0|C+> + c1 e^{i phi}|C->.

    c0, c1 are real non-negative with c0^2 + c1^2 = 1; sign freedom is
    absorbed into the relative phase phi.
    """

    alpha: float
    c0: float
    c1: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.c0 < 0 or self.c1 < 0:
            raise ValueError("c0 and c1 must be non-negative (sign goes into phi)")
        if abs(self.c0**2 + self.c1**2 - 1.0) > 1e-12:
            raise ValueError(
                f"c0^2 + c1^2 = {self.c0 ** 2 + self.c1 ** 2!r}, expected 1 within 1e-12"
            )

    @classmethod
    def from_c0sq(cls, alpha: float, c0sq: float, phi: float = 0.0) -> "ScsMeasurementSpec":
        """Build a spec from the population c0^2, clamping float-grid dust.

        Grid arithmetic can produce c0sq = 1 + 2e-16; the clamp keeps the
        complementary coefficient real.
        """
        c0sq = min(max(float(c0sq), 0.0), 1.0)
        return cls(alpha=alpha, c0=math.sqrt(c0sq), c1=math.sqrt(1.0 - c0sq), phi=phi)

    @property
    def c0sq(self) -> float:
        return self.c0**2


@lru_cache(maxsize=None)
def _logfact(n_max: int) -> np.ndarray:
    lf = gammaln(np.arange(n_max + 1) + 1.0)
    lf.setflags(write=False)
    return lf


def coherent_state(alpha: complex, dim) -> StateVector:
    """Truncated coherent state |alpha>, renormalized on the cutoff basis.

    Rejects amplitudes whose untruncated photon-number tail beyond n_max
    exceeds COHERENT_TAIL_TOL (the tail mass is the upper Poisson tail of
    mean |alpha|^2).
    """
    dim = as_dim(dim)
    lam = abs(alpha) ** 2
    if lam > 0:
        tail = float(gammainc(dim.n_max + 1, lam))
        if tail > COHERENT_TAIL_TOL:
            raise CutoffTooSmallError(
                f"coherent amplitude {alpha!r} leaves tail mass {tail:.3e} above "
                f"n_max={dim.n_max} (tolerance {COHERENT_TAIL_TOL:.0e})"
            )
    amps = np.zeros(dim.size, dtype=complex)
    if alpha == 0:
        amps[0] = 1.0
    else:
        n = np.arange(dim.size)
        mag = np.exp(n * math.log(abs(alpha)) - 0.5 * lam - 0.5 * _logfact(dim.n_max))
        amps = mag * np.exp(1j * n * np.angle(alpha))
        amps /= np.linalg.norm(amps)
    return StateVector(dim, amps)


def number_state(n: int, dim) -> StateVector:
    dim = as_dim(dim)
    if not 0 <= n <= dim.n_max:
        raise ValueError(f"photon number {n} outside [0, {dim.n_max}]")
    amps = np.zeros(dim.size, dtype=complex)
    amps[n] = 1.0
    return StateVector(dim, amps)


def _fix_global_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so the lowest-index nonzero amplitude is real positive."""
    nz = np.nonzero(np.abs(v) > 1e-14)[0]
    if nz.size:
        v = v * np.exp(-1j * np.angle(v[nz[0]]))
    return v


def cat_basis(alpha: float, dim) -> tuple[StateVector, StateVector]:
    """Even/odd cat vectors |C+-> = (|alpha> +- |-alpha>)/N_pm.

    The returned vectors have exactly alternating zero support (the
    vanishing parity components are zeroed, not just small).
    """
    if not (np.isrealobj(alpha) or np.imag(alpha) == 0) or not alpha > 0:
        raise ValueError(f"cat amplitude must be real positive, got {alpha!r}")
    dim = as_dim(dim)
    cp = coherent_state(float(alpha), dim).amps
    # for real alpha the -alpha vector is exactly the sign-alternated one;
    # building it this way keeps the cat amplitudes exactly real
    signs = np.where(np.arange(dim.size) % 2 == 0, 1.0, -1.0)
    cm = cp * signs
    plus = cp + cm
    minus = cp - cm
    plus[1::2] = 0.0
    minus[0::2] = 0.0
    plus = _fix_global_phase(plus / np.linalg.norm(plus))
    minus = _fix_global_phase(minus / np.linalg.norm(minus))
    return StateVector(dim, plus), StateVector(dim, minus)


def cat_norm_factors(alpha: float, dim) -> tuple[float, float]:
    """Normalization factors (N+, N-) of the truncated cat vectors.

    N_pm^2 = 2 (1 +- Re<alpha|-alpha>) evaluated with the truncated,
    renormalized coherent vectors.
    """
    dim = as_dim(dim)
    ov = inner(coherent_state(alpha, dim), coherent_state(-alpha, dim)).real
    return math.sqrt(2.0 * (1.0 + ov)), math.sqrt(2.0 * (1.0 - ov))


def scs_projectors(spec: ScsMeasurementSpec, dim) -> tuple[StateVector, StateVector]:
    """Orthonormal target vectors

    pi0 = c0|C+> + c1 e^{+i phi}|C->,
    pi1 = c1 e^{-i phi}|C+> - c0|C->.
    """
    dim = as_dim(dim)
    plus, minus = cat_basis(spec.alpha, dim)
    pi0 = spec.c0 * plus.amps + spec.c1 * np.exp(1j * spec.phi) * minus.amps
    pi1 = spec.c1 * np.exp(-1j * spec.phi) * plus.amps - spec.c0 * minus.amps
    return StateVector(dim, pi0), StateVector(dim, pi1)


def _displacement_matrix(beta: complex, dim: TruncationDim) -> np.ndarray:
    """<m|D(beta)|n> from the closed-form associated-Laguerre expression.

    For m >= n:  <m|D|n> = sqrt(n!/m!) beta^{m-n} e^{-|beta|^2/2} L_n^{(m-n)}(|beta|^2)
    and <n|m> entries follow from D(-beta)^T symmetry.  The Laguerre values
    are generated with the stable three-term recurrence along each diagonal.
    """
    N = dim.size
    if beta == 0:
        return np.eye(N, dtype=complex)
    x = abs(beta) ** 2
    lf = _logfact(dim.n_max)
    D = np.zeros((N, N), dtype=complex)
    for d in range(N):
        nn = np.arange(N - d)
        lk = [1.0]
        if N - d > 1:
            lk.append(1.0 + d - x)
            for k in range(2, N - d):
                lk.append(((2 * k - 1 + d - x) * lk[k - 1] - (k - 1 + d) * lk[k - 2]) / k)
        lag = np.array(lk)
        m = nn + d
        base = np.exp(0.5 * (lf[nn] - lf[m]) - 0.5 * x)
        D[m, nn] = base * beta**d * lag
        if d > 0:
            D[nn, m] = base * (-np.conj(beta)) ** d * lag
    return D


def displacement_defect(beta: complex, dim) -> float:
    """Max |D^dag D - I| on the upper-left (n_max//2)^2 block."""
    dim = as_dim(dim)
    D = _displacement_matrix(beta, dim)
    k = max(1, dim.n_max // 2)
    block = (D.conj().T @ D)[:k, :k] - np.eye(k)
    return float(np.max(np.abs(block)))


def displacement_operator(beta: complex, dim) -> FockOperator:
    """Displacement D(beta) on the truncated basis.

    Raises CutoffTooSmallError when the unitarity defect on the guarded
    sub-block exceeds DISPLACEMENT_GUARD_TOL, i.e. when the truncation is
    too tight for this amplitude.
    """
    dim = as_dim(dim)
    D = _displacement_matrix(beta, dim)
    if beta != 0:
        k = max(1, dim.n_max // 2)
        defect = float(np.max(np.abs((D.conj().T @ D)[:k, :k] - np.eye(k))))
        if defect > DISPLACEMENT_GUARD_TOL:
            raise CutoffTooSmallError(
                f"displacement {beta!r} has unitarity defect {defect:.3e} on the "
                f"{k}x{k} guard block at n_max={dim.n_max} "
                f"(tolerance {DISPLACEMENT_GUARD_TOL:.0e})"
            )
    return FockOperator(dim, D)


@lru_cache(maxsize=None)
def _max_guarded_amplitude_cached(n_max: int, step: float) -> float:
    dim = TruncationDim(n_max)
    r = 0.0
    k = 1
    while k * step <= 2.5 + 1e-12:
        if displacement_defect(k * step, dim) > DISPLACEMENT_GUARD_TOL:
            break
        r = k * step
        k += 1
    return r


def max_guarded_amplitude(dim, step: float = 0.02) -> float:
    """Largest grid amplitude (multiples of ``step``) passing the
    displacement guard at this truncation.  Bounded optimizer domains use
    this so they never request operators the guard would reject."""
    dim = as_dim(dim)
    return _max_guarded_amplitude_cached(dim.n_max, float(step))


def identity_operator(dim) -> FockOperator:
    dim = as_dim(dim)
    return FockOperator(dim, np.eye(dim.size, dtype=complex))


def inner(a: StateVector, b: StateVector) -> complex:
    """<a|b> (conjugate-linear in the first argument)."""
    _require_same_dim(a.dim, b.dim)
    return complex(np.vdot(a.amps, b.amps))


def expect(op: FockOperator, s: StateVector) -> complex:
    """<s|op|s>; real within 1e-10 whenever op is Hermitian."""
    _require_same_dim(op.dim, s.dim)
    return complex(np.vdot(s.amps, op.entries @ s.amps))


def apply_operator(op: FockOperator, s: StateVector) -> StateVector:
    """op|s> as an (unnormalized) vector."""
    _require_same_dim(op.dim, s.dim)
    return StateVector(op.dim, op.entries @ s.amps, normalized=False)
