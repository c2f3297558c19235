"""Reconstruction of a binary measurement in the 2-D cat-state basis.

The outcome statistics of coherent probes ``|+alpha>``, ``|-alpha>`` and
``|+-i*gamma_k>`` determine the POVM restricted to span{|C+>, |C->}.  The
imaginary-probe rows enter through two polynomial series in the probe
amplitude: the odd coefficients (antisymmetric combination of the ``+-i``
rates) recover the imaginary parts of the Fock off-diagonals, while the even
coefficients (symmetric combination) recover the real parts needed to
synthesize an even-cat probe.  Both series are solved as box-constrained
least-squares problems whose bounds follow from the entry bound on POVM
elements.  A fixed-point maximum-likelihood iteration then reconstructs the
2x2 pair from four informationally complete probe states.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fock import (
    FockOperator,
    ScsMeasurementSpec,
    TruncationDim,
    as_dim,
    cat_norm_factors,
)

COMPLETENESS_TOL_2D = 1e-6
EIGENVALUE_FLOOR_2D = 1e-9
SERIES_SOLVER_GRAD_TOL = 1e-12
SERIES_SOLVER_MAX_ITER = 10**5
MLE_STOP_TOL = 1e-9
MLE_MAX_ITER = 10**5
MLE_PROB_FLOOR = 1e-12
_MLE_MAX_DILUTIONS = 60
ENTRY_BOUND_TOL = 1e-9

_AMPLITUDE_MATCH_TOL = 1e-9


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its iteration budget."""


@dataclass(frozen=True)
class ProbeSet:
    """Coherent probe amplitudes: the cat amplitude and the |+-i*gamma> list."""

    alpha: float
    gammas: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if len(self.gammas) < 1:
            raise ValueError("at least one gamma probe amplitude is required")
        if any(not g > 0 for g in self.gammas):
            raise ValueError("gamma amplitudes must be > 0")
        if len(set(self.gammas)) != len(self.gammas):
            raise ValueError("gamma amplitudes must be distinct")

    @property
    def k(self) -> int:
        return len(self.gammas)

    def amplitudes(self) -> tuple:
        """Probe amplitudes in canonical row order: +a, -a, +ig_1, -ig_1, ..."""
        rows = [complex(self.alpha), complex(-self.alpha)]
        for g in self.gammas:
            rows.append(complex(0.0, g))
            rows.append(complex(0.0, -g))
        return tuple(rows)


@dataclass(frozen=True)
class ClickTable:
    """Per-probe outcome counts.  Rows follow ``ProbeSet.amplitudes`` order.

    Counts are stored as floats so that exact-probability tables (rates
    times a nominal shot number) can flow through the same code path as
    sampled integers.
    """

    probe_amplitudes: tuple
    counts0: np.ndarray
    counts1: np.ndarray
    shots: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "probe_amplitudes", tuple(complex(a) for a in self.probe_amplitudes))
        for name in ("counts0", "counts1", "shots"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.probe_amplitudes)
        if not (self.counts0.shape == self.counts1.shape == self.shots.shape == (n,)):
            raise ValueError("counts0, counts1 and shots must be 1-D with one row per probe")
        if np.any(self.counts0 < 0) or np.any(self.counts1 < 0):
            raise ValueError("counts must be non-negative")
        if np.any(self.shots <= 0):
            raise ValueError("every probe needs a positive number of shots")
        resid = np.max(np.abs(self.counts0 + self.counts1 - self.shots))
        if resid > 1e-6 * max(1.0, float(self.shots.max())):
            raise ValueError(f"outcome counts do not sum to shots (residual {resid:g})")

    @classmethod
    def from_rates(cls, probe_amplitudes, rates0, shots) -> "ClickTable":
        rates0 = np.asarray(rates0, dtype=float)
        shots = np.broadcast_to(np.asarray(shots, dtype=float), rates0.shape).copy()
        if np.any(rates0 < -1e-12) or np.any(rates0 > 1 + 1e-12):
            raise ValueError("rates must lie in [0, 1]")
        rates0 = np.clip(rates0, 0.0, 1.0)
        return cls(tuple(probe_amplitudes), rates0 * shots, (1.0 - rates0) * shots, shots)

    def rates(self) -> tuple[np.ndarray, np.ndarray]:
        return self.counts0 / self.shots, self.counts1 / self.shots

    def scaled(self, factor: float) -> "ClickTable":
        """Same table with every count (and shot) multiplied by ``factor``."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return ClickTable(
            self.probe_amplitudes,
            self.counts0 * factor,
            self.counts1 * factor,
            self.shots * factor,
        )

    def row_index(self, amplitude: complex) -> int:
        for i, a in enumerate(self.probe_amplitudes):
            if abs(a - amplitude) < _AMPLITUDE_MATCH_TOL:
                return i
        raise KeyError(f"no probe row at amplitude {amplitude!r}")


def odd_series_bound(order: int) -> float:
    """Box bound on the odd-series coefficient of the given (odd) order."""
    if order < 1 or order % 2 == 0:
        raise ValueError(f"order must be odd and >= 1, got {order}")
    return float(sum(1.0 / math.sqrt(math.factorial(m) * math.factorial(order - m))
                     for m in range(1, order + 1)))


def even_series_bound(order: int) -> float:
    """Box bound on the even-series coefficient of the given (even) order."""
    if order < 0 or order % 2 == 1:
        raise ValueError(f"order must be even and >= 0, got {order}")
    return float(sum(1.0 / math.sqrt(math.factorial(m) * math.factorial(order - m))
                     for m in range(0, order + 1)))


@dataclass(frozen=True)
class PhiVector:
    """Odd-series coefficients [F_1, F_3, ..., F_{2K-1}] for one outcome."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("expected a non-empty 1-D coefficient vector")
        for k, v in enumerate(vals):
            bound = odd_series_bound(2 * k + 1)
            if abs(v) > bound + 1e-9:
                raise ValueError(
                    f"coefficient of order {2 * k + 1} is {v!r}, beyond its bound {bound!r}"
                )

    def __len__(self) -> int:
        return self.values.size


def gamma_matrix(probes: ProbeSet) -> np.ndarray:
    """K x K design matrix of the odd series: columns -g, g^3, -g^5, ..."""
    g = np.asarray(probes.gammas)[:, None]
    powers = 2 * np.arange(probes.k)[None, :] + 1
    signs = (-1.0) ** (np.arange(probes.k)[None, :] + 1)
    return signs * g**powers


def even_gamma_matrix(probes: ProbeSet) -> np.ndarray:
    """K x K design matrix of the even series: columns 1, g^2, g^4, ..."""
    g = np.asarray(probes.gammas)[:, None]
    powers = 2 * np.arange(probes.k)[None, :]
    return g**powers


def _box_least_squares(mat: np.ndarray, target: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """min ||mat @ x - target||_2 subject to |x_l| <= bounds_l.

    Projected gradient with exact line search on the quadratic, started from
    the clipped unconstrained least-squares solution; converged when the
    projected gradient is below ``SERIES_SOLVER_GRAD_TOL`` in max-norm.
    """
    x0, *_ = np.linalg.lstsq(mat, target, rcond=None)
    x = np.clip(x0, -bounds, bounds)
    gram = mat.T @ mat
    rhs = mat.T @ target
    for _ in range(SERIES_SOLVER_MAX_ITER):
        grad = gram @ x - rhs
        # inward projection: freeze coordinates pinned at a bound whose
        # gradient points outward
        step = -grad
        step[(x >= bounds) & (step > 0)] = 0.0
        step[(x <= -bounds) & (step < 0)] = 0.0
        if np.max(np.abs(step)) <= SERIES_SOLVER_GRAD_TOL:
            return x
        curvature = step @ (gram @ step)
        if curvature <= 0.0:
            return x
        t = (step @ step) / curvature
        x = np.clip(x + t * step, -bounds, bounds)
    raise ConvergenceError(
        f"box-constrained series solve did not reach {SERIES_SOLVER_GRAD_TOL:g} "
        f"within {SERIES_SOLVER_MAX_ITER} iterations"
    )


def solve_phi(f: np.ndarray, probes: ProbeSet) -> PhiVector:
    """Recover the odd-series coefficients from one outcome's f-statistic."""
    f = np.asarray(f, dtype=float)
    if f.shape != (probes.k,):
        raise ValueError(f"expected {probes.k} statistics, got shape {f.shape}")
    bounds = np.array([odd_series_bound(2 * k + 1) for k in range(probes.k)])
    return PhiVector(_box_least_squares(gamma_matrix(probes), f, bounds))


def solve_even_series(f: np.ndarray, probes: ProbeSet) -> np.ndarray:
    """Recover the even-series coefficients from one outcome's statistic."""
    f = np.asarray(f, dtype=float)
    if f.shape != (probes.k,):
        raise ValueError(f"expected {probes.k} statistics, got shape {f.shape}")
    bounds = np.array([even_series_bound(2 * k) for k in range(probes.k)])
    return _box_least_squares(even_gamma_matrix(probes), f, bounds)


def f_statistic(clicks: ClickTable, probes: ProbeSet) -> np.ndarray:
    """Antisymmetric probe statistic, shape (2, K): one row per outcome.

    f_k = (rate at +i*gamma_k - rate at -i*gamma_k) / (2 exp(-gamma_k^2)).
    """
    r0, r1 = clicks.rates()
    out = np.empty((2, probes.k))
    for k, g in enumerate(probes.gammas):
        ip = clicks.row_index(complex(0.0, g))
        im = clicks.row_index(complex(0.0, -g))
        norm = 2.0 * math.exp(-g * g)
        out[0, k] = (r0[ip] - r0[im]) / norm
        out[1, k] = (r1[ip] - r1[im]) / norm
    return out


def f_statistic_even(clicks: ClickTable, probes: ProbeSet) -> np.ndarray:
    """Symmetric probe statistic, shape (2, K): one row per outcome.

    f_k = (rate at +i*gamma_k + rate at -i*gamma_k) / (2 exp(-gamma_k^2)).
    """
    r0, r1 = clicks.rates()
    out = np.empty((2, probes.k))
    for k, g in enumerate(probes.gammas):
        ip = clicks.row_index(complex(0.0, g))
        im = clicks.row_index(complex(0.0, -g))
        norm = 2.0 * math.exp(-g * g)
        out[0, k] = (r0[ip] + r0[im]) / norm
        out[1, k] = (r1[ip] + r1[im]) / norm
    return out


def imaginary_probe_expectation(
    phi: PhiVector,
    alpha: float,
    real_probe_expectations: tuple[float, float],
    sign: int = +1,
) -> tuple[float, float]:
    """Expectation for the probe (|alpha> + sign*i |-alpha>)/sqrt(2).

    Assembles the decomposition: the mean of the measured rates at ``+-alpha``
    plus/minus half the odd series ``2 exp(-alpha^2) sum_l alpha^(2l+1) F_l``.
    Returns ``(value, raw)`` where ``value`` is clamped to [0, 1] and ``raw``
    is the pre-clamp assembly.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    q_plus, q_minus = real_probe_expectations
    powers = alpha ** (2 * np.arange(len(phi)) + 1)
    series = 2.0 * math.exp(-alpha * alpha) * float(powers @ phi.values)
    raw = 0.5 * (q_plus + q_minus) + 0.5 * sign * series
    return min(max(raw, 0.0), 1.0), raw


def even_cat_probe_expectation(
    psi: np.ndarray,
    alpha: float,
    real_probe_expectations: tuple[float, float],
) -> tuple[float, float]:
    """Expectation for the even cat probe |C+>, synthesized from the data.

    ``Re <alpha|P|-alpha>`` is an alternating even series in alpha with the
    same coefficients recovered from the symmetric gamma statistic, and

        <C+|P|C+> = ( <a|P|a> + <-a|P|-a> + 2 Re <a|P|-a> ) / Nplus^2.

    Returns ``(value, raw)`` with the clamped and pre-clamp assemblies.
    """
    q_plus, q_minus = real_probe_expectations
    psi = np.asarray(psi, dtype=float)
    signs = (-1.0) ** np.arange(psi.size)
    powers = alpha ** (2 * np.arange(psi.size))
    cross = math.exp(-alpha * alpha) * float((signs * powers) @ psi)
    nplus_sq = 2.0 * (1.0 + math.exp(-2.0 * alpha * alpha))
    raw = (q_plus + q_minus + 2.0 * cross) / nplus_sq
    return min(max(raw, 0.0), 1.0), raw


@dataclass(frozen=True)
class ScsPovm:
    """Two-outcome POVM restricted to the orthonormal {|C+>, |C->} basis."""

    pi0: np.ndarray
    pi1: np.ndarray
    diagnostics: dict | None = None

    def __post_init__(self) -> None:
        for name in ("pi0", "pi1"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (2, 2):
                raise ValueError(f"{name} must be 2x2, got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        comp = np.max(np.abs(self.pi0 + self.pi1 - np.eye(2)))
        if comp > COMPLETENESS_TOL_2D:
            raise ValueError(f"elements do not sum to identity (residual {comp:g})")
        for name in ("pi0", "pi1"):
            arr = getattr(self, name)
            evals = np.linalg.eigvalsh(0.5 * (arr + arr.conj().T))
            if evals.min() < -EIGENVALUE_FLOOR_2D:
                raise ValueError(f"{name} has eigenvalue {evals.min():g} below the floor")


def probe_coefficients(alpha: float, dim) -> np.ndarray:
    """The four reconstruction probes as coefficient vectors in {|C+>, |C->}.

    Rows: |+alpha>, |-alpha>, (|alpha> + i|-alpha>)/sqrt(2), |C+>, using
    |+-alpha> = (Nplus |C+> +- Nminus |C->) / 2.
    """
    nplus, nminus = cat_norm_factors(alpha, dim)
    a = 0.5 * nplus
    b = 0.5 * nminus
    s = 1.0 / math.sqrt(2.0)
    return np.array(
        [
            [a, b],
            [a, -b],
            [a * (1.0 + 1.0j) * s, b * (1.0 - 1.0j) * s],
            [1.0, 0.0],
        ],
        dtype=complex,
    )


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    evals = np.clip(evals, 0.0, None)
    return (vecs * np.sqrt(evals)) @ vecs.conj().T


def _psd_inv(mat: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    if evals.min() <= 0.0:
        raise ArithmeticError("normalization operator is singular")
    return (vecs / evals) @ vecs.conj().T


def mle_reconstruct(probe_states: np.ndarray, frequencies: np.ndarray) -> ScsPovm:
    """Fixed-point maximum-likelihood reconstruction of a binary 2x2 POVM.

    ``probe_states`` is an (n, 2, 2) stack of density matrices, and
    ``frequencies`` an (n, 2) row-stochastic matrix of observed outcome
    rates.  Iterates

        p_ij = Tr(rho_i P_j),  R_j = sum_i (f_ij / p_ij) rho_i,
        L = (sum_j R_j P_j R_j)^(1/2),  P_j <- L^-1 R_j P_j R_j L^-1

    from P_j = I/2 until the largest entry change falls below
    ``MLE_STOP_TOL``.  The normalization keeps completeness exact at every
    step.  Whenever the full step would lower the log-likelihood the update
    is damped, so the likelihood is non-decreasing on every accepted step.
    """
    rho = np.asarray(probe_states, dtype=complex)
    freq = np.asarray(frequencies, dtype=float)
    if rho.ndim != 3 or rho.shape[1:] != (2, 2):
        raise ValueError("probe_states must be a stack of 2x2 density matrices")
    if freq.shape != (rho.shape[0], 2):
        raise ValueError("frequencies must be (n_probes, 2)")
    if np.any(freq < -1e-12) or np.max(np.abs(freq.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("frequency rows must be non-negative and sum to 1")
    for i, r in enumerate(rho):
        if abs(np.trace(r) - 1.0) > 1e-9:
            raise ValueError(f"probe {i} does not have unit trace")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < -1e-9:
            raise ValueError(f"probe {i} is not positive semidefinite")

    elements = [0.5 * np.eye(2, dtype=complex), 0.5 * np.eye(2, dtype=complex)]

    def probabilities():
        p = np.empty((rho.shape[0], 2))
        for j, pi in enumerate(elements):
            p[:, j] = np.einsum("ikl,lk->i", rho, pi).real
        return np.maximum(p, MLE_PROB_FLOOR)

    def log_likelihood(p: np.ndarray) -> float:
        return float(np.sum(freq * np.log(p)))

    p = probabilities()
    likelihood = log_likelihood(p)
    eye = np.eye(2, dtype=complex)

    def mapped(ops):
        new = [ops[j] @ elements[j] @ ops[j] for j in range(2)]
        lam_inv = _psd_inv(_psd_sqrt(new[0] + new[1]))
        new = [lam_inv @ nj @ lam_inv for nj in new]
        return [0.5 * (nj + nj.conj().T) for nj in new]

    converged = False
    iterations = 0
    delta = np.inf
    for iterations in range(1, MLE_MAX_ITER + 1):
        ratios = freq / p
        r_ops = [np.einsum("i,ikl->kl", ratios[:, j], rho) for j in range(2)]
        # The full fixed-point step can overshoot and lower the likelihood;
        # when it does, damp it (R -> (I + eps R)/(1 + eps)), which keeps the
        # same fixed points and ascends for small enough eps.
        new = mapped(r_ops)
        eps = 1.0
        for _ in range(_MLE_MAX_DILUTIONS + 1):
            saved, elements = elements, new
            p = probabilities()
            next_likelihood = log_likelihood(p)
            if next_likelihood >= likelihood - 1e-12:
                break
            elements = saved
            new = mapped([(eye + eps * rj) / (1.0 + eps) for rj in r_ops])
            eps *= 0.5
        else:
            raise ArithmeticError(
                f"log-likelihood decreased by {likelihood - next_likelihood:g} "
                f"at iteration {iterations} even with a maximally damped step"
            )
        delta = max(np.max(np.abs(n - o)) for n, o in zip(elements, saved))
        likelihood = next_likelihood
        if delta < MLE_STOP_TOL:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"reconstruction stopped at {MLE_MAX_ITER} iterations with "
            f"residual entry change {delta:g}",
            stacklevel=2,
        )
    return ScsPovm(
        elements[0],
        elements[1],
        diagnostics={
            "iterations": iterations,
            "converged": converged,
            "final_delta": float(delta),
            "log_likelihood": likelihood,
        },
    )


def scs_basis_project(op: FockOperator, alpha: float, dim) -> np.ndarray:
    """2x2 block <C_k| op |C_l> of a Fock-space operator in the cat basis."""
    from .fock import cat_basis  # local import to keep module init light

    dim = as_dim(dim)
    plus, minus = cat_basis(alpha, dim)
    basis = np.stack([plus.amps, minus.amps])
    return basis.conj() @ op.entries @ basis.T


def povm_entry_bound_check(op: FockOperator) -> tuple[bool, float]:
    """Check |<m| op |n>| <= 1 for every entry of a POVM element.

    Also exercises the eigen-decomposition route: with op = sum_i l_i
    |u_i><u_i|, the triangle inequality gives the majorant
    sum_i l_i |u_i[m]| |u_i[n]| >= |<m|op|n>|, which is itself bounded by
    sqrt(<m|op|m><n|op|n>) <= 1 via Cauchy-Schwarz whenever the eigenvalues
    lie in [0, 1].
    """
    entries = op.entries
    max_theta = float(np.max(np.abs(entries)))
    evals, vecs = np.linalg.eigh(0.5 * (entries + entries.conj().T))
    weights = np.clip(evals, 0.0, None)
    mags = np.abs(vecs)
    majorant = (mags * weights) @ mags.T
    if max_theta > float(majorant.max()) + 1e-9:
        raise ArithmeticError("entry magnitude exceeded its eigenvector majorant")
    ok = max_theta <= 1.0 + ENTRY_BOUND_TOL and float(evals.min()) >= -ENTRY_BOUND_TOL
    return ok, max_theta


def measurement_fidelity(povm: ScsPovm, spec: ScsMeasurementSpec) -> float:
    """Two-term average fidelity of a 2x2 pair against the target vectors."""
    t0 = np.array([spec.c0, spec.c1 * np.exp(1j * spec.phi)])
    t1 = np.array([spec.c1 * np.exp(-1j * spec.phi), -spec.c0])
    val = 0.5 * ((t0.conj() @ povm.pi0 @ t0) + (t1.conj() @ povm.pi1 @ t1))
    return float(val.real)


def _uhlmann(rho: np.ndarray, sigma: np.ndarray) -> float:
    s = _psd_sqrt(rho)
    evals = np.linalg.eigvalsh(0.5 * ((s @ sigma @ s) + (s @ sigma @ s).conj().T))
    return float(np.sqrt(np.clip(evals, 0.0, None)).sum() ** 2)


def povm_pair_fidelity(a: ScsPovm, b: ScsPovm) -> float:
    """Trace-weighted Uhlmann fidelity between two binary 2x2 POVMs.

    Each element is normalized to unit trace and compared as a state; the
    per-outcome fidelities are averaged with weights Tr(a_j)/2 taken from
    the first pair.
    """
    total = 0.0
    for aj, bj in ((a.pi0, b.pi0), (a.pi1, b.pi1)):
        ta = np.trace(aj).real
        tb = np.trace(bj).real
        if ta <= 0.0 or tb <= 0.0:
            continue
        total += 0.5 * ta * _uhlmann(aj / ta, bj / tb)
    return total


@dataclass(frozen=True)
class TomographyRun:
    """All intermediates of one reconstruction, for reporting and re-runs."""

    probes: ProbeSet
    clicks: ClickTable
    dim: TruncationDim
    f_odd: np.ndarray
    f_even: np.ndarray
    phi: tuple[PhiVector, PhiVector]
    psi: tuple[np.ndarray, np.ndarray]
    expectations: dict
    probe_matrices: np.ndarray
    frequencies: np.ndarray
    povm: ScsPovm


def tomography_pipeline(clicks: ClickTable, probes: ProbeSet, dim) -> TomographyRun:
    """Chain statistics -> series solves -> synthesized probes -> MLE."""
    dim = as_dim(dim)
    expected = probes.amplitudes()
    if len(clicks.probe_amplitudes) != len(expected):
        raise ValueError(
            f"click table has {len(clicks.probe_amplitudes)} rows, "
            f"probe set requires {len(expected)}"
        )
    for amp in expected:
        clicks.row_index(amp)  # raises KeyError when a row is missing

    r0, _ = clicks.rates()
    q_plus = float(r0[clicks.row_index(complex(probes.alpha))])
    q_minus = float(r0[clicks.row_index(complex(-probes.alpha))])

    f_odd = f_statistic(clicks, probes)
    f_even = f_statistic_even(clicks, probes)
    phi = (solve_phi(f_odd[0], probes), solve_phi(f_odd[1], probes))
    psi = (solve_even_series(f_even[0], probes), solve_even_series(f_even[1], probes))

    im_plus, im_plus_raw = imaginary_probe_expectation(
        phi[0], probes.alpha, (q_plus, q_minus), sign=+1
    )
    im_minus, im_minus_raw = imaginary_probe_expectation(
        phi[0], probes.alpha, (q_plus, q_minus), sign=-1
    )
    cat_plus, cat_plus_raw = even_cat_probe_expectation(
        psi[0], probes.alpha, (q_plus, q_minus)
    )

    coeffs = probe_coefficients(probes.alpha, dim)
    rho = np.einsum("ik,il->ikl", coeffs, coeffs.conj())
    frequencies = np.array(
        [
            [q_plus, 1.0 - q_plus],
            [q_minus, 1.0 - q_minus],
            [im_plus, 1.0 - im_plus],
            [cat_plus, 1.0 - cat_plus],
        ]
    )
    povm = mle_reconstruct(rho, frequencies)
    return TomographyRun(
        probes=probes,
        clicks=clicks,
        dim=dim,
        f_odd=f_odd,
        f_even=f_even,
        phi=phi,
        psi=psi,
        expectations={
            "q_plus": q_plus,
            "q_minus": q_minus,
            "im_plus": im_plus,
            "im_plus_raw": im_plus_raw,
            "im_minus": im_minus,
            "im_minus_raw": im_minus_raw,
            "cat_plus": cat_plus,
            "cat_plus_raw": cat_plus_raw,
        },
        probe_matrices=rho,
        frequencies=frequencies,
        povm=povm,
    )


_REPORTED_SCALARS = (
    ("pi0_00_re", lambda run: run.povm.pi0[0, 0].real),
    ("pi0_01_re", lambda run: run.povm.pi0[0, 1].real),
    ("pi0_01_im", lambda run: run.povm.pi0[0, 1].imag),
    ("pi0_11_re", lambda run: run.povm.pi0[1, 1].real),
    ("im_plus", lambda run: run.expectations["im_plus"]),
    ("cat_plus", lambda run: run.expectations["cat_plus"]),
)


def error_bars(run: TomographyRun, alpha_sigma: float) -> dict:
    """Systematic-error envelopes from re-running at alpha +- sigma.

    The click data are fixed; only the assumed probe amplitude moves.  Each
    reported scalar gets a ``(lo, hi)`` interval over the three re-runs,
    which by construction contains the central value.
    """
    if alpha_sigma < 0:
        raise ValueError("alpha_sigma must be >= 0")
    if run.probes.alpha - alpha_sigma <= 0:
        raise ValueError("alpha - sigma must stay positive")
    runs = [run]
    for shifted in (run.probes.alpha - alpha_sigma, run.probes.alpha + alpha_sigma):
        probes = ProbeSet(alpha=shifted, gammas=run.probes.gammas)
        clicks = ClickTable(
            probes.amplitudes(), run.clicks.counts0, run.clicks.counts1, run.clicks.shots
        )
        runs.append(tomography_pipeline(clicks, probes, run.dim))
    out = {}
    for name, extract in _REPORTED_SCALARS:
        vals = [extract(r) for r in runs]
        out[name] = (min(vals), max(vals))
    return out


__all__ = [
    "ClickTable",
    "ConvergenceError",
    "PhiVector",
    "ProbeSet",
    "ScsPovm",
    "TomographyRun",
    "error_bars",
    "even_cat_probe_expectation",
    "even_gamma_matrix",
    "even_series_bound",
    "f_statistic",
    "f_statistic_even",
    "gamma_matrix",
    "imaginary_probe_expectation",
    "measurement_fidelity",
    "mle_reconstruct",
    "odd_series_bound",
    "povm_entry_bound_check",
    "povm_pair_fidelity",
    "probe_coefficients",
    "scs_basis_project",
    "solve_even_series",
    "solve_phi",
    "tomography_pipeline",
]
