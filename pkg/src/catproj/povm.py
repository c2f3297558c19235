"""Binary POVM constructors and detector-imperfection maps.

Four measurement families, all as two-element POVM pairs (pi0, pi1) on the
truncated Fock basis:

* displaced photon counting: displaced number projectors split by which
  target vector dominates each photon-number outcome;
* displaced on/off detection with efficiency / dark-count / visibility
  imperfections folded in;
* photon-number parity (the undisplaced limit of the above);
* binary homodyne (quadrature above/below a threshold).

Plus the pure-loss channel acting on POVM elements (adjoint/Heisenberg
picture) and its inverse with a physicality repair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import roots_legendre

from .fock import (
    FockOperator,
    ScsMeasurementSpec,
    TruncationDim,
    as_dim,
    displacement_operator,
    identity_operator,
    scs_projectors,
    _logfact,
)

__all__ = [
    "POVM_LABELS",
    "COMPLETENESS_TOL",
    "EIGENVALUE_FLOOR",
    "ENTRY_BOUND_TOL",
    "DetectorModel",
    "IDEAL_DETECTOR",
    "HomodyneSpec",
    "PovmPair",
    "dp_partition",
    "dp_povm",
    "onoff_povm",
    "parity_povm",
    "homodyne_povm",
    "hermite_functions",
    "quadrature_interval_operator",
    "apply_loss",
    "compensate_loss",
    "random_povm_pair",
]

POVM_LABELS = frozenset(
    {"displaced-pnrd", "displaced-onoff", "pnrd-parity", "homodyne-binary", "reconstructed"}
)

COMPLETENESS_TOL = 1e-9
EIGENVALUE_FLOOR = 1e-9
HERMITICITY_TOL = 1e-10
ENTRY_BOUND_TOL = 1e-9


@dataclass(frozen=True)
class DetectorModel:
    """Efficiency eta, dark-count probability nu per pulse, interference
    visibility of the displacement operation."""

    eta: float = 1.0
    nu: float = 0.0
    visibility: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")
        if not 0.0 <= self.nu < 1.0:
            raise ValueError(f"nu must be in [0, 1), got {self.nu}")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")

    @property
    def is_ideal(self) -> bool:
        return self.eta == 1.0 and self.nu == 0.0 and self.visibility == 1.0


IDEAL_DETECTOR = DetectorModel()


@dataclass(frozen=True)
class HomodyneSpec:
    """Quadrature threshold and local-oscillator phase of the binary
    homodyne measurement (convention: x = (a + a^dag)/sqrt(2))."""

    x_th: float
    lo_phase: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.x_th):
            raise ValueError("x_th must be finite")
        if not 0.0 <= self.lo_phase < 2 * math.pi:
            raise ValueError(f"lo_phase must be in [0, 2 pi), got {self.lo_phase}")


@dataclass(frozen=True, eq=False)
class PovmPair:
    """Two-outcome POVM (pi0, pi1) with a kind label and optional
    constructor diagnostics."""

    dim: TruncationDim
    pi0: FockOperator
    pi1: FockOperator
    label: str
    diagnostics: dict | None = None

    def validate(self) -> dict:
        """Residuals of the pair invariants (completeness, hermiticity,
        positivity floor, entry bound).  Small is good."""
        p0, p1 = self.pi0.entries, self.pi1.entries
        eye = np.eye(self.dim.size)
        res = {
            "completeness": float(np.max(np.abs(p0 + p1 - eye))),
            "hermiticity": max(
                float(np.max(np.abs(p0 - p0.conj().T))),
                float(np.max(np.abs(p1 - p1.conj().T))),
            ),
            "min_eigenvalue": min(
                float(np.linalg.eigvalsh(0.5 * (p0 + p0.conj().T))[0]),
                float(np.linalg.eigvalsh(0.5 * (p1 + p1.conj().T))[0]),
            ),
            "max_entry": max(float(np.max(np.abs(p0))), float(np.max(np.abs(p1)))),
        }
        return res

    @classmethod
    def checked(cls, dim, pi0, pi1, label: str, diagnostics: dict | None = None) -> "PovmPair":
        dim = as_dim(dim)
        if label not in POVM_LABELS:
            raise ValueError(f"unknown POVM label {label!r}")
        if not isinstance(pi0, FockOperator):
            pi0 = FockOperator(dim, pi0)
        if not isinstance(pi1, FockOperator):
            pi1 = FockOperator(dim, pi1)
        pair = cls(dim, pi0, pi1, label, diagnostics)
        res = pair.validate()
        if res["completeness"] > COMPLETENESS_TOL:
            raise ValueError(f"POVM pair not complete: residual {res['completeness']:.3e}")
        if res["hermiticity"] > HERMITICITY_TOL:
            raise ValueError(f"POVM element not Hermitian: residual {res['hermiticity']:.3e}")
        if res["min_eigenvalue"] < -EIGENVALUE_FLOOR:
            raise ValueError(f"POVM element not PSD: min eigenvalue {res['min_eigenvalue']:.3e}")
        if res["max_entry"] > 1.0 + ENTRY_BOUND_TOL:
            raise ValueError(f"POVM entry bound violated: max |theta| {res['max_entry']:.6f}")
        return pair


def dp_partition(spec: ScsMeasurementSpec, beta: complex, dim) -> np.ndarray:
    """Boolean mask over photon numbers: True where the displaced number
    outcome favors the first target vector, i.e.
    |<pi0|D(beta)|n>|^2 >= |<pi1|D(beta)|n>|^2 (ties go to outcome 0)."""
    dim = as_dim(dim)
    pi0, pi1 = scs_projectors(spec, dim)
    D = displacement_operator(beta, dim).entries
    r0 = np.abs(pi0.amps.conj() @ D) ** 2
    r1 = np.abs(pi1.amps.conj() @ D) ** 2
    return r0 >= r1


def dp_povm(spec: ScsMeasurementSpec, beta: complex, dim) -> PovmPair:
    """Displaced-photon-counting POVM: displace by beta, count photons,
    and assign each photon-number outcome to the target vector whose
    displaced overlap dominates."""
    dim = as_dim(dim)
    mask = dp_partition(spec, beta, dim)
    D = displacement_operator(beta, dim).entries
    V = D[:, mask]
    pi0 = V @ V.conj().T
    pi0 = 0.5 * (pi0 + pi0.conj().T)
    pi1 = np.eye(dim.size) - pi0
    return PovmPair.checked(dim, pi0, pi1, "displaced-pnrd")


def parity_povm(dim) -> PovmPair:
    """Even/odd photon-number parity projectors."""
    dim = as_dim(dim)
    even = (np.arange(dim.size) % 2 == 0).astype(float)
    pi0 = np.diag(even).astype(complex)
    pi1 = np.diag(1.0 - even).astype(complex)
    return PovmPair.checked(dim, pi0, pi1, "pnrd-parity")


def onoff_povm(beta: complex, model: DetectorModel, dim) -> PovmPair:
    """Displaced on/off detection.

    pi0 is the no-click element
    (1-nu) D(V beta) [sum_n (1-eta)^n |n><n|] D(V beta)^dag,
    pi1 the click element I - pi0.  With eta=1, nu=0, V=1 this is the
    ideal displaced vacuum projector.
    """
    dim = as_dim(dim)
    w = (1.0 - model.eta) ** np.arange(dim.size)
    D = displacement_operator(model.visibility * beta, dim).entries
    pi0 = (1.0 - model.nu) * ((D * w) @ D.conj().T)
    pi0 = 0.5 * (pi0 + pi0.conj().T)
    pi1 = np.eye(dim.size) - pi0
    return PovmPair.checked(dim, pi0, pi1, "displaced-onoff")


# ---------------------------------------------------------------------------
# binary homodyne


def hermite_functions(x, n_max: int) -> np.ndarray:
    """Orthonormal Hermite functions psi_0..psi_n_max evaluated at x
    (quadrature wavefunctions of the number states for x=(a+a^dag)/sqrt(2)).
    Returns shape (n_max+1, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n_max + 1, x.size))
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = x * math.sqrt(2.0 / (n + 1)) * out[n] - math.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


@lru_cache(maxsize=8)
def _gl_rule(order: int):
    xg, wg = roots_legendre(order)
    xg.setflags(write=False)
    wg.setflags(write=False)
    return xg, wg


def _gl_panels(lo: float, hi: float, order: int = 32, max_panel: float = 1.0):
    """Composite Gauss-Legendre nodes/weights on [lo, hi] with panels no
    wider than max_panel.  At order 32 the per-panel error for these
    Gaussian-type integrands is far below 1e-12."""
    npan = max(1, int(np.ceil((hi - lo) / max_panel)))
    edges = np.linspace(lo, hi, npan + 1)
    xg, wg = _gl_rule(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * xg[None, :]
    wts = half[:, None] * wg[None, :]
    return nodes.ravel(), wts.ravel()


def quadrature_interval_operator(x_lo: float, x_hi: float, dim) -> np.ndarray:
    """Matrix of integrals E_mn = int_{x_lo}^{x_hi} psi_m psi_n dx in the
    unrotated quadrature basis, with the integration window clipped to
    [-W, W], beyond which every psi_m psi_n is below 1e-14."""
    dim = as_dim(dim)
    W = math.sqrt(2.0 * dim.n_max + 1.0) + 8.0
    lo, hi = max(x_lo, -W), min(x_hi, W)
    if lo >= hi:
        return np.zeros((dim.size, dim.size))
    xs, ws = _gl_panels(lo, hi)
    psi = hermite_functions(xs, dim.n_max)
    E = (psi * ws) @ psi.T
    return 0.5 * (E + E.T)


def homodyne_povm(spec: HomodyneSpec, dim) -> PovmPair:
    """Binary homodyne POVM: pi0 integrates the rotated quadrature
    projectors over [x_th, infinity)."""
    dim = as_dim(dim)
    E = quadrature_interval_operator(spec.x_th, np.inf, dim).astype(complex)
    if spec.lo_phase != 0.0:
        ph = np.exp(1j * np.arange(dim.size) * spec.lo_phase)
        E = E * np.outer(ph, ph.conj())
    pi1 = np.eye(dim.size) - E
    return PovmPair.checked(dim, E, pi1, "homodyne-binary")


# ---------------------------------------------------------------------------
# pure-loss channel on POVM elements


def _loss_kraus_log_coeffs(eta: float, n_max: int) -> list[np.ndarray]:
    """c_{n,k} = sqrt(C(n,k) eta^{n-k} (1-eta)^k) for each k as a vector
    over n >= k, computed in log space."""
    lf = _logfact(n_max)
    out = []
    for k in range(n_max + 1):
        n = np.arange(k, n_max + 1)
        logc = 0.5 * (lf[n] - lf[k] - lf[n - k]) + 0.5 * (n - k) * math.log(eta)
        if k > 0:
            logc = logc + 0.5 * k * math.log1p(-eta)
        out.append(np.exp(logc))
    return out


def _loss_adjoint_matrix(pi: np.ndarray, eta: float, dim: TruncationDim) -> np.ndarray:
    """Heisenberg-picture pure-loss map sum_k A_k^dag pi A_k with the
    binomial photon-subtraction Kraus operators A_k."""
    if eta == 1.0:
        return pi.copy()
    N = dim.size
    coeffs = _loss_kraus_log_coeffs(eta, dim.n_max)
    out = np.zeros_like(pi, dtype=complex)
    for k in range(N):
        c = coeffs[k]
        n = np.arange(k, N)
        A = np.zeros((N, N))
        A[n - k, n] = c
        out += A.conj().T @ pi @ A
    return out


def apply_loss(p: PovmPair, eta: float) -> PovmPair:
    """Map both POVM elements through the loss-channel adjoint.  The map is
    unital, so completeness is preserved exactly."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    pi0 = _loss_adjoint_matrix(p.pi0.entries, eta, p.dim)
    pi1 = _loss_adjoint_matrix(p.pi1.entries, eta, p.dim)
    return PovmPair.checked(p.dim, pi0, pi1, p.label, p.diagnostics)


def _loss_diagonal_map(d: int, eta: float, dim: TruncationDim) -> np.ndarray:
    """The loss adjoint acts independently on each matrix diagonal m-n=d.
    Returns the lower-triangular matrix M with
    (Lambda^dag pi)[j+d, j] = sum_i M[j, i] pi[i+d, i]."""
    N = dim.size
    coeffs = _loss_kraus_log_coeffs(eta, dim.n_max)
    M = np.zeros((N - d, N - d))
    for j in range(N - d):
        for k in range(j + 1):
            i = j - k
            M[j, i] = coeffs[k][j + d - k] * coeffs[k][j - k]
    return M


def compensate_loss(p: PovmPair, eta: float) -> PovmPair:
    """Inverse of apply_loss, followed by a physicality repair.

    The inverse is computed diagonal-by-diagonal (each matrix diagonal
    transforms under a lower-triangular map, inverted with a triangular
    solve).  The inverted pi0 is then clipped to eigenvalues in [0, 1] and
    pi1 is recomputed as I - pi0 so the pair invariants hold; the
    pre-repair spectral defects are recorded in diagnostics.
    """
    if not 0.1 < eta <= 1.0:
        raise ValueError(f"eta must be in (0.1, 1], got {eta}")
    if eta == 1.0:
        return PovmPair.checked(p.dim, p.pi0, p.pi1, p.label, p.diagnostics)
    N = p.dim.size
    pi0 = p.pi0.entries
    out = np.zeros_like(pi0, dtype=complex)
    max_cond = 0.0
    for d in range(N):
        M = _loss_diagonal_map(d, eta, p.dim)
        max_cond = max(max_cond, float(np.linalg.cond(M)))
        y = np.diagonal(pi0, offset=-d)
        x = solve_triangular(M, y, lower=True)
        idx = np.arange(N - d)
        out[idx + d, idx] = x
        if d > 0:
            out[idx, idx + d] = np.conj(x)
    if max_cond > 1e12:
        raise ValueError(f"loss inversion ill-conditioned: condition number {max_cond:.3e}")
    out = 0.5 * (out + out.conj().T)
    w, U = np.linalg.eigh(out)
    diag = {
        "pre_repair_min_eigenvalue": float(w[0]),
        "pre_repair_max_eigenvalue_excess": float(w[-1] - 1.0),
        "max_diagonal_condition": max_cond,
    }
    wc = np.clip(w, 0.0, 1.0)
    pi0c = (U * wc) @ U.conj().T
    pi0c = 0.5 * (pi0c + pi0c.conj().T)
    pi1c = np.eye(N) - pi0c
    return PovmPair.checked(p.dim, pi0c, pi1c, p.label, diag)


def random_povm_pair(dim, rng: np.random.Generator) -> PovmPair:
    """Random physical two-outcome POVM: a PSD splitting of the identity
    with Haar-ish eigenbasis and uniform eigenvalues in [0, 1]."""
    dim = as_dim(dim)
    N = dim.size
    G = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    Q, _ = np.linalg.qr(G)
    w = rng.uniform(0.0, 1.0, size=N)
    pi0 = (Q * w) @ Q.conj().T
    pi0 = 0.5 * (pi0 + pi0.conj().T)
    pi1 = np.eye(N) - pi0
    return PovmPair.checked(dim, pi0, pi1, "reconstructed")
