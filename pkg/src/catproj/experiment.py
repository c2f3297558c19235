"""Synthetic click-data campaigns for detector tomography.

Bridges the noiseless POVM models to the statistics an actual run would
produce: a :class:`Campaign` fixes the probe set, shot budget, detector
imperfections, displacement menu and RNG seed; :func:`simulate_counts`
draws seeded binomial click tables from a truth POVM; and
:func:`reconstruction_sweep` replays the full measure-and-reconstruct loop
over a grid of target superpositions, with and without loss compensation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fidelity import displaced_povm, fidelity, optimize_displacement, quantize_to_schedule
from .fock import (
    ScsMeasurementSpec,
    TruncationDim,
    as_dim,
    coherent_state,
    displacement_operator,
    expect,
)
from .povm import IDEAL_DETECTOR, DetectorModel, PovmPair, apply_loss, dp_partition
from .tomography import ClickTable, ProbeSet, measurement_fidelity, tomography_pipeline

DEFAULT_SHOTS = 200_000
# interferometric drive amplitude -> induced coherent shift on the signal mode
DRIVE_TO_SHIFT = 0.5
RATE_TOL = 1e-9
_SEED_LIMIT = 2**64


@dataclass(frozen=True)
class Campaign:
    """One tomography acquisition plan: what to probe, how often, with what."""

    probes: ProbeSet
    shots_per_probe: int = DEFAULT_SHOTS
    detector: DetectorModel = IDEAL_DETECTOR
    displacement_schedule: tuple[complex, ...] = (0j,)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.shots_per_probe, int) or self.shots_per_probe <= 0:
            raise ValueError("shots_per_probe must be a positive integer")
        schedule = tuple(complex(b) for b in self.displacement_schedule)
        if not schedule:
            raise ValueError("displacement schedule must not be empty")
        if not all(math.isfinite(b.real) and math.isfinite(b.imag) for b in schedule):
            raise ValueError("displacement schedule entries must be finite")
        object.__setattr__(self, "displacement_schedule", schedule)
        if not isinstance(self.rng_seed, int) or not 0 <= self.rng_seed < _SEED_LIMIT:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


def expected_rates(truth: PovmPair, probes: ProbeSet, dim) -> np.ndarray:
    """Exact outcome-0 probability for every probe state, in probe order."""
    dim = as_dim(dim)
    if dim.size != truth.dim.size:
        raise ValueError(f"dim {dim.size} does not match the truth POVM ({truth.dim.size})")
    return np.array(
        [expect(truth.pi0, coherent_state(a, dim)).real for a in probes.amplitudes()]
    )


def simulate_counts(truth: PovmPair, campaign: Campaign) -> ClickTable:
    """Draw a seeded binomial click table from a truth POVM.

    Each probe gets its own counter-based generator keyed by
    ``(rng_seed, probe_index)``, so tables are bit-for-bit reproducible and
    probes can be generated in any order or in parallel.
    """
    rates = expected_rates(truth, campaign.probes, truth.dim)
    counts0 = np.empty(rates.size)
    for i, rate in enumerate(rates):
        if not -RATE_TOL <= rate <= 1.0 + RATE_TOL:
            raise ValueError(f"probe {i} has outcome probability {rate!r} outside [0, 1]")
        rng = np.random.Generator(np.random.Philox(key=[campaign.rng_seed, i]))
        counts0[i] = rng.binomial(campaign.shots_per_probe, min(max(rate, 0.0), 1.0))
    shots = np.full(rates.size, float(campaign.shots_per_probe))
    return ClickTable(campaign.probes.amplitudes(), counts0, shots - counts0, shots)


def effective_displacement(drive: complex, detector: DetectorModel) -> complex:
    """Coherent shift produced by a given interferometric drive amplitude."""
    return DRIVE_TO_SHIFT * detector.visibility * complex(drive)


def apparatus_povm(
    spec: ScsMeasurementSpec,
    shift: complex,
    detector: DetectorModel,
    dim,
) -> PovmPair:
    """Model of the lab measurement: lossy displaced click detection.

    The ideal partition projector at ``shift`` is degraded by the detection
    efficiency, re-displaced (the loss acts between the displacement and the
    counter), and scaled by the no-dark-count probability:

        P0 = (1 - nu) * D(shift) L_eta[ P_omega0 ] D(shift)^dag
    """
    dim = as_dim(dim)
    mask = dp_partition(spec, shift, dim)
    proj = np.diag(mask.astype(complex))
    ideal = PovmPair.checked(dim, proj, np.eye(dim.size) - proj, "displaced-pnrd")
    lossy = apply_loss(ideal, detector.eta)
    dmat = displacement_operator(shift, dim).entries
    pi0 = (1.0 - detector.nu) * (dmat @ lossy.pi0.entries @ dmat.conj().T)
    return PovmPair.checked(dim, pi0, np.eye(dim.size) - pi0, "displaced-onoff")


def default_displacement_schedule(
    alpha: float = 0.499,
    levels: int = 9,
    dim=TruncationDim(20),
) -> tuple[complex, ...]:
    """Evenly spaced amplitude menu covering the optimizer's range.

    The largest optimal displacement over c0^2 in [0.5, 1] occurs at the
    balanced superposition, so the menu runs from zero to that amplitude.
    """
    if levels < 2:
        raise ValueError("a displacement menu needs at least two levels")
    spec = ScsMeasurementSpec.from_c0sq(alpha, 0.5, 0.0)
    beta, _ = optimize_displacement(spec, IDEAL_DETECTOR, dim)
    return tuple(complex(r, 0.0) for r in np.linspace(0.0, abs(beta), levels))


@dataclass(frozen=True)
class ReconstructionPoint:
    """One target superposition, measured and scored three ways."""

    c0sq: float
    phi: float
    displacement: complex
    f_ideal: float
    f_raw: float
    f_compensated: float


def _relabeled(clicks: ClickTable, scale: float) -> ClickTable:
    amps = tuple(scale * a for a in clicks.probe_amplitudes)
    return ClickTable(amps, clicks.counts0, clicks.counts1, clicks.shots)


def reconstruction_sweep(
    campaign: Campaign,
    c0sq_values,
    phi: float,
    dim=TruncationDim(24),
    quantize: bool = True,
) -> list[ReconstructionPoint]:
    """Measure-and-reconstruct loop over a grid of target superpositions.

    For each ``c0^2``: find the ideal optimal displacement, snap it to the
    campaign's amplitude menu (unless ``quantize`` is off), build the
    imperfect-apparatus POVM at that shift, simulate clicks, reconstruct,
    and score against the target.  ``f_raw`` interprets probes at their
    physical amplitudes; ``f_compensated`` re-reads the same clicks with
    amplitudes scaled by sqrt(eta), which undoes the loss channel exactly
    for coherent inputs.  ``f_ideal`` is the lossless click fidelity at the
    same (quantized) displacement.  Point ``i`` uses seed ``rng_seed + i``.
    """
    dim = as_dim(dim)
    alpha = campaign.probes.alpha
    root_eta = math.sqrt(campaign.detector.eta)
    menu = [abs(b) for b in campaign.displacement_schedule]
    out: list[ReconstructionPoint] = []
    for i, c0sq in enumerate(c0sq_values):
        spec = ScsMeasurementSpec.from_c0sq(alpha, float(c0sq), phi)
        beta, _ = optimize_displacement(spec, IDEAL_DETECTOR, dim)
        if quantize:
            beta = quantize_to_schedule(beta, menu)
        truth = apparatus_povm(spec, beta, campaign.detector, dim)
        point = Campaign(
            probes=campaign.probes,
            shots_per_probe=campaign.shots_per_probe,
            detector=campaign.detector,
            displacement_schedule=campaign.displacement_schedule,
            rng_seed=campaign.rng_seed + i,
        )
        clicks = simulate_counts(truth, point)

        raw = tomography_pipeline(clicks, campaign.probes, dim)
        comp_probes = ProbeSet(root_eta * alpha, tuple(root_eta * g for g in campaign.probes.gammas))
        comp = tomography_pipeline(_relabeled(clicks, root_eta), comp_probes, dim)

        f_ideal = fidelity(displaced_povm(spec, beta, IDEAL_DETECTOR, dim), spec)
        out.append(
            ReconstructionPoint(
                c0sq=float(c0sq),
                phi=float(phi),
                displacement=beta,
                f_ideal=f_ideal,
                f_raw=measurement_fidelity(raw.povm, spec),
                f_compensated=measurement_fidelity(comp.povm, spec),
            )
        )
    return out
