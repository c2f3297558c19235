import math

import numpy as np
import pytest

from catproj.fidelity import (
    FidelityReport,
    SweepGrid,
    displaced_click_fidelity,
    displaced_povm,
    fidelity,
    homodyne_fidelity,
    optimize_displacement,
    optimize_homodyne,
    pnrd_fidelity,
    quantize_to_schedule,
    sweep,
)
from catproj.fock import ScsMeasurementSpec, TruncationDim
from catproj.povm import IDEAL_DETECTOR, DetectorModel, PovmPair, dp_povm, onoff_povm, parity_povm

DIM = TruncationDim(20)

# optimal ideal-counter fidelity and displacement modulus on the
# c0^2 = 0.5 .. 1.0 (step 0.05) row at alpha = 0.5, phi = 0, from a dense
# grid refined independently of the production search settings
ROW_C0SQ = np.arange(0.5, 1.0001, 0.05)
ROW_F = [0.95932917, 0.97191487, 0.98207352, 0.98989621, 0.99545286,
         0.99880116, 0.99999554, 0.99909683, 0.99618297, 0.99136002, 1.0]
ROW_BETA = [0.771702, 0.734730, 0.695950, 0.654580, 0.609678, 0.560029,
            0.503942, 0.438796, 0.359809, 0.255079, 0.0]


def spec_of(c0sq, alpha=0.5, phi=0.0):
    return ScsMeasurementSpec.from_c0sq(alpha, c0sq, phi)


def test_fidelity_trivial_pairs():
    spec = ScsMeasurementSpec(alpha=0.5, c0=1.0, c1=0.0)
    assert fidelity(parity_povm(DIM), spec) == pytest.approx(1.0, abs=1e-10)

    half = 0.5 * np.eye(21, dtype=complex)
    split = PovmPair.checked(DIM, half, half, "reconstructed")
    assert fidelity(split, spec_of(0.3)) == pytest.approx(0.5, abs=1e-12)


def test_pnrd_fidelity_branches():
    assert pnrd_fidelity(spec_of(0.5)) == pytest.approx(0.5, abs=1e-15)
    assert pnrd_fidelity(spec_of(1.0)) == 1.0
    assert pnrd_fidelity(spec_of(0.3)) == pytest.approx(0.7, abs=1e-15)


def test_parity_limit_matches_population_max():
    # with no displacement an ideal counter reads out parity, and the
    # fidelity collapses to max(c0^2, c1^2)
    for c0sq in np.linspace(0.0, 1.0, 21):
        spec = spec_of(c0sq)
        got = fidelity(dp_povm(spec, 0.0, DIM), spec)
        assert abs(got - max(c0sq, 1.0 - c0sq)) < 1e-9, c0sq


def test_optimizer_frozen_row():
    for c0sq, f_ref, b_ref in zip(ROW_C0SQ, ROW_F, ROW_BETA):
        beta, f = optimize_displacement(spec_of(c0sq), IDEAL_DETECTOR, DIM)
        assert f == pytest.approx(f_ref, abs=1e-7), c0sq
        assert abs(beta) == pytest.approx(b_ref, abs=1e-4), c0sq


def test_optimizer_amplitude_decreases_with_weight():
    betas = [optimize_displacement(spec_of(c), IDEAL_DETECTOR, DIM)[0] for c in (0.5, 0.9, 1.0)]
    assert abs(betas[0]) > abs(betas[1]) > abs(betas[2])
    assert abs(betas[2]) < 1e-3


def test_optimizer_beats_coarse_samples():
    spec = spec_of(0.65)
    beta, f = optimize_displacement(spec, IDEAL_DETECTOR, DIM)
    rng = np.random.default_rng(11)
    for _ in range(25):
        b = rng.uniform(0, 1.0) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        assert f >= displaced_click_fidelity(spec, b, IDEAL_DETECTOR, DIM) - 1e-12


def test_optimizer_deterministic():
    a = optimize_displacement(spec_of(0.7), IDEAL_DETECTOR, DIM)
    b = optimize_displacement(spec_of(0.7), IDEAL_DETECTOR, DIM)
    assert a[0] == b[0] and a[1] == b[1]


def test_optimizer_mirror_below_half():
    # for c0^2 < 1/2 the roles of the two targets swap under parity, which
    # moves the optimal displacement to the negative real axis with the
    # same fidelity as the complementary weight
    beta, f = optimize_displacement(spec_of(0.3), IDEAL_DETECTOR, DIM)
    _, f_mirror = optimize_displacement(spec_of(0.7), IDEAL_DETECTOR, DIM)
    assert beta.real < -0.5 and abs(beta.imag) < 1e-6
    assert f == pytest.approx(f_mirror, abs=1e-9)


def test_click_model_matrix_route_agreement():
    det = DetectorModel(eta=0.689, nu=5.32e-5, visibility=0.998)
    spec = spec_of(0.75)
    for b in (0.0, 0.41, 0.3 - 0.55j):
        direct = displaced_click_fidelity(spec, b, det, DIM)
        assembled = fidelity(onoff_povm(b, det, DIM), spec)
        assert direct == pytest.approx(assembled, abs=1e-12)


def test_click_model_never_beats_ideal_counter():
    det = DetectorModel(eta=0.689)
    for c0sq in (0.5, 0.75, 1.0):
        spec = spec_of(c0sq)
        _, f_real = optimize_displacement(spec, det, DIM)
        _, f_ideal = optimize_displacement(spec, IDEAL_DETECTOR, DIM)
        assert f_real <= f_ideal + 1e-12


def test_displaced_povm_route_selection():
    spec = spec_of(0.6)
    assert displaced_povm(spec, 0.2, IDEAL_DETECTOR, DIM).label == "displaced-pnrd"
    assert displaced_povm(spec, 0.2, DetectorModel(eta=0.9), DIM).label == "displaced-onoff"


def test_homodyne_optimum_half_weight():
    x, th, f = optimize_homodyne(spec_of(0.5), DIM)
    assert f == pytest.approx(0.929332, abs=1e-5)
    assert abs(x) < 1e-3 and abs(th) < 1e-3


def test_homodyne_small_signal_limit():
    # as alpha -> 0 the targets degenerate to (|0> +- |1>)/sqrt(2) and the
    # best threshold detector reaches 1/2 + 1/sqrt(2*pi), well above the
    # random-guess floor
    _, _, f = optimize_homodyne(spec_of(0.5, alpha=1e-3), DIM)
    assert f == pytest.approx(0.5 + 1.0 / math.sqrt(2.0 * math.pi), abs=1e-4)


def test_homodyne_mirrored_weights():
    xa, tha, fa = optimize_homodyne(spec_of(0.3), DIM)
    xb, thb, fb = optimize_homodyne(spec_of(0.7), DIM)
    assert fa == pytest.approx(fb, abs=1e-9)
    assert xa == pytest.approx(-xb, abs=1e-5)
    assert 0.5 <= fa <= 1.0 + 1e-12


def test_homodyne_fixed_point_evaluation():
    # threshold far to the left accepts everything for outcome 0
    f = homodyne_fidelity(spec_of(0.8), -20.0, 0.0, DIM)
    assert f == pytest.approx(0.5, abs=1e-9)


def test_phase_reparameterization_invariance():
    b = 0.3 + 0.1j
    f1 = displaced_click_fidelity(spec_of(0.7, phi=0.4), b, IDEAL_DETECTOR, DIM)
    f2 = displaced_click_fidelity(spec_of(0.7, phi=0.4 + 2 * math.pi), b, IDEAL_DETECTOR, DIM)
    assert abs(f1 - f2) < 1e-10

    # with c1 = 0 the relative phase multiplies nothing
    f3 = displaced_click_fidelity(spec_of(1.0, phi=0.0), b, IDEAL_DETECTOR, DIM)
    f4 = displaced_click_fidelity(spec_of(1.0, phi=1.1), b, IDEAL_DETECTOR, DIM)
    assert abs(f3 - f4) < 1e-10

    # conjugating the phase and the displacement together changes nothing
    f5 = displaced_click_fidelity(spec_of(0.7, phi=-0.4), b.conjugate(), IDEAL_DETECTOR, DIM)
    assert abs(f1 - f5) < 1e-10


def test_report_validation():
    spec = spec_of(0.75)
    beta, f_dp = optimize_displacement(spec, IDEAL_DETECTOR, DIM)
    x, th, f_hd = optimize_homodyne(spec, DIM)
    rep = FidelityReport(f_dp, f_hd, pnrd_fidelity(spec), beta, x, th, spec, IDEAL_DETECTOR)
    rep.verify(DIM)

    bad = FidelityReport(f_dp - 1e-4, f_hd, 0.75, beta, x, th, spec, IDEAL_DETECTOR)
    with pytest.raises(ArithmeticError):
        bad.verify(DIM)
    with pytest.raises(ValueError):
        FidelityReport(1.2, f_hd, 0.75, beta, x, th, spec, IDEAL_DETECTOR)


def test_sweep_grid_validation():
    SweepGrid((0.5, 0.75), (0.25,), (0.0,))
    with pytest.raises(ValueError):
        SweepGrid((0.75, 0.5), (0.25,), (0.0,))  # unsorted
    with pytest.raises(ValueError):
        SweepGrid((0.5, 1.2), (0.25,), (0.0,))  # weight out of range
    with pytest.raises(ValueError):
        SweepGrid((0.5,), (), (0.0,))  # empty axis
    with pytest.raises(ValueError):
        SweepGrid((0.5,), (0.0,), (0.0,))  # alpha^2 must be positive


def test_sweep_serial_matches_threaded():
    grid = SweepGrid((0.5, 0.8), (0.25,), (0.0, math.pi / 2))
    serial = sweep(grid, IDEAL_DETECTOR, DIM)
    threaded = sweep(grid, IDEAL_DETECTOR, DIM, threads=4)
    assert len(serial) == len(threaded) == len(grid) == 4
    for a, b in zip(serial, threaded):
        assert a.beta_opt == b.beta_opt
        assert a.f_dp == b.f_dp and a.f_hd == b.f_hd and a.f_pn == b.f_pn
    # grid-index ordering: first axis is the weight
    assert serial[0].spec.c0sq == pytest.approx(0.5)
    assert serial[-1].spec.c0sq == pytest.approx(0.8)
    assert serial[0].spec.phi == 0.0 and serial[1].spec.phi == pytest.approx(math.pi / 2)


def test_sweep_aggregates_point_failures():
    # alpha^2 = 6.76 exceeds what a 10-level truncation can hold, so that
    # point must fail without taking down the rest of the sweep
    grid = SweepGrid((0.75,), (0.25, 6.76), (0.0,))
    errors = []
    with pytest.warns(UserWarning, match="failed"):
        reports = sweep(grid, IDEAL_DETECTOR, TruncationDim(10), errors=errors)
    assert len(reports) == 1
    assert len(errors) == 1
    assert errors[0][0] == 1 and errors[0][1][1] == 6.76


def test_quantize_to_schedule():
    levels = [0.1, 0.3, 0.5]
    assert quantize_to_schedule(0.29, levels) == pytest.approx(0.3)
    assert quantize_to_schedule(0.5, [0.25, 0.75]) == pytest.approx(0.25)  # tie -> lower
    q = quantize_to_schedule(0.4j, levels)
    assert abs(q) == pytest.approx(0.5) and q.real == pytest.approx(0.0)
    assert quantize_to_schedule(0.0, levels) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        quantize_to_schedule(0.2, [])
    with pytest.raises(ValueError):
        quantize_to_schedule(0.2, [-0.1, 0.3])
