"""One test per acceptance criterion, each at its stated tolerance.

A pass/fail line per criterion is printed in the terminal summary.
"""

import math
import os
import time

import numpy as np
import pytest

from fockprep.circuit import STANDARD_DETECTORS, Cascade, find_d0, loss_kraus, make_povm, prepare_conditional
from fockprep.dispmat import displacement_closed_form, displacement_recurrent
from fockprep.fock import column_norms
from fockprep.metrics import LAMBDA_G, minimize_variance, nonlinear_variance, quadrature_moments, vacuum
from fockprep.sweep import SweepConfig, relative_improvement, run_sweep
from fockprep.tame import TameConfig, error_matrix, find_dimension, plain_expm_displacement, tame_build

from oracles import dense_moments, grid_scan_minimum, random_density, two_mode_conditional

XI = 3 - 2j
JOBS = min(8, os.cpu_count() or 1)
HIGH_FIDELITY = 0.95


def test_criterion_01_dimensions(report):
    t = time.perf_counter()
    d0 = find_d0(1.0, 1.0, 1e-13)
    d1 = find_dimension(1.0, TameConfig(70, 1e-13))
    dt = time.perf_counter() - t
    ok = bool(d0 == 70 and d1 == 90 and dt < 30)
    report(1, "dimension determination", ok, f"d0={d0} (want 70), d1={d1} (want 90), {dt:.1f}s")
    assert ok


def test_criterion_02_working_dimensions(report):
    t = time.perf_counter()
    a = find_dimension(XI, TameConfig(101, 1e-13))
    b = find_dimension(XI, TameConfig(201, 1e-13))
    dt = time.perf_counter() - t
    ok = bool(a == 161 and b == 277 and dt < 300)
    report(2, "working dimension search", ok, f"d0=101 -> {a} (want 161), d0=201 -> {b} (want 277), {dt:.1f}s")
    assert ok


def test_criterion_03_tame_vs_closed_form(report):
    t = time.perf_counter()
    ref, guard = displacement_closed_form(XI, 101)
    diff = np.abs(tame_build(XI, 161, 101).entries - ref.entries)[~guard.mask(101)]
    dt = time.perf_counter() - t
    ok = bool(diff.mean() <= 1e-13 and diff.max() <= 5e-11 and dt < 10)
    report(3, "TAME vs closed form", ok, f"mean |d|={diff.mean():.2e}, max |d|={diff.max():.2e}, {dt:.1f}s")
    assert ok


def test_criterion_04_error_matrix(report):
    t = time.perf_counter()
    _, tame = error_matrix(tame_build(XI, 277, 201), XI)
    _, plain = error_matrix(plain_expm_displacement(XI, 201), XI)
    dt = time.perf_counter() - t
    late = plain.max[76:]
    ok_tame = tame.mean.max() <= -15.5 and tame.max.max() <= -10.5
    ok_plain = late.max() > 0
    ok = bool(ok_tame and ok_plain and dt < 60)
    report(4, "error-matrix statistics", ok,
           f"TAME worst mean={tame.mean.max():.2f}, max={tame.max.max():.2f}; "
           f"plain expm max past column 75={late.max():.2f} at column {76 + int(late.argmax())} (want > 0), {dt:.1f}s")
    assert ok


def test_criterion_05_normalization(report):
    t = time.perf_counter()
    closed, _ = displacement_closed_form(XI, 101)
    n_closed = column_norms(closed)
    n_tame = column_norms(tame_build(XI, 161, 101))
    with np.errstate(over="ignore", invalid="ignore"):
        n_rec = column_norms(displacement_recurrent(XI, 101))
    dt = time.perf_counter() - t
    agree = np.abs(n_closed - n_tame).max()
    burst = np.flatnonzero(n_rec[45:] > 10)
    onset = 45 + int(burst[0]) if burst.size else None
    ok = bool(agree <= 1e-10 and n_tame[-1] < 0.9 and onset is not None and abs(onset - 50) <= 10 and dt < 10)
    report(5, "normalization profiles", ok,
           f"max norm gap={agree:.1e}, last TAME norm={n_tame[-1]:.3f}, recurrent > 10 from column {onset}, {dt:.1f}s")
    assert ok


def test_criterion_06_circuit_oracle(report):
    t = time.perf_counter()
    d0 = 12
    worst_rho = worst_p = 0.0
    for xi in np.linspace(0, 1, 5):
        D = tame_build(xi, find_dimension(xi, TameConfig(d0)), d0)
        for gamma in np.linspace(0, 1, 5):
            for eta in (0.8, 1.0):
                for det in STANDARD_DETECTORS:
                    povm = make_povm(det, d0)
                    res = prepare_conditional(gamma, xi, eta, povm, d0, displacement=D)
                    ref_rho, ref_p = two_mode_conditional(gamma, D, eta, povm.weights)
                    worst_p = max(worst_p, abs(res.probability - ref_p))
                    if ref_rho is not None and res.rho is not None:
                        worst_rho = max(worst_rho, np.abs(res.rho.entries - ref_rho).max())
                    elif (ref_rho is None) != (res.rho is None):
                        worst_rho = math.inf
    dt = time.perf_counter() - t
    ok = bool(worst_rho <= 1e-11 and worst_p <= 1e-12 and dt < 60)
    report(6, "circuit oracle equivalence", ok, f"max rho gap={worst_rho:.1e}, max P gap={worst_p:.1e}, {dt:.1f}s")
    assert ok


def test_criterion_07_completeness(report):
    t = time.perf_counter()
    worst_povm = max(
        np.abs(sum(make_povm(Cascade(M, n), 70).weights for n in range(M + 1)) - 1).max()
        for M in (2, 4, 5, 10)
    )
    worst_kraus = 0.0
    for eta in (0.0, 0.5, 0.8, 1.0):
        s = sum(m.conj().T @ m for m in (loss_kraus(eta, k, 70).entries for k in range(70)))
        worst_kraus = max(worst_kraus, np.abs(s - np.eye(70)).max())
    dt = time.perf_counter() - t
    ok = bool(worst_povm <= 1e-12 and worst_kraus <= 1e-12 and dt < 10)
    report(7, "POVM and Kraus completeness", ok, f"cascade {worst_povm:.1e}, Kraus {worst_kraus:.1e}, {dt:.1f}s")
    assert ok


def test_criterion_08_calibration(report):
    t = time.perf_counter()
    M_vac, _ = nonlinear_variance(vacuum(10))
    v_vac, _ = minimize_variance(quadrature_moments(vacuum(10)))
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(5000 + seed)
        rho = random_density(int(rng.integers(2, 31)), rng)
        ref = dense_moments(rho, math.pi / 2)
        A = ref["mean_P2"] - ref["mean_P"] ** 2
        B = 0.5 * (ref["mean_X4"] - ref["mean_X2"] ** 2)
        C = -(ref["mean_sym_PX2"] - 2 * ref["mean_P"] * ref["mean_X2"]) / math.sqrt(2)
        v_grid, _ = grid_scan_minimum(lambda mu: A * mu ** 2 + B * mu ** -4.0 + C / mu)
        v, _ = minimize_variance(quadrature_moments(rho))
        worst = max(worst, abs(v - v_grid) / abs(v_grid))
    dt = time.perf_counter() - t
    ok = bool(abs(M_vac - 1) <= 1e-10 and abs(v_vac - LAMBDA_G) <= 1e-10 and worst <= 1e-8 and dt < 30)
    report(8, "nonlinear squeezing calibration", ok,
           f"M(vacuum)={M_vac:.12f}, min V={v_vac:.12f}, worst grid gap={worst:.1e}, {dt:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_09_detector_ordering(report, tmp_path):
    t = time.perf_counter()
    dets = ("fock:3", "apd", "cascade:4:3", "cascade:5:3", "cascade:10:3")
    cfg = SweepConfig.desk(etas=(0.80,), detectors=dets, targets=(),
                           output_path=str(tmp_path / "m.csv"), parallelism=JOBS)
    records = run_sweep(cfg)
    dt = time.perf_counter() - t

    def best(det, p_min=0.0):
        return min(r.nonlinear_M for r in records
                   if r.detector == det and r.nonlinear_M is not None and r.probability > p_min)

    high = {d: best(d, 0.05) for d in dets[1:4]}
    overall = {d: best(d) for d in dets}
    ok = bool((high["apd"] < high["cascade:4:3"] and high["apd"] < high["cascade:5:3"])
          and overall["fock:3"] == min(overall.values()) and dt < 1800)
    report(9, "desk-scale detector ordering", ok,
           "P>5% best M: " + ", ".join(f"{d}={v:.4f}" for d, v in high.items())
           + "; overall: " + ", ".join(f"{d}={v:.4f}" for d, v in overall.items()) + f", {dt:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_10_relative_improvement(report, tmp_path):
    t = time.perf_counter()
    cfg = SweepConfig.desk(etas=(0.99,), detectors=("apd", "fock:1"), targets=(math.pi / 3, math.pi / 6),
                           output_path=str(tmp_path / "f.csv"), parallelism=JOBS)
    records = run_sweep(cfg)
    dt = time.perf_counter() - t
    peaks = []
    for target in (0, 1):
        rows = relative_improvement(records, target=target)
        vals = [r.L for r in rows if r.detector == "fock:1" and r.tau >= HIGH_FIDELITY and r.L is not None]
        peaks.append(max(vals) if vals else math.nan)
    ok = bool(0.8 <= peaks[0] <= 1.2 and 0.4 <= peaks[1] <= 0.8 and dt < 1800)
    report(10, "desk-scale relative improvement", ok,
           f"peak L pi/3={peaks[0]:.3f} (want [0.8, 1.2]), pi/6={peaks[1]:.3f} (want [0.4, 0.8]), {dt:.0f}s")
    assert ok
