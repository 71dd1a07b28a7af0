"""Acceptance suite: one test per criterion, each printing a PASS line.

Criterion 7 also has a desk-scale variant (two timesteps, N = 100, about
half an hour) excluded from the default run; execute it with
`pytest -m full tests/test_acceptance.py`.
"""

import math
import time
from importlib import resources

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from bose2d import eos, specfun, trap
from bose2d.dmc import (
    DmcConfig,
    PotentialModel,
    dmc_run,
    extrapolate_timestep,
    parse_run_file,
    scattering_length_check,
    vmc_run,
)

DIPOLES = PotentialModel("dipolar", 1.0)


def _announce(number, detail, t0):
    print(f"ACCEPTANCE {number} PASS: {detail} [{time.time() - t0:.1f}s]")


def _bundled_config(name):
    with resources.as_file(
        resources.files("bose2d.data").joinpath(name)
    ) as path:
        return parse_run_file(path)


def test_criterion_1_universal_eos_vs_reference(reference_rows):
    t0 = time.time()
    checked = 0
    for row in reference_rows:
        if row.n_r02 > 1e-13:
            continue
        g = eos.from_density_dipoles(row.n_r02)
        eps_table, _ = eos.reference_epsilon(row)
        inv_pred = 1.0 / eos.universal_energy(g)
        inv_table = 1.0 / eps_table
        sigma = inv_table * (row.err / row.e_per_n)
        assert abs(inv_pred - inv_table) <= max(3.0 * sigma, 0.1), row
        checked += 1
    assert checked == 9  # all bundled rows at n r0^2 <= 1e-13
    _announce(1, f"{checked} ultra-dilute rows inside 3 sigma", t0)


def test_criterion_2_cubic_coefficient_fit(reference_rows):
    t0 = time.time()
    fit = eos.fit_c3(reference_rows)
    assert 1.7 <= fit.c3 <= 2.3
    _announce(2, f"c3 = {fit.c3:.3f} +- {fit.c3_err:.3f}", t0)


def test_criterion_3_special_functions():
    t0 = time.time()
    worst_g = 0.0
    for x in np.geomspace(1.0, 500.0, 60):
        oracle = quad(lambda s: math.exp(-s) / (x + s), 0.0, np.inf,
                      epsabs=0.0, epsrel=1e-13, limit=400)[0] * math.exp(-x)
        rel = abs(specfun.gamma_upper_zero(x) / oracle - 1.0)
        worst_g = max(worst_g, rel)
    assert worst_g <= 1e-10
    worst_k = 0.0
    for x in np.geomspace(0.01, 30.0, 50):
        tmax = math.acosh(1.0 + 760.0 / x)
        oracle = quad(lambda t: math.exp(-x * math.cosh(t)), 0.0, tmax,
                      epsabs=0.0, epsrel=1e-13, limit=400)[0]
        rel = abs(specfun.bessel_k0(x) / oracle - 1.0)
        worst_k = max(worst_k, rel)
    assert worst_k <= 1e-10
    x0 = specfun.DEFAULT_POLICY.series_asymptotic_crossover
    worst_b = 0.0
    for x in np.linspace(0.8 * x0, 1.2 * x0, 21):
        cf = specfun._gamma0_cf_scaled(x)
        asym = specfun._gamma0_asymptotic_scaled(x)
        worst_b = max(worst_b, abs(cf / asym - 1.0))
    assert worst_b <= 1e-11
    _announce(
        3,
        f"gamma {worst_g:.1e}, K0 {worst_k:.1e}, branches {worst_b:.1e}",
        t0,
    )


def test_criterion_4_mean_field_consistency():
    t0 = time.time()
    worst = 0.0
    for L in np.linspace(20.0, 200.0, 181):
        g = eos.GasParameter(-L)
        a = eos.energy_mf_integrated(g)
        b = eos.energy_mf_expansion(g)
        worst = max(worst, abs(a / b - 1.0))
    assert worst <= 1e-4
    _announce(4, f"max relative gap {worst:.2e} on L in [20, 200]", t0)


def test_criterion_5_cherny_solver():
    t0 = time.time()
    worst = 0.0
    last = None
    for L in np.geomspace(5.0, 500.0, 100):
        g = eos.GasParameter(-L)
        u = eos.cherny_u(g)
        rhs = L - math.log(math.pi) - 2.0 * eos.EULER_GAMMA
        worst = max(worst, abs(1.0 / u + math.log(u) - rhs))
        if last is not None:
            assert u < last
        last = u
    assert worst <= 1e-12
    g = eos.from_density_dipoles(1e-20)
    rhs = g.L - math.log(math.pi) - 2.0 * eos.EULER_GAMMA
    u_fp = 1.0 / rhs
    for _ in range(400):  # independent fixed-point oracle
        u_fp = 1.0 / (rhs - math.log(u_fp))
    assert abs(eos.cherny_u(g) - u_fp) <= 1e-6
    assert abs(eos.cherny_u(g) - 0.0220965) <= 1e-6
    _announce(5, f"max residual {worst:.1e}, u(1e-20 row) ok", t0)


def test_criterion_6_cancellation_point():
    t0 = time.time()
    root = brentq(
        lambda L: eos.universal_energy_correction(eos.GasParameter(-L)),
        5.0, 100.0, xtol=1e-10,
    )
    assert 11.0 <= root <= 16.0
    _announce(6, f"BMF cancellation at L = {root:.2f}", t0)


def test_criterion_7_dmc_smoke():
    t0 = time.time()
    spec = _bundled_config("smoke_2m4.cfg")
    assert len(spec.configs) == 1
    est = dmc_run(spec.configs[0], spec.potential, workers=spec.workers)
    assert abs(est.mean / 0.23338 - 1.0) <= 0.03
    assert time.time() - t0 <= 300.0
    _announce(
        7,
        f"smoke E/N = {est.mean:.5f} +- {est.err:.5f} vs 0.23338",
        t0,
    )


@pytest.mark.full
def test_criterion_7_dmc_desk_scale():
    t0 = time.time()
    spec = _bundled_config("desk_2m4.cfg")
    results = []
    for config in spec.configs:
        results.append(
            (config.timestep, dmc_run(config, spec.potential,
                                      workers=spec.workers))
        )
    final = extrapolate_timestep(results)
    assert abs(final.mean / 0.23338 - 1.0) <= 0.01
    _announce(
        7,
        f"desk-scale E/N = {final.mean:.5f} +- {final.err:.5f} vs 0.23338",
        t0,
    )


def test_criterion_8_statistical_hygiene():
    t0 = time.time()
    config = DmcConfig(
        n_particles=16, density=0.0625, timestep=0.04, target_walkers=60,
        equil_blocks=4, measure_blocks=16, steps_per_block=50, seed=11,
        preequil_steps=100,
    )
    v = vmc_run(config, DIPOLES)
    d = dmc_run(config, DIPOLES)
    assert v.mean >= d.mean - 2.0 * math.hypot(v.err, d.err)

    tiny = DmcConfig(
        n_particles=9, density=0.0625, timestep=0.05, target_walkers=24,
        equil_blocks=2, measure_blocks=4, steps_per_block=25, seed=7,
        preequil_steps=20,
    )
    traces = [dmc_run(tiny, DIPOLES, workers=w).trace for w in (1, 3)]
    assert np.array_equal(traces[0], traces[1])

    debug = DmcConfig(
        n_particles=9, density=0.05, timestep=0.05, target_walkers=20,
        equil_blocks=2, measure_blocks=8, steps_per_block=1000, seed=4,
        preequil_steps=50,
    )
    est = dmc_run(debug, PotentialModel("hard_disk", 1.0), check_overlaps=True)
    assert math.isfinite(est.mean)
    _announce(
        8,
        f"vmc {v.mean:.5f} >= dmc {d.mean:.5f}, bit-identical traces, "
        "no overlap in 10^4 steps",
        t0,
    )


def test_criterion_9_scattering_length():
    t0 = time.time()
    a = scattering_length_check(DIPOLES)
    assert abs(a / 3.17222 - 1.0) <= 1e-4
    _announce(9, f"a = {a:.6f} r0 vs 3.17222", t0)


def test_criterion_10_breathing_mode():
    t0 = time.time()
    linear = trap.TrapConfig(
        n_particles=1000.0, omega=1.0, eos_choice="mf_linear",
        linear_coupling=0.1,
    )
    ideal = trap.TrapConfig(n_particles=1000.0, omega=1.0, eos_choice="ideal")
    r_lin = trap.breathing_frequency(linear)
    r_id = trap.breathing_frequency(ideal)
    assert abs(r_lin - 4.0) <= 1e-3
    assert abs(r_id - 4.0) <= 1e-3
    cfg = trap.config_for_lda_parameter(1e-5, "universal")
    a = trap.breathing_frequency(cfg, rel_step=1e-4)
    b = trap.breathing_frequency(cfg, rel_step=2e-4)
    assert abs(a / b - 1.0) <= 1e-3
    params = np.geomspace(1e-10, 1e-2, 9)
    vals = np.array([
        trap.breathing_frequency(trap.config_for_lda_parameter(p, "universal"))
        for p in params
    ])
    assert np.all(vals > 4.0)          # deviation vanishes only at p -> 0
    assert np.all(np.diff(vals) > 0)   # monotone growth with the parameter
    inc = np.diff(vals)
    assert np.all(inc[1:] / inc[:-1] < 4.0)  # smooth, no jumps
    assert time.time() - t0 <= 30.0
    _announce(
        10,
        f"anchors {r_lin:.4f}/{r_id:.4f}, sweep 4 -> {vals[-1]:.3f}",
        t0,
    )


def test_criterion_11_characteristic_density():
    t0 = time.time()
    two = eos.characteristic_density(2.0)
    three = eos.characteristic_density(3.0)
    assert abs(two - (-68.6)) <= 0.1
    assert abs(three - (-861.9)) <= 0.1
    assert round(two) == -69 and round(three) == -862
    _announce(11, f"log10 na^2 = {two:.1f} and {three:.1f}", t0)
