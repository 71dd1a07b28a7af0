import math

import numpy as np
import pytest

from bose2d import specfun
from bose2d.dmc import io as dmc_io
from bose2d.dmc.model import (
    PairModel,
    PotentialModel,
    Walker,
    lattice_positions,
    local_energy,
    pair_guiding,
    scattering_length_check,
)
from bose2d.errors import DomainError


def make_model(kind="dipolar", n=10, density=0.0625, use_kernel=None):
    box = math.sqrt(n / density)
    model = PairModel(kind, 1.0, box).attach(n, density)
    if use_kernel is not None:
        model.use_kernel = use_kernel
    return model


def safe_positions(model, n, rng, min_gap=0.06):
    """Jittered lattice with no pair close to a branch joint or the cutoff,
    so finite-difference stencils never straddle a curvature jump."""
    base = lattice_positions(n, model.box)
    for _ in range(2000):
        pos = (base + rng.normal(0, 0.25, size=base.shape)) % model.box
        _, r = model.pair_distances(pos[None])
        r = r[0]
        if (
            np.all(np.abs(r - model.rm) > min_gap)
            and np.all(np.abs(r - model.rcut) > min_gap)
            and np.all(r > 0.6)
        ):
            return pos
    raise RuntimeError("could not place a joint-free configuration")


class TestPotentialModel:
    def test_kinds(self):
        assert PotentialModel("dipolar", 2.0).scattering_length == pytest.approx(
            2.0 * math.exp(2.0 * specfun.EULER_GAMMA)
        )
        assert PotentialModel("hard_disk", 0.5).scattering_length == 0.5
        with pytest.raises(DomainError):
            PotentialModel("square_well", 1.0)
        with pytest.raises(DomainError):
            PotentialModel("dipolar", -1.0)


class TestPairGuiding:
    def test_inner_branch_is_bessel(self):
        p = PotentialModel("dipolar", 1.0)
        model = make_model()
        g = model.params
        for r in (0.8, 1.5, 3.0):
            want = specfun.bessel_k0(2.0 * math.sqrt(1.0 / r))
            assert pair_guiding(p, g, r) == pytest.approx(want, rel=1e-12)

    def test_hard_disk_core_is_node(self):
        p = PotentialModel("hard_disk", 1.0)
        model = make_model("hard_disk", density=0.01)
        assert pair_guiding(p, model.params, 0.9) == 0.0
        assert pair_guiding(p, model.params, 1.3) > 0.0

    def test_positive_up_to_cutoff(self):
        p = PotentialModel("dipolar", 1.0)
        model = make_model()
        for r in np.linspace(0.3, model.rcut, 50):
            assert pair_guiding(p, model.params, r) > 0.0

    def test_flat_derivative_at_half_box(self):
        model = make_model()
        # the symmetric-tail derivative vanishes identically at box/2
        c1, c2 = model.params.c1, model.params.c2
        L = model.box
        r = 0.5 * L
        deriv = c1 * (r**-2 - (L - r) ** -2) + 2 * c2 * (r**-3 - (L - r) ** -3)
        assert abs(deriv) < 1e-10
        # one-sided slope approaching the cutoff shrinks linearly with h
        r0 = model.rcut
        for h, bound in ((1e-3, 1e-4), (1e-4, 1e-5)):
            um, up = (
                model.pair_terms(np.array([r]))[0][0] for r in (r0 - h, r0 - 1e-12)
            )
            assert abs((up - um) / h) < bound

    def test_smooth_joint_value_slope_curvature(self):
        # inner branch and symmetric tail evaluated at the same match radius
        model = make_model()
        r, box = model.rm, model.box
        u_in, up_in, ulap_in = (v[0] for v in model._inner_terms(np.array([r])))
        c1, c2, log_c = model.params.c1, model.params.c2, model.params.log_c
        inv, invl = 1.0 / r, 1.0 / (box - r)
        u_out = log_c - c1 * (inv + invl) - c2 * (inv**2 + invl**2)
        up_out = c1 * (inv**2 - invl**2) + 2 * c2 * (inv**3 - invl**3)
        u2_out = -2 * c1 * (inv**3 + invl**3) - 6 * c2 * (inv**4 + invl**4)
        assert u_out == pytest.approx(u_in, abs=1e-12)
        assert up_out == pytest.approx(up_in, abs=1e-12)
        assert u2_out + up_out * inv == pytest.approx(ulap_in, abs=1e-12)

    def test_inner_branch_solves_zero_energy_equation(self):
        p = PotentialModel("dipolar", 1.0)
        model = make_model()
        g = model.params
        h = 1e-3
        for r in (0.9, 1.8, 2.9):  # inside the inner branch (rm ~ 3.16)
            assert r < model.rm
            fm, f0, fp = (pair_guiding(p, g, r + k * h) for k in (-1, 0, 1))
            second = (fp - 2.0 * f0 + fm) / h**2
            first = (fp - fm) / (2.0 * h)
            residual = (second + first / r) / f0 - 1.0 / r**3
            assert abs(residual) / (1.0 / r**3) < 1e-6


class TestLocalEnergy:
    def test_free_system_is_zero(self):
        model = make_model(use_kernel=False)
        model.tail_per_particle = 0.0
        model.pair_terms = lambda r: (
            np.zeros_like(r), np.zeros_like(r), np.zeros_like(r),
            np.zeros_like(r), np.zeros(r.shape, dtype=bool),
        )
        pos = np.random.default_rng(5).uniform(0, model.box, size=(4, 10, 2))
        log_psi, drift, eloc, bad = model.evaluate(pos)
        assert np.all(log_psi == 0.0)
        assert np.all(drift == 0.0)
        assert np.all(eloc == 0.0)

    def test_two_body_zero_energy_configuration(self):
        # exact pair eigenstate: local energy vanishes for any inner-branch
        # separation of two particles
        density = 0.002
        n = 2
        box = math.sqrt(n / density)
        model = PairModel("dipolar", 1.0, box).attach(n, density)
        model.tail_per_particle = 0.0
        for r in (1.0, 3.0, 6.0):
            pos = np.array([[[1.0, 1.0], [1.0 + r, 1.0]]])
            _, _, eloc, _ = model.evaluate(pos)
            assert abs(eloc[0]) < 1e-10

    def test_kernel_matches_reference(self, rng):
        model = make_model(n=12)
        pos = np.stack([safe_positions(model, 12, rng) for _ in range(6)])
        a = model.evaluate(pos)
        model.use_kernel = False
        b = model.evaluate(pos)
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        assert a[1] == pytest.approx(b[1], rel=1e-9, abs=1e-12)
        assert a[2] == pytest.approx(b[2], rel=1e-11)

    def test_gradient_against_finite_differences(self, rng):
        model = make_model(n=8, use_kernel=False)
        n = 8
        for _ in range(20):
            pos = safe_positions(model, n, rng)
            log_psi, drift, _, _ = model.evaluate(pos[None])
            h = 1e-5
            for i in (0, 3, 7):
                for c in (0, 1):
                    shift = np.zeros_like(pos)
                    shift[i, c] = h
                    lp = model.evaluate((pos + shift)[None])[0][0]
                    lm = model.evaluate((pos - shift)[None])[0][0]
                    fd = (lp - lm) / (2.0 * h)
                    assert abs(fd - drift[0, i, c]) < 1e-6

    def test_laplacian_against_finite_differences(self, rng):
        model = make_model(n=6, use_kernel=False)
        n = 6
        pos = safe_positions(model, n, rng)
        _, r = model.pair_distances(pos[None])
        _, _, ulap, _, _ = model.pair_terms(r.ravel())
        analytic = 2.0 * ulap.sum()
        h = 1e-2
        fd = 0.0
        base = model.evaluate(pos[None])[0][0]
        for i in range(n):
            for c in (0, 1):
                shift = np.zeros_like(pos)
                shift[i, c] = h
                fp = model.evaluate((pos + shift)[None])[0][0]
                fm = model.evaluate((pos - shift)[None])[0][0]
                f2p = model.evaluate((pos + 2 * shift)[None])[0][0]
                f2m = model.evaluate((pos - 2 * shift)[None])[0][0]
                fd += (-f2p + 16 * fp - 30 * base + 16 * fm - f2m) / (12 * h**2)
        assert abs(fd - analytic) / abs(analytic) < 1e-6

    def test_local_energy_continuous_at_joint(self):
        density = 0.002
        n = 2
        box = math.sqrt(n / density)
        model = PairModel("dipolar", 1.0, box).attach(n, density)
        eps = 1e-9 * model.rm
        es = []
        for r in (model.rm - eps, model.rm + eps):
            pos = np.array([[[0.5, 0.5], [0.5 + r, 0.5]]])
            es.append(model.evaluate(pos)[2][0])
        assert abs(es[0] - es[1]) < 1e-8

    def test_walker_api_caches(self):
        p = PotentialModel("dipolar", 1.0)
        model = make_model(n=4, density=0.01)
        w = Walker(positions=lattice_positions(4, model.box))
        e = local_energy(p, model.params, w)
        assert math.isfinite(e)
        assert w.log_psi is not None
        assert w.drift.shape == (4, 2)

    def test_hard_disk_overlap_sentinel(self):
        density = 0.01
        n = 3
        box = math.sqrt(n / density)
        model = PairModel("hard_disk", 1.0, box).attach(n, density)
        pos = np.array([[[1.0, 1.0], [1.5, 1.0], [8.0, 8.0]]])  # overlap pair
        log_psi, drift, eloc, bad = model.evaluate(pos)
        assert bad[0]
        assert log_psi[0] == -np.inf
        assert eloc[0] == np.inf


class TestTailCorrection:
    def test_per_particle_value(self):
        model = make_model(n=16)
        assert model.tail_per_particle == pytest.approx(
            math.pi * 0.0625 / (0.5 * model.box)
        )

    def test_continuity_across_box_sizes(self):
        # lattice potential energy per particle varies smoothly with N once
        # the cutoff tail is included; dropping the tail would shift values
        # by ~pi n / rcut, an order of magnitude more than these gaps
        dens = 0.0625
        vals = []
        for n in (36, 64, 100, 144):
            box = math.sqrt(n / dens)
            model = PairModel("dipolar", 1.0, box).attach(n, dens)
            vals.append(model.potential_with_tail(lattice_positions(n, box)[None])[0])
        gaps = np.abs(np.diff(vals))
        assert np.all(gaps < 1e-3)
        assert np.all(np.asarray(vals) > 0)

    def test_hard_disk_has_no_tail(self):
        model = make_model("hard_disk", density=0.01)
        assert model.tail_per_particle == 0.0


class TestScatteringLength:
    def test_dipolar_unit_range(self):
        a = scattering_length_check(PotentialModel("dipolar", 1.0))
        assert abs(a / 3.17222 - 1.0) < 1e-4

    def test_dipolar_scaling(self):
        a = scattering_length_check(PotentialModel("dipolar", 2.0))
        assert abs(a / 6.34444 - 1.0) < 1e-4

    def test_hard_disk_exact(self):
        assert scattering_length_check(PotentialModel("hard_disk", 0.7)) == 0.7


class TestRunFiles:
    GOOD = """
potential = dipolar
range = 1.0
density = 0.0625
n_particles = 16
timesteps = 0.02, 0.04
target_walkers = 40
equil_blocks = 2
measure_blocks = 4
steps_per_block = 10
seed = 9
run_vmc = true
workers = 2
"""

    def test_round_trip(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(self.GOOD)
        spec = dmc_io.parse_run_file(path)
        assert spec.potential.kind == "dipolar"
        assert spec.timesteps == [0.02, 0.04]
        assert spec.run_vmc is True
        assert spec.workers == 2
        assert spec.configs[0].match_radius == pytest.approx(
            0.25 * spec.configs[0].box
        )

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(self.GOOD + "\nwibble = 3\n")
        with pytest.raises(DomainError, match="wibble"):
            dmc_io.parse_run_file(path)

    def test_missing_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("potential = dipolar\n")
        with pytest.raises(DomainError, match="missing"):
            dmc_io.parse_run_file(path)

    def test_bad_value_names_field(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(self.GOOD.replace("run_vmc = true", "run_vmc = maybe"))
        with pytest.raises(DomainError, match="run_vmc"):
            dmc_io.parse_run_file(path)

    def test_checkpoint_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        pos = rng.uniform(0, 12.0, size=(5, 4, 2))
        lineage = np.array([3, 1, 4, 1, 5], dtype=np.int64)
        path = tmp_path / "walkers.csv"
        dmc_io.save_checkpoint(path, pos, box=12.0, lineage=lineage)
        pos2, box, lin2 = dmc_io.load_checkpoint(path)
        assert box == 12.0
        assert np.array_equal(pos, pos2)
        assert np.array_equal(lineage, lin2)

    def test_runs_log_appends(self, tmp_path):
        from bose2d.dmc import DmcConfig, EnergyEstimate

        path = tmp_path / "runs.csv"
        config = DmcConfig(n_particles=4, density=0.05, timestep=0.01)
        est = EnergyEstimate(mean=0.5, err=0.01, tag="dmc_mixed")
        dmc_io.append_run(path, PotentialModel("dipolar", 1.0), config, est)
        dmc_io.append_run(path, PotentialModel("dipolar", 1.0), config, est)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# schema:")
        assert lines[1].split(",") == list(dmc_io.RUNS_COLUMNS)
        assert len(lines) == 4
