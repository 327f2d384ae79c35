"""Harness tests: perturbation fields, export round trips, config parsing,
convergence mechanics, drivers and the CLI surface."""

import numpy as np
import pytest

from chemotax.errors import ConfigError, NonNestedGrids
from chemotax.grid import GridSpec
from chemotax.harness import (build_config, default_sections, export_csv,
                              export_heatmap, gaussian_perturbation,
                              parse_config_file, read_csv, read_heatmap,
                              run_convergence, run_crime_cell,
                              run_epidemic_cell)
from chemotax.harness.cli import main
from chemotax.harness.convergence import ConvergenceRow, ConvergenceTable


class TestGaussianPerturbation:
    def test_zero_height_scale(self):
        spec = GridSpec(16)
        delta = gaussian_perturbation(spec, 0, count=5, height_scale=0.0,
                                      width_scale=0.01)
        assert np.all(delta == 0)

    def test_single_bump_matches_pointwise_formula(self):
        spec = GridSpec(16, 0.0, 2.0)
        seed = 42
        delta = gaussian_perturbation(spec, seed, count=1, height_scale=0.5,
                                      width_scale=0.2, images=2)
        r1, r2, r3, r4 = np.random.default_rng(seed).random(4)
        height, sigma = 0.5 * r1, 0.2 * r2
        cx, cy = 2.0 * r3, 2.0 * r4
        x = spec.nodes()
        expected = np.zeros((16, 16))
        for i in range(16):
            for j in range(16):
                acc = 0.0
                for jj in range(-2, 3):
                    for kk in range(-2, 3):
                        acc += np.exp(-((x[i] - cx + 2.0 * jj) ** 2
                                        + (x[j] - cy + 2.0 * kk) ** 2) / sigma)
                expected[i, j] = height * acc
        assert np.allclose(delta, expected, rtol=1e-12)

    def test_deterministic_given_seed(self):
        spec = GridSpec(32)
        a = gaussian_perturbation(spec, 7, count=30, height_scale=0.02,
                                  width_scale=0.005)
        b = gaussian_perturbation(spec, 7, count=30, height_scale=0.02,
                                  width_scale=0.005)
        assert np.array_equal(a, b)

    def test_shared_generator_draws_sequentially(self):
        spec = GridSpec(16)
        rng = np.random.default_rng(3)
        first = gaussian_perturbation(spec, rng, count=2, height_scale=1.0,
                                      width_scale=0.1)
        second = gaussian_perturbation(spec, rng, count=2, height_scale=1.0,
                                       width_scale=0.1)
        assert not np.array_equal(first, second)

    def test_periodic_wrap_images(self):
        # a bump near the edge must reappear smoothly across the seam
        spec = GridSpec(64)
        delta = gaussian_perturbation(spec, 11, count=30, height_scale=0.02,
                                      width_scale=0.005, images=1)
        jumps = np.abs(delta[0, :] - delta[-1, :])
        interior = np.abs(np.diff(delta, axis=0)).max()
        assert jumps.max() <= interior * 1.5 + 1e-12


class TestCsvExport:
    def test_round_trip_and_header(self, tmp_path):
        path = tmp_path / "series.csv"
        cols = {"t": [0.0, 1.0, 2.0], "mass": [1.0, 0.5, 0.25]}
        export_csv(path, cols, {"seed": 9, "config": "abc"})
        back, meta = read_csv(path)
        assert meta["seed"] == "9"
        assert np.allclose(back["t"], cols["t"])
        assert np.allclose(back["mass"], cols["mass"])

    def test_empty_series_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        export_csv(path, {}, {"seed": 1})
        text = path.read_text()
        assert all(line.startswith("#") for line in text.splitlines())

    def test_deterministic_payload_excluding_timestamp(self, tmp_path):
        cols = {"a": np.linspace(0, 1, 5)}
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        export_csv(p1, cols, {"seed": 5})
        export_csv(p2, cols, {"seed": 5})
        l1 = [l for l in p1.read_text().splitlines()
              if not l.startswith("# written")]
        l2 = [l for l in p2.read_text().splitlines()
              if not l.startswith("# written")]
        assert l1 == l2

    def test_ragged_columns_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            export_csv(tmp_path / "x.csv", {"a": [1.0], "b": [1.0, 2.0]})


class TestHeatmapExport:
    def test_round_trip_within_quantization(self, tmp_path):
        rng = np.random.default_rng(1)
        field = rng.standard_normal((12, 9)) * 3.0 + 1.0
        path = tmp_path / "f.pgm"
        export_heatmap(field, path)
        back, vmin, vmax = read_heatmap(path)
        assert vmin == field.min() and vmax == field.max()
        step = (vmax - vmin) / 65535
        assert np.max(np.abs(back - field)) <= 0.5 * step + 1e-12

    def test_constant_field(self, tmp_path):
        path = tmp_path / "c.pgm"
        export_heatmap(np.full((6, 6), 2.5), path)
        back, vmin, vmax = read_heatmap(path)
        assert vmin == vmax == 2.5
        assert np.all(back == 2.5)

    def test_rejects_non_finite(self, tmp_path):
        bad = np.zeros((4, 4))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            export_heatmap(bad, tmp_path / "bad.pgm")


class TestConfig:
    def test_defaults_complete(self):
        sections = default_sections()
        cfg = build_config("crime", sections)
        assert cfg.params["n"] == 256
        assert cfg.params["omega"] == pytest.approx(1 / 15)

    def test_parse_file_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("""
[common]
seed = 99
threads = 2

[crime]
n = 32            # coarse demo grid
D = 0.001, 0.01
T = 1.0
""")
        sections = parse_config_file(path)
        assert sections["common"]["seed"] == 99
        assert sections["crime"]["n"] == 32
        assert sections["crime"]["D"] == (0.001, 0.01)
        assert sections["crime"]["T"] == 1.0

    def test_unknown_key_is_hard_error(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[crime]\nnn = 32\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_unknown_section_is_hard_error(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[crimes]\nn = 32\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[crime]\nn : 32\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_cli_overrides(self):
        cfg = build_config("epidemic", default_sections(), seed=5,
                          out="elsewhere", uncorrected=True, threads=3)
        assert cfg.seed == 5 and cfg.threads == 3 and cfg.uncorrected
        assert cfg.out_dir == "elsewhere"

    def test_config_hash_stable(self):
        a = build_config("crime", default_sections())
        b = build_config("crime", default_sections())
        assert a.config_hash() == b.config_hash()

    def test_drift_defaults(self):
        # the epidemic production experiments use the log-form drift (the
        # variant whose uncorrected runs actually break down); the crime
        # experiments and all convergence studies use the ratio form
        sections = default_sections()
        assert sections["epidemic"]["drift"] == "log"
        assert sections["crime"]["drift"] == "ratio"


class TestConvergenceTable:
    def test_orders_are_log2_ratios(self):
        rows = [ConvergenceRow(1 / 8, 4e-4, None, 8e-2, None),
                ConvergenceRow(1 / 16, 1e-4, 2.0, 2e-2, 2.0)]
        table = ConvergenceTable("crime", "spatial", rows)
        cols = table.columns()
        assert cols["order_phi"][1] == 2.0
        assert np.isnan(cols["order_phi"][0])

    def test_non_nested_grid_rejected(self):
        with pytest.raises(NonNestedGrids):
            run_convergence("crime", "spatial", resolutions=(12,), ref_n=64,
                            tau=1e-3, T=2e-3)

    def test_small_crime_spatial_study_second_order(self, tmp_path):
        table = run_convergence("crime", "spatial", resolutions=(8, 16),
                                ref_n=64, tau=1e-3, T=0.02,
                                cache_dir=tmp_path)
        o_phi, o_p = table.orders()
        assert 1.5 < o_phi[0] < 2.5
        assert 1.5 < o_p[0] < 2.5
        # reference is cached: second call reuses it
        again = run_convergence("crime", "spatial", resolutions=(8, 16),
                                ref_n=64, tau=1e-3, T=0.02,
                                cache_dir=tmp_path)
        assert again.rows[0].err_phi == table.rows[0].err_phi
        assert len(list(tmp_path.glob("ref_*.npz"))) == 1


def tiny_crime_config(tmp_path, **over):
    sections = default_sections()
    sections["crime"].update({"n": 16, "tau": 0.01, "T": 0.1,
                              "snapshots": (0.1,), "series_every": 2,
                              "D": (0.01,)})
    sections["crime"].update(over)
    return build_config("crime", sections, out=tmp_path)


def tiny_epidemic_config(tmp_path, **over):
    sections = default_sections()
    sections["epidemic"].update({"n": 16, "tau": 0.05, "T": 0.5,
                                 "snapshots": (0.5,), "series_every": 2,
                                 "D": (0.01,), "eta_field": 1.0,
                                 "images": 2})
    sections["epidemic"].update(over)
    return build_config("epidemic", sections, out=tmp_path)


class TestDrivers:
    def test_unperturbed_equilibrium_is_stationary(self, tmp_path):
        cfg = tiny_crime_config(tmp_path, perturb_height=0.0, T=1.0,
                                snapshots=(1.0,))
        res = run_crime_cell(cfg, 0.01)
        from chemotax.crime import crime_equilibrium, crime_params
        pars = crime_params(D=0.01, eta=cfg.params["eta"],
                            a0=cfg.params["a0"], gamma=cfg.params["gamma"],
                            omega=cfg.params["omega"],
                            kappa=cfg.params["kappa"])
        rho_bar, a_bar = crime_equilibrium(pars)
        assert abs(res.series["max_rho"][-1] - rho_bar) < 1e-8
        assert abs(res.series["max_a"][-1] - a_bar) < 1e-8
        assert res.diverged_at is None

    def test_crime_run_mass_budget(self, tmp_path):
        # the density mass is not conserved (replenishment source): its
        # increments must reproduce the extrapolated reaction budget plus
        # the clip contribution, reconstructed from the logged series alone
        cfg = tiny_crime_config(tmp_path, n=32, tau=0.005, T=0.2,
                                series_every=1, snapshots=(0.2,))
        res = run_crime_cell(cfg, 0.01)
        tau = 0.005
        mass = np.array(res.series["mass_rho"])
        rate = np.array(res.series["reaction_rate_rho"])
        clip = np.array(res.series["clip_mass_rho"])
        # two-step extrapolated budget: applies from the second step on
        for k in range(2, len(mass)):
            budget = tau * (1.5 * rate[k - 1] - 0.5 * rate[k - 2]) + clip[k]
            assert mass[k] - mass[k - 1] == pytest.approx(
                budget, abs=1e-12 * max(1.0, mass[k]))
        # and it is genuinely non-conserved: the source term is active
        assert np.max(np.abs(np.diff(mass))) > 0

    def test_crime_positivity_series(self, tmp_path):
        cfg = tiny_crime_config(tmp_path)
        res = run_crime_cell(cfg, 0.01)
        assert min(res.series["min_rho"]) >= 0.0
        assert min(res.series["min_a"]) >= -1e-12

    def test_epidemic_run_audits_and_artifacts(self, tmp_path):
        cfg = tiny_epidemic_config(tmp_path)
        res = run_epidemic_cell(cfg, 0.01)
        mass = np.array(res.series["mass"])
        assert np.max(np.abs(mass - mass[0])) <= 1e-11 * mass[0]
        assert min(res.series["min_psi"]) >= 0.0
        assert min(res.series["xi"]) >= -1e-13
        assert max(res.series["mass_iters"]) <= 5
        assert max(res.series["h1_iters"]) <= 50
        assert (res.out_dir / "carriers.csv").exists()
        assert (res.out_dir / "mobile_t0.5.pgm").exists()

    def test_epidemic_uniform_ic_matches_ode(self, tmp_path):
        # spatially uniform infected start: chemotaxis and diffusion inert,
        # the carrier curve must collapse onto the well-mixed reference
        cfg = tiny_epidemic_config(tmp_path, uniform_seed=1e-3, tau=0.02,
                                   T=2.0, snapshots=(2.0,), series_every=5)
        res = run_epidemic_cell(cfg, 0.01)
        carriers = np.array(res.series["carriers"])
        ode = np.array(res.series["ode_carriers"])
        assert carriers.max() > 1e-3  # outbreak actually seeded
        assert np.max(np.abs(carriers - ode)) <= 1e-6 * max(1.0, ode.max())


class TestCli:
    def test_ode_ref_writes_csv(self, tmp_path):
        code = main(["ode-ref", "--out", str(tmp_path)])
        assert code == 0
        cols, meta = read_csv(tmp_path / "ode_reference.csv")
        assert "carriers" in cols and meta["seed"] == "1234"

    def test_bad_config_file_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[crime]\nwhat = 1\n")
        code = main(["crime", "--config", str(bad), "--out", str(tmp_path)])
        assert code == 4

    def test_bad_flag_exit_code(self):
        assert main(["definitely-not-a-command"]) == 4

    def test_invariant_violation_exit_code(self, tmp_path, monkeypatch):
        from chemotax.errors import InvariantViolation
        from chemotax.harness import cli

        def boom(cfg):
            raise InvariantViolation("audit failed")

        monkeypatch.setattr(cli, "run_epidemic", boom)
        assert cli.main(["epidemic", "--out", str(tmp_path)]) == 2

    def test_bad_time_stepping_rejected(self, tmp_path):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("[crime]\ntau = 0.5\nT = 0.1\n")
        assert main(["crime", "--config", str(cfgfile),
                     "--out", str(tmp_path)]) == 4

    def test_crime_tiny_run(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("""
[crime]
n = 16
tau = 0.01
T = 0.05
snapshots = 0.05
D = 0.01
""")
        code = main(["crime", "--config", str(cfgfile), "--out",
                     str(tmp_path), "--seed", "7"])
        assert code == 0
        out = tmp_path / "crime_D0.01_eta0.2"
        assert (out / "series.csv").exists()
        _, meta = read_csv(out / "series.csv")
        assert meta["seed"] == "7"

    def test_converge_tiny_run(self, tmp_path):
        cfgfile = tmp_path / "conv.cfg"
        cfgfile.write_text("""
[converge]
resolutions = 8, 16
ref_n = 32
tau = 0.001
T = 0.002
""")
        code = main(["converge", "--model", "crime", "--mode", "spatial",
                     "--config", str(cfgfile), "--out", str(tmp_path)])
        assert code == 0
        cols, _ = read_csv(tmp_path / "converge_crime_spatial.csv")
        assert len(cols["h_or_tau"]) == 2

    def test_threads_sweep(self, tmp_path):
        cfgfile = tmp_path / "sweep.cfg"
        cfgfile.write_text("""
[crime]
n = 16
tau = 0.01
T = 0.03
snapshots = 0.03
D = 0.005, 0.02
""")
        code = main(["crime", "--config", str(cfgfile), "--out",
                     str(tmp_path), "--threads", "2"])
        assert code == 0
        assert (tmp_path / "crime_D0.005_eta0.2" / "series.csv").exists()
        assert (tmp_path / "crime_D0.02_eta0.2" / "series.csv").exists()

    def test_sweep_deterministic_across_pool_sizes(self, tmp_path):
        text = """
[crime]
n = 16
tau = 0.01
T = 0.03
snapshots = 0.03
D = 0.005, 0.02
"""
        for threads, sub in (("1", "a"), ("2", "b")):
            cfgfile = tmp_path / f"sweep{sub}.cfg"
            cfgfile.write_text(text)
            out = tmp_path / sub
            assert main(["crime", "--config", str(cfgfile), "--out",
                         str(out), "--threads", threads]) == 0
        for cell in ("crime_D0.005_eta0.2", "crime_D0.02_eta0.2"):
            a, _ = read_csv(tmp_path / "a" / cell / "series.csv")
            b, _ = read_csv(tmp_path / "b" / cell / "series.csv")
            for key in a:
                assert np.array_equal(a[key], b[key])
