"""End-to-end tests of the command-line entry point."""

import math

import numpy as np
import pandas as pd
import pytest

from riskbias import cli
from riskbias.asymptotics import max_admissible_e0_psi_bar, max_bias_psi_bar
from riskbias.config_service import SimulateConfig
from riskbias.errors import DomainError, InternalError


def run(tmp_path, command: str, section: str, *extra: str) -> int:
    ini = tmp_path / "run.ini"
    ini.write_text(f"[{command}]\n{section}", encoding='utf-8')
    return cli.main([command, "--config", str(ini), *extra])


def read(path) -> pd.DataFrame:
    return pd.read_csv(path, comment='#')


def footer(path) -> list[str]:
    return [line for line in path.read_text(encoding='utf-8').splitlines() if line.startswith('#')]


def frontier_bias(e: np.ndarray, bias: np.ndarray, se: np.ndarray, at: float) -> tuple[float, float]:
    """Largest bias where the sweep path crosses mean empirical risk `at`, with its standard error."""
    best = (-math.inf, 0.0)
    for i in range(len(e) - 1):
        lo, hi = sorted((e[i], e[i + 1]))
        if not lo <= at <= hi:
            continue
        w = 0.0 if hi == lo else (at - e[i]) / (e[i + 1] - e[i])
        value = (1.0 - w) * bias[i] + w * bias[i + 1]
        if value > best[0]:
            best = (value, max(se[i], se[i + 1]))
    return best


class TestBias:
    section = "k = 5\nM = 1, 2\ne0_points = 5\ne0_max = 0.2\n"

    def test_writes_csv(self, tmp_path):
        out = tmp_path / "bias.csv"
        assert run(tmp_path, "bias", self.section, "--out", str(out), "--seed", "7") == cli.EXIT_OK
        frame = read(out)
        assert list(frame.columns) == ["M", "e0", "bias_exact", "bias_psi", "bias_psibar"]
        assert set(frame["M"]) <= {1, 2}
        assert np.all(frame["bias_exact"] >= 0.0)

        lines = footer(out)
        assert "# command: bias" in lines
        assert "# seed: 7" in lines
        omitted = int(next(line for line in lines if line.startswith("# omitted rows:")).split(":")[1])
        assert len(frame) + omitted == 10

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "bias.csv"
        run(tmp_path, "bias", self.section, "--out", str(out))
        first = out.read_bytes()
        run(tmp_path, "bias", self.section, "--out", str(out))
        assert out.read_bytes() == first

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RISKBIAS_OUTPUT_DIR", str(tmp_path / "results"))
        assert run(tmp_path, "bias", self.section) == cli.EXIT_OK
        assert (tmp_path / "results" / "bias.csv").exists()


class TestExitCodes:
    def test_invalid_config(self, tmp_path):
        assert run(tmp_path, "envelope", "N = 5\nk = 10\n") == cli.EXIT_CONFIG
        assert run(tmp_path, "bias", "colour = blue\n") == cli.EXIT_CONFIG

    def test_domain_error(self, tmp_path, monkeypatch):
        def out_of_range(config):
            raise DomainError("e0 out of range", 0.0, 0.2)

        monkeypatch.setitem(cli.COMMANDS, "bias", out_of_range)
        assert run(tmp_path, "bias", "") == cli.EXIT_DOMAIN

    def test_other_failure(self, tmp_path, monkeypatch):
        def broken(config):
            raise InternalError("partition lost volume")

        monkeypatch.setitem(cli.COMMANDS, "bias", broken)
        assert run(tmp_path, "bias", "") == cli.EXIT_FAILURE

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["--version"])
        assert info.value.code == 0
        assert "riskbias" in capsys.readouterr().out


class TestEnvelope:
    def test_curves_below_envelope(self, tmp_path):
        out = tmp_path / "envelope.csv"
        assert run(tmp_path, "envelope", "N = 20\nk = 10\nk_alpha = 0.5, 1.0\np_points = 11\n",
                   "--out", str(out)) == cli.EXIT_OK
        frame = read(out)
        assert list(frame.columns) == ["alpha", "z", "k_mu_s", "envelope"]
        assert len(frame) == 22
        assert np.all(frame["k_mu_s"] <= frame["envelope"] * 1.01 + 1e-9)


class TestCompareVc:
    def test_vc_dominates(self, tmp_path):
        out = tmp_path / "vc.csv"
        assert run(tmp_path, "compare-vc", "N = 20\nk = 4\ne0_points = 6\n", "--out", str(out)) == cli.EXIT_OK
        frame = read(out)
        assert frame["e0"].iloc[0] == 0.0
        assert np.all(frame["s_vc"] >= frame["s_exact"])
        assert any(line.startswith("# saturated VC rows:") for line in footer(out))


class TestSimulate:
    section = "families = B\nN = 10\nmax_leaves = 2\nreps = 5\nn_members = 2\n"

    def test_thread_count_does_not_change_output(self, tmp_path):
        out = tmp_path / "simulate.csv"
        run(tmp_path, "simulate", self.section, "--out", str(out), "--threads", "1")
        single = out.read_bytes()
        run(tmp_path, "simulate", self.section, "--out", str(out), "--threads", "3")
        assert out.read_bytes() == single
        frame = read(out)
        assert len(frame) == 2
        assert set(frame["family"]) == {"B"}

    def test_analytic_column(self, tmp_path):
        out = tmp_path / "simulate.csv"
        assert run(tmp_path, "simulate", self.section, "--out", str(out)) == cli.EXIT_OK
        frame = read(out)
        assert list(frame.columns) == [
            "family", "param", "param_name", "mean_e", "mean_r", "bias",
            "se_e", "se_r", "se_bias", "reps", "analytic_bias",
        ]
        inside = frame["mean_e"] <= max_admissible_e0_psi_bar(4.0)
        for e, value in zip(frame.loc[inside, "mean_e"], frame.loc[inside, "analytic_bias"]):
            assert value == pytest.approx(max_bias_psi_bar(e, 4.0), rel=1e-9)
        assert frame.loc[~inside, "analytic_bias"].isna().all()
        assert "# analytic curve: closed-form maximal bias at M=4" in footer(out)

    def test_analytic_bias(self):
        assert cli.analytic_bias(0.0, 4.0) == pytest.approx(1.0 / (8.0 * math.e), abs=1e-12)
        assert math.isnan(cli.analytic_bias(0.45, 4.0))

    @pytest.mark.slow
    def test_default_configuration_orders_families(self):
        config = SimulateConfig(seed=11, threads=4)
        assert (config.N, config.max_leaves, config.reps, config.compare_M) == (100, 4, 1000, 4.0)
        frame = cli.cmd_simulate(config)[0].frame

        # every point stays under the analytic curve where that curve is defined
        rows = frame[frame["analytic_bias"].notna()]
        assert len(rows) > 0
        assert np.all(rows["bias"] <= rows["analytic_bias"] + 3 * rows["se_bias"])

        # family A lies above family B on the empirical-risk span of its theta sweep
        a = frame[frame["family"] == "A"]
        b = frame[frame["family"] == "B"]
        theta_e = a.loc[a["param_name"] == "theta", "mean_e"]
        matched = b[(b["mean_e"] >= theta_e.min()) & (b["mean_e"] <= theta_e.max())]
        assert len(matched) >= 3
        path = (a["mean_e"].to_numpy(), a["bias"].to_numpy(), a["se_bias"].to_numpy())
        for e, bias_b, se_b in zip(matched["mean_e"], matched["bias"], matched["se_bias"]):
            bias_a, se_a = frontier_bias(*path, e)
            assert bias_a >= bias_b - 3 * math.hypot(se_a, se_b)


class TestConfidence:
    def test_writes_function_and_coverage(self, tmp_path):
        out = tmp_path / "confidence.csv"
        section = (
            "N = 10\nmax_leaves = 2\nfunctional = empirical_risk\nreps = 100\nvalidate_reps = 100\n"
            "n_members = 2\nn_bins = 5\nn_levels = 20\n"
        )
        assert run(tmp_path, "confidence", section, "--out", str(out)) == cli.EXIT_OK
        function = read(out)
        assert list(function.columns) == ["u", "r_hat"]
        assert np.all(np.diff(function["r_hat"]) >= 0.0)

        coverage = read(tmp_path / "confidence_coverage.csv")
        assert len(coverage) == 4
        assert set(coverage["split"]) == {"fit", "validate"}
        assert np.all(coverage.loc[coverage["split"] == "fit", "coverage"] >= 0.9 - 1e-12)
