"""End-to-end tests of the command-line interface via cli.main."""

import json
import math

import pytest

from snmlkit import cli, parse_report_csv, tweedie


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestKl:
    def test_plain_output(self, capsys):
        code, out, err = run(capsys, "kl", "--family", "tweedie32", "--mu0", "1", "--mu1", "4")
        assert code == 0
        assert err == ""
        assert float(out.strip()) == pytest.approx(0.5, rel=1e-12)

    def test_json_output(self, capsys):
        code, out, _ = run(
            capsys, "kl", "--family", "gaussian", "--mu0", "0", "--mu1", "2", "--format", "json"
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["mu0"] == 0.0
        assert payload["mu1"] == 2.0
        assert payload["kl"] == pytest.approx(2.0, rel=1e-12)

    def test_domain_error_exits_2(self, capsys):
        code, out, err = run(capsys, "kl", "--family", "bernoulli", "--mu0", "1.5", "--mu1", "0.5")
        assert code == 2
        assert out == ""
        assert "error:" in err and "1.5" in err


class TestPredict:
    def test_csv_symmetric_densities(self, capsys):
        code, out, _ = run(
            capsys,
            "predict",
            "--family",
            "gaussian",
            "--history",
            "0.5,-1.0",
            "--points=-0.75,-0.25,0.25",
            "--format",
            "csv",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "point,density,log_density"
        rows = [line.split(",") for line in lines[1:]]
        densities = [float(r[1]) for r in rows]
        assert densities[0] == pytest.approx(densities[2], rel=1e-12)
        assert densities[1] == pytest.approx(1.0 / math.sqrt(3 * math.pi), rel=1e-10)
        for r in rows:
            assert float(r[1]) == pytest.approx(math.exp(float(r[2])), rel=1e-12)

    def test_json_bayes(self, capsys):
        code, out, _ = run(
            capsys,
            "predict",
            "--family",
            "gamma",
            "--shape",
            "1.0",
            "--strategy",
            "bayes",
            "--history",
            "1.0",
            "--points",
            "1.0",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["strategy"] == "bayes"
        assert payload["density"][0] == pytest.approx(0.25, rel=1e-9)

    def test_missing_points_exits_2(self, capsys):
        code, _, err = run(capsys, "predict", "--family", "gaussian", "--points", "")
        assert code == 2
        assert "error:" in err


class TestJoint:
    def test_bernoulli_exact_field(self, capsys):
        code, out, _ = run(
            capsys, "joint", "--family", "bernoulli", "--seq", "1,1,0", "--format", "json"
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["exact"] == "8/155"
        assert payload["value"] == pytest.approx(8 / 155, rel=1e-15)
        assert (payload["m"], payload["n"]) == (0, 3)

    def test_plain_gaussian_value(self, capsys):
        code, out, _ = run(
            capsys, "joint", "--family", "gaussian", "--seq", "0,0,2", "--m", "1"
        )
        assert code == 0
        want = (1.0 / (2 * math.sqrt(math.pi))) * math.exp(-4.0 / 3.0) / math.sqrt(3 * math.pi)
        assert float(out.strip()) == pytest.approx(want, rel=1e-10)

    def test_unknown_flag_exits_2(self, capsys):
        code, _, _ = run(capsys, "joint", "--family", "bernoulli", "--values", "1,0")
        assert code == 2


class TestRegret:
    def test_nml_equalizer_value(self, capsys):
        code, out, _ = run(
            capsys,
            "regret",
            "--family",
            "bernoulli",
            "--strategy",
            "nml",
            "--seq",
            "1,0",
            "--format",
            "plain",
        )
        assert code == 0
        assert float(out.strip()) == pytest.approx(math.log(2.5), abs=1e-12)

    def test_json_fields_satisfy_identity(self, capsys):
        code, out, _ = run(
            capsys, "regret", "--family", "bernoulli", "--strategy", "snml", "--seq", "1,0,1"
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["regret"] == pytest.approx(
            payload["strategy_loss"] + payload["best_expert_loglik"], abs=1e-12
        )


class TestCheckConstancy:
    def test_gamma_expect_constant(self, capsys):
        code, out, _ = run(
            capsys,
            "check-constancy",
            "--family",
            "gamma",
            "--shape",
            "1",
            "--n",
            "2",
            "--grid",
            "0.5,1,2,5",
            "--expect",
            "constant",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["verdict"] == "Constant"
        for value in payload["values"]:
            assert value == pytest.approx(math.e**2 / 4, rel=1e-8)

    def test_expect_contradiction_exits_1(self, capsys):
        code, out, _ = run(
            capsys,
            "check-constancy",
            "--family",
            "gamma",
            "--n",
            "2",
            "--grid",
            "0.5,1,2",
            "--expect",
            "nonconstant",
        )
        assert code == 1
        assert json.loads(out)["verdict"] == "Constant"

    def test_poisson_nonconstant_with_linspace_grid(self, capsys):
        code, out, _ = run(
            capsys,
            "check-constancy",
            "--family",
            "poisson",
            "--n",
            "2",
            "--grid",
            "linspace:0.5:2:4",
            "--expect",
            "nonconstant",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["grid"] == [0.5, 1.0, 1.5, 2.0]

    def test_csv_output_file_round_trips(self, capsys, tmp_path):
        target = tmp_path / "report.csv"
        code, out, _ = run(
            capsys,
            "check-constancy",
            "--family",
            "gaussian",
            "--n",
            "3",
            "--grid",
            "0,1",
            "--format",
            "csv",
            "--output",
            str(target),
        )
        assert code == 0
        assert out == ""
        grid, values, _ = parse_report_csv(target.read_text())
        assert grid == (0.0, 1.0)
        for value in values:
            assert value == pytest.approx(math.sqrt(2 * math.pi / 3), rel=1e-9)

    def test_single_point_grid_exits_2(self, capsys):
        code, _, err = run(
            capsys, "check-constancy", "--family", "gaussian", "--n", "2", "--grid", "1.0"
        )
        assert code == 2
        assert "error:" in err


class TestCheckExchangeability:
    def test_bernoulli_auto_uses_full_enumeration(self, capsys):
        code, out, _ = run(
            capsys,
            "check-exchangeability",
            "--family",
            "bernoulli",
            "--m",
            "0",
            "--n",
            "3",
            "--expect",
            "nonconstant",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["verdict"] == "NonConstant"
        witness = payload["details"]["witness"]
        assert witness["max_joint"] == "8/155"
        assert witness["min_joint"] == "1/20"

    def test_gaussian_explicit_continuations(self, capsys):
        code, out, _ = run(
            capsys,
            "check-exchangeability",
            "--family",
            "gaussian",
            "--m",
            "1",
            "--n",
            "3",
            "--history",
            "0.5",
            "--continuations",
            "0,2;1,-1",
            "--expect",
            "constant",
        )
        assert code == 0
        assert json.loads(out)["max_abs_deviation"] == 0.0

    def test_deterministic_output(self, capsys):
        argv = (
            "check-exchangeability",
            "--family",
            "gamma",
            "--m",
            "1",
            "--n",
            "3",
            "--count",
            "3",
            "--seed",
            "5",
        )
        code1, out1, _ = run(capsys, *argv)
        code2, out2, _ = run(capsys, *argv)
        assert code1 == code2 == 0
        assert out1 == out2


class TestCheckOde:
    def test_tweedie_variance_constant(self, capsys):
        code, out, _ = run(
            capsys,
            "check-ode",
            "--variance",
            "2*mu**(3/2)",
            "--domain",
            "0.5,4",
            "--expect",
            "constant",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["details"]["c"] == pytest.approx(0.0, abs=1e-9)

    def test_higher_order_flag(self, capsys):
        code, out, _ = run(
            capsys,
            "check-ode",
            "--variance",
            "mu**3",
            "--domain",
            "0.5,4",
            "--higher-order",
            "--expect",
            "nonconstant",
        )
        assert code == 0
        assert json.loads(out)["verdict"] == "NonConstant"

    def test_table_input(self, capsys, tmp_path):
        table = tmp_path / "variance.csv"
        rows = [f"{0.5 + 3.5 * i / 63},{(0.5 + 3.5 * i / 63) ** 2 / 2}" for i in range(64)]
        table.write_text("\n".join(rows) + "\n")
        code, out, _ = run(
            capsys, "check-ode", "--table", str(table), "--expect", "constant"
        )
        assert code == 0
        assert json.loads(out)["details"]["c"] == pytest.approx(0.5, abs=1e-6)

    def test_missing_spec_exits_2(self, capsys):
        code, _, err = run(capsys, "check-ode")
        assert code == 2
        assert "error:" in err


class TestClassify:
    def test_gamma_shape_json(self, capsys):
        code, out, _ = run(capsys, "classify", "--variance", "mu**2/2", "--domain", "0.5,4")
        assert code == 0
        payload = json.loads(out)
        assert payload["family_class"] == "GammaLinearSigma"
        assert payload["coefficients"]["gamma_shape"] == pytest.approx(2.0, rel=1e-8)

    def test_not_exchangeable_reason(self, capsys):
        code, out, _ = run(capsys, "classify", "--variance", "1 + mu**2", "--domain", "0.5,4")
        assert code == 0
        payload = json.loads(out)
        assert payload["family_class"] == "NotExchangeable"
        assert "discriminant" in payload["reason"]


class TestLaplace:
    def test_gamma_ratios(self, capsys):
        code, out, _ = run(
            capsys,
            "laplace",
            "--family",
            "gamma",
            "--shape",
            "1",
            "--mu0",
            "1",
            "--expect",
            "constant",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["verdict"] == "Constant"
        assert payload["values"][2] == pytest.approx(1.008365, rel=1e-5)

    def test_boundary_needs_restricted_domain(self, capsys):
        code, out, _ = run(
            capsys,
            "laplace",
            "--family",
            "gaussian",
            "--mean-domain",
            "1,inf",
            "--mu0",
            "1",
            "--position",
            "boundary",
            "--n-list",
            "2,5",
        )
        assert code == 0
        for ratio in json.loads(out)["values"]:
            assert ratio == pytest.approx(1.0, abs=1e-7)


class TestSampleTweedie:
    def test_matches_library_sampler(self, capsys):
        code, out, _ = run(capsys, "sample-tweedie", "--mu", "1", "--count", "5", "--seed", "7")
        assert code == 0
        got = [float(line) for line in out.strip().splitlines()]
        assert got == list(tweedie.sample(1.0, 5, seed=7))

    def test_seventeen_digit_output_round_trips(self, capsys):
        code, out, _ = run(capsys, "sample-tweedie", "--mu", "2", "--count", "8", "--seed", "0")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 8
        for line, value in zip(lines, tweedie.sample(2.0, 8, seed=0)):
            assert line == format(value, ".17g")


class TestFamilySelection:
    def test_family_json_inline(self, capsys):
        spec = json.dumps({"kind": "gamma_shape", "shape": 2.0})
        code, out, _ = run(capsys, "kl", "--family-json", spec, "--mu0", "1", "--mu1", "2")
        assert code == 0
        want = 2.0 * (1 / 2 - 1 - math.log(1 / 2))
        assert float(out.strip()) == pytest.approx(want, rel=1e-12)

    def test_family_json_from_file(self, capsys, tmp_path):
        path = tmp_path / "family.json"
        path.write_text(json.dumps({"kind": "gaussian_location", "sigma2": 4.0}))
        code, out, _ = run(capsys, "kl", "--family-json", f"@{path}", "--mu0", "0", "--mu1", "2")
        assert code == 0
        assert float(out.strip()) == pytest.approx(0.5, rel=1e-12)

    def test_mean_domain_restriction_is_enforced(self, capsys):
        code, _, err = run(
            capsys,
            "kl",
            "--family",
            "gaussian",
            "--mean-domain",
            "1,inf",
            "--mu0",
            "0.5",
            "--mu1",
            "2",
        )
        assert code == 2
        assert "error:" in err

    def test_missing_family_exits_2(self, capsys):
        code, _, err = run(capsys, "kl", "--mu0", "0", "--mu1", "1")
        assert code == 2
        assert "error:" in err


class TestUsage:
    def test_no_subcommand_exits_2(self, capsys):
        assert cli.main([]) == 2
        capsys.readouterr()

    def test_bad_choice_exits_2(self, capsys):
        assert cli.main(["joint", "--family", "bernoulli", "--strategy", "mdl", "--seq", "1"]) == 2
        capsys.readouterr()

    def test_help_exits_0(self, capsys):
        assert cli.main(["--help"]) == 0
        out = capsys.readouterr().out
        assert "kl" in out and "sample-tweedie" in out
