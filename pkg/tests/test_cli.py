"""End-to-end CLI behavior: determinism, validation exits, overrides."""

import json
import subprocess
import sys

import pytest

from mixcap.analysis import estimate_threshold_popularity, AccuracyObservation
from mixcap.cli import main
from mixcap.corpus import RECORD_ENTROPY_BITS


MIX_DOC = {
    "mixture": {
        "knowledge": {"facts": [{"p": 0.001, "h": 5.0} for _ in range(100)], "c1": 1.0},
        "web": {"power_law": {"c": 1.0, "a": 100.0, "alpha": 0.5}},
        "r": 0.25,
    },
    "capacity": 4000.0,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(MIX_DOC))
    return path


def run(argv):
    return main([str(a) for a in argv])


class TestAllocate:
    def test_happy_path_and_rerun_identical(self, tmp_path, config_path):
        out1 = tmp_path / "a1.json"
        out2 = tmp_path / "a2.json"
        assert run(["allocate", "--config", config_path, "--out", out1]) == 0
        assert run(["allocate", "--config", config_path, "--out", out2]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        doc = json.loads(out1.read_text())
        assert set(doc) == {"m1", "m2", "loss1", "loss2", "loss", "learned"}

    def test_capacity_flag_overrides_config(self, tmp_path, config_path):
        out_default = tmp_path / "d.json"
        out_flag = tmp_path / "f.json"
        run(["allocate", "--config", config_path, "--out", out_default])
        run(["allocate", "--config", config_path, "--capacity", 100, "--out", out_flag])
        m2_default = json.loads(out_default.read_text())["m2"]
        m2_flag = json.loads(out_flag.read_text())["m2"]
        assert m2_default != m2_flag
        assert m2_flag <= 100.0

    def test_invalid_ratio_exits_2_naming_parameter(self, tmp_path, config_path, capsys):
        code = run(
            ["allocate", "--config", config_path, "--ratio", 1.5, "--out", tmp_path / "x.json"]
        )
        assert code == 2
        assert "mixing_ratio" in capsys.readouterr().err

    def test_json_errors_flag(self, tmp_path, config_path, capsys):
        code = run(
            [
                "allocate",
                "--config",
                config_path,
                "--ratio",
                1.5,
                "--out",
                tmp_path / "x.json",
                "--json-errors",
            ]
        )
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert "mixing_ratio" in err["error"]


class TestThresholds:
    def test_bits_to_params_conversion(self, tmp_path, config_path):
        bits_out = tmp_path / "bits.json"
        params_out = tmp_path / "params.json"
        assert run(["thresholds", "--config", config_path, "--out", bits_out]) == 0
        assert (
            run(
                [
                    "thresholds",
                    "--config",
                    config_path,
                    "--units",
                    "params",
                    "--bits-per-param",
                    2,
                    "--capacity",
                    2000,
                    "--out",
                    params_out,
                ]
            )
            == 0
        )
        bits = json.loads(bits_out.read_text())
        params = json.loads(params_out.read_text())
        assert params["units"] == "parameters"
        assert params["m_lower"] == pytest.approx(bits["m_lower"] / 2.0)
        assert params["m_upper"] == pytest.approx(bits["m_upper"] / 2.0)
        assert bits["exponent"] == pytest.approx(1.5)

    def test_heterogeneous_universe_exits_2(self, tmp_path, capsys):
        doc = json.loads(json.dumps(MIX_DOC))
        doc["mixture"]["knowledge"]["facts"] = [
            {"p": 0.5, "h": 1.0},
            {"p": 0.1, "h": 1.0},
        ]
        path = tmp_path / "hetero.json"
        path.write_text(json.dumps(doc))
        assert run(["thresholds", "--config", path, "--out", tmp_path / "t.json"]) == 2
        assert "uniform" in capsys.readouterr().err


class TestSweep:
    def test_csv_and_sidecar(self, tmp_path, config_path):
        out = tmp_path / "sweep.csv"
        argv = [
            "sweep",
            "--config",
            config_path,
            "--axis",
            "model_size",
            "--out",
            out,
        ]
        # grid comes from the config file
        doc = json.loads(config_path.read_text())
        doc["grid"] = [100.0, 2000.0, 4000.0, 9000.0]
        config_path.write_text(json.dumps(doc))
        assert run(argv) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "axis,accuracy,accuracy_count,knowledge_loss,web_loss,mixture_loss"
        assert len(lines) == 5
        sidecar = json.loads((tmp_path / "sweep_thresholds.json").read_text())
        assert "m_lower" in sidecar
        # Determinism.
        out2 = tmp_path / "sweep2.csv"
        run(argv[:-1] + [out2])
        assert out.read_bytes() == out2.read_bytes()

    def test_single_point_grid(self, tmp_path, config_path):
        doc = json.loads(config_path.read_text())
        doc["grid"] = [500.0]
        config_path.write_text(json.dumps(doc))
        out = tmp_path / "one.csv"
        assert (
            run(["sweep", "--config", config_path, "--axis", "model_size", "--out", out])
            == 0
        )
        assert len(out.read_text().strip().split("\n")) == 2


class TestSubsets:
    def test_outputs_and_determinism(self, tmp_path):
        config = tmp_path / "subsets.json"
        config.write_text(
            json.dumps(
                {
                    "group_count": 4,
                    "group_size": 2,
                    "capacity_grid": [1e9, 5e9],
                }
            )
        )
        out = tmp_path / "subsets.csv"
        assert run(["subsets", "--config", config, "--out", out]) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "capacity,group,weight,accuracy"
        assert len(lines) == 1 + 2 * 4
        thr = (tmp_path / "subsets_thresholds.csv").read_text().strip().split("\n")
        assert thr[0] == "capacity,f_thres"
        out2 = tmp_path / "subsets2.csv"
        run(["subsets", "--config", config, "--out", out2])
        assert out.read_bytes() == out2.read_bytes()


class TestSynbio:
    def test_deterministic_jsonl(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        assert run(["synbio", "--count", 100, "--seed", 7, "--out", a]) == 0
        assert run(["synbio", "--count", 100, "--seed", 7, "--out", b]) == 0
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().strip().split("\n")
        assert len(lines) == 100
        doc = json.loads(lines[0])
        assert set(doc) == {"name", "attrs", "pronoun"}

    def test_seed_required(self, tmp_path, capsys):
        assert run(["synbio", "--count", 10, "--out", tmp_path / "x.jsonl"]) == 2
        assert "--seed" in capsys.readouterr().err

    def test_render_out(self, tmp_path):
        out = tmp_path / "r.jsonl"
        rendered = tmp_path / "r.txt"
        assert (
            run(
                [
                    "synbio",
                    "--count",
                    5,
                    "--seed",
                    3,
                    "--out",
                    out,
                    "--render-out",
                    rendered,
                ]
            )
            == 0
        )
        lines = rendered.read_text().strip().split("\n")
        assert len(lines) == 5
        name = json.loads(out.read_text().split("\n")[0])["name"]
        assert name in lines[0]


class TestMixplan:
    def test_epochs(self, tmp_path):
        out = tmp_path / "plan.json"
        assert (
            run(
                [
                    "mixplan",
                    "--total-tokens",
                    32e9,
                    "--ratio",
                    0.1,
                    "--knowledge-tokens",
                    3.2e7,
                    "--fact-count",
                    320000,
                    "--tokens-per-fact",
                    100,
                    "--out",
                    out,
                ]
            )
            == 0
        )
        doc = json.loads(out.read_text())
        assert doc["knowledge_epochs"] == pytest.approx(100.0)

    def test_pool_exhaustion_names_sample(self, tmp_path, capsys):
        code = run(
            [
                "mixplan",
                "--total-tokens",
                1e9,
                "--ratio",
                0.1,
                "--knowledge-tokens",
                1e6,
                "--web-pool-tokens",
                1e8,
                "--out",
                tmp_path / "p.json",
            ]
        )
        assert code == 2
        assert "(1-r)S" in capsys.readouterr().err


class TestSubsampleAndCkm:
    def test_subsample(self, tmp_path):
        records = tmp_path / "recs.jsonl"
        run(["synbio", "--count", 40, "--seed", 5, "--out", records])
        out = tmp_path / "kept.jsonl"
        assert (
            run(
                [
                    "subsample",
                    "--records",
                    records,
                    "--keep-ratio",
                    0.25,
                    "--seed",
                    9,
                    "--out",
                    out,
                ]
            )
            == 0
        )
        assert len(out.read_text().strip().split("\n")) == 10

    def test_ckm_summary(self, tmp_path, capsys):
        records = tmp_path / "recs.jsonl"
        run(["synbio", "--count", 10, "--seed", 5, "--out", records])
        capsys.readouterr()
        out = tmp_path / "ckm.txt"
        assert (
            run(["ckm", "--records", records, "--ckm-ratio", 0.3, "--seed", 2, "--out", out])
            == 0
        )
        summary = json.loads(capsys.readouterr().out)
        assert summary["realized_ratio"] >= 0.3
        assert out.read_text().startswith("Bio: N ")


class TestEstimateAndFit:
    def test_estimate_defaults(self, tmp_path):
        obs_path = tmp_path / "obs.csv"
        xs = list(range(1, 21))
        ys = [0] * 10 + [1] * 10
        obs_path.write_text(
            "popularity,correct\n"
            + "".join(f"{x},{y}\n" for x, y in zip(xs, ys))
        )
        out = tmp_path / "thr.json"
        assert run(["estimate", "--observations", obs_path, "--out", out]) == 0
        doc = json.loads(out.read_text())
        assert doc["accuracy_target"] == 0.6
        assert doc["max_failures"] == 5
        expected = estimate_threshold_popularity(
            [AccuracyObservation(float(x), bool(y)) for x, y in zip(xs, ys)]
        )
        assert doc["threshold_popularity"] == expected

    def test_fit_models(self, tmp_path):
        pts = tmp_path / "pts.csv"
        pts.write_text("x,y\n" + "".join(f"{x},{x*x}\n" for x in (1.0, 2.0, 3.0, 4.0)))
        out = tmp_path / "fit.json"
        assert run(["fit", "--points", pts, "--model", "loglog", "--out", out]) == 0
        doc = json.loads(out.read_text())
        assert doc["model"] == "loglog"
        assert doc["params"]["slope"] == pytest.approx(2.0)

    def test_unknown_model_exits_2(self, tmp_path, capsys):
        pts = tmp_path / "pts.csv"
        pts.write_text("x,y\n1,1\n2,4\n3,9\n")
        assert (
            run(["fit", "--points", pts, "--model", "cubic", "--out", tmp_path / "f.json"])
            == 2
        )
        assert "model" in capsys.readouterr().err


class TestPlumbing:
    def test_out_dir_env(self, tmp_path, monkeypatch, config_path):
        monkeypatch.setenv("MIXCAP_OUT_DIR", str(tmp_path / "outputs"))
        assert run(["allocate", "--config", config_path]) == 0
        assert (tmp_path / "outputs" / "allocation.json").exists()

    def test_console_script_entry(self, tmp_path, config_path):
        result = subprocess.run(
            [
                sys.executable,
                "-m",
                "mixcap.cli",
                "allocate",
                "--config",
                str(config_path),
                "--out",
                str(tmp_path / "out.json"),
            ],
            capture_output=True,
        )
        assert result.returncode == 0
        assert (tmp_path / "out.json").exists()

    def test_unsupported_format_exits_2(self, tmp_path, config_path, capsys):
        code = run(
            [
                "allocate",
                "--config",
                config_path,
                "--format",
                "csv",
                "--out",
                tmp_path / "x.csv",
            ]
        )
        assert code == 2
        assert "format" in capsys.readouterr().err

    def test_synbio_mixplan_thresholds_round_trip(self, tmp_path):
        # Generate a corpus, measure its per-fact token cost, and feed the
        # derived universe to the threshold command: the per-fact entropy is
        # the corpus record entropy by construction.
        records = tmp_path / "bios.jsonl"
        k = 50
        assert run(["synbio", "--count", k, "--seed", 11, "--out", records]) == 0
        plan_out = tmp_path / "plan.json"
        assert (
            run(
                [
                    "mixplan",
                    "--total-tokens",
                    1e9,
                    "--ratio",
                    0.1,
                    "--knowledge-tokens",
                    1e5,
                    "--fact-count",
                    k,
                    "--records",
                    records,
                    "--seed",
                    11,
                    "--out",
                    plan_out,
                ]
            )
            == 0
        )
        plan = json.loads(plan_out.read_text())
        p_within = plan["per_fact_frequency"] / plan["mixing_ratio"]
        config = tmp_path / "derived.json"
        config.write_text(
            json.dumps(
                {
                    "mixture": {
                        "knowledge": {
                            "facts": [
                                {"p": p_within, "h": RECORD_ENTROPY_BITS}
                                for _ in range(k)
                            ],
                            "c1": 0.0,
                        },
                        "web": {"power_law": {"c": 1.0, "a": 100.0, "alpha": 0.5}},
                        "r": plan["mixing_ratio"],
                    },
                    "capacity": 1e7,
                }
            )
        )
        thr_out = tmp_path / "derived_thr.json"
        assert run(["thresholds", "--config", config, "--out", thr_out]) == 0
        doc = json.loads(thr_out.read_text())
        derived = json.loads(config.read_text())
        assert derived["mixture"]["knowledge"]["facts"][0]["h"] == pytest.approx(
            RECORD_ENTROPY_BITS, abs=1e-9
        )
        assert doc["m_upper"] - doc["m_lower"] == pytest.approx(
            k * RECORD_ENTROPY_BITS, rel=1e-9
        )
