"""
Tests for the command-line front end and the worked examples shipped in
fixtures/.

The reproductions run hundreds of EM runs and are marked slow.
"""

import json

import numpy as np
import pytest

from causal_fusion.cli import EXIT_DIAGNOSIS, EXIT_INPUT, EXIT_OK, build_parser, build_study, load_manifest, main
from causal_fusion.fusion import INDEX_VAR, SELECTOR_VAR, merge_studies
from causal_fusion.scm import MISSING
from causal_fusion.scm.tools import load_model

SAME_INDEX = "Treatment == drug and Gender == female or Treatment == 'no drug' and Gender == male"


def read_result(out):
    return json.loads((out / "result.json").read_text())


# ═══════════════════════════════════════════════════════════════════
# validate
# ═══════════════════════════════════════════════════════════════════


class TestValidate:
    def test_valid_model(self, fixtures_dir, capsys):
        assert main(["validate", "--model", str(fixtures_dir / "drug_trial_model.json")]) == EXIT_OK
        assert "VALID" in capsys.readouterr().out

    def test_cyclic_model(self, fixtures_dir, capsys):
        assert main(["validate", "--model", str(fixtures_dir / "cyclic_model.json")]) == EXIT_DIAGNOSIS
        assert "cycle" in capsys.readouterr().out

    def test_truncated_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"variables": [')
        assert main(["validate", "--model", str(path)]) == EXIT_INPUT

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--model", str(tmp_path / "absent.json")]) == EXIT_INPUT


# ═══════════════════════════════════════════════════════════════════
# query
# ═══════════════════════════════════════════════════════════════════


class TestQuery:
    def test_writes_result_and_runs(self, fixtures_dir, tmp_path):
        out = tmp_path / "out"
        code = main(["query", "--manifest", str(fixtures_dir / "observational_pns.json"), "--runs", "3", "--out", str(out)])
        assert code == EXIT_OK
        result = read_result(out)
        assert result["seed"] == 0
        assert len(result["per_run"]) == len(result["run_indices"])
        lower, upper = result["range"]
        assert 0.0 <= lower <= upper <= 1.0
        lines = (out / "runs.csv").read_text().splitlines()
        assert lines[0] == f"# manifest_hash={result['manifest_hash']}, seed=0"
        assert lines[1] == "run,value"

    def test_same_seed_same_bytes(self, fixtures_dir, tmp_path):
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / name
            main(["query", "--manifest", str(fixtures_dir / "observational_pns.json"), "--runs", "2", "--out", str(out)])
            outputs.append(((out / "result.json").read_bytes(), (out / "runs.csv").read_bytes()))
        assert outputs[0] == outputs[1]

    def test_unknown_manifest(self, tmp_path):
        assert main(["query", "--manifest", str(tmp_path / "absent.json")]) == EXIT_INPUT

    def test_conflicting_bias_options(self, fixtures_dir, tmp_path):
        code = main(
            [
                "query",
                "--manifest",
                str(fixtures_dir / "observational_pns.json"),
                "--p-s0",
                "0.5",
                "--n-s0",
                "10",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_INPUT

    def test_selected_only_study_needs_unselected_count(self, fixtures_dir, tmp_path):
        (tmp_path / "selected.csv").write_text(
            "Treatment,Gender,Survival,count\n"
            "drug,female,survived,378\n"
            "drug,female,dead,1022\n"
            "no drug,male,survived,420\n"
            "no drug,male,dead,180\n"
        )
        studies = [
            {"name": "biased", "dataset": "selected.csv", "selector": {"expression": SAME_INDEX}, "selectedOnly": True}
        ]
        (tmp_path / "studies.json").write_text(json.dumps(studies))
        code = main(
            [
                "query",
                "--model",
                str(fixtures_dir / "drug_trial_model.json"),
                "--studies",
                str(tmp_path / "studies.json"),
                "--query",
                str(fixtures_dir / "pns_query.json"),
                "--runs",
                "1",
                "--out",
                str(tmp_path / "out"),
            ]
        )
        assert code == EXIT_INPUT

    def test_unknown_selector_state(self, fixtures_dir, tmp_path):
        studies = [
            {
                "name": "biased",
                "dataset": str(fixtures_dir / "drug_trial_observational.csv"),
                "selector": {"expression": "Gender == other"},
            }
        ]
        (tmp_path / "studies.json").write_text(json.dumps(studies))
        code = main(
            [
                "query",
                "--model",
                str(fixtures_dir / "drug_trial_model.json"),
                "--studies",
                str(tmp_path / "studies.json"),
                "--query",
                str(fixtures_dir / "pns_query.json"),
                "--out",
                str(tmp_path / "out"),
            ]
        )
        assert code == EXIT_INPUT


# ═══════════════════════════════════════════════════════════════════
# Studies
# ═══════════════════════════════════════════════════════════════════


class TestStudies:
    def test_selector_column_becomes_the_unselected_stratum(self, fixtures_dir):
        args = build_parser().parse_args(["query", "--manifest", str(fixtures_dir / "fused_selected_pns.json")])
        manifest = load_manifest(args)
        model = load_model(manifest.model)
        studies = [build_study(model, study, manifest) for study in manifest.studies]
        assert studies[1].biased().n_unselected == 2000

        merged = merge_studies(studies, model)
        flags = merged.dataset.column(SELECTOR_VAR)
        lost = merged.dataset.select(flags == 0)
        assert lost.total == 2000
        assert np.all(lost.column(INDEX_VAR) == merged.w_study.index(1))
        for name in model.endogenous:
            assert np.all(lost.column(name) == MISSING)
        assert merged.dataset.select(flags == 1).total == 6000


# ═══════════════════════════════════════════════════════════════════
# bench
# ═══════════════════════════════════════════════════════════════════


class TestBench:
    def test_invalid_config(self, tmp_path):
        config = tmp_path / "bench.json"
        config.write_text(json.dumps({"nEndogenous": [1, 2]}))
        assert main(["bench", "--config", str(config), "--out", str(tmp_path)]) == EXIT_INPUT

    @pytest.mark.slow
    def test_smoke(self, fixtures_dir, tmp_path):
        code = main(
            ["bench", "--config", str(fixtures_dir / "bench_smoke.json"), "--n-models", "2", "--out", str(tmp_path)]
        )
        assert code == EXIT_OK
        assert (tmp_path / "bench_fusion.csv").read_text().startswith("# manifest_hash=")
        summary = json.loads((tmp_path / "bench_fusion_summary.json").read_text())
        assert summary["seed"] == 7


# ═══════════════════════════════════════════════════════════════════
# Worked examples
# ═══════════════════════════════════════════════════════════════════


@pytest.mark.slow
class TestWorkedExamples:
    """PNS(drug -> survival) ranges of the drug-trial examples."""

    @pytest.mark.parametrize(
        ("manifest", "expected", "slack"),
        [
            ("observational_pns.json", (0.0, 0.43), 0.03),
            ("selected_pns.json", (0.0, 0.73), 0.04),
            ("fused_pns.json", (0.32, 0.42), 0.03),
            ("fused_selected_pns.json", (0.27, 0.53), 0.04),
            ("local_chances_pns.json", (0.20, 0.54), 0.04),
        ],
    )
    def test_range(self, fixtures_dir, tmp_path, manifest, expected, slack):
        assert main(["query", "--manifest", str(fixtures_dir / manifest), "--out", str(tmp_path)]) == EXIT_OK
        lower, upper = read_result(tmp_path)["range"]
        assert lower == pytest.approx(expected[0], abs=slack)
        assert upper == pytest.approx(expected[1], abs=slack)

    def test_local_chances_widen_the_fused_range(self, fixtures_dir, tmp_path):
        widths = []
        for manifest in ("fused_pns.json", "local_chances_pns.json"):
            out = tmp_path / manifest
            assert main(["query", "--manifest", str(fixtures_dir / manifest), "--out", str(out)]) == EXIT_OK
            lower, upper = read_result(out)["range"]
            widths.append(upper - lower)
        assert widths[1] > widths[0]

    def test_males_from_interventional_data(self, fixtures_dir, tmp_path):
        assert main(["query", "--manifest", str(fixtures_dir / "interventional_males_pns.json"), "--out", str(tmp_path)]) == EXIT_OK
        assert all(0.26 <= value <= 0.51 for value in read_result(tmp_path)["per_run"])

    def test_selected_only_with_probability(self, fixtures_dir, tmp_path):
        """The same-index records with P(S=0) = 0.5 reproduce the fully specified biased study."""
        (tmp_path / "selected.csv").write_text(
            "Treatment,Gender,Survival,count\n"
            "drug,female,survived,378\n"
            "drug,female,dead,1022\n"
            "no drug,male,survived,420\n"
            "no drug,male,dead,180\n"
        )
        studies = [
            {"name": "biased", "dataset": "selected.csv", "selector": {"expression": SAME_INDEX}, "selectedOnly": True}
        ]
        (tmp_path / "studies.json").write_text(json.dumps(studies))
        code = main(
            [
                "query",
                "--model",
                str(fixtures_dir / "drug_trial_model.json"),
                "--studies",
                str(tmp_path / "studies.json"),
                "--query",
                str(fixtures_dir / "pns_query.json"),
                "--runs",
                "300",
                "--p-s0",
                "0.5",
                "--out",
                str(tmp_path / "out"),
            ]
        )
        assert code == EXIT_OK
        lower, upper = read_result(tmp_path / "out")["range"]
        assert lower == pytest.approx(0.0, abs=0.04)
        assert upper == pytest.approx(0.73, abs=0.04)

    def test_bias_sweep(self, fixtures_dir, tmp_path):
        code = main(
            [
                "bias-sweep",
                "--manifest",
                str(fixtures_dir / "observational_pns.json"),
                "--scope",
                "Treatment,Gender",
                "--runs",
                "100",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        levels = json.loads((tmp_path / "bias_sweep.json").read_text())["levels"]
        assert [round(level["p_selected"], 2) for level in levels] == [1.0, 0.65, 0.3, 0.15]
        widths = [level["range"][1] - level["range"][0] for level in levels]
        for narrower, wider in zip(widths, widths[1:]):
            assert wider >= narrower - 0.02
