import json
import math

import numpy as np
import pytest

from nts_lab.cli import main
from nts_lab.harness import (
    ConfigError,
    config_digest,
    parse_config,
    run_explore_compare,
    run_nts,
    run_rdf,
    run_redundancy_sweep,
)
from nts_lab.probability import binary_entropy


MINIMAL_RDF = """\
schema_version: 1
kind: rdf_point
source: [0.5, 0.5]
distortion: hamming
target_distortion: 0.1
"""

NTS_DOC = """\
schema_version: 1
kind: nts_run
source: [0.4, 0.6]
target_distortion: 0.25
word_length: 32
seeds: [0, 1]
generations: 5
max_search_index: 4096
"""


class TestParseConfig:
    def test_minimal_rdf_point(self):
        config = parse_config(MINIMAL_RDF)
        assert config.kind == "rdf_point"
        assert config.target_distortion == 0.1
        assert np.allclose(config.source.probs, [0.5, 0.5])
        assert config.tolerance == 1e-9  # default filled

    def test_negative_distortion_names_field(self):
        doc = MINIMAL_RDF.replace("0.1", "-0.1")
        with pytest.raises(ConfigError, match="target_distortion"):
            parse_config(doc)

    def test_duplicate_seed_rejected(self):
        doc = NTS_DOC.replace("[0, 1]", "[0, 1, 1]")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(doc)

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="fidelity"):
            parse_config(MINIMAL_RDF + "fidelity: 3\n")

    def test_schema_version_required(self):
        doc = MINIMAL_RDF.replace("schema_version: 1\n", "")
        with pytest.raises(ConfigError, match="schema_version"):
            parse_config(doc)
        with pytest.raises(ConfigError, match="schema_version"):
            parse_config(MINIMAL_RDF.replace("schema_version: 1", "schema_version: 2"))

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="kind"):
            parse_config(MINIMAL_RDF.replace("rdf_point", "rdf_party"))

    def test_word_lengths_must_increase(self):
        doc = """\
schema_version: 1
kind: redundancy_sweep
source: [0.5, 0.5]
target_distortion: 0.3
word_lengths: [16, 16, 32]
"""
        with pytest.raises(ConfigError, match="word_lengths"):
            parse_config(doc)

    def test_explore_needs_two_models(self):
        doc = """\
schema_version: 1
kind: explore_compare
source: [0.5, 0.5]
target_distortion: 0.3
word_length: 8
models:
  - {kind: iid, label: only}
seeds: [0]
kl_threshold: 0.1
"""
        with pytest.raises(ConfigError, match="models"):
            parse_config(doc)

    def test_explore_labels_distinct(self):
        doc = """\
schema_version: 1
kind: explore_compare
source: [0.5, 0.5]
target_distortion: 0.3
word_length: 8
models:
  - {kind: iid, label: same}
  - {kind: uniform_types, label: same}
seeds: [0]
kl_threshold: 0.1
"""
        with pytest.raises(ConfigError, match="label"):
            parse_config(doc)

    def test_bad_source_named(self):
        with pytest.raises(ConfigError, match="source"):
            parse_config(MINIMAL_RDF.replace("[0.5, 0.5]", "[0.5, -0.5]"))

    def test_explicit_matrix_distortion(self):
        doc = MINIMAL_RDF.replace(
            "distortion: hamming",
            "distortion: {matrix: [[0.0, 2.0], [1.0, 0.0]]}",
        )
        config = parse_config(doc)
        assert config.distortion.matrix[0, 1] == 2.0

    def test_digest_stable(self):
        assert config_digest(MINIMAL_RDF) == config_digest(MINIMAL_RDF)
        assert config_digest(MINIMAL_RDF) != config_digest(NTS_DOC)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    return header, rows


class TestRunRdf:
    def test_binary_point_rate(self, tmp_path):
        doc = MINIMAL_RDF.replace("[0.5, 0.5]", "[0.4, 0.6]").replace("0.1", "0.25")
        run_rdf(parse_config(doc), str(tmp_path))
        _, rows = read_csv(tmp_path / "points.csv")
        expected = binary_entropy(0.4) - binary_entropy(0.25)
        assert float(rows[0]["rate"]) == pytest.approx(expected, abs=1e-6)

    def test_dmax_point_mass_in_csv(self, tmp_path):
        doc = MINIMAL_RDF.replace("[0.5, 0.5]", "[0.3, 0.7]").replace("0.1", "0.3")
        run_rdf(parse_config(doc), str(tmp_path))
        _, rows = read_csv(tmp_path / "points.csv")
        assert float(rows[0]["rate"]) == 0.0
        assert [float(v) for v in rows[0]["q_star"].split(";")] == [0.0, 1.0]

    def test_curve_rows_and_monotonicity(self, tmp_path):
        doc = """\
schema_version: 1
kind: rdf_curve
source: [0.4, 0.6]
n_points: 11
"""
        run_rdf(parse_config(doc), str(tmp_path))
        _, rows = read_csv(tmp_path / "points.csv")
        assert len(rows) == 11
        rates = [float(r["rate"]) for r in rows]
        assert all(b <= a + 1e-8 for a, b in zip(rates, rates[1:]))

    def test_manifest_lists_existing_files(self, tmp_path):
        manifest = run_rdf(parse_config(MINIMAL_RDF), str(tmp_path))
        for name in manifest.output_files:
            f = tmp_path / name
            assert f.exists() and f.stat().st_size > 0
        recorded = json.loads((tmp_path / "manifest.json").read_text())
        assert recorded["config_digest"] == config_digest(MINIMAL_RDF)


class TestRunNts:
    def test_aggregate_and_traces(self, tmp_path):
        config = parse_config(NTS_DOC)
        run_nts(config, str(tmp_path))
        agg = json.loads((tmp_path / "aggregate.json").read_text())
        assert len(agg["kl_median"]) == 5
        assert (tmp_path / "trace_seed0000.csv").exists()
        assert (tmp_path / "trace_seed0001.csv").exists()

    def test_cross_module_rate_consistency(self, tmp_path):
        # the solved reference rate must agree with a direct rdf run
        config = parse_config(NTS_DOC)
        run_nts(config, str(tmp_path / "nts"))
        agg = json.loads((tmp_path / "nts" / "aggregate.json").read_text())
        doc = MINIMAL_RDF.replace("[0.5, 0.5]", "[0.4, 0.6]").replace("0.1", "0.25")
        run_rdf(parse_config(doc), str(tmp_path / "rdf"))
        _, rows = read_csv(tmp_path / "rdf" / "points.csv")
        assert abs(agg["rate_reference"] - float(rows[0]["rate"])) <= 1e-9

    def test_zero_generations_valid_headers(self, tmp_path):
        config = parse_config(NTS_DOC.replace("generations: 5", "generations: 0"))
        run_nts(config, str(tmp_path))
        lines = (tmp_path / "trace_seed0000.csv").read_text().splitlines()
        assert len(lines) == 1 and lines[0].startswith("generation,")

    def test_rerun_byte_identical(self, tmp_path):
        config = parse_config(NTS_DOC)
        run_nts(config, str(tmp_path / "a"))
        run_nts(config, str(tmp_path / "b"))
        for name in ("trace_seed0000.csv", "trace_seed0001.csv", "aggregate.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_jobs_do_not_change_outputs(self, tmp_path):
        config = parse_config(NTS_DOC)
        run_nts(config, str(tmp_path / "serial"), jobs=1)
        run_nts(config, str(tmp_path / "parallel"), jobs=2)
        for name in ("trace_seed0000.csv", "trace_seed0001.csv", "aggregate.json"):
            assert (tmp_path / "serial" / name).read_bytes() == (
                tmp_path / "parallel" / name
            ).read_bytes()


class TestRunRedundancySweep:
    def test_single_length_single_row(self, tmp_path):
        doc = """\
schema_version: 1
kind: redundancy_sweep
source: [0.5, 0.5]
target_distortion: 0.46875
word_lengths: [16]
n_words: 50
"""
        run_redundancy_sweep(parse_config(doc), str(tmp_path))
        header, rows = read_csv(tmp_path / "redundancy.csv")
        assert header == ["L", "median_rate_gap", "iqr"]
        assert len(rows) == 1

    def test_gap_decreases_with_length(self, tmp_path):
        doc = """\
schema_version: 1
kind: redundancy_sweep
source: [0.5, 0.5]
target_distortion: 0.46875
word_lengths: [16, 64]
n_words: 200
"""
        run_redundancy_sweep(parse_config(doc), str(tmp_path))
        _, rows = read_csv(tmp_path / "redundancy.csv")
        gaps = [float(r["median_rate_gap"]) for r in rows]
        assert gaps[1] < gaps[0]


EXPLORE_DOC = """\
schema_version: 1
kind: explore_compare
source: [0.3, 0.7]
target_distortion: 0.26
word_length: 16
models:
  - {kind: iid, label: a}
  - {kind: iid, label: b}
seeds: [0, 1, 2]
generations: 8
kl_threshold: %s
max_search_index: 4096
"""


class TestRunExploreCompare:
    def test_identical_models_identical_columns(self, tmp_path):
        run_explore_compare(parse_config(EXPLORE_DOC % "0.05"), str(tmp_path))
        _, rows = read_csv(tmp_path / "explore.csv")
        by_label = {}
        for r in rows:
            by_label.setdefault(r["model_label"], []).append(
                (r["seed"], r["generations_to_threshold"], r["final_kl"],
                 r["total_bits"])
            )
        assert by_label["a"] == by_label["b"]

    def test_huge_threshold_immediate(self, tmp_path):
        run_explore_compare(parse_config(EXPLORE_DOC % "1.0e9"), str(tmp_path))
        _, rows = read_csv(tmp_path / "explore.csv")
        assert all(r["generations_to_threshold"] == "1" for r in rows)

    def test_never_reached_sentinel(self, tmp_path):
        run_explore_compare(parse_config(EXPLORE_DOC % "1.0e-12"), str(tmp_path))
        _, rows = read_csv(tmp_path / "explore.csv")
        assert all(r["generations_to_threshold"] == "-1" for r in rows)


class TestCli:
    def write(self, tmp_path, doc):
        path = tmp_path / "config.yaml"
        path.write_text(doc)
        return str(path)

    def test_validate_ok(self, tmp_path, capsys):
        code = main(["validate", "--config", self.write(tmp_path, MINIMAL_RDF)])
        assert code == 0
        assert "config ok" in capsys.readouterr().out

    def test_config_error_exit_code(self, tmp_path, capsys):
        path = self.write(tmp_path, MINIMAL_RDF + "fidelity: 1\n")
        assert main(["validate", "--config", path]) == 2

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "nope.yaml")]) == 2

    def test_kind_subcommand_mismatch(self, tmp_path):
        path = self.write(tmp_path, MINIMAL_RDF)
        assert main(["nts", "--config", path]) == 2

    def test_rdf_run_writes_outputs(self, tmp_path, capsys):
        path = self.write(tmp_path, MINIMAL_RDF)
        out = tmp_path / "out"
        code = main(
            ["rdf", "--config", path, "--out-dir", str(out), "--emit-plot-script"]
        )
        assert code == 0
        assert (out / "points.csv").exists()
        assert (out / "plot.gp").exists()

    def test_env_out_dir_fallback(self, tmp_path, monkeypatch):
        path = self.write(tmp_path, MINIMAL_RDF)
        out = tmp_path / "envout"
        monkeypatch.setenv("NTS_LAB_OUT_DIR", str(out))
        assert main(["rdf", "--config", path]) == 0
        assert (out / "points.csv").exists()
