import csv
import json
from pathlib import Path

import pytest

import synth_data
from covkg.cli import main
from covkg.graph_store import import_triples


def run(stage, **flags):
    argv = [stage]
    for key, value in flags.items():
        argv.append("--" + key.replace("_", "-"))
        if value is not None:
            argv.append(str(value))
    return main(argv)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    synth_data.make_corpus(root / "tweets.jsonl", n_tweets=80, seed=3)
    synth_data.write_keywords(root / "keywords.txt")
    synth_data.write_vectors(root / "vectors.txt")
    synth_data.write_events(root / "events.csv")
    synth_data.write_stats(root / "stats.csv")
    return root


def run_pipeline(corpus: Path, workdir: Path, seed=0):
    common = dict(workdir=workdir, seed=seed)
    assert run("ingest", tweets=corpus / "tweets.jsonl",
               keywords=corpus / "keywords.txt", **common) == 0
    assert run("topics", topics=6, vocab_cap=200, nmf_iters=60, **common) == 0
    assert run("sentiment", vectors=corpus / "vectors.txt", **common) == 0
    assert run("changepoints", penalty=0.05, **common) == 0
    assert run("build-graph", events=corpus / "events.csv",
               stats=corpus / "stats.csv", span_start="2020-03-11",
               span_end="2020-04-30", **common) == 0
    assert run("stats", **common) == 0
    assert run("train", entity_dim=8, relation_dim=8, epochs=2,
               batch_size=128, **common) == 0
    assert run("predict", **common) == 0
    assert run("communities", **common) == 0


class TestPipeline:
    def test_full_pipeline_and_artifacts(self, corpus, tmp_path):
        workdir = tmp_path / "w"
        run_pipeline(corpus, workdir)
        expected = [
            "cleaned.jsonl", "vocab.txt", "nmf_model.bin", "assignments.csv",
            "topic_keywords.csv", "sentiment.csv", "keyword_links.csv",
            "changepoints.csv", "series.csv", "volumes.csv", "peaks.csv",
            "graph.tsv", "graph_attrs.jsonl", "graph_stats.csv",
            "wcc_sizes.csv", "longest_paths.csv", "model.bin",
            "loss_trace.csv", "predictions.csv", "communities.csv",
            "community_report.csv", "modularity_trace.csv",
        ]
        for name in expected:
            assert (workdir / name).exists(), name
        for stage in ("ingest", "topics", "sentiment", "changepoints",
                      "build-graph", "stats", "train", "predict", "communities"):
            assert (workdir / f"{stage}.manifest.json").exists()

    def test_stats_match_graph(self, corpus, tmp_path):
        workdir = tmp_path / "w"
        run_pipeline(corpus, workdir)
        graph = import_triples(workdir / "graph.tsv", workdir / "graph_attrs.jsonl")
        with open(workdir / "graph_stats.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        header, values = rows
        counts = dict(zip(header, map(int, values)))
        assert counts == graph.stats()
        # span 2020-03-11..2020-04-30 inclusive
        assert counts["Dates"] == 51

    def test_manifest_shape(self, corpus, tmp_path):
        workdir = tmp_path / "w"
        assert run("ingest", tweets=corpus / "tweets.jsonl",
                   keywords=corpus / "keywords.txt", workdir=workdir, seed=5) == 0
        manifest = json.loads((workdir / "ingest.manifest.json").read_text())
        assert manifest["stage"] == "ingest"
        assert manifest["seed"] == 5
        assert all(set(i) == {"path", "sha256"} for i in manifest["inputs"])
        assert all(set(a) == {"name", "sha256"} for a in manifest["artifacts"])

    def test_rerun_byte_identical(self, corpus, tmp_path):
        w1, w2 = tmp_path / "r1", tmp_path / "r2"
        run_pipeline(corpus, w1, seed=11)
        run_pipeline(corpus, w2, seed=11)
        names = sorted(p.name for p in w1.iterdir())
        assert names == sorted(p.name for p in w2.iterdir())
        for name in names:
            assert (w1 / name).read_bytes() == (w2 / name).read_bytes(), name

    def test_predict_before_train_exits_2_with_hint(self, corpus, tmp_path, capsys):
        workdir = tmp_path / "w"
        run_pipeline(corpus, workdir)
        (workdir / "model.bin").unlink()
        assert run("predict", workdir=workdir) == 2
        assert "'train'" in capsys.readouterr().err

    def test_topics_before_ingest_exits_2(self, tmp_path, capsys):
        assert run("topics", workdir=tmp_path / "empty") == 2
        assert "'ingest'" in capsys.readouterr().err

    def test_usage_error_exit_1(self):
        assert main(["no-such-stage"]) == 1

    def test_missing_required_setting_exit_2(self, tmp_path):
        assert run("ingest", workdir=tmp_path / "w") == 2


class TestConfigFile:
    def test_config_values_used_and_flags_override(self, corpus, tmp_path):
        workdir = tmp_path / "w"
        config = tmp_path / "covkg.cfg"
        config.write_text(
            f"tweets={corpus / 'tweets.jsonl'}\n"
            f"keywords={corpus / 'keywords.txt'}\n"
            f"workdir={workdir}\n"
            "seed=9\n"
            "# comment line\n"
            "topics=4\n"
            "vocab_cap=100\n"
            "nmf_iters=30\n"
        )
        assert main(["ingest", "--config", str(config)]) == 0
        assert main(["topics", "--config", str(config)]) == 0
        manifest = json.loads((workdir / "topics.manifest.json").read_text())
        assert manifest["params"]["topics"] == 4
        assert manifest["seed"] == 9
        # flag beats config
        assert main(["topics", "--config", str(config), "--topics", "3"]) == 0
        manifest = json.loads((workdir / "topics.manifest.json").read_text())
        assert manifest["params"]["topics"] == 3

    def test_malformed_config_rejected(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("not a pair\n")
        assert main(["ingest", "--config", str(config)]) == 2
