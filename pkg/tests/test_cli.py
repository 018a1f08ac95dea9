import json

import numpy as np
import pytest
from click.testing import CliRunner

from qualda.cli import main
from qualda.persistence import load_project, restore_bundle, save_project


@pytest.fixture
def runner():
    return CliRunner()


def write_corpus(path, texts, prefix="d"):
    path.write_text(
        "\n".join(
            json.dumps({"doc_id": f"{prefix}{i}", "text": t})
            for i, t in enumerate(texts, 1)
        )
        + "\n",
        encoding="utf-8",
    )


TEXTS = [
    "we had a lovely dinner date tonight",
    "dating is hard he dumped me at dinner",
    "my boss gave me a deadline at the office",
    "office work and a grumpy boss again",
]


class TestImport:
    def test_valid_file(self, runner, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        write_corpus(corpus, TEXTS[:3])
        result = runner.invoke(
            main, ["import", "--project", str(tmp_path / "proj"), str(corpus)]
        )
        assert result.exit_code == 0, result.output
        assert "3 documents, V=" in result.output

    def test_malformed_line_names_line(self, runner, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text('{"text":"ok"}\nnot json\n', encoding="utf-8")
        result = runner.invoke(
            main, ["import", "--project", str(tmp_path / "proj"), str(corpus)]
        )
        assert result.exit_code == 1
        assert "line 2" in result.output

    def test_duplicate_reimport(self, runner, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        write_corpus(corpus, TEXTS[:2])
        proj = str(tmp_path / "proj")
        assert runner.invoke(main, ["import", "--project", proj, str(corpus)]).exit_code == 0
        result = runner.invoke(main, ["import", "--project", proj, str(corpus)])
        assert result.exit_code == 1
        assert "duplicate" in result.output.lower()


def import_project(runner, tmp_path, texts=TEXTS):
    corpus = tmp_path / "corpus.jsonl"
    write_corpus(corpus, texts)
    proj = tmp_path / "proj"
    result = runner.invoke(main, ["import", "--project", str(proj), str(corpus)])
    assert result.exit_code == 0
    return proj


class TestTrain:
    def test_unlabeled_standard_lda(self, runner, tmp_path):
        proj = import_project(runner, tmp_path)
        result = runner.invoke(
            main,
            ["train", "--project", str(proj), "--k-free", "2", "--rng-seed", "1"],
        )
        assert result.exit_code == 0, result.output
        assert "2 topics (0 themed + 2 free)" in result.output
        assert result.output.count("topic ") == 2

    def test_themed_header(self, runner, tmp_path):
        proj = import_project(runner, tmp_path)
        project = load_project(proj)
        d1 = project.documents[0]
        span = (d1.text.index("dinner"), d1.text.index("dinner") + 6)
        project.store.apply_code(d1, span, "dating")
        save_project(project, proj)
        result = runner.invoke(
            main,
            ["train", "--project", str(proj), "--k-free", "1", "--rng-seed", "1"],
        )
        assert result.exit_code == 0, result.output
        assert "2 topics (1 themed + 1 free)" in result.output
        assert "[dating]" in result.output

    def test_no_topics_exit_1(self, runner, tmp_path):
        proj = import_project(runner, tmp_path)
        result = runner.invoke(
            main, ["train", "--project", str(proj), "--k-free", "0"]
        )
        assert result.exit_code == 1
        assert "error" in result.output

    def test_deterministic_stdout(self, runner, tmp_path):
        proj = import_project(runner, tmp_path)
        args = ["train", "--project", str(proj), "--k-free", "3", "--rng-seed", "7"]
        first = runner.invoke(main, args)
        # reset the snapshot so the second run is identical, not a warm start
        again = tmp_path / "again"
        again.mkdir()
        second_proj = import_project(runner, again)
        second = runner.invoke(
            main,
            ["train", "--project", str(second_proj), "--k-free", "3", "--rng-seed", "7"],
        )
        assert first.exit_code == second.exit_code == 0
        assert first.output == second.output


class TestTopics:
    def test_before_training(self, runner, tmp_path):
        proj = import_project(runner, tmp_path)
        result = runner.invoke(main, ["topics", "--project", str(proj)])
        assert result.exit_code == 1
        assert "train" in result.output

    def test_top_words_of_clamped_fit_are_most_frequent(self, runner, tmp_path):
        texts = [
            "apple apple apple banana banana cherry",
            "apple banana apple cherry date egg",
            "apple banana banana cherry fig grape",
        ]
        proj = import_project(runner, tmp_path, texts)
        project = load_project(proj)
        # clamp every word of every document to a single theme
        d1 = project.documents[0]
        project.store.apply_code(d1, (0, len(d1.text)), "everything")
        code = project.store.code_by_label("everything")
        for doc in project.documents[1:]:
            project.store.apply_code(doc, (0, len(doc.text)), "everything")
        save_project(project, proj)
        result = runner.invoke(
            main, ["train", "--project", str(proj), "--k-free", "0", "--rng-seed", "1"]
        )
        assert result.exit_code == 0, result.output
        topics = runner.invoke(main, ["topics", "--project", str(proj), "-n", "3"])
        assert topics.exit_code == 0
        lines = [l.strip() for l in topics.output.splitlines() if l.startswith("  ")]
        words = [l.split()[0] for l in lines]
        assert words == ["apple", "banana", "cherry"]


class TestExport:
    def test_round_trip_identical_tables(self, runner, tmp_path):
        proj = import_project(runner, tmp_path)
        assert (
            runner.invoke(
                main,
                ["train", "--project", str(proj), "--k-free", "2", "--rng-seed", "3"],
            ).exit_code
            == 0
        )
        before = runner.invoke(main, ["topics", "--project", str(proj)])
        bundle = tmp_path / "bundle.json"
        result = runner.invoke(main, ["export", "--project", str(proj), str(bundle)])
        assert result.exit_code == 0, result.output

        fresh_dir = tmp_path / "fresh"
        restore_bundle(bundle, fresh_dir)
        after = runner.invoke(main, ["topics", "--project", str(fresh_dir)])
        assert after.exit_code == 0
        assert after.output == before.output

    def test_export_before_training(self, runner, tmp_path):
        proj = import_project(runner, tmp_path)
        result = runner.invoke(
            main, ["export", "--project", str(proj), str(tmp_path / "b.json")]
        )
        assert result.exit_code == 1
