"""Command-line surface: golden outputs, determinism, exit codes."""

import json

import numpy as np
import pytest

from graph2img.cli import main
from graph2img.diffusion import latent_from_json
from graph2img.pixmaps import latent_from_pgm
from graph2img.vargen import params_from_json

from conftest import FIXTURES, GOLDEN

GRAPH = str(FIXTURES / "forest_scene.json")
SCRIPT = str(FIXTURES / "forest_edit_script.json")


def run(capsys, *argv) -> tuple[int, str]:
    code = main(list(argv))
    return code, capsys.readouterr().out


class TestTextCommands:
    def test_caption_matches_golden(self, capsys):
        code, out = run(capsys, "caption", GRAPH)
        assert code == 0
        assert out == (GOLDEN / "caption.txt").read_text()

    def test_prompts_match_golden(self, capsys):
        code, out = run(capsys, "prompts", GRAPH, SCRIPT)
        assert code == 0
        assert out == (GOLDEN / "prompts.txt").read_text()
        assert out.splitlines()[0].startswith("SRC:")
        assert out.splitlines()[1].startswith("TGT:")

    def test_caption_cap_option(self, capsys, tmp_path):
        doc = {
            "entities": [{"id": f"e{i}"} for i in range(6)],
            "relations": [{"s": f"e{i}", "r": "on", "o": f"e{(i + 1) % 6}"} for i in range(6)],
        }
        path = tmp_path / "many.json"
        path.write_text(json.dumps(doc))
        code, out = run(capsys, "caption", str(path), "--cap", "2")
        assert code == 0
        assert out.count(",") == 1  # two phrases joined by one separator

    def test_empty_graph_caption_has_bare_prefix(self, capsys, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text('{"entities": [], "relations": []}')
        code, out = run(capsys, "caption", str(path))
        assert code == 0
        assert out == "CAP:\n"


class TestExitCodes:
    def test_validation_error_is_2(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"entities": [')
        code = main(["caption", str(bad)])
        captured = capsys.readouterr()
        assert code == 2
        assert "error:" in captured.err

    def test_missing_file_is_3(self, capsys, tmp_path):
        code = main(["caption", str(tmp_path / "absent.json")])
        assert code == 3

    def test_referential_error_is_2(self, capsys, tmp_path):
        bad = tmp_path / "dangling.json"
        bad.write_text('{"entities": [], "relations": [{"s": "x", "r": "on", "o": "y"}]}')
        assert main(["caption", str(bad)]) == 2

    def test_bad_edit_config_is_2(self, tmp_path, capsys):
        out = tmp_path / "o.pgm"
        code = main(
            ["edit", str(GOLDEN / "source_latent.pgm"), GRAPH, SCRIPT, "--skip", "50", "-o", str(out)]
        )
        assert code == 2


class TestGenerate:
    def test_golden_and_deterministic(self, capsys, tmp_path):
        out1, out2 = tmp_path / "a.ppm", tmp_path / "b.ppm"
        for out in (out1, out2):
            code = main(
                ["generate", GRAPH, "--model", str(GOLDEN / "var_params.json"),
                 "--temperature", "0", "--seed", "7", "-o", str(out)]
            )
            assert code == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert out1.read_bytes() == (GOLDEN / "generate.ppm").read_bytes()

    def test_seed_changes_sampled_output(self, tmp_path):
        outs = []
        for seed in ("1", "2"):
            out = tmp_path / f"s{seed}.ppm"
            main(["generate", GRAPH, "--model", str(GOLDEN / "var_params.json"),
                  "--temperature", "1.0", "--seed", seed, "-o", str(out)])
            outs.append(out.read_bytes())
        assert outs[0] != outs[1]


class TestEdit:
    def test_golden_and_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "a.pgm", tmp_path / "b.pgm"
        for out in (out1, out2):
            code = main(
                ["edit", str(GOLDEN / "source_latent.pgm"), GRAPH, SCRIPT, "--seed", "7", "-o", str(out)]
            )
            assert code == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert out1.read_bytes() == (GOLDEN / "edit.pgm").read_bytes()

    def test_json_latent_roundtrip(self, tmp_path):
        source = tmp_path / "src.json"
        values, shape = latent_from_pgm((GOLDEN / "source_latent.pgm").read_text())
        source.write_text(json.dumps({"values": values.tolist(), "shape": list(shape)}))
        out_json = tmp_path / "out.json"
        code = main(["edit", str(source), GRAPH, SCRIPT, "-o", str(out_json)])
        assert code == 0
        result, out_shape = latent_from_json(out_json.read_text())
        assert out_shape == (16, 16)
        assert result.shape == (256,)

    def test_json_and_pgm_inputs_agree(self, tmp_path):
        source = tmp_path / "src.json"
        values, shape = latent_from_pgm((GOLDEN / "source_latent.pgm").read_text())
        source.write_text(json.dumps({"values": values.tolist(), "shape": list(shape)}))
        out_a, out_b = tmp_path / "a.pgm", tmp_path / "b.pgm"
        assert main(["edit", str(source), GRAPH, SCRIPT, "-o", str(out_a)]) == 0
        assert main(["edit", str(GOLDEN / "source_latent.pgm"), GRAPH, SCRIPT, "-o", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()


class TestTrainVar:
    def test_writes_loadable_params_and_reports_loss(self, capsys, tmp_path):
        out = tmp_path / "params.json"
        code, printed = run(
            capsys, "train-var", str(FIXTURES / "train_dataset.json"), "--steps", "20", "--lr", "0.05",
            "-o", str(out)
        )
        assert code == 0
        assert printed.startswith("steps=20 mean_nll=")
        params = params_from_json(out.read_text())
        assert params.vocab_size == 32 and params.width == 32

    def test_deterministic_given_dataset_seed(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            main(["train-var", str(FIXTURES / "train_dataset.json"), "--steps", "10", "-o", str(out)])
        assert a.read_bytes() == b.read_bytes()

    def test_empty_dataset_rejected(self, tmp_path):
        bad = tmp_path / "ds.json"
        bad.write_text('{"examples": []}')
        assert main(["train-var", str(bad), "-o", str(tmp_path / "p.json")]) == 2
