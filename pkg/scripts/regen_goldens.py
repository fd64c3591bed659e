"""Regenerate the committed golden files under tests/golden/.

Run from the repository root after an intentional behavior change:

    python scripts/regen_goldens.py
"""

from __future__ import annotations

import io
import sys
from contextlib import redirect_stdout
from pathlib import Path

from graph2img.cli import main

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"
GOLDEN = ROOT / "tests" / "golden"


def run_to_file(argv: list[str], out_path: Path) -> None:
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    if code != 0:
        raise SystemExit(f"golden command failed ({code}): {argv}")
    out_path.write_text(buf.getvalue(), encoding="utf-8")


def main_golden() -> None:
    GOLDEN.mkdir(exist_ok=True)
    graph = str(FIXTURES / "forest_scene.json")
    script = str(FIXTURES / "forest_edit_script.json")

    run_to_file(["caption", graph], GOLDEN / "caption.txt")
    run_to_file(["prompts", graph, script], GOLDEN / "prompts.txt")

    # deterministic 16x16 source latent, exactly representable in PGM
    levels = [(7 * i + 13 * j) % 256 for i in range(16) for j in range(16)]
    rows = ["P2", "16 16", "255"]
    rows += [" ".join(str(levels[r * 16 + c]) for c in range(16)) for r in range(16)]
    (GOLDEN / "source_latent.pgm").write_text("\n".join(rows) + "\n", encoding="utf-8")

    code = main(
        ["train-var", str(FIXTURES / "train_dataset.json"), "--steps", "500", "--lr", "0.05",
         "-o", str(GOLDEN / "var_params.json")]
    )
    if code != 0:
        raise SystemExit("train-var failed")

    code = main(
        ["generate", graph, "--model", str(GOLDEN / "var_params.json"), "--temperature", "0",
         "--seed", "7", "-o", str(GOLDEN / "generate.ppm")]
    )
    if code != 0:
        raise SystemExit("generate failed")

    code = main(
        ["edit", str(GOLDEN / "source_latent.pgm"), graph, script, "--seed", "7",
         "-o", str(GOLDEN / "edit.pgm")]
    )
    if code != 0:
        raise SystemExit("edit failed")

    print("golden files written to", GOLDEN)


if __name__ == "__main__":
    sys.exit(main_golden())
