#!/usr/bin/env python3
"""Build the wmbench_py extension and exercise the main types end to end.

Usage: python3 python/smoke_test.py [--skip-build]
"""

import json
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def build_and_import():
    if "--skip-build" not in sys.argv:
        subprocess.run(
            ["cargo", "build", "-p", "wmbench-py", "--release"],
            cwd=ROOT,
            check=True,
        )
    built = ROOT / "target" / "release" / "libwmbench_py.so"
    if not built.exists():  # macOS fallback
        built = ROOT / "target" / "release" / "libwmbench_py.dylib"
    stage = pathlib.Path(tempfile.mkdtemp(prefix="wmbench_py_"))
    shutil.copy(built, stage / "wmbench_py.so")
    sys.path.insert(0, str(stage))
    import wmbench_py

    return wmbench_py


def main():
    wm = build_and_import()

    # tokenizer
    assert wm.split_tokens("The cat sat.") == ["the", "cat", "sat", "."]

    # corpus + model
    corpus = wm.synthetic_corpus(7, 1200)
    model = wm.Model.train(corpus[:1000], 3, 0.1)
    assert model.vocab_size > 100
    assert model.order == 3
    prompt = " ".join(corpus[1000].split()[:30])

    # plain generation is deterministic and 200 tokens long
    clean = model.generate(prompt, 200, seed=5)
    assert clean == model.generate(prompt, 200, seed=5)
    assert len(clean.split()) == 200

    # watermark embed + detect: marked text scores far above clean
    mark = wm.Watermark.prepare(
        model, "bw", delta=2.0, window=1, key=1234, freq_texts=50, freq_seed=9
    )
    text = mark.generate(model, prompt, 200, seed=5)
    assert text == mark.generate(model, prompt, 200, seed=5)
    g, t, z = mark.detect(model, text)
    g2, t2, z2 = mark.detect(model, clean)
    assert t == t2 == 199  # positions after the window-1 context
    assert z > 4.0, f"marked z too low: {z}"
    assert z > z2 + 2.0, f"no separation: marked {z}, clean {z2}"

    # sidecar round trip keeps detection identical
    with tempfile.TemporaryDirectory() as d:
        sidecar = str(pathlib.Path(d) / "bw.sidecar.json")
        mark.save_sidecar(sidecar)
        reloaded = wm.Watermark.load_sidecar(sidecar)
        assert reloaded.detect(model, text) == (g, t, z)

    # classification metrics
    assert wm.roc_auc([2.0, 3.0], [0.0, 1.0]) == 1.0
    assert abs(wm.roc_auc([0.9, 0.4], [0.5, 0.1]) - 0.75) < 1e-12
    assert wm.tpr_at_fpr([2.0, 3.0], [0.0, 1.0], 0.2) == 1.0
    pts = wm.roc_points([1.0, 2.0], [0.0, 3.0])
    assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)

    # attacks
    scrubbed = wm.scrub(model, text, 0.3, 0.0, 0.0, seed=3)
    assert len(scrubbed.split()) == 200
    tables = wm.SpoofTables.build(model, [text] * 50, [clean] * 50, 1)
    spoofed = wm.spoof_generate(model, tables, prompt, 100, 4.0, seed=11)
    assert len(spoofed.split()) == 100

    # characteristic scoring arithmetic
    assert abs(wm.score_detectability(0.998) - 0.996) < 1e-9
    assert abs(wm.score_double_degradation(6.273, 4.388) - 0.5704193254329991) < 1e-12
    assert wm.score_detect_time(0.0) == 1.0
    assert abs(wm.score_usability(1.0, 0.8615, 0.99584) - 0.95244666666) < 1e-9
    assert abs(wm.score_robustness(0.999, 0.992) - 0.4920 / 0.499) < 1e-3
    assert wm.score_steal(0.5) == 1.0
    assert wm.score_imperceptibility([0.1, 0.9, 0.4, 0.6], "a") == 0.1
    assert wm.score_imperceptibility([0.1, 0.9, 0.4, 0.6], "na") == 0.5
    s = wm.score_comprehensive(0.998, 0.571, 0.953, 0.986, 0.000)
    assert abs(s - 0.6668) < 5e-4
    assert wm.normalize(0.75, 1.0, 0.5) == 0.5

    # fixture report
    report = json.loads(
        wm.evaluate_fixtures(str(ROOT / "crates" / "core" / "fixtures" / "reference"), "a")
    )
    assert report["provenance"] == "fixture"
    assert len(report["groups"]) == 4
    uniw = next(
        e
        for grp in report["groups"]
        if grp["model"] == "opt-2.7b" and grp["dataset"] == "c4"
        for e in grp["entries"]
        if e["scheme"] == "uniw"
    )
    assert abs(uniw["s_cefw_raw_detect"] - 0.667) <= 0.002

    print("smoke test passed")


if __name__ == "__main__":
    main()
