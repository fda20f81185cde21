import io
import json
import subprocess
import sys

import pytest

from pseudostrong.cli import main, manifest_path, replay
from pseudostrong.detections import Detection, DetectionSet, dumps, read_dump
from pseudostrong.errors import ManifestMismatch
from pseudostrong.metrics import ApReport, evaluate
from pseudostrong.pseudo_labels import class_consistency_filter, nms, write_devkit
from pseudostrong.detections import threshold_filter
from pseudostrong.simulator import NoiseParams, corrupt_dataset, make_synthetic_dataset
from pseudostrong.voc import image_level_labels, load_devkit

NOISY = ["--jitter", "2", "--miss", "0.1", "--flip", "0.3", "--spurious", "1.5",
         "--score-tp", "0.3", "1.0", "--score-noise", "0.0", "0.9"]


@pytest.fixture(scope="module")
def synth_devkit(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth") / "VOC"
    ds = make_synthetic_dataset(100, seed=5, split="test")
    write_devkit(ds, root, "test")
    return root


def _perfect_dump(devkit, split, path):
    gt = load_devkit(devkit, split)
    dets = [Detection(r.image_id, o.label, 1.0, o.box) for r in gt for o in r.objects if not o.difficult]
    path.write_text(dumps(dets))
    return path


class TestEval:
    def test_perfect_prints_100(self, devkit, tmp_path, capsys):
        dump = _perfect_dump(devkit, "val", tmp_path / "perfect.jsonl")
        out = tmp_path / "report.json"
        assert main(["eval", "--gt", str(devkit), "--split", "val", "--dets", str(dump),
                     "--out", str(out)]) == 0
        row = capsys.readouterr().out.splitlines()[1].split()
        assert row[-1] == "100.0"
        assert ApReport.from_json(out.read_text()).mean_ap == 1.0
        assert manifest_path(out).is_file()

    def test_missing_dump(self, devkit, tmp_path, capsys):
        code = main(["eval", "--gt", str(devkit), "--split", "val", "--dets", str(tmp_path / "nope.jsonl")])
        assert code == 2
        assert "nope.jsonl" in capsys.readouterr().err

    def test_bad_line_reports_file_and_line(self, devkit, tmp_path, capsys):
        dump = tmp_path / "bad.jsonl"
        dump.write_text('{"image_id": "000001", "class": "dog", "score": 0.5, "bbox": [1, 1, 2, 2]}\n{oops\n')
        assert main(["eval", "--gt", str(devkit), "--split", "val", "--dets", str(dump)]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_unknown_image_is_input_error(self, devkit, tmp_path):
        dump = tmp_path / "d.jsonl"
        dump.write_text(dumps([Detection("zzz", "dog", 0.5, load_devkit(devkit, "val")["000001"].objects[0].box)]))
        assert main(["eval", "--gt", str(devkit), "--split", "val", "--dets", str(dump)]) == 2

    @pytest.mark.parametrize("mode", ["11pt", "area"])
    def test_matches_library(self, synth_devkit, tmp_path, mode):
        dump = tmp_path / "sim.jsonl"
        assert main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "9",
                     "--out", str(dump), *NOISY]) == 0
        out = tmp_path / "r.json"
        assert main(["eval", "--gt", str(synth_devkit), "--split", "test", "--dets", str(dump),
                     "--mode", mode, "--out", str(out)]) == 0
        gt = load_devkit(synth_devkit, "test")
        lib = evaluate(read_dump(io.StringIO(dump.read_text()), provenance=dump.name), gt, mode=mode)
        assert out.read_text() == lib.to_json()


class TestFilter:
    def _run(self, synth_devkit, src, out, *extra):
        return main(["filter", "--gt", str(synth_devkit), "--split", "test",
                     "--dets", str(src), "--out", str(out), *extra])

    def test_default_tau_and_library_equivalence(self, synth_devkit, tmp_path):
        gt = load_devkit(synth_devkit, "test")
        p = NoiseParams(jitter_sigma=2, flip_prob=0.3, spurious_rate=2, score_tp=(0.0, 1.0),
                        score_noise=(0.0, 1.0))
        for seed in range(5):
            src = tmp_path / f"raw{seed}.jsonl"
            dets = corrupt_dataset(gt, p, seed)
            src.write_text(dumps(dets))
            out = tmp_path / f"f{seed}.jsonl"
            assert self._run(synth_devkit, src, out) == 0
            expected = class_consistency_filter(threshold_filter(dets, 0.1), image_level_labels(gt))
            assert out.read_text() == dumps(expected)
            assert min(d.score for d in read_dump(io.StringIO(out.read_text()))) >= 0.1
            params = json.loads(manifest_path(out).read_text())["params"]
            assert params["tau"] == 0.1 and params["nms"] is None

    def test_with_nms_matches_library(self, synth_devkit, tmp_path):
        gt = load_devkit(synth_devkit, "test")
        dets = corrupt_dataset(gt, NoiseParams(jitter_sigma=4, score_tp=(0.2, 1.0)), 3)
        dets = dets.replace(dets.detections * 2)
        src = tmp_path / "raw.jsonl"
        src.write_text(dumps(dets))
        out = tmp_path / "f.jsonl"
        assert self._run(synth_devkit, src, out, "--tau", "0.3", "--nms", "0.5") == 0
        expected = nms(class_consistency_filter(threshold_filter(dets, 0.3), image_level_labels(gt)), 0.5)
        assert out.read_text() == dumps(expected)

    def test_idempotent(self, synth_devkit, tmp_path):
        src = tmp_path / "raw.jsonl"
        main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "1",
              "--out", str(src), *NOISY])
        once, twice = tmp_path / "once.jsonl", tmp_path / "twice.jsonl"
        assert self._run(synth_devkit, src, once) == 0
        assert self._run(synth_devkit, once, twice) == 0
        assert once.read_bytes() == twice.read_bytes()

    def test_bad_tau(self, synth_devkit, tmp_path):
        with pytest.raises(SystemExit) as exc:
            self._run(synth_devkit, tmp_path / "x", tmp_path / "y", "--tau", "2")
        assert exc.value.code == 2


class TestExport:
    def test_round_trip(self, devkit, tmp_path):
        dump = _perfect_dump(devkit, "val", tmp_path / "p.jsonl")
        out = tmp_path / "pseudo"
        assert main(["export", "--dets", str(dump), "--out", str(out)]) == 0
        loaded = load_devkit(out, "trainval")
        dets = read_dump(io.StringIO(dump.read_text()))
        assert {r.image_id: [(o.label, o.box) for o in r.objects] for r in loaded} == {
            "000001": [(d.label, d.box) for d in dets if d.image_id == "000001"],
            "000002": [(d.label, d.box) for d in dets if d.image_id == "000002"],
        }
        assert len(list((out / "Annotations").iterdir())) == 2

    def test_empty_dump(self, tmp_path):
        dump = tmp_path / "empty.jsonl"
        dump.write_text("")
        out = tmp_path / "pseudo"
        assert main(["export", "--dets", str(dump), "--out", str(out)]) == 0
        assert (out / "ImageSets/Main/trainval.txt").read_text() == ""

    def test_picks_up_filter_parameters(self, synth_devkit, tmp_path):
        raw, filt, out = tmp_path / "raw.jsonl", tmp_path / "filt.jsonl", tmp_path / "pl"
        main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "2",
              "--out", str(raw), *NOISY])
        main(["filter", "--gt", str(synth_devkit), "--split", "test", "--dets", str(raw),
              "--out", str(filt), "--tau", "0.2"])
        assert main(["export", "--dets", str(filt), "--out", str(out)]) == 0
        assert (out / "manifest.json").is_file()

    def test_refuses_non_empty_dir(self, tmp_path):
        dump = tmp_path / "empty.jsonl"
        dump.write_text("")
        out = tmp_path / "pseudo"
        out.mkdir()
        (out / "junk").write_text("x")
        assert main(["export", "--dets", str(dump), "--out", str(out)]) == 2


class TestSimulate:
    def test_identity(self, synth_devkit, tmp_path):
        out = tmp_path / "sim.jsonl"
        assert main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "0",
                     "--out", str(out)]) == 0
        gt = load_devkit(synth_devkit, "test")
        dets = read_dump(io.StringIO(out.read_text()))
        assert [(d.image_id, d.label, d.box) for d in dets] == [
            (r.image_id, o.label, o.box) for r in gt for o in r.objects
        ]

    def test_miss_all(self, synth_devkit, tmp_path):
        out = tmp_path / "sim.jsonl"
        assert main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "0",
                     "--miss", "1", "--out", str(out)]) == 0
        assert out.read_text() == ""

    def test_deterministic(self, synth_devkit, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for path in (a, b):
            main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "0x2a",
                  "--out", str(path), *NOISY])
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_params(self, synth_devkit, tmp_path):
        assert main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "1",
                     "--miss", "1.5", "--out", str(tmp_path / "x.jsonl")]) == 2


class TestCompareAndReplay:
    def test_compare(self, synth_devkit, tmp_path, capsys):
        sim = tmp_path / "sim.jsonl"
        main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "4",
              "--out", str(sim), *NOISY])
        filt = tmp_path / "filt.jsonl"
        main(["filter", "--gt", str(synth_devkit), "--split", "test", "--dets", str(sim), "--out", str(filt)])
        reports = []
        for name, dump in (("noise", sim), ("denoised", filt)):
            out = tmp_path / f"{name}.json"
            main(["eval", "--gt", str(synth_devkit), "--split", "test", "--dets", str(dump), "--out", str(out)])
            reports.append(f"{name}={out}")
        capsys.readouterr()
        assert main(["compare", *reports]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert [line.split()[0] for line in lines] == ["Method", "noise", "denoised"]

    def test_replay_every_command(self, synth_devkit, tmp_path):
        sim, filt, rep, pl = (tmp_path / n for n in ("sim.jsonl", "filt.jsonl", "rep.json", "pl"))
        main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "8", "--out", str(sim), *NOISY])
        main(["filter", "--gt", str(synth_devkit), "--split", "test", "--dets", str(sim), "--out", str(filt)])
        main(["eval", "--gt", str(synth_devkit), "--split", "test", "--dets", str(filt), "--out", str(rep)])
        main(["export", "--dets", str(filt), "--out", str(pl)])
        for out in (sim, filt, rep, pl):
            recorded = json.loads(manifest_path(out).read_text())["outputs"]
            assert replay(manifest_path(out)) == recorded

    def test_replay_detects_changed_input(self, synth_devkit, tmp_path):
        sim, filt = tmp_path / "sim.jsonl", tmp_path / "filt.jsonl"
        main(["simulate", "--gt", str(synth_devkit), "--split", "test", "--seed", "8", "--out", str(sim), *NOISY])
        main(["filter", "--gt", str(synth_devkit), "--split", "test", "--dets", str(sim), "--out", str(filt)])
        sim.write_text("")
        with pytest.raises(ManifestMismatch):
            replay(manifest_path(filt))


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pseudostrong", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "pseudostrong" in proc.stdout
