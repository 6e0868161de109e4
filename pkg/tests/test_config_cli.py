"""Config profiles, aggregated validation, and the file-mediated CLI."""

import json
import os
import struct

import numpy as np
import pytest

from dress import cli, fileio
from dress.config import (ConfigError, RunConfig, config_from_dict, config_hash,
                          config_to_dict, desk_profile, load_config,
                          paper_profile, save_config)

MICRO = {
    "profile": "desk",
    "seeds": [0, 1],
    "data": {"count": 600, "resolution": 8, "train_fraction": 0.8},
    "cluster": {"k": 4, "max_components": 3, "cactus_scalings": 3, "cactus_k": 4},
    "tasks": {"shots": 2, "queries": 2},
    "train": {"epochs": 5, "meta_batch": 4, "checkpoint_every": 2},
    "eval": {"tasks": 8},
}


def test_desk_profile_defaults():
    cfg = desk_profile()
    assert cfg.profile == "desk"
    assert cfg.seeds == (0, 1, 2, 3)
    assert cfg.data.count == 20000
    assert cfg.cluster.k == 40
    assert cfg.train.epochs == 2000
    assert cfg.train.meta_batch == 8
    assert cfg.train.inner_steps == 5
    assert cfg.train.inner_lr == 0.05
    assert cfg.train.outer_lr == 0.001
    assert cfg.eval.tasks == 200


def test_paper_profile_values():
    cfg = paper_profile()
    assert cfg.data.count == 480000
    assert cfg.data.resolution == 64
    assert cfg.cluster.k == 200
    assert cfg.cluster.cactus_scalings == 50
    assert cfg.cluster.cactus_k == 300
    assert cfg.train.epochs == 30000
    assert cfg.train.meta_batch == 8
    assert cfg.eval.tasks == 1000
    # 400k of 480k images feed meta-training
    assert int(cfg.data.count * cfg.data.train_fraction) == 400000


def test_meta_test_factor_split():
    cfg = desk_profile()
    assert set(cfg.tasks.meta_test_factors) == {"floor-hue", "wall-hue", "object-x-offset"}
    assert set(cfg.meta_train_factors()) == {"object-hue", "object-scale", "object-shape"}


def test_config_round_trip(tmp_path):
    path = str(tmp_path / "cfg.json")
    cfg = paper_profile()
    save_config(path, cfg)
    assert load_config(path) == cfg
    assert config_hash(load_config(path)) == config_hash(cfg)


def test_config_hash_changes_with_values():
    a = desk_profile()
    b = config_from_dict({"cluster": {"k": 41}})
    assert len(config_hash(a)) == 64
    assert config_hash(a) != config_hash(b)
    assert config_hash(a) != config_hash(paper_profile())


def test_overrides_applied_on_top_of_profile():
    cfg = config_from_dict({"profile": "paper", "train": {"epochs": 7}})
    assert cfg.train.epochs == 7
    assert cfg.cluster.k == 200  # untouched paper default


def test_validation_aggregates_all_problems():
    doc = {"profile": "nope", "seeds": [], "data": {"count": 0, "bogus": 1},
           "train": {"epochs": -2, "inner_lr": "fast"}, "extra_section": {}}
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    text = str(err.value)
    for fragment in ("profile", "seeds", "data.count", "bogus",
                     "train.epochs", "inner_lr", "extra_section"):
        assert fragment in text
    assert len(err.value.problems) >= 6


def test_validation_type_errors_are_reported():
    with pytest.raises(ConfigError, match="must be an integer"):
        config_from_dict({"cluster": {"k": "many"}})


def test_unknown_meta_test_factor_rejected():
    with pytest.raises(ConfigError, match="not a renderer factor"):
        config_from_dict({"tasks": {"meta_test_factors": ["floor-hue", "gravity"]}})


def test_bad_json_reported_as_config_error(tmp_path):
    path = str(tmp_path / "broken.json")
    with open(path, "w") as fh:
        fh.write("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(path)


def test_config_to_dict_is_json_ready():
    doc = config_to_dict(desk_profile())
    json.dumps(doc)  # must not raise
    assert doc["seeds"] == [0, 1, 2, 3]
    assert doc["tasks"]["meta_test_factors"][0] == "floor-hue"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One micro pipeline run shared by the CLI tests below."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = str(root / "micro.json")
    with open(cfg_path, "w") as fh:
        json.dump(MICRO, fh)

    def run(*argv):
        return cli.main([*argv, "--config", cfg_path])

    paths = {n: str(root / n) for n in (
        "full.drsd", "train.drsd", "test.drsd", "oracle.drsl", "slots.drss",
        "aligned.drsl", "train.drse", "test.drse", "model.drsm", "dress.jsonl",
        "fsda.jsonl", "div.csv", "grid.ppm", "align.json")}
    paths["parts"] = str(root / "parts")
    paths["cactus"] = str(root / "cactus")
    assert run("gen-data", "--out", paths["full.drsd"], "--train-out",
               paths["train.drsd"], "--test-out", paths["test.drsd"]) == 0
    assert run("encode", "--data", paths["train.drsd"], "--mode", "oracle",
               "--out", paths["oracle.drsl"]) == 0
    assert run("encode", "--data", paths["train.drsd"], "--mode", "slots",
               "--out", paths["slots.drss"]) == 0
    assert run("align", "--slots", paths["slots.drss"], "--out", paths["aligned.drsl"],
               "--report", paths["align.json"]) == 0
    assert run("cluster", "--latents", paths["oracle.drsl"], "--mode", "dress",
               "--out", paths["parts"]) == 0
    assert run("cluster", "--latents", paths["oracle.drsl"], "--mode", "cactus",
               "--out", paths["cactus"]) == 0
    assert run("make-tasks", "--mode", "dress", "--partitions", paths["parts"],
               "--out", paths["train.drse"]) == 0
    assert run("make-tasks", "--mode", "supervised-oracle", "--data", paths["test.drsd"],
               "--out", paths["test.drse"]) == 0
    assert run("meta-train", "--data", paths["train.drsd"], "--tasks", paths["train.drse"],
               "--out", paths["model.drsm"]) == 0
    assert run("evaluate", "--data", paths["test.drsd"], "--tasks", paths["test.drse"],
               "--checkpoint", paths["model.drsm"], "--out", paths["dress.jsonl"]) == 0
    assert run("evaluate", "--data", paths["test.drsd"], "--tasks", paths["test.drse"],
               "--baseline", "fsda", "--out", paths["fsda.jsonl"]) == 0
    assert run("diversity", "--partitions", paths["parts"], "--out", paths["div.csv"]) == 0
    assert run("export-task-grid", "--data", paths["train.drsd"], "--tasks",
               paths["train.drse"], "--index", "1", "--out", paths["grid.ppm"]) == 0
    return {"run": run, "root": root, "cfg_path": cfg_path, **paths}


def test_cli_dataset_files_have_config_hash(workdir):
    cfg = load_config(workdir["cfg_path"])
    _, trailer = fileio.load_dataset(workdir["train.drsd"])
    assert trailer == config_hash(cfg)


def test_cli_dress_cluster_count_is_one_per_group(workdir):
    files = sorted(os.listdir(workdir["parts"]))
    assert len(files) == 6
    part, _ = fileio.load_partition(os.path.join(workdir["parts"], files[0]))
    assert part.source == "dress:floor-hue"
    assert part.k == MICRO["cluster"]["k"]


def test_cli_cactus_cluster_count_matches_scalings(workdir):
    assert len(os.listdir(workdir["cactus"])) == MICRO["cluster"]["cactus_scalings"]


def test_cli_default_episode_count_covers_training(workdir):
    episodes, _ = fileio.load_episodes(workdir["train.drse"])
    assert len(episodes) == MICRO["train"]["epochs"] * MICRO["train"]["meta_batch"]


def test_cli_supervised_default_count_is_eval_tasks(workdir):
    episodes, _ = fileio.load_episodes(workdir["test.drse"])
    assert len(episodes) == MICRO["eval"]["tasks"]
    assert all(ep.source.startswith("supervised:") for ep in episodes)


def test_cli_align_report(workdir):
    with open(workdir["align.json"]) as fh:
        report = json.load(fh)
    assert report["images"] == 480
    assert 0.0 <= report["alignment_accuracy"] <= 1.0
    assert len(report["config_hash"]) == 64


def test_cli_evaluate_is_byte_identical(workdir):
    out = str(workdir["root"] / "again.jsonl")
    assert workdir["run"]("evaluate", "--data", workdir["test.drsd"],
                          "--tasks", workdir["test.drse"], "--checkpoint",
                          workdir["model.drsm"], "--out", out) == 0
    assert open(out, "rb").read() == open(workdir["dress.jsonl"], "rb").read()


def test_cli_jsonl_shape(workdir):
    lines = open(workdir["dress.jsonl"]).read().splitlines()
    assert len(lines) == MICRO["eval"]["tasks"] + 1
    first = json.loads(lines[0])
    assert set(first) == {"task_id", "source", "accuracy"}
    summary = json.loads(lines[-1])
    assert summary["task_count"] == MICRO["eval"]["tasks"]
    assert summary["method"] == "meta-trained"
    assert len(summary["config_hash"]) == 64


def test_cli_diversity_csv_shape(workdir):
    lines = open(workdir["div.csv"]).read().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[1] == "source1,source2,avg_iou,score"
    assert len(lines) == 2 + 15 + 1  # header rows, C(6,2) pairs, mean row
    assert lines[-1].startswith("mean,,")


def test_cli_ppm_grid(workdir):
    raw = open(workdir["grid.ppm"], "rb").read()
    assert raw.startswith(b"P6\n# config_hash=")
    header, rest = raw.split(b"255\n", 1)
    dims = header.splitlines()[2].split()
    w, h = int(dims[0]), int(dims[1])
    assert len(rest) == w * h * 3
    # 2 class rows of 8px cells plus padding
    assert h == 2 * 8 + 3 * 2


def test_cli_loss_trace(workdir):
    lines = open(workdir["model.drsm"] + ".loss.csv").read().splitlines()
    assert lines[1] == "epoch,query_loss"
    assert len(lines) == 2 + MICRO["train"]["epochs"]
    assert lines[2].startswith("1,")


def test_cli_resume_from_final_is_noop(workdir):
    out = str(workdir["root"] / "resumed.drsm")
    assert workdir["run"]("meta-train", "--data", workdir["train.drsd"],
                          "--tasks", workdir["train.drse"], "--resume",
                          workdir["model.drsm"], "--out", out) == 0
    assert open(out, "rb").read() == open(workdir["model.drsm"], "rb").read()


def test_cli_validation_exit_codes(workdir, tmp_path):
    run = workdir["run"]
    # contradictory flags
    assert run("evaluate", "--data", workdir["test.drsd"], "--tasks", workdir["test.drse"],
               "--baseline", "fsda", "--checkpoint", workdir["model.drsm"],
               "--out", str(tmp_path / "x.jsonl")) == 2
    # missing inputs
    assert run("encode", "--data", str(tmp_path / "nope.drsd"), "--mode", "oracle",
               "--out", str(tmp_path / "x.drsl")) == 2
    # gen-data with nothing to write
    assert run("gen-data") == 2
    # --config plus --profile
    assert cli.main(["gen-data", "--config", workdir["cfg_path"], "--profile", "desk",
                     "--out", str(tmp_path / "d.drsd")]) == 2


def test_cli_hash_mismatch_refused(workdir, tmp_path):
    other = dict(MICRO)
    other["cluster"] = dict(MICRO["cluster"], k=5)
    other_path = str(tmp_path / "other.json")
    with open(other_path, "w") as fh:
        json.dump(other, fh)
    code = cli.main(["encode", "--config", other_path, "--data", workdir["train.drsd"],
                     "--mode", "oracle", "--out", str(tmp_path / "z.drsl")])
    assert code == 2


def test_cli_runtime_error_exit_code(workdir, tmp_path):
    bad = str(tmp_path / "corrupt.drsd")
    with open(bad, "wb") as fh:
        fh.write(b"GARBAGE!")
    code = workdir["run"]("encode", "--data", bad, "--mode", "oracle",
                          "--out", str(tmp_path / "x.drsl"))
    assert code == 1


def test_cli_bad_config_exit_code(tmp_path):
    path = str(tmp_path / "bad.json")
    with open(path, "w") as fh:
        json.dump({"data": {"count": 0}}, fh)
    assert cli.main(["gen-data", "--config", path, "--out", str(tmp_path / "d.drsd")]) == 2


def test_cli_repro_byte_identical(tmp_path):
    doc = dict(MICRO, seeds=[0], eval={"tasks": 6},
               train={"epochs": 3, "meta_batch": 2, "checkpoint_every": 0})
    cfg_path = str(tmp_path / "tiny.json")
    with open(cfg_path, "w") as fh:
        json.dump(doc, fh)
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    assert cli.main(["repro", "--config", cfg_path, "--out", out1]) == 0
    assert cli.main(["repro", "--config", cfg_path, "--out", out2]) == 0
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    assert "summary.json" in names and "summary.txt" in names
    for name in names:
        a = open(os.path.join(out1, name), "rb").read()
        b = open(os.path.join(out2, name), "rb").read()
        assert a == b, f"{name} differs between identical repro runs"
    # a changed config must refuse to reuse the directory
    doc2 = dict(doc, eval={"tasks": 7})
    cfg2 = str(tmp_path / "tiny2.json")
    with open(cfg2, "w") as fh:
        json.dump(doc2, fh)
    assert cli.main(["repro", "--config", cfg2, "--out", out1]) == 2


def test_cli_repro_seed_count_flag(tmp_path):
    doc = dict(MICRO, seeds=[5, 6, 7], eval={"tasks": 4},
               train={"epochs": 2, "meta_batch": 2, "checkpoint_every": 0})
    cfg_path = str(tmp_path / "tiny.json")
    with open(cfg_path, "w") as fh:
        json.dump(doc, fh)
    out = str(tmp_path / "rep")
    assert cli.main(["repro", "--config", cfg_path, "--seeds", "2", "--out", out]) == 0
    with open(os.path.join(out, "summary.json")) as fh:
        assert json.load(fh)["seeds"] == [0, 1]
