import pytest

from mgan import cli
from mgan.config import toy_hyperparams
from mgan.corpus import SynthConfig, build_vocab, gen_synthetic, write_corpus
from mgan.numerics import GradCheckReport
from mgan.training import TrainConfig, load_checkpoint, save_checkpoint, train_target_only

SMALL = """\
# tiny pipeline
seed = 3
out_dir = out
data.source = out/source.jsonl
data.target = out/target.jsonl
data.source_test = out/source_test.jsonl
data.source_test_manifest = out/source_test.manifest
data.target_test = out/target_test.jsonl
data.embeddings = out/embeddings.txt
synth.source_size = 120
synth.source_test_size = 30
synth.target_size = 40
synth.target_test_size = 20
synth.embedding_dim = 8
hp.d_w = 8
hp.d_h = 6
hp.d_u = 5
hp.fc = 7
hp.lr = 1e-3
train.max_epochs = 2
train.max_iterations = 6
"""


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, dict(line.split("=", 1) for line in out.splitlines() if "=" in line), err


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(SMALL)
    return p


def pipeline(capsys, cfg):
    results = []
    for argv in (["gen-synth"], ["pretrain"], ["train", "--from", str(cfg.parent / "out/pretrain.ckpt")]):
        code, pairs, err = run(capsys, *argv, "--config", str(cfg))
        assert code == 0, err
        results.append(pairs)
    return results


def test_pipeline_writes_artifacts_and_resolved_config(capsys, cfg_file):
    gen, pre, train = pipeline(capsys, cfg_file)
    out = cfg_file.parent / "out"
    for name in ("pretrain.ckpt", "train.ckpt", "pretrain.log", "train.log", "train.config", "embeddings.txt"):
        assert (out / name).is_file()
    assert not list(out.glob("*.tmp")) and not list(out.glob(".*"))
    # relative paths resolved against the config's directory
    assert gen["source"] == str(out / "source.jsonl")
    resolved = cli.parse_pairs((out / "train.config").read_text().splitlines(), "x")
    assert resolved["data.target"] == str(out / "target.jsonl")
    assert resolved["hp.lam"] == "0.1" and resolved["seed"] == "3"
    assert 0.0 <= float(train["test_accuracy"]) <= 1.0
    assert "localization" in pre


def test_pipeline_deterministic(capsys, tmp_path):
    outputs = []
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        (d / "run.cfg").write_text(SMALL)
        res = pipeline(capsys, d / "run.cfg")
        code, ev, _ = run(capsys, "eval", "--checkpoint", str(d / "out/train.ckpt"),
                          "--corpus", str(d / "out/target_test.jsonl"))
        outputs.append([{k: v for k, v in r.items() if k != "checkpoint"} for r in res[1:]] + [ev])
    assert outputs[0] == outputs[1]


def test_seed_flag_overrides_file(capsys, cfg_file):
    assert run(capsys, "gen-synth", "--config", str(cfg_file), "--seed", "11")[0] == 0
    resolved = (cfg_file.parent / "out/gen-synth.config").read_text()
    assert "seed = 11" in resolved


def test_set_overrides_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("hp.lr = 0.5\n")
    cfg = cli.load_config(str(p), ["hp.lr=0.25", "train.literal_eq9 = false"])
    assert cfg["hp.lr"] == 0.25 and cfg["train.literal_eq9"] is False


def test_defaults_are_published_values():
    cfg = cli.load_config(None)
    assert (cfg["hp.d_w"], cfg["hp.d_h"], cfg["hp.d_u"], cfg["hp.fc"]) == (200, 150, 100, 300)
    assert (cfg["hp.lr"], cfg["hp.clip_norm"], cfg["hp.lam"], cfg["hp.rho"]) == (1e-4, 40.0, 0.1, 1e-6)
    assert (cfg["hp.batch_source"], cfg["hp.batch_target"], cfg["hp.dropout"]) == (64, 32, 0.5)


def test_missing_config_file_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "pretrain", "--config", str(tmp_path / "nope.cfg"))
    assert code == 2 and "nope.cfg" in err


def test_missing_corpus_exit_2(capsys, tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("data.source = absent.jsonl\n")
    code, _, err = run(capsys, "pretrain", "--config", str(p))
    assert code == 2 and "absent.jsonl" in err


def test_unknown_key_exit_3(capsys, tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("hp.learning_rate = 0.1\n")
    code, _, err = run(capsys, "pretrain", "--config", str(p))
    assert code == 3 and "hp.learning_rate" in err


@pytest.mark.parametrize("line,key", [("hp.lr = fast", "hp.lr"), ("hp.dropout = 1.5", "hp.dropout"),
                                      ("hp.d_h = 0", "hp.d_h")])
def test_bad_values_exit_3(capsys, tmp_path, line, key):
    p = tmp_path / "c.cfg"
    p.write_text(line + "\n")
    code, _, err = run(capsys, "pretrain", "--config", str(p))
    assert code == 3 and key in err


def test_required_key_exit_3(capsys, tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("seed = 1\n")
    code, _, err = run(capsys, "pretrain", "--config", str(p))
    assert code == 3 and "data.source" in err


def test_embedding_dimension_mismatch_exit_3(capsys, cfg_file):
    run(capsys, "gen-synth", "--config", str(cfg_file))
    code, _, err = run(capsys, "pretrain", "--config", str(cfg_file), "--set", "hp.d_w=12")
    assert code == 3 and "hp.d_w" in err


def test_eval_identity_checkpoint_accuracy_one(capsys, tmp_path):
    c = gen_synthetic(SynthConfig(source_size=10, target_size=12, embedding_dim=0), 0)
    v = build_vocab([c.target])
    hp = toy_hyperparams(lr=3e-2, dropout=0.0)
    res = train_target_only(c.target, v, hp, TrainConfig(seed=0, val_fraction=0, max_epochs=300,
                                                         stop_at_train_accuracy=1.0))
    ck = tmp_path / "id.ckpt"
    save_checkpoint(ck, {"target": res.network}, v, [], hp)
    corpus = tmp_path / "t.jsonl"
    write_corpus(corpus, c.target, "target")
    code, pairs, _ = run(capsys, "eval", "--checkpoint", str(ck), "--corpus", str(corpus))
    assert code == 0 and float(pairs["accuracy"]) == 1.0 and pairs["n"] == "12"


def test_attn_dump_records(capsys, cfg_file):
    pipeline(capsys, cfg_file)
    out = cfg_file.parent / "traces.jsonl"
    code, pairs, _ = run(capsys, "attn-dump", "--checkpoint", str(cfg_file.parent / "out/pretrain.ckpt"),
                         "--corpus", str(cfg_file.parent / "out/source_test.jsonl"), "--out", str(out))
    assert code == 0 and pairs["records"] == "30"
    assert len(out.read_text().splitlines()) == 30
    assert load_checkpoint(cfg_file.parent / "out/pretrain.ckpt").networks.keys() == {"source"}


def test_gradcheck_passes(capsys):
    code, pairs, _ = run(capsys, "gradcheck")
    assert code == 0 and pairs["status"] == "ok"
    assert float(pairs["max_rel_error"]) < 1e-5


def test_gradcheck_failure_exit_4(capsys, monkeypatch):
    bad = GradCheckReport(max_rel_error=0.3, worst_param="pas.u_o", worst_index=(2,))
    monkeypatch.setattr(cli, "end_to_end_gradcheck", lambda seed: {"L_tar": bad})
    code, _, err = run(capsys, "gradcheck")
    assert code == 4 and "pas.u_o" in err
