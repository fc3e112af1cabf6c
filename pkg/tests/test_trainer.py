"""Training loop: accounting, determinism, resume equivalence, abort path."""

import numpy as np
import pytest

from crossvid.databank import FeatureBank
from crossvid.errors import CheckpointError, ConfigError, TrainingAbort
from crossvid.synth import SynthConfig, generate_planted_bank
from crossvid.trainer import TrainConfig, resume, train, write_curve_csv


def planted(n=16, d=16, k=4, seed=0, sigma=0.1):
    cfg = SynthConfig(n=n, d=d, k=k, n_frames=2, n_tag_variants=2,
                      noise_sigma=sigma, seed=seed)
    bank, _ = generate_planted_bank(cfg)
    return bank


def test_epochs_zero_rejected():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0).validate()


def test_single_full_batch_is_one_step():
    bank = planted(n=8)
    result = train(bank, TrainConfig(k=4, batch_size=8, epochs=1, seed=1))
    assert result.step == 1
    assert len(result.curve) == 1


def test_step_accounting_with_partial_batches():
    bank = planted(n=10)
    result = train(bank, TrainConfig(k=4, batch_size=4, epochs=3, seed=1))
    assert result.step == 9          # ceil(10/4) = 3 batches x 3 epochs
    assert [row["step"] for row in result.curve] == list(range(1, 10))


def test_same_seed_byte_identical_checkpoints(tmp_path):
    bank = planted()
    cfg = TrainConfig(k=4, batch_size=8, epochs=2, seed=7)
    train(bank, cfg, out_dir=tmp_path / "a")
    train(bank, cfg, out_dir=tmp_path / "b")
    a = (tmp_path / "a" / "checkpoint_final.ckpt").read_bytes()
    b = (tmp_path / "b" / "checkpoint_final.ckpt").read_bytes()
    assert a == b
    ca = (tmp_path / "a" / "curve.csv").read_bytes()
    cb = (tmp_path / "b" / "curve.csv").read_bytes()
    assert ca == cb


def test_curve_is_finite_and_warmup_lr_increases():
    bank = planted()
    cfg = TrainConfig(k=4, batch_size=8, epochs=4, seed=2, warmup_steps=6)
    result = train(bank, cfg)
    lrs = [row["lr"] for row in result.curve]
    assert all(np.isfinite(row["total"]) for row in result.curve)
    assert all(b > a for a, b in zip(lrs[:6], lrs[1:6]))
    assert lrs[-1] == pytest.approx(cfg.base_lr)


def test_planted_loss_drops_by_half_in_200_steps():
    cfg = SynthConfig(n=32, d=16, k=4, n_frames=2, n_tag_variants=2,
                      noise_sigma=0.1, seed=4)
    bank, _ = generate_planted_bank(cfg)
    result = train(bank, TrainConfig(k=4, batch_size=16, epochs=100, seed=4))
    assert result.step == 200
    first, last = result.curve[0]["total"], result.curve[-1]["total"]
    assert last < 0.5 * first


def test_resume_zero_steps_is_idempotent(tmp_path):
    bank = planted()
    cfg = TrainConfig(k=4, batch_size=8, epochs=2, seed=5)
    result = train(bank, cfg, out_dir=tmp_path / "run")
    ckpt = result.checkpoint_path
    res2 = resume(ckpt, bank, cfg, out_dir=tmp_path / "resumed")
    assert res2.step == result.step
    a = (tmp_path / "run" / "checkpoint_final.ckpt").read_bytes()
    b = (tmp_path / "resumed" / "checkpoint_final.ckpt").read_bytes()
    assert a == b


def test_split_run_equals_straight_run(tmp_path):
    bank = planted(n=12)
    # 10 total steps: epochs=5 with 2 batches per epoch
    cfg = TrainConfig(k=4, batch_size=6, epochs=5, seed=6)
    straight = train(bank, cfg)

    cfg_ckpt = TrainConfig(k=4, batch_size=6, epochs=5, seed=6,
                           checkpoint_every=5)
    train(bank, cfg_ckpt, out_dir=tmp_path / "half")
    mid = tmp_path / "half" / "checkpoint_step5.ckpt"
    assert mid.exists()
    resumed = resume(str(mid), bank, cfg)
    assert resumed.step == straight.step == 10
    for (name, a), (_, b) in zip(straight.params.param_items(),
                                 resumed.params.param_items()):
        assert np.allclose(a, b, atol=1e-12), name


def test_resume_k_mismatch_rejected(tmp_path):
    bank = planted()
    cfg = TrainConfig(k=4, batch_size=8, epochs=1, seed=8)
    result = train(bank, cfg, out_dir=tmp_path / "run")
    bad = TrainConfig(k=8, batch_size=8, epochs=2, seed=8)
    with pytest.raises(CheckpointError, match="K=4"):
        resume(result.checkpoint_path, bank, bad)


def test_resume_requires_training_state(tmp_path):
    from crossvid.model import init_params, save_checkpoint

    bank = planted()
    path = tmp_path / "eval_only.ckpt"
    save_checkpoint(path, init_params(16, 4, seed=0))
    with pytest.raises(CheckpointError, match="training state"):
        resume(str(path), bank, TrainConfig(k=4, batch_size=8, epochs=1))


def test_non_finite_loss_aborts_with_step():
    rng = np.random.default_rng(0)
    huge = 1e200
    bank = FeatureBank(
        text=rng.standard_normal((4, 8)) * huge,
        frames=rng.standard_normal((4, 2, 8)) * huge,
        tags_visual=rng.standard_normal((4, 1, 8)),
        tags_textual=rng.standard_normal((4, 1, 8)),
    )
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingAbort, match="step 1"):
            train(bank, TrainConfig(k=2, batch_size=4, epochs=1, seed=0))


def test_batch_size_larger_than_bank_rejected():
    bank = planted(n=4)
    with pytest.raises(ConfigError):
        train(bank, TrainConfig(k=4, batch_size=8, epochs=1))


def test_indivisible_k_rejected():
    bank = planted(n=4, d=16)
    with pytest.raises(ConfigError):
        train(bank, TrainConfig(k=3, batch_size=4, epochs=1))


def test_curve_csv_format(tmp_path):
    bank = planted(n=8)
    result = train(bank, TrainConfig(k=4, batch_size=8, epochs=2, seed=9))
    path = tmp_path / "curve.csv"
    write_curve_csv(result.curve, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "step,L_S,L_C,L_A,total,lr"
    assert len(lines) == 1 + len(result.curve)


def test_config_file_loading(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text('{"k": 2, "epochs": 3, "batch_size": 4, "seed": 13}')
    cfg = TrainConfig.from_file(str(cfg_path))
    assert (cfg.k, cfg.epochs, cfg.batch_size, cfg.seed) == (2, 3, 4, 13)

    toml_path = tmp_path / "cfg.toml"
    toml_path.write_text('k = 2\nepochs = 3\nbatch_size = 4\nalpha_a = 0.5\n')
    cfg2 = TrainConfig.from_file(str(toml_path))
    assert cfg2.alpha_a == 0.5

    bad = tmp_path / "bad.json"
    bad.write_text('{"nonsense_key": 1}')
    with pytest.raises(ConfigError, match="nonsense_key"):
        TrainConfig.from_file(str(bad))
