import numpy as np
import pytest

from couta import perturbation, synthgen, trainer
from couta.data import TimeSeriesDataset, slide_windows
from couta.network import init_center, init_model
from couta.trainer import TrainConfig, train


@pytest.fixture(scope="module")
def bench():
    return synthgen.generate(synthgen.preset("pattern"), np.random.default_rng(0))


def _small_series(rng, n=60, d=2):
    t = np.arange(n)
    return TimeSeriesDataset(np.sin(t[:, None] / 4 + np.arange(d)) + 0.05 * rng.normal(size=(n, d)))


def test_epoch_count_recorded(rng):
    _, rep = train(_small_series(rng), TrainConfig(window=10, epochs=3, batch_size=16))
    assert len(rep.epochs) == 3 and len(rep.epoch_umc_full) == 3
    assert rep.epochs[0].n_perturbed == 11  # ceil(0.2 * 51) windows, each used once per epoch


def test_same_seed_bit_identical(rng):
    ds = _small_series(rng)
    cfg = TrainConfig(window=10, epochs=2, batch_size=16, seed=3)
    a, _ = train(ds, cfg)
    b, _ = train(ds, cfg)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k], b.params[k])
    c, _ = train(ds, TrainConfig(window=10, epochs=2, batch_size=16, seed=4))
    assert not np.array_equal(a.params["head.out.w"], c.params["head.out.w"])


def test_zero_epochs_returns_initialised_model(rng):
    ds = _small_series(rng)
    m, rep = train(ds, TrainConfig(window=10, epochs=0, seed=5))
    ref = init_model(2, 10, 16, 16, trainer._streams(5)[0])
    for k in ref.params:
        np.testing.assert_array_equal(m.params[k], ref.params[k])
    assert m.center is not None and rep.epochs == []


def test_center_never_changes(rng):
    ds = _small_series(rng)
    m0, _ = train(ds, TrainConfig(window=10, epochs=0))
    m, _ = train(ds, TrainConfig(window=10, epochs=4, lr=1e-2))
    np.testing.assert_array_equal(m.center, m0.center)
    assert not np.array_equal(m.params["head.out.w"], m0.params["head.out.w"])


def test_no_nac_skips_perturbation(rng, monkeypatch):
    def boom(*a, **k):
        raise AssertionError("perturbation module was called")

    monkeypatch.setattr(perturbation, "generate_native_anomalies", boom)
    _, rep = train(_small_series(rng), TrainConfig(window=10, epochs=2).variant("no-nac"))
    assert all(e.n_perturbed == 0 and e.alpha == 0.0 for e in rep.epochs)


def test_regenerate_per_epoch(rng, monkeypatch):
    calls = []
    real = perturbation.generate_native_anomalies
    monkeypatch.setattr(perturbation, "generate_native_anomalies",
                        lambda *a, **k: calls.append(1) or real(*a, **k))
    train(_small_series(rng), TrainConfig(window=10, epochs=3, regenerate_per_epoch=True))
    assert len(calls) == 3


def test_variants_set_scoring(rng):
    ds = _small_series(rng)
    m, _ = train(ds, TrainConfig(window=10, epochs=1).variant("no-umc"))
    assert m.scoring == "single"
    with pytest.raises(ValueError, match="variant"):
        TrainConfig().variant("half")


def test_point_only_pool_touches_last_row_only(rng):
    ws = slide_windows(rng.normal(size=(80, 3)), 12)
    out = perturbation.generate_native_anomalies(ws, 0.5, perturbation.select_pool("point-only"), rng)
    np.testing.assert_array_equal(out.windows[:, :-1], ws.windows[out.base, :-1])


def test_config_validation_and_unknown_keys():
    with pytest.raises(KeyError, match="epochz"):
        TrainConfig.from_dict({"epochz": 3})
    with pytest.raises(ValueError, match="window"):
        TrainConfig(window=0)
    with pytest.raises(ValueError, match="pool"):
        TrainConfig(pool="weird")
    assert TrainConfig.from_dict(TrainConfig(lr=0.5).to_dict()) == TrainConfig(lr=0.5)


def test_window_failure_has_context(rng):
    with pytest.raises(ValueError, match="cannot window the training set"):
        train(TimeSeriesDataset(rng.normal(size=(5, 2))), TrainConfig(window=10))


def test_umc_loss_mostly_non_increasing(bench):
    tr, _ = bench
    _, rep = train(tr, TrainConfig(window=50))
    drops = np.diff(rep.epoch_umc_full) <= 0
    assert drops.mean() >= 0.8


@pytest.mark.xfail(strict=True, reason="at lr 1e-4 with ~3 steps per epoch the loss falls about 10-20%; "
                                       "see the decisions ledger")
def test_default_run_halves_total_loss(bench):
    tr, _ = bench
    _, rep = train(tr, TrainConfig(window=50))
    assert rep.epochs[-1].total <= 0.5 * rep.epochs[0].total


def test_report_serialises(rng, tmp_path):
    _, rep = train(_small_series(rng), TrainConfig(window=10, epochs=2))
    rep.save(tmp_path / "r.json")
    assert '"l_umc"' in (tmp_path / "r.json").read_text()
