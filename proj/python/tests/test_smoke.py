import math

import numpy as np
import pytest

import neuralhawkes as nh


def exp1d():
    return nh.preset("exp1d")


def test_presets_listed():
    assert "benchmark" in nh.preset_names()
    spec = nh.preset("benchmark")
    assert spec.dimension == 2
    assert spec.branching_ratio() < 1.0


def test_spec_round_trip_and_values():
    spec = nh.kernel_spec(
        {
            "dimension": 1,
            "marks": 1,
            "baseline": [0.5],
            "kernels": [[{"family": "exponential", "alpha": 1.0, "beta": 2.0}]],
        }
    )
    v = spec(0, 0, [0.0, 1.0])
    assert v == pytest.approx([1.0, math.exp(-2.0)])
    again = nh.KernelSpec.from_json(spec.to_json())
    assert again.norms()[0, 0] == pytest.approx(0.5)


def test_simulation_is_seeded():
    a = nh.simulate(exp1d(), 500.0, seed=3)
    b = nh.simulate(exp1d(), 500.0, seed=3)
    assert len(a) > 0
    assert np.array_equal(a.times, b.times)
    # stationary rate mu / (1 - ||phi||) = 1
    assert len(a) / a.horizon == pytest.approx(1.0, rel=0.25)


def test_stream_csv_round_trip(tmp_path):
    s = nh.EventStream(2, 1, 3.0, [0.5, 1.0, 2.5], [0, 1, 0], [1, 1, 1])
    path = str(tmp_path / "events.csv")
    s.write_csv(path)
    back = nh.EventStream.read_csv(path)
    assert list(back.components) == [0, 1, 0]
    assert back.counts() == [2, 1]


def test_bad_input_raises_value_error():
    with pytest.raises(ValueError):
        nh.build_grid(5.0, 10, 10, 1.0)
    with pytest.raises(ValueError):
        nh.EventStream(1, 1, 1.0, [0.5], [0, 0], [1])


def test_stats_fit_and_reports(tmp_path):
    stream = nh.simulate(exp1d(), 20000.0, seed=1)
    grid = nh.build_grid(0.1, 10, 30, 5.0)
    stats = nh.estimate_second_order(stream, grid)
    assert stats.rates[0] == pytest.approx(1.0, rel=0.1)
    assert stats.g(0, 0).shape == (len(grid.points) - 1,)

    path = str(tmp_path / "stats.csv")
    stats.save(path)
    assert np.allclose(nh.SecondOrderStats.load(path).g(0, 0), stats.g(0, 0))

    config = nh.default_train_config()
    assert config["width"] == 64
    model = nh.fit_neural(stats, {"epochs": 20, "width": 16, "quadrature": 60, "optimizer": "adam", "lr0": 0.01, "seed": 2})
    assert len(model.loss_history()[0]) == 20
    assert model.norms()[0, 0] == pytest.approx(0.5, abs=0.15)
    report = nh.error_report(model, exp1d(), K=100)
    assert report["delta2_normalized"] < 0.2

    wh = nh.fit_wiener_hopf(stats, 100)
    assert wh(0, 0, [0.5])[0] == pytest.approx(math.exp(-1.0), rel=0.3)
    assert nh.error_report(wh, exp1d(), K=100)["delta2_normalized"] < 0.2


def test_causality_hand_example():
    r = nh.causality_report([[0.4, 0.1], [0.3, 0.2]], [2.0, 1.0])
    assert r["spillover"][1][0] == pytest.approx(0.6)
    assert r["leader"][0] == pytest.approx(0.6)
    assert r["receiver"][1] == pytest.approx(0.6)
    assert sum(r["participation"]) == pytest.approx(1.0)
    assert nh.branching_ratio([[0.4, 0.1], [0.3, 0.2]]) == pytest.approx(0.5)
