import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gasforge.bench import (
    SETTING_LABELS, DemandSpec, ExperimentSpec, ModelPredictor, ReportRow, compare_mechanisms,
    emit_report, load_report, study_grid, prepare_dataset, render_markdown, run_experiment,
    run_matrix, setting_label,
)
from gasforge.features import BetaScaler
from gasforge.models import LinearModel, ShapeError
from gasforge.synthetic import PERIODS, write_period

FAST = {"epochs": 3, "widths": [8]}


@pytest.fixture(scope="module")
def periods(tmp_path_factory):
    d = tmp_path_factory.mktemp("periods")
    return {PERIODS[name].label: write_period(d, name, n_blocks=600, seed=i)
            for i, name in enumerate(["period1", "period2"])}


@pytest.fixture(scope="module")
def p1(periods):
    return next(iter(periods.values()))


def test_setting_labels():
    assert SETTING_LABELS == ("+OC,+DS,+HS", "+OC,+DS,-HS", "+OC,-DS,+HS", "+OC,-DS,-HS")
    assert setting_label(False, True) == "+OC,-DS,+HS"


def test_spec_validation(p1):
    with pytest.raises(ValueError):
        ExperimentSpec(p1["blocks_path"], 3, trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec(p1["blocks_path"], 3, use_onchain=False)


def test_single_trial_has_zero_variance(p1):
    row = run_experiment(ExperimentSpec(k=2, trials=1, overrides=FAST, **p1))
    assert row.variance == 0.0 and row.mse > 0 and row.trials == 1


def test_run_experiment_deterministic(p1):
    spec = ExperimentSpec(k=2, trials=2, use_hour_sentiment=True, overrides=FAST, **p1)
    assert run_experiment(spec) == run_experiment(spec)


def test_settings_share_windows(p1):
    sizes = {len(prepare_dataset(ExperimentSpec(k=3, use_day_sentiment=d, use_hour_sentiment=h, **p1)))
             for d, h in [(True, True), (True, False), (False, True), (False, False)]}
    assert len(sizes) == 1


def test_flag_without_series_is_error(p1):
    with pytest.raises(ValueError):
        run_experiment(ExperimentSpec(p1["blocks_path"], 1, use_hour_sentiment=True, trials=1))


def test_full_grid_shape_and_order(periods):
    rows = run_matrix(study_grid(periods, trials=1, model_kind="linear"))
    assert len(rows) == 24
    labels = list(periods)
    expected = [(p, k, s) for p in labels for k in (3, 2, 1) for s in SETTING_LABELS]
    assert [(r.period, r.k, r.settings) for r in rows] == expected
    assert all(r.ok for r in rows)


def test_single_spec_single_row(p1):
    assert len(run_matrix([ExperimentSpec(k=1, trials=1, model_kind="linear", **p1)])) == 1
    with pytest.raises(ValueError):
        run_matrix([])


def test_fault_isolation(p1, tmp_path):
    good = [ExperimentSpec(k=k, trials=1, model_kind="linear", period="P", **p1) for k in (1, 2)]
    bad = ExperimentSpec(str(tmp_path / "missing.csv"), 3, period="P", trials=1, model_kind="linear")
    alone = run_matrix(good)
    rows = run_matrix(good + [bad], workers=3)
    assert len(rows) == 3
    assert rows[0].k == 3 and not rows[0].ok and "missing" in rows[0].error
    assert rows[1:] == sorted(alone, key=lambda r: -r.k)


def _row(**kw):
    base = dict(period="P", k=1, settings="+OC,-DS,-HS", model_kind="nam", mse=0.1, variance=0.0, trials=1)
    return ReportRow(**{**base, **kw})


def test_markdown_layout():
    rows = [_row(period=p, k=k, settings=s, mse=0.1 + k / 100)
            for p in ("Period 1", "Period 2") for k in (3, 2, 1) for s in SETTING_LABELS]
    rows[5] = _row(period="Period 1", k=2, settings=SETTING_LABELS[1], mse=None, variance=None, error="boom")
    md = render_markdown(rows).splitlines()
    assert md[0] == "| | +OC,+DS,+HS | +OC,+DS,-HS | +OC,-DS,+HS | +OC,-DS,-HS |"
    assert len(md) == 2 + 2 * (1 + 3)
    assert md[2].startswith("| **Period 1** |") and md[6].startswith("| **Period 2** |")
    assert md[3] == "| 3 Timesteps | 0.13000 | 0.13000 | 0.13000 | 0.13000 |"
    assert md[4] == "| 2 Timesteps | 0.12000 | ERR | 0.12000 | 0.12000 |"
    assert md[5].startswith("| 1 Timestep |")


def test_emit_requires_rows(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path / "r.csv")


# the csv module cannot write NUL; any other character must survive
label = st.text(st.characters(blacklist_characters="\x00", blacklist_categories=("Cs",)), min_size=1, max_size=20)
rows_strategy = st.lists(st.builds(
    ReportRow,
    period=label, k=st.integers(1, 10),
    settings=st.sampled_from(SETTING_LABELS), model_kind=st.sampled_from(["nam", "linear", "mlp"]),
    mse=st.one_of(st.none(), st.floats(0, 1e6)), variance=st.one_of(st.none(), st.floats(0, 1e6)),
    trials=st.integers(1, 20), error=st.one_of(st.none(), label)),
    min_size=1, max_size=10)


@given(rows_strategy, st.sampled_from(["csv", "json"]))
def test_report_round_trip(tmp_path_factory, rows, fmt):
    p = tmp_path_factory.mktemp("rep") / f"r.{fmt}"
    emit_report(rows, p, fmt)
    assert load_report(p) == rows


@pytest.mark.parametrize("seed", range(20))
def test_perfect_foresight_never_worse_on_elastic_paths(seed):
    kind = ("sinusoidal", "autoregressive", "spike")[seed % 3]
    rep = compare_mechanisms(DemandSpec(kind, seed, elasticity=0.5), "perfect", horizon=200)
    assert rep.proactive["mean_abs_load"] <= rep.reactive["mean_abs_load"]
    assert rep.shift_by_one


def test_zero_predictor_on_target_demand_identical():
    from gasforge.fee_mechanism import DemandModel, ConstantPredictor, simulate_proactive, simulate_reactive
    d = DemandModel("sinusoidal", 0, np.full(50, 0.5), elasticity=0.7)
    r = simulate_reactive(d, initial_fee=10**9)
    p = simulate_proactive(d, ConstantPredictor(0.0), horizon=50, initial_fee=10**9)
    assert r.base_fees == p.base_fees and r.gas_used == p.gas_used


def test_inelastic_comparison_same_demand_different_fees():
    rep = compare_mechanisms(DemandSpec("autoregressive", 4, 0.0), "perfect", horizon=100)
    assert rep.reactive_trajectory.gas_used == rep.proactive_trajectory.gas_used
    assert rep.reactive_trajectory.base_fees != rep.proactive_trajectory.base_fees
    json.dumps(rep.to_dict())


def test_model_predictor_shape_check():
    with pytest.raises(ShapeError):
        ModelPredictor(LinearModel(np.zeros(5)), 3)
    pred = ModelPredictor(LinearModel(np.array([1.0, 0.0]), np.array([-0.5])), 1, BetaScaler())
    rep = compare_mechanisms(DemandSpec("sinusoidal", 1), pred, horizon=50)
    assert rep.proactive_trajectory.predicted[0] == 0.0
    assert len(rep.proactive_trajectory) == 50
