import json

import pytest

from gasforge.chain_ingest import export_blocks, import_blocks
from gasforge.cli import main
from gasforge.fee_mechanism import FeeTrajectory
from gasforge.synthetic import synthetic_blocks, write_period
from conftest import FakeNode, header_json, make_seq


@pytest.fixture(scope="module")
def period(tmp_path_factory):
    return write_period(tmp_path_factory.mktemp("cli"), "period1", n_blocks=500, seed=3)


def test_ingest_file_and_rpc(tmp_path, http_node, capsys):
    seq = make_seq(6)
    src = tmp_path / "b.csv"
    export_blocks(seq, src, "csv")
    out = tmp_path / "b.jsonl"
    assert main(["ingest", "--file", str(src), "--out", str(out)]) == 0
    assert import_blocks(out) == seq
    url = http_node(FakeNode({r.block_number: header_json(r) for r in seq}))
    rpc_out = tmp_path / "rpc.csv"
    assert main(["ingest", "--rpc", url, "--from", "101", "--to", "104", "--out", str(rpc_out)]) == 0
    assert list(import_blocks(rpc_out)) == list(seq[1:5])
    assert "4 blocks (101..104)" in capsys.readouterr().out


def test_ingest_bad_file_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,block_number,gas_limit,gas_used,base_fee\n1,1,10,11,7\n")
    assert main(["ingest", "--file", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_sentiment_lexicon_and_file(tmp_path, capsys):
    chat = tmp_path / "chat.json"
    chat.write_text(json.dumps({"channel": {"name": "dev"}, "messages": [
        {"timestamp": "2023-03-21T00:10:00Z", "content": "bullish"},
        {"timestamp": "2023-03-21T00:20:00Z", "content": ""},
        {"timestamp": "2023-03-21T01:20:00Z", "content": "gas is expensive"}]}))
    out = tmp_path / "h.csv"
    assert main(["sentiment", "--chat", str(chat), "--interval", "hour", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    scores = tmp_path / "s.csv"
    scores.write_text("timestamp,p_pos,p_neg,p_neu\n1679400000,0.6,0.3,0.1\n")
    assert main(["sentiment", "--scorer", "file", "--scores", str(scores), "--interval", "day",
                 "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1].startswith("1679356800,day,0.6,0.3,")


def test_featurize_train_evaluate(period, tmp_path, capsys):
    ds = tmp_path / "ds.csv"
    assert main(["featurize", "--blocks", period["blocks_path"], "--k", "3", "--hourly", period["hourly_path"],
                 "--daily", period["daily_path"], "--out", str(ds)]) == 0
    header = ds.read_text().splitlines()[0]
    assert header == ("alpha_1,alpha_2,alpha_3,beta_1,beta_2,beta_3,gh_pos,gh_neg,gh_neu,"
                      "gd_pos,gd_neg,gd_neu,target_y")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 3, "widths": [8]}))
    model = tmp_path / "m.txt"
    curve = tmp_path / "loss.csv"
    assert main(["train", "--dataset", str(ds), "--model", "nam", "--config", str(cfg),
                 "--loss-curve", str(curve), "--out", str(model)]) == 0
    assert len(curve.read_text().splitlines()) == 4
    meta = json.loads((tmp_path / "m.txt.meta.json").read_text())
    capsys.readouterr()
    preds = tmp_path / "pred.csv"
    assert main(["evaluate", "--model", str(model), "--dataset", str(ds), "--out", str(preds)]) == 0
    assert json.loads(capsys.readouterr().out)["test_mse"] == pytest.approx(meta["test_mse"])
    assert preds.read_text().startswith("target_block,actual,predicted\n")


def test_train_monotonic(period, tmp_path, capsys):
    ds = tmp_path / "ds.csv"
    main(["featurize", "--blocks", period["blocks_path"], "--k", "2", "--out", str(ds)])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 5, "widths": [8], "learning_rate": 0.01}))
    capsys.readouterr()
    assert main(["train", "--dataset", str(ds), "--model", "nam-monotonic", "--config", str(cfg),
                 "--out", str(tmp_path / "m.txt")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert {"achieved_zero", "violation", "unconstrained_test_mse"} <= set(out)


def test_matrix_and_report(period, tmp_path, capsys):
    cfg = tmp_path / "matrix.json"
    cfg.write_text(json.dumps({"periods": {"P1": period}, "ks": [2, 1], "trials": 1, "model_kind": "linear"}))
    rep = tmp_path / "rep.json"
    assert main(["matrix", "--config", str(cfg), "--out", str(rep), "--format", "json"]) == 0
    assert len(json.loads(rep.read_text())) == 8
    md = tmp_path / "rep.md"
    assert main(["report", "--in", str(rep), "--format", "markdown", "--out", str(md)]) == 0
    assert "| 2 Timesteps |" in md.read_text()

    cfg.write_text(json.dumps({"specs": [
        {"blocks_path": period["blocks_path"], "k": 1, "trials": 1, "model_kind": "linear"},
        {"blocks_path": str(tmp_path / "nope.csv"), "k": 1, "trials": 1, "model_kind": "linear"}]}))
    assert main(["matrix", "--config", str(cfg), "--out", str(tmp_path / "r.csv")]) == 1
    assert "FAILED" in capsys.readouterr().err


def test_simulate_and_compare(tmp_path, capsys):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"mechanism": {"max_change_denominator": 8}, "horizon": 50,
                               "demand": {"kind": "spike", "seed": 2, "elasticity": 0.3},
                               "predictor": "perfect"}))
    for mode in ("reactive", "proactive"):
        out = tmp_path / f"{mode}.csv"
        assert main(["simulate", "--mode", mode, "--params", str(cfg), "--out", str(out)]) == 0
        assert len(FeeTrajectory.import_csv(out)) == 50
    blocks = tmp_path / "blocks.csv"
    export_blocks(synthetic_blocks(30, seed=1), blocks, "csv")
    cfg.write_text(json.dumps({"blocks": str(blocks), "initial_fee": 10**9}))
    assert main(["simulate", "--mode", "reactive", "--params", str(cfg), "--out", str(tmp_path / "r.csv")]) == 0

    cfg.write_text(json.dumps({"horizon": 80, "demand": {"kind": "sinusoidal", "seed": 5}}))
    capsys.readouterr()
    assert main(["compare", "--params", str(cfg), "--trajectories", str(tmp_path / "traj")]) == 0
    assert json.loads(capsys.readouterr().out)["shift_by_one"] is True
    assert (tmp_path / "traj" / "proactive.csv").exists()


def test_simulate_with_trained_model(period, tmp_path):
    ds = tmp_path / "ds.csv"
    main(["featurize", "--blocks", period["blocks_path"], "--k", "2", "--out", str(ds)])
    model = tmp_path / "lin.txt"
    assert main(["train", "--dataset", str(ds), "--model", "linear", "--out", str(model)]) == 0
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"horizon": 40, "predictor": {"model": str(model)},
                               "demand": {"kind": "autoregressive", "seed": 1}}))
    out = tmp_path / "p.csv"
    assert main(["simulate", "--mode", "proactive", "--params", str(cfg), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0].endswith("predicted_load")
