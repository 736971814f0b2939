import math

import pytest

import erd_tf


def test_latency_cost_is_half_at_theta():
    assert erd_tf.latency_cost(30, 30) == 0.5
    assert erd_tf.latency_cost(35, 30) == pytest.approx(0.993307, abs=1e-6)


def test_generated_corpus_has_requested_shape():
    users = erd_tf.generate_corpus(seed=3, n_users=20, positive_ratio=0.5)
    assert len(users) == 20
    assert sum(u["label"] for u in users) == 10
    stats = erd_tf.corpus_stats(users)
    assert stats["users"] == 20
    assert 11 <= stats["min_posts"] <= stats["max_posts"] <= 100
    assert users == erd_tf.generate_corpus(seed=3, n_users=20, positive_ratio=0.5)


def test_score_four_user_example():
    gold = [
        {"user_id": "a", "label": 1, "posts": ["x"] * 40},
        {"user_id": "b", "label": 0, "posts": ["x"] * 40},
        {"user_id": "c", "label": 1, "posts": ["x"] * 40},
        {"user_id": "d", "label": 0, "posts": ["x"] * 40},
    ]
    decisions = [
        {"user_id": "a", "decision": 1, "k": 5},
        {"user_id": "b", "decision": 1, "k": 7},
        {"user_id": "c", "decision": 0, "k": 40},
        {"user_id": "d", "decision": 0, "k": 40},
    ]
    report = erd_tf.score(decisions, gold, c_fp=0.5)
    assert report["ERDE30"] == pytest.approx(0.375, abs=1e-9)
    assert report["TP"] == 1 and report["FP"] == 1 and report["FN"] == 1 and report["TN"] == 1


def test_score_rejects_missing_decisions():
    gold = [{"user_id": "a", "label": 1, "posts": ["x"]}, {"user_id": "b", "label": 0, "posts": ["y"]}]
    with pytest.raises(erd_tf.ContractViolation):
        erd_tf.score([{"user_id": "a", "decision": 1, "k": 1}], gold)


def test_temporal_loss_mixed_batch():
    loss, per_sample = erd_tf.temporal_loss([0.7, 0.9, 0.2], [1, 1, 0], [35, 10, 50], [1, 1, 0], [80, 80, 50])
    assert loss == pytest.approx((1 - math.log(0.9) - math.log(0.8)) / 3, rel=1e-12)
    assert per_sample[0] == 1.0


def test_policy_and_encoding():
    assert erd_tf.policy_alarm(0.75, 12, min_delay=10)
    assert not erd_tf.policy_alarm(0.7, 12)
    assert not erd_tf.policy_alarm(0.95, 3)
    enc = erd_tf.encode_timed_input("hoy es un día triste", 10)
    assert enc == "[CLS] hoy es un día triste [TIME] 10 [SEP]"
    assert erd_tf.decode_timed_input(enc) == ("hoy es un día triste", 10)


def test_cli_pipeline(tmp_path):
    rd = str(tmp_path / "run")
    code, out, _ = erd_tf.run_cli("--run-dir", rd, "--seed", "7", "generate", "--users", "40")
    assert code == 0 and "mean" in out
    assert erd_tf.run_cli("--run-dir", rd, "--seed", "7", "generate", "--split", "test", "--users", "20")[0] == 0
    assert erd_tf.run_cli("--run-dir", rd, "--seed", "7", "train", "--epochs", "2")[0] == 0
    code, out, _ = erd_tf.run_cli("--run-dir", rd, "client")
    assert code == 0
    assert (tmp_path / "run" / "client" / "temporal_per_round" / "report.json").exists()
    assert erd_tf.run_cli("bogus")[0] == 2
