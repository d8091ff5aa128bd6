import copy
import json
import math

import numpy as np
import pytest

import util
from sean import corpus, metrics, synth, trainer
from sean.explorer import ExplorationState
from sean.seanet import ModelDims, ModelOptions, SeanNet, init_params
from sean.socialgraph import PayoutTable, RewardTable, SocialGraph


class TestBce:
    def test_half_is_ln2(self):
        assert trainer.bce_loss(0.5, 1) == pytest.approx(math.log(2), abs=1e-12)
        assert trainer.bce_loss(0.5, 0) == pytest.approx(math.log(2), abs=1e-12)

    def test_confident_correct_is_tiny(self):
        assert trainer.bce_loss(1.0, 1) == pytest.approx(1e-7, rel=0.01)
        assert trainer.bce_loss(0.0, 0) == pytest.approx(1e-7, rel=0.01)

    def test_batch_matches_hand_sum(self):
        pairs = [(0.8, 1), (0.3, 0), (0.6, 1)]
        expected = sum(-(y * math.log(p) + (1 - y) * math.log(1 - p)) for p, y in pairs) / 3
        assert trainer.batch_bce([p for p, _ in pairs], [y for _, y in pairs]) == pytest.approx(
            expected, abs=1e-12
        )

    def test_grad_sign(self):
        assert trainer.bce_grad(0.7, 1) < 0
        assert trainer.bce_grad(0.7, 0) > 0


class TestRunConfigDefaults:
    def test_reference_defaults(self):
        c = trainer.RunConfig()
        assert (c.beam_width, c.depth, c.lam) == (3, 10, 1.0)
        assert c.epochs_per_day == 3
        assert c.batch_size == 128
        assert c.split_ratio == 0.9
        assert c.threshold == 0.5
        assert c.dropout == 0.2
        assert (c.hidden, c.filters) == (64, 50)
        assert c.windows == (1, 2, 3, 4, 5, 6)
        assert c.lr == 1e-3
        assert c.max_sentences == 30 and c.max_tokens == 100

    def test_six_epochs_also_legal(self):
        c = trainer.RunConfig(epochs_per_day=6)
        c.validate()

    def test_bad_strategy_rejected(self):
        with pytest.raises(ValueError):
            trainer.RunConfig(strategy="psychic").validate()


def one_user_world():
    vocab = util.make_vocab(12, 6, seed=0)
    docs = corpus.DocumentStore(
        {
            "d1": corpus.Document("d1", "k1", 0, (("t0", "t1", "t2"), ("t3", "t4"))),
            "d2": corpus.Document("d2", "k1", 1, (("t5", "t6"),)),
        }
    )
    logs = corpus.InteractionLogs(
        {
            0: (corpus.InteractionLog(0, "u1", "d1"),),
            1: (corpus.InteractionLog(1, "u1", "d2"),),
        },
        n_days=2,
    )
    graph = SocialGraph({"u1": [], "k1": []})
    return corpus.World(docs, logs, graph, PayoutTable({}), vocab, n_days=2)


def small_config(**kw):
    base = dict(
        epochs_per_day=2, batch_size=8, hidden=6, filters=3, windows=(1, 2),
        beam_width=2, depth=2, lr=5e-3, seed=0, neg_cap_per_user_day=2, dropout=0.0,
    )
    base.update(kw)
    return trainer.RunConfig(**base)


class TestTrainDay:
    def test_loss_decreases_on_single_positive(self):
        world = one_user_world()
        config = small_config(epochs_per_day=6, split_ratio=0.9)
        # single sample: the 9:1 split keeps it in train
        dims = ModelDims(len(world.users), world.vocab.dim, 6, 3, (1, 2))
        params = init_params(0, dims, ModelOptions(dropout=0.0))
        net = SeanNet(params, world.vocab)
        opt = trainer.Adam(params, lr=config.lr)
        state = ExplorationState(lam=config.lam, strategy=config.strategy)
        stats = trainer.train_day(0, world, net, opt, state, config, RewardTable({}, "RS-F1"))
        losses = stats["epoch_losses"]
        assert len(losses) == 6
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_empty_day_skipped(self):
        world = one_user_world()
        logs = corpus.InteractionLogs({1: world.logs.by_day[1]}, n_days=2)
        world = corpus.World(world.docs, logs, world.graph, world.payouts, world.vocab, 2)
        config = small_config()
        dims = ModelDims(len(world.users), world.vocab.dim, 6, 3, (1, 2))
        params = init_params(0, dims, ModelOptions(dropout=0.0))
        net = SeanNet(params, world.vocab)
        opt = trainer.Adam(params)
        state = ExplorationState()
        stats = trainer.train_day(0, world, net, opt, state, config, RewardTable({}, "RS-F1"))
        assert stats["n_train"] == 0


class FixedNet:
    """Predict from a lookup; stands in for a trained scorer."""

    def __init__(self, table, default=0.5):
        self.table = table
        self.default = default

    def predict(self, user_idx, paths, doc):
        return self.table.get((user_idx, doc.doc_id), self.default)


def eval_world():
    vocab = util.make_vocab(12, 6, seed=0)
    docs = corpus.DocumentStore(
        {
            f"d{i}": corpus.Document(f"d{i}", f"k{i % 2}", 1, (("t0",),)) for i in range(5)
        }
    )
    logs_day1 = tuple(
        corpus.InteractionLog(1, "u1", f"d{i}") for i in range(3)
    ) + (corpus.InteractionLog(1, "u2", "d3"),)
    logs = corpus.InteractionLogs({1: logs_day1}, n_days=2)
    graph = SocialGraph({"u1": ["u2"], "u2": ["u1"], "k0": [], "k1": []})
    return corpus.World(docs, logs, graph, PayoutTable({}), vocab, n_days=2)


class TestEvaluateDay:
    def setup_method(self):
        self.world = eval_world()
        self.config = small_config(social="none")
        self.state = ExplorationState()
        self.samples = corpus.build_day_samples(
            1, self.world.logs, self.world.graph,
            seed=trainer._seed_for(self.config.seed, "samples", 1),
            neg_cap_per_user_day=self.config.neg_cap_per_user_day,
        )

    def test_perfect_predictor(self):
        table = {
            (self.world.user_index[s.user], s.doc_id): float(s.label) * 0.98 + 0.01
            for s in self.samples
        }
        report = trainer.evaluate_day(
            1, self.world, FixedNet(table), self.state, self.config, RewardTable({}, "RS-F1")
        )
        assert report.f1 == 1.0
        assert report.auc == 1.0

    def test_constant_half_marks_everything_positive(self):
        report = trainer.evaluate_day(
            1, self.world, FixedNet({}, default=0.5), self.state, self.config,
            RewardTable({}, "RS-F1"),
        )
        n_pos = sum(s.label for s in self.samples)
        precision = n_pos / len(self.samples)
        assert report.f1 == pytest.approx(2 * precision / (precision + 1))
        assert report.auc == 0.5  # every positive ties every negative
        assert sum(report.impressions.values()) == len(self.samples)

    def test_toy_day_matches_hand_confusion(self):
        rng = np.random.default_rng(4)
        table = {
            (self.world.user_index[s.user], s.doc_id): float(rng.random()) for s in self.samples
        }
        net = FixedNet(table)
        report = trainer.evaluate_day(
            1, self.world, net, self.state, self.config, RewardTable({}, "RS-F1")
        )
        tp = fp = fn = 0
        for s in self.samples:
            p = table[(self.world.user_index[s.user], s.doc_id)]
            if p >= 0.5 and s.label == 1:
                tp += 1
            elif p >= 0.5:
                fp += 1
            elif s.label == 1:
                fn += 1
        expected = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
        assert report.f1 == pytest.approx(expected)

    def test_empty_day_flagged_null(self):
        report = trainer.evaluate_day(
            0, self.world, FixedNet({}), self.state, self.config, RewardTable({}, "RS-F1")
        )
        assert report.n_samples == 0
        assert report.f1 is None and report.auc is None and report.gini is None

    def test_does_not_mutate_exploration_state(self):
        state = ExplorationState()
        state.n_visits["u1"] = 1.5
        state.q_sum["u1"] = 0.4
        state.q_count["u1"] = 1
        state.paths["u1"] = [["u1", "u2"]]
        config = small_config()  # full social mode; selection runs read-only
        before = copy.deepcopy((state.n_visits, state.q_sum, state.q_count, state.paths))
        trainer.evaluate_day(1, self.world, FixedNet({}), state, config, RewardTable({}, "RS-F1"))
        assert (state.n_visits, state.q_sum, state.q_count, state.paths) == before


@pytest.fixture(scope="module")
def stream_world(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    cfg = synth.WorldConfig(
        n_consumers=10, n_creators=6, n_days=6, topics=2, docs_per_day=4,
        vocab_per_topic=15, shared_vocab=8, embed_dim=8, seed=3,
    )
    synth.generate_world(cfg, out)
    return corpus.load_world(out)


class TestRunStream:
    def test_two_day_world_single_report(self, stream_world):
        config = small_config(days=2, epochs_per_day=1)
        reports, summary = trainer.run_stream(stream_world, config)
        assert len(reports) == 1
        assert summary["n_test_days"] == 1

    def test_deterministic_under_seed(self, stream_world):
        config = small_config(days=4, seed=11)
        r1, s1 = trainer.run_stream(stream_world, config)
        r2, s2 = trainer.run_stream(stream_world, config)
        assert [r.to_json() for r in r1] == [r.to_json() for r in r2]
        assert s1 == s2

    def test_stream_average_is_mean_of_daily(self, stream_world):
        config = small_config(days=5)
        reports, summary = trainer.run_stream(stream_world, config)
        vals = [r.f1 for r in reports if r.f1 is not None]
        assert summary["avg_f1"] == pytest.approx(float(np.mean(vals)))
        cum = metrics.ImpressionLedger()
        for r in reports:
            cum.merge(metrics.ImpressionLedger(r.impressions))
        assert summary["gini_cumulative"] == metrics.gini(cum.values())

    def test_loss_sane_on_most_days(self, stream_world, tmp_path):
        config = small_config(days=6, epochs_per_day=3)
        trainer.run_stream(stream_world, config, out_dir=tmp_path)
        days = [
            json.loads(line)
            for line in (tmp_path / "train_log.jsonl").read_text().splitlines()[1:]
        ]
        ok = sum(1 for d in days if d["epoch_losses"] and d["epoch_losses"][-1] <= d["epoch_losses"][0])
        assert ok / len(days) >= 0.8

    def test_artifacts_written_and_config_embedded(self, stream_world, tmp_path):
        config = small_config(days=3)
        trainer.run_stream(stream_world, config, out_dir=tmp_path)
        for name in ("config.json", "reports.jsonl", "daily.csv", "summary.csv",
                     "impressions.tsv", "explorer_state.jsonl", "params.npz", "train_log.jsonl"):
            assert (tmp_path / name).exists(), name
        for name in ("daily.csv", "summary.csv", "impressions.tsv"):
            assert (tmp_path / name).read_text().startswith("# config: ")
        first = json.loads((tmp_path / "reports.jsonl").read_text().splitlines()[0])
        assert first["config"]["seed"] == config.seed

    def test_resume_from_checkpoint(self, stream_world, tmp_path):
        config = small_config(days=3)
        trainer.run_stream(stream_world, config, out_dir=tmp_path)
        resumed = small_config(days=3, resume_state=str(tmp_path / "explorer_state.jsonl"))
        reports, summary = trainer.run_stream(stream_world, resumed)
        assert len(reports) == 2

    def test_cold_start_flag(self, stream_world):
        config = small_config(days=3, warm_start=False, epochs_per_day=1)
        reports, _ = trainer.run_stream(stream_world, config)
        assert len(reports) == 2

    def test_strategies_all_run(self, stream_world):
        for strategy in ("spr", "dpr", "payout", "random-select", "random-walk"):
            config = small_config(days=2, epochs_per_day=1, strategy=strategy)
            reports, _ = trainer.run_stream(stream_world, config)
            assert len(reports) == 1

    def test_ablations_all_run(self, stream_world):
        for kw in ({"social": "none"}, {"social": "mean"}, {"one_hop": True},
                   {"use_cnn": False}, {"use_gru": False}):
            config = small_config(days=2, epochs_per_day=1, **kw)
            reports, _ = trainer.run_stream(stream_world, config)
            assert len(reports) == 1

    def test_single_day_world_rejected(self, stream_world):
        with pytest.raises(ValueError):
            trainer.run_stream(stream_world, small_config(days=1))
