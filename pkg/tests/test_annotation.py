import itertools

import pytest

from triagekit.annotation import AnnotationRecord, AnnotationStore, agreement, majority_vote
from triagekit.model import ArtefactLabel, Prediction, Utterance

SYM, ACT, DIAG, CC = (ArtefactLabel.SYMPTOM, ArtefactLabel.ACTION,
                      ArtefactLabel.DIAGNOSTIC, ArtefactLabel.CHITCHAT)


def rec(uid, annotator, label, at=0):
    return AnnotationRecord(uid, annotator, label, at)


def seeded_store(tmp_path, n=4):
    store = AnnotationStore.open(tmp_path / "store")
    rows = [
        (Utterance("c1", f"u{i}", i * 1000, "sre", f"utterance {i}"),
         Prediction(CC, 1.0, "dkg"))
        for i in range(n)
    ]
    store.seed(rows)
    return store


class TestMajorityVote:
    def test_plurality(self):
        vote = majority_vote([rec("u", "a", SYM), rec("u", "b", SYM),
                              rec("u", "c", ACT), rec("u", "d", SYM)])
        assert vote.final == SYM
        assert vote.counts == {SYM: 3, ACT: 1}
        assert not vote.unanimous

    def test_tie_breaks_by_priority(self):
        vote = majority_vote([rec("u", "a", ACT), rec("u", "b", ACT),
                              rec("u", "c", SYM), rec("u", "d", SYM)])
        assert vote.final == ACT

    def test_single_record(self):
        vote = majority_vote([rec("u", "a", DIAG)])
        assert vote.final == DIAG and vote.unanimous

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            majority_vote([])

    def test_every_nonempty_set_resolves(self):
        labels = [SYM, ACT, DIAG, CC]
        for combo in itertools.product(labels, repeat=3):
            records = [rec("u", f"a{i}", label) for i, label in enumerate(combo)]
            assert majority_vote(records).final in labels


class TestAgreement:
    def test_unanimous(self):
        table = {
            "u1": [rec("u1", "a", SYM), rec("u1", "b", SYM)],
            "u2": [rec("u2", "a", ACT), rec("u2", "b", ACT)],
        }
        result = agreement(table)
        assert result["observed"] == 1.0
        assert result["kappa"] > 0

    def test_total_disagreement(self):
        table = {
            "u1": [rec("u1", "a", SYM), rec("u1", "b", ACT)],
            "u2": [rec("u2", "a", DIAG), rec("u2", "b", CC)],
        }
        assert agreement(table)["observed"] == 0.0

    def test_insufficient_data(self):
        with pytest.raises(ValueError):
            agreement({"u1": [rec("u1", "a", SYM)]})

    def test_matches_pairwise_brute_force(self):
        # 3 annotators x 4 utterances, mixed agreement
        table = {
            "u1": [rec("u1", "a", SYM), rec("u1", "b", SYM), rec("u1", "c", ACT)],
            "u2": [rec("u2", "a", ACT), rec("u2", "b", ACT), rec("u2", "c", ACT)],
            "u3": [rec("u3", "a", DIAG), rec("u3", "b", CC), rec("u3", "c", DIAG)],
            "u4": [rec("u4", "a", CC), rec("u4", "b", CC)],
        }
        agreeing = 0
        pairs = 0
        all_labels = []
        for records in table.values():
            all_labels.extend(r.label for r in records)
            for x, y in itertools.combinations(records, 2):
                pairs += 1
                agreeing += int(x.label == y.label)
        observed = agreeing / pairs
        proportions = [
            sum(1 for l in all_labels if l == label) / len(all_labels)
            for label in ArtefactLabel
        ]
        chance = sum(p * p for p in proportions)
        expected_kappa = (observed - chance) / (1 - chance)
        result = agreement(table)
        assert result["observed"] == pytest.approx(observed, abs=1e-9)
        assert result["kappa"] == pytest.approx(expected_kappa, abs=1e-9)
        assert result["pairs"] == pairs


class TestStore:
    def test_first_submission_stored(self, tmp_path):
        store = seeded_store(tmp_path)
        store.record_annotation("u1", "ann", SYM, submitted_at=1)
        item = store.review_item("u1")
        assert item["annotations"] == [
            {"annotator_id": "ann", "label": "symptom", "submitted_at": 1}
        ]
        assert item["vote"]["final"] == "symptom"

    def test_resubmission_replaces_but_audit_grows(self, tmp_path):
        store = seeded_store(tmp_path)
        store.record_annotation("u1", "ann", SYM, submitted_at=1)
        store.record_annotation("u1", "ann", ACT, submitted_at=2)
        assert store.audit_length() == 2
        records = store.annotations_for("u1")
        assert len(records) == 1 and records[0].label == ACT

    def test_unknown_utterance_rejected(self, tmp_path):
        store = seeded_store(tmp_path)
        with pytest.raises(KeyError):
            store.record_annotation("nope", "ann", SYM)

    def test_audit_monotonic(self, tmp_path):
        store = seeded_store(tmp_path)
        lengths = []
        for i, label in enumerate((SYM, SYM, ACT, DIAG)):
            store.record_annotation("u0", f"a{i % 2}", label, submitted_at=i)
            lengths.append(store.audit_length())
        assert lengths == sorted(lengths)

    def test_restart_replays_audit_log(self, tmp_path):
        store = seeded_store(tmp_path)
        store.record_annotation("u1", "ann", SYM, submitted_at=5)
        store.record_annotation("u2", "bob", DIAG, submitted_at=6)
        reopened = AnnotationStore.open(store.directory)
        assert reopened.annotations_for("u1")[0].label == SYM
        assert reopened.annotations_for("u2")[0].label == DIAG
        assert reopened.audit_length() == 2
        assert reopened.review_item("u1")["pre_label"]["label"] == "chitchat"

    def test_conversations_listing(self, tmp_path):
        store = seeded_store(tmp_path, n=3)
        assert store.conversations() == [{"conversation_id": "c1", "utterance_count": 3}]


class TestExport:
    def test_export_excludes_machine_only(self, tmp_path):
        store = seeded_store(tmp_path, n=4)
        store.record_annotation("u1", "a", SYM, submitted_at=1)
        store.record_annotation("u1", "b", SYM, submitted_at=2)
        store.record_annotation("u3", "a", ACT, submitted_at=3)
        rows = store.export_training_set()
        assert [u.utterance_id for u, _ in rows] == ["u1", "u3"]
        for _, prediction in rows:
            assert prediction.source == "human"
            assert prediction.confidence == 1.0

    def test_export_without_human_input_rejected(self, tmp_path):
        store = seeded_store(tmp_path)
        with pytest.raises(ValueError):
            store.export_training_set()

    def test_export_round_trip(self, tmp_path):
        from triagekit.chatlog import read_labels

        store = seeded_store(tmp_path)
        store.record_annotation("u0", "a", DIAG, submitted_at=1)
        path = tmp_path / "train.jsonl"
        rows = store.export_training_set(path)
        read = read_labels(path)
        assert [(u.utterance_id, p.label) for u, p in rows] \
            == [(uid, p.label) for _, uid, p in read]

    def test_export_uses_majority_vote(self, tmp_path):
        store = seeded_store(tmp_path)
        store.record_annotation("u0", "a", SYM, submitted_at=1)
        store.record_annotation("u0", "b", ACT, submitted_at=2)
        store.record_annotation("u0", "c", SYM, submitted_at=3)
        rows = store.export_training_set()
        assert rows[0][1].label == SYM
