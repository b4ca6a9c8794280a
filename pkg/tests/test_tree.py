import json

import pytest
from hypothesis import given, strategies as st

from triagekit.disentangle import Conversation
from triagekit.model import ArtefactLabel, Prediction, Utterance
from triagekit.tree import (
    TriageNode,
    build_tree,
    deserialize_tree,
    read_tree,
    serialize_tree,
    tree_document,
    write_tree,
)

SYM, ACT, DIAG, CC = (ArtefactLabel.SYMPTOM, ArtefactLabel.ACTION,
                      ArtefactLabel.DIAGNOSTIC, ArtefactLabel.CHITCHAT)


def conv(labels_ts):
    utterances = tuple(
        Utterance("c1", f"u{i}", ts, f"user{i % 2}", f"text {i}")
        for i, (_, ts) in enumerate(labels_ts)
    )
    predictions = [Prediction(label, 1.0, "dkg") for label, _ in labels_ts]
    return Conversation("c1", utterances, "t1", frozenset()), predictions


class TestBuildTree:
    def test_chitchat_filtered_chain_built(self):
        conversation, labels = conv([(CC, 1), (SYM, 2), (DIAG, 3), (ACT, 4), (CC, 5)])
        tree = build_tree(conversation, labels)
        assert [n.type for n in tree.nodes] == [SYM, DIAG, ACT]
        assert tree.edges == ((0, 1), (1, 2))
        assert [n.utterance_id for n in tree.nodes] == ["u1", "u2", "u3"]

    def test_all_chitchat_empty_tree(self):
        conversation, labels = conv([(CC, 1), (CC, 2)])
        tree = build_tree(conversation, labels)
        assert tree.nodes == () and tree.edges == ()

    def test_equal_ts_stable_order(self):
        conversation, labels = conv([(SYM, 7), (ACT, 7)])
        tree = build_tree(conversation, labels)
        assert [n.utterance_id for n in tree.nodes] == ["u0", "u1"]

    def test_label_count_mismatch(self):
        conversation, labels = conv([(SYM, 1), (ACT, 2)])
        with pytest.raises(ValueError):
            build_tree(conversation, labels[:1])

    def test_node_count_equals_non_chitchat(self):
        conversation, labels = conv([(CC, 1), (SYM, 2), (CC, 3), (ACT, 4)])
        tree = build_tree(conversation, labels)
        non_cc = sum(1 for p in labels if p.label != CC)
        assert len(tree.nodes) == non_cc

    def test_phrases_attached(self):
        conversation, labels = conv([(SYM, 1), (CC, 2)])
        tree = build_tree(conversation, labels, phrases=["errors rising", None])
        assert tree.nodes[0].phrase == "errors rising"

    def test_chitchat_node_rejected(self):
        with pytest.raises(ValueError):
            TriageNode("n0", CC, "u0", 0, "hi")


labels_strategy = st.lists(
    st.tuples(st.sampled_from([SYM, ACT, DIAG, CC]), st.integers(0, 10)),
    min_size=0,
    max_size=12,
)


class TestSerialization:
    @given(labels_strategy)
    def test_round_trip(self, labels_ts):
        labels_ts = sorted(labels_ts, key=lambda pair: pair[1])
        conversation, labels = conv(labels_ts)
        tree = build_tree(conversation, labels)
        assert deserialize_tree(serialize_tree(tree)) == tree

    def test_empty_tree_document(self):
        conversation, labels = conv([(CC, 1)])
        tree = build_tree(conversation, labels)
        document = tree_document(tree)
        assert document["nodes"] == [] and document["edges"] == []

    def test_fixture_document_parses(self):
        document = {
            "issue_id": "incident-42",
            "nodes": [
                {"node_id": "n0", "type": "symptom", "utterance_id": "u1",
                 "ts": 100, "text": "errors rising", "phrase": "errors"},
                {"node_id": "n1", "type": "diagnostic", "utterance_id": "u2",
                 "ts": 200, "text": "which pods ?", "phrase": None},
                {"node_id": "n2", "type": "action", "utterance_id": "u3",
                 "ts": 300, "text": "restarting pods", "phrase": "restart pods"},
            ],
            "edges": [[0, 1], [1, 2]],
        }
        tree = deserialize_tree(json.dumps(document).encode("utf-8"))
        assert [n.type for n in tree.nodes] == [SYM, DIAG, ACT]
        assert tree.issue_id == "incident-42"

    def test_malformed_bytes_rejected(self):
        with pytest.raises(ValueError):
            deserialize_tree(b"not json at all")
        with pytest.raises(ValueError):
            deserialize_tree(b"[1,2,3]")

    def test_non_chain_edges_rejected(self):
        document = {
            "issue_id": "x",
            "nodes": [
                {"node_id": "n0", "type": "symptom", "utterance_id": "u", "ts": 1,
                 "text": "t", "phrase": None},
                {"node_id": "n1", "type": "action", "utterance_id": "v", "ts": 2,
                 "text": "t", "phrase": None},
            ],
            "edges": [[1, 0]],
        }
        with pytest.raises(ValueError):
            deserialize_tree(json.dumps(document).encode("utf-8"))

    def test_artefact_database_directory(self, tmp_path):
        conversation, labels = conv([(SYM, 1), (ACT, 2)])
        tree = build_tree(conversation, labels)
        path = write_tree(tmp_path, tree)
        assert path.name == "c1.json"
        assert read_tree(tmp_path, "c1") == tree
