import httpx
import pytest

from triagekit.annotation import AnnotationStore
from triagekit.model import ArtefactLabel, Prediction, Utterance
from triagekit.server import BackgroundServer, make_server


@pytest.fixture
def store_dir(tmp_path):
    directory = tmp_path / "store"
    store = AnnotationStore.open(directory)
    rows = []
    for conv in ("c1", "c2"):
        for i in range(3):
            uid = f"{conv}-u{i}"
            rows.append((
                Utterance(conv, uid, i * 1000, "sre", f"{conv} text {i}"),
                Prediction(ArtefactLabel.CHITCHAT, 1.0, "dkg"),
            ))
    store.seed(rows)
    return directory


class TestRoutes:
    def test_list_conversations(self, store_dir):
        with BackgroundServer(store_dir) as server:
            response = httpx.get(f"{server.base_url}/conversations")
            assert response.status_code == 200
            conversations = response.json()["conversations"]
            assert {c["conversation_id"] for c in conversations} == {"c1", "c2"}
            assert all(c["utterance_count"] == 3 for c in conversations)

    def test_utterances_with_pre_labels(self, store_dir):
        with BackgroundServer(store_dir) as server:
            response = httpx.get(f"{server.base_url}/conversations/c1/utterances")
            assert response.status_code == 200
            items = response.json()["utterances"]
            assert [i["utterance_id"] for i in items] == ["c1-u0", "c1-u1", "c1-u2"]
            assert items[0]["pre_label"]["source"] == "dkg"
            assert items[0]["vote"] is None

    def test_unknown_conversation_404(self, store_dir):
        with BackgroundServer(store_dir) as server:
            assert httpx.get(f"{server.base_url}/conversations/zz/utterances").status_code == 404

    def test_unknown_route_404(self, store_dir):
        with BackgroundServer(store_dir) as server:
            assert httpx.get(f"{server.base_url}/bogus").status_code == 404

    def test_post_annotation_updates_vote(self, store_dir):
        with BackgroundServer(store_dir) as server:
            response = httpx.post(f"{server.base_url}/annotations", json={
                "utterance_id": "c1-u0", "annotator_id": "ann", "label": "symptom",
            })
            assert response.status_code == 200
            item = response.json()
            assert item["vote"]["final"] == "symptom"
            assert item["annotations"][0]["annotator_id"] == "ann"

    def test_post_malformed_400(self, store_dir):
        with BackgroundServer(store_dir) as server:
            url = f"{server.base_url}/annotations"
            assert httpx.post(url, json={"utterance_id": "c1-u0"}).status_code == 400
            assert httpx.post(url, json={"utterance_id": "c1-u0", "annotator_id": "a",
                                         "label": "bogus"}).status_code == 400
            assert httpx.post(url, content=b"{{{",
                              headers={"Content-Type": "application/json"}).status_code == 400

    def test_post_unknown_utterance_404(self, store_dir):
        with BackgroundServer(store_dir) as server:
            response = httpx.post(f"{server.base_url}/annotations", json={
                "utterance_id": "zzz", "annotator_id": "a", "label": "action",
            })
            assert response.status_code == 404

    def test_resubmission_upserts(self, store_dir):
        with BackgroundServer(store_dir) as server:
            url = f"{server.base_url}/annotations"
            httpx.post(url, json={"utterance_id": "c1-u0", "annotator_id": "a",
                                  "label": "symptom"})
            second = httpx.post(url, json={"utterance_id": "c1-u0", "annotator_id": "a",
                                           "label": "symptom"})
            assert len(second.json()["annotations"]) == 1


class TestAggregates:
    def test_agreement_409_then_200(self, store_dir):
        with BackgroundServer(store_dir) as server:
            assert httpx.get(f"{server.base_url}/agreement").status_code == 409
            url = f"{server.base_url}/annotations"
            httpx.post(url, json={"utterance_id": "c1-u0", "annotator_id": "a",
                                  "label": "symptom"})
            httpx.post(url, json={"utterance_id": "c1-u0", "annotator_id": "b",
                                  "label": "symptom"})
            response = httpx.get(f"{server.base_url}/agreement")
            assert response.status_code == 200
            assert response.json()["observed"] == 1.0

    def test_export_409_then_200(self, store_dir):
        with BackgroundServer(store_dir) as server:
            assert httpx.post(f"{server.base_url}/export").status_code == 409
            httpx.post(f"{server.base_url}/annotations", json={
                "utterance_id": "c2-u1", "annotator_id": "a", "label": "action",
            })
            response = httpx.post(f"{server.base_url}/export")
            assert response.status_code == 200
            assert response.json()["count"] == 1
            assert (store_dir / "training_set.jsonl").exists()


class TestLifecycle:
    def test_restart_preserves_annotations(self, store_dir):
        with BackgroundServer(store_dir) as server:
            httpx.post(f"{server.base_url}/annotations", json={
                "utterance_id": "c1-u2", "annotator_id": "ann", "label": "diagnostic",
            })
        # new process equivalent: fresh server over the same directory
        with BackgroundServer(store_dir) as server:
            items = httpx.get(f"{server.base_url}/conversations/c1/utterances").json()
            by_id = {i["utterance_id"]: i for i in items["utterances"]}
            assert by_id["c1-u2"]["vote"]["final"] == "diagnostic"

    def test_env_var_selects_store(self, store_dir, monkeypatch):
        monkeypatch.setenv("TRIAGE_STORE_DIR", str(store_dir))
        server = make_server(port=0)
        try:
            assert server.RequestHandlerClass.store.directory == store_dir
        finally:
            server.server_close()

    def test_missing_store_dir_rejected(self, monkeypatch):
        monkeypatch.delenv("TRIAGE_STORE_DIR", raising=False)
        with pytest.raises(ValueError):
            make_server()

    def test_concurrent_writes_serialized(self, store_dir):
        import threading

        with BackgroundServer(store_dir) as server:
            url = f"{server.base_url}/annotations"
            errors = []

            def submit(annotator):
                try:
                    for label in ("symptom", "action", "diagnostic"):
                        response = httpx.post(url, json={
                            "utterance_id": "c1-u1", "annotator_id": annotator,
                            "label": label,
                        })
                        assert response.status_code == 200
                except Exception as exc:  # pragma: no cover
                    errors.append(exc)

            workers = [threading.Thread(target=submit, args=(f"a{i}",)) for i in range(4)]
            for worker in workers:
                worker.start()
            for worker in workers:
                worker.join()
            assert not errors
            item = httpx.get(f"{server.base_url}/conversations/c1/utterances").json()
            by_id = {i["utterance_id"]: i for i in item["utterances"]}
            assert len(by_id["c1-u1"]["annotations"]) == 4
