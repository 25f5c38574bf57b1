import base64

import pytest
from fastapi.testclient import TestClient

from conftest import deterministic_image, linear_weight_text
from evoattack.imagefiles import png_bytes
from evoattack.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def image():
    return deterministic_image(16, 16, 3)


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def attack_payload(image, **option_overrides):
    options = {"pop": 10, "gens": 4, "seed": 0}
    options.update(option_overrides)
    return {
        "image_png_b64": b64(png_bytes(image)),
        "label": 0,
        "oracle": {"kind": "toy", "weights_text": linear_weight_text(image)},
        "options": options,
    }


class TestHealth:
    def test_ok(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"


class TestAttackEndpoint:
    def test_attack_returns_report_and_artifacts(self, client, image):
        resp = client.post("/attack", json=attack_payload(image))
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] in ("success", "no_adversarial")
        names = {a["name"] for a in body["artifacts"]}
        assert {"pareto_front.csv", "history.csv", "report.json"} <= names
        assert body["report"]["queries"]["total"] == 10 * 5

    def test_bad_base64_rejected(self, client):
        payload = {
            "image_png_b64": "@@@not-base64@@@",
            "label": 0,
            "oracle": {"kind": "toy", "weights_text": "1 1\n0 0\n"},
        }
        assert client.post("/attack", json=payload).status_code == 400

    def test_invalid_png_rejected(self, client):
        payload = {
            "image_png_b64": b64(b"never a png"),
            "label": 0,
            "oracle": {"kind": "toy", "weights_text": "2 1\n0 0\n0 0\n"},
        }
        assert client.post("/attack", json=payload).status_code == 400

    def test_bad_options_rejected(self, client, image):
        resp = client.post("/attack", json=attack_payload(image, pop=3))
        assert resp.status_code == 400

    def test_label_out_of_range_rejected(self, client, image):
        payload = attack_payload(image)
        payload["label"] = 99
        assert client.post("/attack", json=payload).status_code == 400

    def test_unknown_optimizer_schema_rejected(self, client, image):
        resp = client.post("/attack", json=attack_payload(image, optimizer="spea2"))
        assert resp.status_code == 422

    def test_determinism_through_the_wire(self, client, image):
        a = client.post("/attack", json=attack_payload(image, seed=7)).json()
        b = client.post("/attack", json=attack_payload(image, seed=7)).json()
        front_a = next(x for x in a["artifacts"] if x["name"] == "pareto_front.csv")
        front_b = next(x for x in b["artifacts"] if x["name"] == "pareto_front.csv")
        assert front_a["content_b64"] == front_b["content_b64"]


class TestAblateEndpoint:
    def test_optimizer_sweep(self, client, image):
        payload = attack_payload(image, gens=2)
        payload["sweep"] = "optimizer"
        payload["seeds"] = [0]
        resp = client.post("/ablate", json=payload)
        assert resp.status_code == 200
        body = resp.json()
        assert body["summary"]["cells"] == ["nsga2", "psl"]
        names = {a["name"] for a in body["artifacts"]}
        assert "sweep.csv" in names and "fronts.csv" in names


class TestBatchEndpoint:
    def test_empty_batch(self, client, image):
        payload = {
            "rows": [],
            "oracle": {"kind": "toy", "weights_text": linear_weight_text(image)},
            "options": {"pop": 10, "gens": 2},
        }
        resp = client.post("/batch", json=payload)
        assert resp.status_code == 200
        assert resp.json()["report"]["aggregate"]["images"] == 0

    def test_two_rows(self, client, image):
        row = {
            "name": "x",
            "image_png_b64": b64(png_bytes(image)),
            "label": 0,
        }
        payload = {
            "rows": [row, dict(row, name="y")],
            "oracle": {"kind": "toy", "weights_text": linear_weight_text(image)},
            "options": {"pop": 10, "gens": 2, "seed": 1},
        }
        body = client.post("/batch", json=payload).json()
        assert body["report"]["aggregate"]["images"] == 2
        names = {a["name"] for a in body["artifacts"]}
        assert "report.csv" in names
