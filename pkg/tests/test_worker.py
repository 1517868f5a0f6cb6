import json
import sys

import numpy as np
import pytest

from antiforensics.errors import (
    WorkerContractError,
    WorkerError,
    WorkerExitError,
    WorkerProtocolError,
    WorkerTimeoutError,
)
from antiforensics.image import ImageBuffer, load_png, save_png
from antiforensics.workerclient import WorkerClient, WorkerRequest, call_worker

STUB = [sys.executable, "-m", "antiforensics.workerstub"]


def _stub(*extra):
    return STUB + list(extra)


@pytest.fixture
def png_pair(tmp_path):
    rng = np.random.default_rng(42)
    img = ImageBuffer(rng.integers(0, 256, (64, 80, 3)).astype(np.uint8))
    src = tmp_path / "in.png"
    save_png(img, src)
    return img, src, tmp_path


class TestWorkerRequest:
    def test_unknown_task(self, tmp_path):
        with pytest.raises(ValueError, match="unknown task"):
            WorkerRequest("sharpen", tmp_path / "a", tmp_path / "b")

    def test_restormer_requires_sigma(self, tmp_path):
        with pytest.raises(ValueError, match="sigma"):
            WorkerRequest("restormer-denoise", tmp_path / "a", tmp_path / "b")
        with pytest.raises(ValueError, match="sigma"):
            WorkerRequest("restormer-denoise", tmp_path / "a", tmp_path / "b", {"sigma": -1})
        WorkerRequest("restormer-denoise", tmp_path / "a", tmp_path / "b", {"sigma": 15})

    def test_sigma_rejected_elsewhere(self, tmp_path):
        with pytest.raises(ValueError, match="not valid"):
            WorkerRequest("fbcnn", tmp_path / "a", tmp_path / "b", {"sigma": 15})

    def test_detect_takes_no_params(self, tmp_path):
        with pytest.raises(ValueError, match="not valid"):
            WorkerRequest("detect-trufor", tmp_path / "a", tmp_path / "b", {"quality": 50})

    def test_job_line_shape(self, tmp_path):
        req = WorkerRequest("fbcnn", tmp_path / "a.png", tmp_path / "b.png", {"quality": 50})
        job = json.loads(req.job_line())
        assert set(job) == {"task", "params", "input", "output"}
        assert job["task"] == "fbcnn" and job["params"] == {"quality": 50}


class TestProtocolHappyPath:
    def test_identity_restoration_bit_equal(self, png_pair):
        img, src, tmp = png_pair
        with WorkerClient(_stub()) as client:
            out = client.call(WorkerRequest("fbcnn", src, tmp / "out.png"))
        assert load_png(out) == img

    def test_x2_doubles_dimensions(self, png_pair):
        img, src, tmp = png_pair
        with WorkerClient(_stub()) as client:
            out = client.call(WorkerRequest("swinfir-x2", src, tmp / "up.png"))
        up = load_png(out)
        assert (up.width, up.height) == (2 * img.width, 2 * img.height)

    def test_detection_score_in_range_and_deterministic(self, png_pair):
        _, src, tmp = png_pair
        with WorkerClient(_stub()) as client:
            rec1 = client.call(WorkerRequest("detect-trufor", src, tmp / "s1.json"))
            rec2 = client.call(WorkerRequest("detect-trufor", src, tmp / "s2.json"))
        assert 0.0 <= rec1["score"] <= 1.0
        assert rec1["score"] == rec2["score"]
        assert rec1["id"] == "in"

    def test_one_shot_call_worker(self, png_pair):
        img, src, tmp = png_pair
        out = call_worker(
            _stub(), WorkerRequest("restormer-denoise", src, tmp / "d.png", {"sigma": 25.0})
        )
        assert load_png(out) == img

    def test_handshake_capacity_visible(self, png_pair):
        with WorkerClient(_stub("--capacity", "3")) as client:
            assert client.capacity == 3

    def test_submit_many_preserves_order(self, tmp_path):
        rng = np.random.default_rng(7)
        images, reqs = [], []
        for i in range(5):
            img = ImageBuffer(rng.integers(0, 256, (16 + i, 20, 3)).astype(np.uint8))
            src = tmp_path / f"in{i}.png"
            save_png(img, src)
            images.append(img)
            reqs.append(WorkerRequest("fbcnn", src, tmp_path / f"out{i}.png"))
        with WorkerClient(_stub("--capacity", "2")) as client:
            outs = client.submit_many(reqs)
        assert [load_png(p) for p in outs] == images


class TestProtocolErrors:
    def test_bad_handshake(self):
        with pytest.raises(WorkerProtocolError, match="handshake"):
            WorkerClient(_stub("--bad-handshake")).start()

    def test_wrong_protocol_version(self):
        with pytest.raises(WorkerProtocolError, match="protocol"):
            WorkerClient(_stub("--protocol-version", "2")).start()

    def test_garbage_status(self, png_pair):
        _, src, tmp = png_pair
        client = WorkerClient(_stub("--garbage-status"))
        with pytest.raises(WorkerProtocolError, match="status"):
            client.call(WorkerRequest("fbcnn", src, tmp / "o.png"))

    def test_dimension_contract_violation(self, png_pair):
        _, src, tmp = png_pair
        with WorkerClient(_stub("--break-dims")) as client:
            with pytest.raises(WorkerContractError, match="contract requires"):
                client.call(WorkerRequest("swinfir-x2", src, tmp / "o.png"))

    def test_reported_job_failure(self, png_pair):
        _, src, tmp = png_pair
        with WorkerClient(_stub("--fail-task", "fbcnn")) as client:
            with pytest.raises(WorkerError, match="injected failure"):
                client.call(WorkerRequest("fbcnn", src, tmp / "o.png"))
            # worker stays alive for other tasks
            out = client.call(
                WorkerRequest("restormer-denoise", src, tmp / "o2.png", {"sigma": 15})
            )
            assert out.exists()

    def test_worker_death_reports_exit_and_stderr(self, png_pair):
        _, src, tmp = png_pair
        client = WorkerClient(_stub("--exit-after", "0"))
        with pytest.raises(WorkerExitError, match="giving up"):
            client.call(WorkerRequest("fbcnn", src, tmp / "o.png"))

    def test_timeout(self, png_pair):
        _, src, tmp = png_pair
        client = WorkerClient(_stub("--sleep", "5"), timeout=0.5)
        with pytest.raises(WorkerTimeoutError, match="within"):
            client.call(WorkerRequest("fbcnn", src, tmp / "o.png"))

    def test_unspawnable_command(self):
        with pytest.raises(WorkerExitError, match="spawn"):
            WorkerClient(["/nonexistent/worker-binary"]).start()

    def test_success_without_output_file(self, png_pair, tmp_path):
        _, src, tmp = png_pair
        lying = (
            "import sys, json\n"
            "print(json.dumps({'protocol': 1, 'capacity': 1})); sys.stdout.flush()\n"
            "for line in sys.stdin:\n"
            "    print(json.dumps({'status': 'ok'})); sys.stdout.flush()\n"
        )
        script = tmp_path / "lying_worker.py"
        script.write_text(lying)
        with WorkerClient([sys.executable, str(script)]) as client:
            with pytest.raises(WorkerProtocolError, match="does not exist"):
                client.call(WorkerRequest("fbcnn", src, tmp / "missing.png"))

    def test_detection_score_out_of_range(self, png_pair, tmp_path):
        _, src, tmp = png_pair
        cheating = (
            "import sys, json\n"
            "print(json.dumps({'protocol': 1, 'capacity': 1})); sys.stdout.flush()\n"
            "for line in sys.stdin:\n"
            "    job = json.loads(line)\n"
            "    open(job['output'], 'w').write(json.dumps({'id': 'x', 'score': 1.5}))\n"
            "    print(json.dumps({'status': 'ok'})); sys.stdout.flush()\n"
        )
        script = tmp_path / "cheating_worker.py"
        script.write_text(cheating)
        with WorkerClient([sys.executable, str(script)]) as client:
            with pytest.raises(WorkerContractError, match=r"\[0, 1\]"):
                client.call(WorkerRequest("detect-trufor", src, tmp / "s.json"))
