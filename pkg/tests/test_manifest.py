"""Run manifests: digests, round trips, input verification.

Ground truth: hashlib.sha256 computed directly on the same bytes.
"""
import hashlib
import json

import pytest

from chebnet import (
    RunManifest,
    ValidationError,
    __version__,
    create_manifest,
    read_manifest,
    write_manifest,
)
from chebnet.manifest import sha256_digest


class TestSha256Digest:
    def test_matches_hashlib(self, tmp_path):
        path = tmp_path / "blob.bin"
        payload = b"abc" * 100000  # spans multiple read chunks
        path.write_bytes(payload)
        assert sha256_digest(path) == hashlib.sha256(payload).hexdigest()


class TestRunManifest:
    def test_create_records_digests(self, tmp_path):
        f = tmp_path / "input.csv"
        f.write_text("1,2\n")
        m = create_manifest("train", {"epochs": 3}, [f], 42)
        assert m.command == "train"
        assert m.master_seed == 42
        assert m.version == __version__
        assert m.inputs[str(f)] == sha256_digest(f)

    def test_verify_inputs_flags_modification(self, tmp_path):
        f = tmp_path / "input.csv"
        f.write_text("1,2\n")
        m = create_manifest("train", {}, [f], 0)
        assert m.verify_inputs() == []
        f.write_text("1,3\n")
        assert m.verify_inputs() == [str(f)]

    def test_file_round_trip(self, tmp_path):
        f = tmp_path / "input.csv"
        f.write_text("x\n")
        m = create_manifest("coarsen", {"levels": 3, "seed": 1}, [f], 1)
        path = tmp_path / "manifest.json"
        write_manifest(m, path)
        back = read_manifest(path)
        assert back == m

    def test_json_is_sorted_and_versioned(self, tmp_path):
        m = RunManifest("synth", {}, {}, 0)
        path = tmp_path / "manifest.json"
        write_manifest(m, path)
        doc = json.loads(path.read_text())
        assert doc["schema_version"] == 1
        assert list(doc.keys()) == sorted(doc.keys())

    def test_rejects_unknown_schema(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"schema_version": 99}))
        with pytest.raises(ValidationError):
            read_manifest(path)
