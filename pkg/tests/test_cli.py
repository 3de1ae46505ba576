import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from belldistill.cli import main
from belldistill.serialize import (
    StateFile,
    StateFileError,
    canonical_dumps,
    certificate_document,
    decode_state_file,
    digest,
    parse_constructor,
    write_certificate,
)
from belldistill.states import ghz, random_density


def run(capsys, *argv):
    status = main(list(argv))
    out = capsys.readouterr().out
    return status, json.loads(out), out


# --- serialization -------------------------------------------------------------


def test_canonical_dumps_format():
    text = canonical_dumps({"b": 1.0, "a": [0.1, 2], "c": complex(1, -2), "d": None, "e": True})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "0.10000000000000001" in text  # %.17g
    assert '"b": 1.0' in text
    assert '"im": -2.0' in text
    assert text.endswith("\n")
    with pytest.raises(ValueError):
        canonical_dumps({"x": float("nan")})


def test_digest_is_key_order_independent():
    assert digest({"a": 1, "b": 2.5}) == digest({"b": 2.5, "a": 1})


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_dense_state_file_round_trip_is_exact(seed, n):
    rho = random_density(seed, n)
    data = StateFile.from_density(rho).encode()
    back = decode_state_file(data)
    assert np.array_equal(back.to_density().matrix, rho.matrix)
    assert back.encode() == data


def test_state_file_errors_carry_offsets():
    with pytest.raises(StateFileError) as exc:
        decode_state_file(b'{"schema_version": 1, "n_qubits": 2,, }')
    assert exc.value.offset == 36
    with pytest.raises(StateFileError) as exc:
        decode_state_file(b'{"schema_version": 9, "n_qubits": 1, "encoding": "dense", "payload": []}')
    assert "schema_version" in str(exc.value)
    with pytest.raises(StateFileError):
        decode_state_file(b'{"schema_version": 1, "n_qubits": 1, "encoding": "sparse", "payload": []}')
    with pytest.raises(StateFileError):
        parse_constructor("ghz:x")
    with pytest.raises(StateFileError):
        parse_constructor("nonsense:3")


def test_constructor_and_weights_encodings():
    sf = parse_constructor("rho-r:3:0.7")
    assert sf.encoding == "constructor" and sf.to_density().n_qubits == 3
    weights = StateFile(2, "ghz-weights", {"plus": [1.0, 0.0], "minus": [0.0, 0.0]})
    assert np.allclose(weights.to_density().matrix, ghz(2).matrix)
    again = decode_state_file(sf.encode())
    assert np.array_equal(again.to_density().matrix, sf.to_density().matrix)


def test_certificate_document(tmp_path):
    cert = {"invariant": "demo", "state": ghz(2).matrix, "operator": {"family": "MBK"}, "details": {"beta": 1.2}}
    path = tmp_path / "cert.json"
    text = write_certificate(cert, path)
    doc = json.loads(text)
    assert doc["invariant"] == "demo" and doc["kind"] == "falsification-certificate"
    assert np.allclose(decode_state_file(json.dumps(doc["state"])).to_density().matrix, ghz(2).matrix)
    assert certificate_document(cert) == doc


# --- CLI --------------------------------------------------------------------------


def test_eval_examples(capsys):
    status, rep, _ = run(capsys, "eval", "--state", "ghz:3", "--op", "mbk:optimal")
    assert status == 0 and rep["results"]["beta"] == pytest.approx(2.0, abs=1e-6)
    assert rep["exit_status"] == 0 and rep["command"] == "eval"
    for key in ("argv", "seed", "version", "inputs_digest", "provenance"):
        assert key in rep
    status, rep, _ = run(capsys, "eval", "--state", "mixed:3", "--op", "mbk:optimal")
    assert rep["results"]["beta"] == pytest.approx(0.0, abs=1e-12)


def test_eval_uffink_at_w_boundary(capsys):
    status, rep, _ = run(
        capsys, "eval", "--state", "w-mixture:0.3927", "--op", "uffink:auto", "--settings-space", "general", "--restarts", "4"
    )
    assert status == 0
    assert rep["results"]["beta"] == pytest.approx(1.0, abs=1e-3)


def test_eval_with_explicit_angles(capsys):
    a = -math.pi / 6
    angles = ",".join(str(x) for x in [a, a, a, a + math.pi / 2, a + math.pi / 2, a + math.pi / 2])
    status, rep, _ = run(capsys, "eval", "--state", "ghz:3", "--op", f"mbk:angles={angles}")
    assert status == 0 and rep["results"]["beta"] == pytest.approx(2.0, abs=1e-12)


def test_classify_examples(capsys):
    status, rep, _ = run(capsys, "classify", "--beta", str(4 * math.sqrt(2)), "--n-qubits", "7")
    c = rep["results"]["classification"]
    assert status == 0 and c["p"] == 3 and c["max_group_size"] == 2

    status, rep, _ = run(capsys, "classify", "--state", "ghz:3", "--op", "mbk:optimal")
    c = rep["results"]["classification"]
    assert c["fully_distillable"] and c["security_ok"]
    assert rep["results"]["theorem1"]["projected_min_pt"] < -1e-9

    status, rep, _ = run(capsys, "classify", "--state", "padded-ghz:4", "--restarts", "4")
    assert rep["results"]["beta"] == pytest.approx(2.0, abs=1e-4)
    assert not rep["results"]["classification"]["fully_distillable"]

    status, rep, _ = run(capsys, "classify", "--state", "mixed:3", "--op", "mbk:optimal")
    assert status == 0 and rep["results"]["classification"] == "none"


def test_bounds_command(capsys):
    status, rep, _ = run(capsys, "bounds", "requirement", "--n-qubits", "3", "--p", "2")
    assert rep["results"]["r"] == pytest.approx((1 + math.sqrt(3)) / 4)
    status, rep, _ = run(capsys, "bounds", "beta-of-r", "--n-qubits", "2", "--r", "0.5")
    assert rep["results"]["beta_max"] == pytest.approx(1.0)


def test_repro_r3(capsys):
    status, rep, _ = run(capsys, "repro", "r3")
    assert status == 0 and rep["results"]["passed"]
    assert rep["results"]["value"] == pytest.approx((1 + math.sqrt(3)) / 4, abs=1e-12)


def test_input_errors_exit_2(capsys, tmp_path):
    status, rep, _ = run(capsys, "eval", "--state", "bogus:3", "--op", "mbk:optimal")
    assert status == 2 and "error" in rep
    bad = tmp_path / "bad.json"
    bad.write_bytes(b'{"schema_version": 1, "n_qubits": 2,, }')
    status, rep, _ = run(capsys, "eval", "--state", str(bad), "--op", "mbk:optimal")
    assert status == 2 and rep["error_offset"] == 36 and "byte 36" in rep["error"]
    assert main(["eval"]) == 2
    capsys.readouterr()


def test_state_file_round_trip_through_cli(capsys, tmp_path):
    path = tmp_path / "state.json"
    path.write_bytes(StateFile.from_density(random_density(3, 2)).encode())
    _, first, text1 = run(capsys, "eval", "--state", str(path), "--op", "mbk:optimal")
    _, second, text2 = run(capsys, "eval", "--state", str(path), "--op", "mbk:optimal")
    assert text1 == text2
    dumped = canonical_dumps(first["inputs"]["state"]).encode()
    assert dumped == path.read_bytes()


def test_optimize_is_deterministic(capsys, tmp_path):
    out = tmp_path / "r.json"
    args = ("optimize", "--state", "random:3:4:2", "--restarts", "2", "--seed", "7")
    _, _, text1 = run(capsys, *args)
    _, _, text2 = run(capsys, *args)
    assert text1 == text2
    _, _, text3 = run(capsys, *args, "--json-out", str(out))
    assert text3 == out.read_text()


def test_certify_holds_on_noisy_ghz(capsys, tmp_path):
    cert = tmp_path / "cert.json"
    status, rep, _ = run(capsys, "certify", "--state", "noisy-ghz:3:0.8", "--restarts", "4", "--out", str(cert))
    assert status == 0
    assert not cert.exists()
