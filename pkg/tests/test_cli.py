import json

import pytest

from soapguard.cli import main

from conftest import FIXTURES


def run(*argv):
    return main(list(argv))


@pytest.fixture()
def signed_file(tmp_path):
    out = tmp_path / "signed.xml"
    assert run("sign", "quote_request.xml", "--strategy", "id",
               "--target", "CMPE", "--out", str(out)) == 0
    return out


# ---------------------------------------------------------------------------
# sign / verify
# ---------------------------------------------------------------------------

def test_sign_then_verify_ok(signed_file, capsys):
    assert run("verify", str(signed_file)) == 0
    assert "overall: valid" in capsys.readouterr().out


def test_verify_machine_format(signed_file, capsys):
    assert run("verify", str(signed_file), "--format", "machine") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["valid"] is True
    assert report["signatures"][0]["strategy"] == "id"


def test_verify_tampered_is_negative(signed_file, tmp_path, capsys):
    tampered = tmp_path / "tampered.xml"
    tampered.write_bytes(
        signed_file.read_bytes().replace(b'Symbol="IBM"', b'Symbol="MBI"'))
    assert run("verify", str(tampered)) == 1
    assert "INVALID" in capsys.readouterr().out


def test_verify_wrong_key_is_clean_negative(signed_file, capsys):
    # the document's KeyName is unknown to the trust store built from
    # the provided seed; that is a negative result, not a crash
    assert run("--key-seed", "other", "verify", str(signed_file)) == 1
    assert "untrusted key" in capsys.readouterr().err


def test_sign_requires_target_for_id():
    assert run("sign", "quote_request.xml", "--strategy", "id") == 2


def test_sign_missing_target_exits_3():
    assert run("sign", "quote_request.xml", "--strategy", "id",
               "--target", "nope") == 3


def test_sign_bad_path_exits_3():
    assert run("sign", "quote_request.xml", "--strategy", "xpath",
               "--target", "/soap:Envelope/soap:Body/Missing") == 3


def test_malformed_document_exits_2(tmp_path):
    bad = tmp_path / "bad.xml"
    bad.write_bytes(b"<a><b></a>")
    assert run("verify", str(bad)) == 2


def test_verify_unsigned_exits_4():
    assert run("verify", "quote_request.xml") == 4


def test_sesoap_sign_stdout(capsys):
    assert run("sign", "quote_request.xml", "--strategy", "sesoap") == 0
    out = capsys.readouterr().out
    assert "ds:Signature" in out


# ---------------------------------------------------------------------------
# attack
# ---------------------------------------------------------------------------

def test_attack_unsigned_exits_5():
    assert run("attack", "quote_request.xml", "--attack", "simple") == 5


def test_attack_then_verify_still_valid(signed_file, tmp_path, capsys):
    attacked = tmp_path / "attacked.xml"
    assert run("attack", str(signed_file), "--attack", "simple",
               "--out", str(attacked)) == 0
    assert run("verify", str(attacked)) == 0
    err = capsys.readouterr().err
    assert "possible wrapping" in err


def test_attack_matches_bundled_golden(signed_file, tmp_path):
    attacked = tmp_path / "attacked.xml"
    assert run("attack", str(signed_file), "--attack", "simple",
               "--out", str(attacked)) == 0
    from soapguard.xml_core import canonicalize, parse
    got = canonicalize(parse(attacked.read_bytes()).root)
    want = canonicalize(parse((FIXTURES / "body_swap_golden.xml").read_bytes()).root)
    assert got == want


def test_sibling_order_bad_permutation_exits_5(tmp_path):
    signed = tmp_path / "signed.xml"
    assert run("sign", "matrix_base.xml", "--strategy", "id",
               "--target", "instr1", "--target", "instr2",
               "--out", str(signed)) == 0
    assert run("attack", str(signed), "--attack", "sibling-order",
               "--permutation", "0,0") == 5


# ---------------------------------------------------------------------------
# matrix / policy
# ---------------------------------------------------------------------------

def test_matrix_matches_golden(capsys):
    assert run("matrix") == 0
    out = capsys.readouterr().out
    assert "VULNERABLE" in out and "DETECTED" in out


def test_matrix_machine_format(capsys):
    assert run("matrix", "--format", "machine") == 0
    records = json.loads(capsys.readouterr().out)
    assert len(records) == 20


def test_matrix_diff_against_tampered_golden(tmp_path, capsys):
    golden = json.loads((FIXTURES / "matrix_golden.json").read_text())
    golden[0]["verdict"] = "DETECTED" if golden[0]["verdict"] != "DETECTED" \
        else "VULNERABLE"
    tampered = tmp_path / "golden.json"
    tampered.write_text(json.dumps(golden))
    assert run("matrix", "--golden", str(tampered)) == 1
    assert "diff:" in capsys.readouterr().err


def test_policy_id_signed_fails(signed_file, capsys):
    assert run("policy", str(signed_file)) == 1
    assert "FAIL  Body referenced by absolute path" in capsys.readouterr().out


def test_policy_compliant_passes(tmp_path):
    signed = tmp_path / "signed.xml"
    assert run("sign", "matrix_base.xml", "--strategy", "xpath",
               "--target", "/soap:Envelope/soap:Body",
               "--target",
               "/soap:Envelope/soap:Header/wsse:Security/wsu:Timestamp",
               "--target", "/soap:Envelope/soap:Header/wsa:ReplyTo",
               "--out", str(signed)) == 0
    assert run("policy", str(signed)) == 0


# ---------------------------------------------------------------------------
# bench / demo
# ---------------------------------------------------------------------------

def test_bench_single_size_insufficient():
    assert run("bench", "--sizes", "20000", "--repetitions", "5") == 6


def test_bench_bad_repetitions_is_usage_error():
    assert run("bench", "--sizes", "10000,20000,30000",
               "--repetitions", "1") == 2


def test_demo_runs(capsys):
    assert run("demo") == 0
    out = capsys.readouterr().out
    assert "signature still verifies: True" in out
    assert "attack succeeded: False" in out


def test_fixture_env_override(tmp_path, monkeypatch, capsys):
    alt = tmp_path / "fixtures"
    alt.mkdir()
    (alt / "only.xml").write_bytes((FIXTURES / "quote_request.xml").read_bytes())
    monkeypatch.setenv("SOAPGUARD_FIXTURES", str(alt))
    assert run("sign", "only.xml", "--strategy", "sesoap") == 0
