import pytest

from soapguard import namespaces as ns
from soapguard.attacks import AttackKind, optional_element, sibling_value, simple_ancestry
from soapguard.harness import (
    AmbiguousBody,
    DefenseMatrix,
    NotApplicable,
    application_view,
    attack_outcome,
    check_receiver_policy,
    defense_matrix,
    BODY_PATH,
    REPLYTO_PATH,
    TIMESTAMP_PATH,
)
from soapguard.soap_model import SoapEnvelope
from soapguard.xml_core import XmlNode, parse
from soapguard.xmlsig import NoSignature, Strategy, TrustStore, sign

from conftest import load_fixture


def _payload():
    el = XmlNode.element("getQuote")
    el.set_attribute("Symbol", "MBI")
    return el


# ---------------------------------------------------------------------------
# Application view
# ---------------------------------------------------------------------------

def test_application_view_plain(key):
    env = load_fixture("matrix_base.xml")
    view = application_view(env)
    assert view.processed_body is env.body()
    names = [h.local for h in view.processed_headers]
    assert names[:3] == ["Security", "Timestamp", "ReplyTo"]
    assert view.skipped_headers == []


def test_application_view_skips_none_role_and_contents(key):
    signed = sign(load_fixture("matrix_base.xml"), Strategy.ID, "CMPE", key)
    attacked = simple_ancestry(signed, _payload(), "newCMPE").doc
    view = application_view(attacked)
    assert view.processed_body.get_attribute("Id", ns.WSU) == "newCMPE"
    skipped = {n.local for n in view.skipped_headers}
    assert "Wrapper" in skipped and "Body" in skipped
    assert all(h.local != "Wrapper" for h in view.processed_headers)


def test_application_view_skips_none_role_security(key):
    signed = sign(load_fixture("matrix_base.xml"), Strategy.ID,
                  ["CMPE", "theTimestamp"], key)
    attacked = sibling_value(signed).doc
    view = application_view(attacked)
    skipped_ids = {n.node_id for n in view.skipped_headers}
    moved_ts = [n for n in attacked.header().iter_elements()
                if n.qname == (ns.WSU, "Timestamp")]
    assert len(moved_ts) == 1
    assert moved_ts[0].node_id in skipped_ids


def test_application_view_rejects_duplicate_bodies():
    env = SoapEnvelope(parse((
        '<soap:Envelope xmlns:soap="%s"><soap:Body/><soap:Body/>'
        "</soap:Envelope>" % ns.SOAP_ENV).encode()))
    with pytest.raises(AmbiguousBody):
        application_view(env)


# ---------------------------------------------------------------------------
# Attack outcomes
# ---------------------------------------------------------------------------

def test_id_strategy_falls_to_body_swap(key):
    out = attack_outcome(Strategy.ID, AttackKind.SIMPLE_ANCESTRY,
                         load_fixture("matrix_base.xml"), key)
    assert out.signature_valid
    assert out.attacker_intent_met
    assert out.attack_succeeded
    # the reference resolved to content the receiver never processes
    assert out.resolved_vs_processed_mismatch


def test_sesoap_detects_body_swap(key):
    out = attack_outcome(Strategy.SESOAP, AttackKind.SIMPLE_ANCESTRY,
                         load_fixture("matrix_base.xml"), key)
    assert not out.signature_valid
    assert not out.attack_succeeded


def test_xpath_detects_simple_but_not_sibling_value(key):
    base = load_fixture("matrix_base.xml")
    simple = attack_outcome(Strategy.XPATH, AttackKind.SIMPLE_ANCESTRY, base, key)
    assert not simple.attack_succeeded
    sib = attack_outcome(Strategy.XPATH, AttackKind.SIBLING_VALUE, base, key)
    assert sib.signature_valid and sib.attack_succeeded


def test_inline_account_detects_simple_but_not_count_preserving(key):
    base = load_fixture("matrix_base.xml")
    simple = attack_outcome(Strategy.INLINE_ACCOUNT,
                            AttackKind.SIMPLE_ANCESTRY, base, key)
    assert not simple.attack_succeeded
    cp = attack_outcome(Strategy.INLINE_ACCOUNT,
                        AttackKind.COUNT_PRESERVING_SIMPLE, base, key)
    assert cp.signature_valid and cp.attack_succeeded


def test_count_preserving_not_applicable_without_account(key):
    with pytest.raises(NotApplicable):
        attack_outcome(Strategy.ID, AttackKind.COUNT_PRESERVING_SIMPLE,
                       load_fixture("matrix_base.xml"), key)


def test_mismatch_flag_sound_for_id_body_swaps(key):
    """Whenever an ID-referenced Body was swapped, the resolution-vs-
    processing mismatch flag must be raised."""
    for attack in (AttackKind.SIMPLE_ANCESTRY,):
        out = attack_outcome(Strategy.ID, attack,
                             load_fixture("matrix_base.xml"), key)
        assert out.resolved_vs_processed_mismatch


# ---------------------------------------------------------------------------
# Defense matrix
# ---------------------------------------------------------------------------

def test_defense_matrix_full(key):
    matrix = defense_matrix(list(Strategy), list(AttackKind),
                            load_fixture("matrix_base.xml"), key)
    V, D, NA = (DefenseMatrix.VULNERABLE, DefenseMatrix.DETECTED,
                DefenseMatrix.NOT_APPLICABLE)
    expected = {
        (Strategy.ID, AttackKind.SIMPLE_ANCESTRY): V,
        (Strategy.ID, AttackKind.OPTIONAL_ELEMENT): V,
        (Strategy.ID, AttackKind.SIBLING_VALUE): V,
        (Strategy.ID, AttackKind.SIBLING_ORDER): V,
        (Strategy.ID, AttackKind.COUNT_PRESERVING_SIMPLE): NA,
        (Strategy.XPATH, AttackKind.SIMPLE_ANCESTRY): D,
        (Strategy.XPATH, AttackKind.OPTIONAL_ELEMENT): D,
        (Strategy.XPATH, AttackKind.SIBLING_VALUE): V,
        (Strategy.XPATH, AttackKind.SIBLING_ORDER): V,
        (Strategy.XPATH, AttackKind.COUNT_PRESERVING_SIMPLE): NA,
        (Strategy.SESOAP, AttackKind.SIMPLE_ANCESTRY): D,
        (Strategy.SESOAP, AttackKind.OPTIONAL_ELEMENT): D,
        (Strategy.SESOAP, AttackKind.SIBLING_VALUE): D,
        (Strategy.SESOAP, AttackKind.SIBLING_ORDER): D,
        (Strategy.SESOAP, AttackKind.COUNT_PRESERVING_SIMPLE): NA,
        (Strategy.INLINE_ACCOUNT, AttackKind.SIMPLE_ANCESTRY): D,
        (Strategy.INLINE_ACCOUNT, AttackKind.OPTIONAL_ELEMENT): NA,
        (Strategy.INLINE_ACCOUNT, AttackKind.SIBLING_VALUE): NA,
        (Strategy.INLINE_ACCOUNT, AttackKind.SIBLING_ORDER): NA,
        (Strategy.INLINE_ACCOUNT, AttackKind.COUNT_PRESERVING_SIMPLE): V,
    }
    assert matrix.verdicts == expected
    assert len(matrix.as_records()) == 20


# ---------------------------------------------------------------------------
# Receiver policy
# ---------------------------------------------------------------------------

def _trust(key):
    t = TrustStore()
    t.add(key)
    return t


def test_policy_rejects_id_only_signature(key):
    signed = sign(load_fixture("matrix_base.xml"), Strategy.ID, "CMPE", key)
    report = check_receiver_policy(signed, _trust(key))
    assert report.signature_in_ultimate_receiver_security
    assert not report.body_referenced_by_absolute_path
    assert report.key_trusted
    assert not report.overall


def test_policy_accepts_compliant_path_signature(key):
    signed = sign(load_fixture("matrix_base.xml"), Strategy.XPATH,
                  [BODY_PATH, TIMESTAMP_PATH, REPLYTO_PATH], key)
    report = check_receiver_policy(signed, _trust(key))
    assert report.overall


def test_policy_passes_after_sibling_value_attack(key):
    """All four checks hold on a successfully attacked message: the
    policy does not rule out wrapping."""
    signed = sign(load_fixture("matrix_base.xml"), Strategy.XPATH,
                  [BODY_PATH, TIMESTAMP_PATH, REPLYTO_PATH], key)
    attacked = sibling_value(signed).doc
    from soapguard.xmlsig import verify
    assert verify(attacked, key).valid
    report = check_receiver_policy(attacked, _trust(key))
    assert report.overall


def test_policy_flags_untrusted_key(key):
    signed = sign(load_fixture("matrix_base.xml"), Strategy.XPATH,
                  [BODY_PATH, TIMESTAMP_PATH, REPLYTO_PATH], key)
    report = check_receiver_policy(signed, TrustStore())
    assert not report.key_trusted
    assert not report.overall


def test_policy_requires_signature(key):
    with pytest.raises(NoSignature):
        check_receiver_policy(load_fixture("matrix_base.xml"), _trust(key))
