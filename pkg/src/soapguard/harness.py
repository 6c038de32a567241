"""Receiver-side model: application logic, attack verdicts, policy check.

An attack "succeeds" only when the signature still verifies AND the
receiver's application logic does what the attacker wanted.  The
defense matrix aggregates that judgment over every strategy/attack
pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import namespaces as ns
from .attacks import (
    AttackError,
    AttackKind,
    count_preserving_simple,
    optional_element,
    sibling_order,
    sibling_value,
    simple_ancestry,
)
from .soap_model import SoapEnvelope
from .xml_core import AbsolutePath, XmlNode, evaluate_path
from .xmlsig import (
    KeyPair,
    NoSignature,
    Strategy,
    TrustStore,
    _parse_references,
    sign,
    verify,
)


class AmbiguousBody(Exception):
    pass


class NotApplicable(Exception):
    pass


@dataclass
class ProcessedMessage:
    processed_body: XmlNode
    processed_headers: list[XmlNode] = field(default_factory=list)
    skipped_headers: list[XmlNode] = field(default_factory=list)


@dataclass
class Outcome:
    signature_valid: bool
    resolved_vs_processed_mismatch: bool
    attacker_intent_met: bool

    @property
    def attack_succeeded(self) -> bool:
        return self.signature_valid and self.attacker_intent_met


@dataclass
class DefenseMatrix:
    verdicts: dict[tuple[Strategy, AttackKind], str] = field(default_factory=dict)

    VULNERABLE = "VULNERABLE"
    DETECTED = "DETECTED"
    NOT_APPLICABLE = "NOT_APPLICABLE"

    def as_records(self) -> list[dict]:
        out = []
        for (strategy, attack), verdict in sorted(
                self.verdicts.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)):
            out.append({"strategy": strategy.value, "attack": attack.value,
                        "verdict": verdict})
        return out


@dataclass
class PolicyReport:
    signature_in_ultimate_receiver_security: bool
    body_referenced_by_absolute_path: bool
    timestamp_replyto_path_referenced: bool
    key_trusted: bool

    @property
    def overall(self) -> bool:
        return (self.signature_in_ultimate_receiver_security
                and self.body_referenced_by_absolute_path
                and self.timestamp_replyto_path_referenced
                and self.key_trusted)


def _is_skipped_entry(entry: XmlNode) -> bool:
    role = entry.role()
    if role is not None and ns.is_role_none(role):
        return True
    return False


def application_view(env: SoapEnvelope) -> ProcessedMessage:
    """What the receiver actually processes.

    Only the single Body directly under the Envelope is handed to the
    application.  Header entries (direct children of Header and of
    Security blocks) addressed to the "none" role are skipped along
    with their contents.
    """
    bodies = env.bodies()
    if len(bodies) != 1:
        raise AmbiguousBody(
            f"{len(bodies)} Body elements directly under Envelope")
    processed_headers: list[XmlNode] = []
    skipped: list[XmlNode] = []

    def classify(entry: XmlNode, inside_skipped: bool) -> None:
        skip = inside_skipped or _is_skipped_entry(entry)
        if skip:
            skipped.append(entry)
            for c in entry.element_children():
                classify(c, True)
        else:
            processed_headers.append(entry)
            if entry.qname == (ns.WSSE, "Security"):
                for c in entry.element_children():
                    classify(c, False)

    header = env.header()
    if header is not None:
        for entry in header.element_children():
            classify(entry, False)
    return ProcessedMessage(bodies[0], processed_headers, skipped)


# ---------------------------------------------------------------------------
# Attack scenarios
# ---------------------------------------------------------------------------

BODY_PATH = "/soap:Envelope/soap:Body"
TIMESTAMP_PATH = "/soap:Envelope/soap:Header/wsse:Security/wsu:Timestamp"
REPLYTO_PATH = "/soap:Envelope/soap:Header/wsa:ReplyTo"


def _require(node: Optional[XmlNode], what: str) -> XmlNode:
    if node is None:
        raise NotApplicable(f"base envelope lacks {what}")
    return node


def _find_entry(env: SoapEnvelope, qname: tuple[str, str]) -> Optional[XmlNode]:
    header = env.header()
    if header is None:
        return None
    for el in header.iter_elements():
        if el.qname == qname:
            return el
    return None


def _instruction_ids(env: SoapEnvelope) -> list[str]:
    body = env.body()
    if body is None:
        return []
    out = []
    for c in body.element_children():
        wid = c.get_attribute("Id", ns.WSU)
        if wid is not None:
            out.append(wid)
    return out


def _sign_targets(env: SoapEnvelope, strategy: Strategy,
                  attack: AttackKind):
    """Reference set a signer would use for the scenario under test."""
    body = _require(env.body(), "a Body")
    body_id = body.get_attribute("Id", ns.WSU)
    if strategy == Strategy.SESOAP:
        return None
    if strategy == Strategy.INLINE_ACCOUNT:
        if attack not in (AttackKind.SIMPLE_ANCESTRY,
                          AttackKind.COUNT_PRESERVING_SIMPLE):
            raise NotApplicable(
                "the inline accounting method only covers the Body")
        return None
    if attack == AttackKind.SIBLING_ORDER:
        ids = _instruction_ids(env)
        if len(ids) < 2:
            raise NotApplicable("base envelope lacks order-sensitive siblings")
        if strategy == Strategy.ID:
            return ids
        return [f'/soap:Envelope/soap:Body/Instruction[@wsu:Id="{i}"]'
                for i in ids]
    targets_id = [body_id]
    targets_path = [BODY_PATH]
    if attack == AttackKind.OPTIONAL_ELEMENT:
        reply_to = _require(_find_entry(env, (ns.WSA, "ReplyTo")), "a ReplyTo")
        targets_id.append(reply_to.get_attribute("Id", ns.WSU))
        targets_path.append(REPLYTO_PATH)
    elif attack == AttackKind.SIBLING_VALUE:
        timestamp = _require(_find_entry(env, (ns.WSU, "Timestamp")),
                             "a Timestamp")
        targets_id.append(timestamp.get_attribute("Id", ns.WSU))
        targets_path.append(TIMESTAMP_PATH)
    if strategy == Strategy.ID:
        return targets_id
    return targets_path


def attack_outcome(strategy: Strategy, attack: AttackKind,
                   base: SoapEnvelope, key: KeyPair) -> Outcome:
    """Sign, attack, verify and process; judge the attacker's success."""
    if attack == AttackKind.COUNT_PRESERVING_SIMPLE:
        if strategy != Strategy.INLINE_ACCOUNT:
            raise NotApplicable("count-preserving swap needs an accounting header")
    targets = _sign_targets(base, strategy, attack)
    signed = sign(base, strategy, targets, key)
    manifest = _instruction_ids(signed)

    payload = XmlNode.element("getQuote")
    payload.set_attribute("Symbol", "MBI")
    try:
        if attack == AttackKind.SIMPLE_ANCESTRY:
            result = simple_ancestry(signed, payload, "newCMPE")
        elif attack == AttackKind.OPTIONAL_ELEMENT:
            result = optional_element(signed, (ns.WSA, "ReplyTo"))
        elif attack == AttackKind.SIBLING_VALUE:
            result = sibling_value(signed)
        elif attack == AttackKind.SIBLING_ORDER:
            n = len(manifest)
            result = sibling_order(signed, list(range(n))[::-1])
        elif attack == AttackKind.COUNT_PRESERVING_SIMPLE:
            result = count_preserving_simple(signed, payload, "newCMPE")
        else:
            raise NotApplicable(f"unknown attack {attack}")
    except AttackError as e:
        raise NotApplicable(str(e)) from e

    attacked = result.doc
    try:
        report = verify(attacked, key)
        signature_valid = report.valid
        resolved = set(report.resolved_nodes())
    except NoSignature:
        signature_valid = False
        resolved = set()

    view = application_view(attacked)

    if attack in (AttackKind.SIMPLE_ANCESTRY, AttackKind.COUNT_PRESERVING_SIMPLE):
        intent = view.processed_body.node_id in result.injected_nodes
    elif attack in (AttackKind.OPTIONAL_ELEMENT, AttackKind.SIBLING_VALUE):
        skipped_ids = {n.node_id for n in view.skipped_headers}
        intent = all(m in skipped_ids for m in result.moved_nodes)
    else:  # SIBLING_ORDER
        intent = _instruction_ids(attacked) != manifest

    processed_ids = {view.processed_body.node_id}
    processed_ids.update(n.node_id for n in view.processed_headers)
    mismatch = bool(resolved) and not resolved.issubset(processed_ids)

    return Outcome(signature_valid, mismatch, intent)


def defense_matrix(strategies, attacks, base: SoapEnvelope,
                   key: KeyPair) -> DefenseMatrix:
    matrix = DefenseMatrix()
    for strategy in strategies:
        for attack in attacks:
            try:
                outcome = attack_outcome(strategy, attack, base, key)
            except NotApplicable:
                matrix.verdicts[(strategy, attack)] = DefenseMatrix.NOT_APPLICABLE
                continue
            matrix.verdicts[(strategy, attack)] = (
                DefenseMatrix.VULNERABLE if outcome.attack_succeeded
                else DefenseMatrix.DETECTED)
    return matrix


# ---------------------------------------------------------------------------
# Receiver-side security policy (four checks)
# ---------------------------------------------------------------------------

_POLICY_TIMESTAMP = AbsolutePath.parse(
    "/soap:Envelope/soap:Header/wsse:Security[role(ultimateReceiver)]/wsu:Timestamp")
_POLICY_REPLYTO = AbsolutePath.parse("/soap:Envelope/soap:Header/wsa:ReplyTo")
_POLICY_BODY = AbsolutePath.parse(BODY_PATH)


def check_receiver_policy(env: SoapEnvelope,
                          trust: TrustStore) -> PolicyReport:
    """The four receiver-side requirements, checked literally.

    The checks pass or fail exactly as written; the sibling-value test
    shows that passing all four does not rule out a wrapping attack.
    """
    sigs = env.signatures()
    if not sigs:
        raise NoSignature("envelope carries no signature")

    check1 = False
    for sig in sigs:
        sec = sig.parent
        if (sec is not None and sec.qname == (ns.WSSE, "Security")):
            role = sec.role()
            if role is not None and ns.is_role_ultimate_receiver(role):
                check1 = True

    path_refs = []
    key_names = []
    for sig in sigs:
        for ref in _parse_references(sig):
            if ref.kind == Strategy.XPATH:
                path_refs.append(ref.path)
        for el in sig.iter_elements():
            if el.qname == (ns.DS, "KeyName"):
                key_names.append(el.text_content().strip())

    check2 = any(p.text == BODY_PATH for p in path_refs)

    must_cover = (evaluate_path(env.doc, _POLICY_TIMESTAMP)
                  + evaluate_path(env.doc, _POLICY_REPLYTO))
    check3 = True
    for node in must_cover:
        covered = False
        for p in path_refs:
            if node in evaluate_path(env.doc, p):
                covered = True
                break
        if not covered:
            check3 = False

    check4 = any(trust.get(name) is not None for name in key_names)

    return PolicyReport(check1, check2, check3, check4)
