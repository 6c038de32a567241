"""SOAP envelope construction and structural validation.

Envelopes follow the classic skeleton: a single Envelope root holding an
optional Header (always first) and exactly one Body.  Validity is a
query, not a constructor guarantee -- attacked documents deliberately
violate the skeleton and must still be representable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import namespaces as ns
from .xml_core import XmlDocument, XmlNode, NodeNotInDocument


@dataclass
class HeaderEntry:
    node: XmlNode
    must_understand: bool
    role: Optional[str]


@dataclass
class StructureViolation:
    code: str
    detail: str


class SoapEnvelope:
    """An XmlDocument viewed as a SOAP envelope."""

    def __init__(self, doc: XmlDocument):
        self.doc = doc

    @property
    def root(self) -> XmlNode:
        return self.doc.root

    def copy(self) -> "SoapEnvelope":
        return SoapEnvelope(self.doc.copy())

    def header(self) -> Optional[XmlNode]:
        for c in self.root.element_children():
            if c.qname == (ns.SOAP_ENV, "Header"):
                return c
        return None

    def body(self) -> Optional[XmlNode]:
        """The first Body directly under the Envelope root."""
        for c in self.root.element_children():
            if c.qname == (ns.SOAP_ENV, "Body"):
                return c
        return None

    def bodies(self) -> list[XmlNode]:
        return [c for c in self.root.element_children()
                if c.qname == (ns.SOAP_ENV, "Body")]

    def security(self) -> Optional[XmlNode]:
        h = self.header()
        if h is None:
            return None
        for c in h.element_children():
            if c.qname == (ns.WSSE, "Security"):
                return c
        return None

    def signatures(self) -> list[XmlNode]:
        return [el for el in self.root.iter_elements()
                if el.qname == (ns.DS, "Signature")]

    def header_entries(self) -> list[HeaderEntry]:
        h = self.header()
        if h is None:
            return []
        entries = []
        for c in h.element_children():
            mu = c.get_attribute("mustUnderstand", ns.SOAP_ENV)
            entries.append(HeaderEntry(
                node=c,
                must_understand=(mu is not None and mu != "0"),
                role=c.role(),
            ))
        return entries


def build_envelope(body_payload: XmlNode,
                   headers: Optional[list[XmlNode]] = None) -> SoapEnvelope:
    """Fresh envelope: Header with the given entries, Body with the payload."""
    root = XmlNode.element("Envelope", ns.SOAP_ENV, "soap")
    root.declare_namespace("soap", ns.SOAP_ENV)
    root.declare_namespace("wsu", ns.WSU)
    header = XmlNode.element("Header", ns.SOAP_ENV, "soap")
    body = XmlNode.element("Body", ns.SOAP_ENV, "soap")
    root.append_child(header)
    root.append_child(body)
    for h in headers or []:
        header.append_child(h)
    body.append_child(body_payload)
    return SoapEnvelope(XmlDocument(root, {"soap": ns.SOAP_ENV, "wsu": ns.WSU}))


def ensure_security_header(env: SoapEnvelope) -> XmlNode:
    """Return the wsse:Security header, creating Header/Security if absent.

    A created Security block carries the ultimateReceiver role, which is
    what the receiver-side policy expects.
    """
    header = env.header()
    if header is None:
        header = XmlNode.element("Header", ns.SOAP_ENV, "soap")
        env.root.insert_child(0, header)
    sec = env.security()
    if sec is None:
        sec = XmlNode.element("Security", ns.WSSE, "wsse")
        sec.declare_namespace("wsse", ns.WSSE)
        sec.set_attribute("role", ns.ROLE_ULTIMATE_RECEIVER,
                          ns.SOAP_ENV, "soap")
        header.insert_child(0, sec)
    return sec


def assign_id(env: SoapEnvelope, node: XmlNode, id: str) -> None:
    """Set wsu:Id on an element of the envelope (overwrite allowed)."""
    if not env.doc.contains(node):
        raise NodeNotInDocument(f"node {node.node_id} not in envelope")
    node.set_attribute("Id", id, ns.WSU, "wsu")


def validate_envelope(env: SoapEnvelope) -> list[StructureViolation]:
    """Empty list iff the skeleton invariants hold."""
    violations: list[StructureViolation] = []
    root = env.root
    if root.qname != (ns.SOAP_ENV, "Envelope"):
        violations.append(StructureViolation(
            "BadRoot", f"root is {root.tag}, expected soap:Envelope"))
        return violations
    kids = root.element_children()
    headers = [c for c in kids if c.qname == (ns.SOAP_ENV, "Header")]
    bodies = [c for c in kids if c.qname == (ns.SOAP_ENV, "Body")]
    if len(headers) > 1:
        violations.append(StructureViolation(
            "DuplicateHeader", f"{len(headers)} Header elements under Envelope"))
    if len(bodies) == 0:
        violations.append(StructureViolation("MissingBody", "no Body under Envelope"))
    elif len(bodies) > 1:
        violations.append(StructureViolation(
            "DuplicateBody", f"{len(bodies)} Body elements under Envelope"))
    if headers and bodies:
        if kids.index(headers[0]) > kids.index(bodies[0]):
            violations.append(StructureViolation(
                "HeaderAfterBody", "Header follows Body under Envelope"))
    # signed-content relocation: Body-like elements hiding in the header
    for h in headers:
        for el in h.iter_elements():
            if el is not h and el.qname == (ns.SOAP_ENV, "Body"):
                violations.append(StructureViolation(
                    "BodyUnderHeader",
                    f"Body-like element (wsu:Id={el.get_attribute('Id', ns.WSU)!r}) "
                    f"found under Header"))
    return violations
