"""XML digital signatures over SOAP envelopes.

Four referencing strategies are supported:

* ``ID``             -- references resolve by searching the whole tree for a
                        matching wsu:Id (first match in document order);
* ``XPATH``          -- references carry an absolute path re-evaluated at
                        verify time;
* ``SESOAP``         -- one reference covering the entire envelope except the
                        signature element itself;
* ``INLINE_ACCOUNT`` -- ID reference to the Body plus a signed structure
                        accounting header (element counts and lineage).

The hash is SHA-256 everywhere; the signature primitive is Ed25519,
deterministic and derivable from a seed so test keys are reproducible.
"""

from __future__ import annotations

import base64
import hashlib
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    PublicFormat,
)

from . import namespaces as ns
from .soap_model import SoapEnvelope, ensure_security_header
from .xml_core import (
    AbsolutePath,
    XmlNode,
    canonicalize,
    count_descendants,
    evaluate_path,
    find_by_id,
)


class SignatureError(Exception):
    pass


class TargetNotFound(SignatureError):
    pass


class AmbiguousPath(SignatureError):
    pass


class AlreadySigned(SignatureError):
    pass


class NoSignature(SignatureError):
    pass


class UnknownKey(SignatureError):
    pass


class Strategy(Enum):
    ID = "id"
    XPATH = "xpath"
    SESOAP = "sesoap"
    INLINE_ACCOUNT = "inline"


# ---------------------------------------------------------------------------
# Crypto primitives
# ---------------------------------------------------------------------------

@dataclass
class KeyPair:
    private_key: Ed25519PrivateKey
    public_key: Ed25519PublicKey
    key_name: str


def generate_keypair(seed: Optional[Union[bytes, str]] = None) -> KeyPair:
    """Deterministic keypair from a seed; random when seed is absent."""
    if seed is None:
        material = os.urandom(32)
    else:
        if isinstance(seed, str):
            seed = seed.encode("utf-8")
        if not seed:
            raise ValueError("seed must be non-empty")
        material = hashlib.sha256(b"soapguard-key:" + seed).digest()
    private = Ed25519PrivateKey.from_private_bytes(material)
    public = private.public_key()
    raw = public.public_bytes(Encoding.Raw, PublicFormat.Raw)
    name = "ed25519:" + hashlib.sha256(raw).hexdigest()[:16]
    return KeyPair(private, public, name)


def sign_primitive(key: KeyPair, message: bytes) -> bytes:
    return key.private_key.sign(message)


def verify_primitive(public_key: Ed25519PublicKey, message: bytes,
                     signature: bytes) -> bool:
    try:
        public_key.verify(signature, message)
        return True
    except InvalidSignature:
        return False


@dataclass(frozen=True)
class DigestValue:
    value: bytes
    algorithm_label: str = "sha256"


def digest(data: bytes) -> DigestValue:
    return DigestValue(hashlib.sha256(data).digest())


class TrustStore:
    """In-memory key-name to public-key map (CA stand-in)."""

    def __init__(self):
        self._keys: dict[str, Ed25519PublicKey] = {}

    def add(self, key: KeyPair) -> None:
        self._keys[key.key_name] = key.public_key

    def get(self, key_name: str) -> Optional[Ed25519PublicKey]:
        return self._keys.get(key_name)


# ---------------------------------------------------------------------------
# Structure accounting (inline method)
# ---------------------------------------------------------------------------

@dataclass
class SoapAccount:
    header_descendants: int
    envelope_descendants: int
    references_per_signature: list[int]
    lineage: list[tuple[str, int]]  # (parent clark name, element child count)


def _clark(node: XmlNode) -> str:
    return f"{{{node.uri}}}{node.local}" if node.uri else node.local


def _account_node(env: SoapEnvelope) -> Optional[XmlNode]:
    header = env.header()
    if header is None:
        return None
    for c in header.element_children():
        if c.qname == (ns.ACCT, "SoapAccount"):
            return c
    return None


def compute_soap_account(env: SoapEnvelope) -> SoapAccount:
    """The four protected structure properties from the current tree."""
    header = env.header()
    sigs = env.signatures()
    if header is None or not sigs:
        raise NoSignature("envelope must carry a Header and a signature")
    refs_per_sig = []
    items: list[XmlNode] = []
    for sig in sigs:
        refs = _parse_references(sig)
        refs_per_sig.append(len(refs))
        for ref in refs:
            node, _ = _resolve_reference(env, ref, sig)
            if node is not None:
                items.append(node)
    lineage = []
    for item in items:
        parent = item.parent
        lineage.append((
            _clark(parent) if parent is not None else "",
            len(item.element_children()),
        ))
    return SoapAccount(
        header_descendants=count_descendants(header),
        envelope_descendants=count_descendants(env.root),
        references_per_signature=refs_per_sig,
        lineage=lineage,
    )


# ---------------------------------------------------------------------------
# Signature XML construction
# ---------------------------------------------------------------------------

def _ds(local: str, text: Optional[str] = None,
        attrs: Optional[dict[str, str]] = None) -> XmlNode:
    el = XmlNode.element(local, ns.DS, "ds")
    for k, v in (attrs or {}).items():
        el.set_attribute(k, v)
    if text is not None:
        el.append_child(XmlNode.text_node(text))
    return el


def _set_element_text(el: XmlNode, text: str) -> None:
    for c in list(el.children):
        el.remove_child(c)
    el.append_child(XmlNode.text_node(text))


@dataclass
class Reference:
    """One ds:Reference, in parsed form."""
    kind: Strategy  # ID / XPATH / SESOAP resolution semantics
    target_id: Optional[str] = None
    path: Optional[AbsolutePath] = None
    digest_b64: str = ""
    node: Optional[XmlNode] = None  # the ds:Reference element

    def describe(self) -> str:
        if self.kind == Strategy.ID:
            return f"#{self.target_id}"
        if self.kind == Strategy.XPATH:
            return self.path.text if self.path else "<path>"
        return "<whole-envelope>"


def _build_reference_node(ref: Reference) -> XmlNode:
    el = _ds("Reference")
    if ref.kind == Strategy.ID:
        el.set_attribute("URI", "#" + ref.target_id)
    elif ref.kind == Strategy.XPATH:
        el.set_attribute("URI", "")
        transforms = _ds("Transforms")
        transform = _ds("Transform", attrs={"Algorithm": ns.TRANSFORM_XPATH})
        transform.append_child(_ds("XPath", text=ref.path.text))
        transforms.append_child(transform)
        el.append_child(transforms)
    else:  # whole envelope
        el.set_attribute("URI", "")
        transforms = _ds("Transforms")
        transforms.append_child(
            _ds("Transform", attrs={"Algorithm": ns.TRANSFORM_EXCLUDE_SIGNATURE}))
        el.append_child(transforms)
    el.append_child(_ds("DigestMethod", attrs={"Algorithm": ns.ALG_DIGEST}))
    el.append_child(_ds("DigestValue", text=""))
    return el


def _parse_references(sig: XmlNode) -> list[Reference]:
    signed_info = _child(sig, ns.DS, "SignedInfo")
    refs = []
    if signed_info is None:
        return refs
    for ref_el in signed_info.element_children():
        if ref_el.qname != (ns.DS, "Reference"):
            continue
        uri = ref_el.get_attribute("URI")
        dv = _child(ref_el, ns.DS, "DigestValue")
        digest_b64 = dv.text_content().strip() if dv is not None else ""
        xpath_text = None
        exclude_sig = False
        transforms = _child(ref_el, ns.DS, "Transforms")
        if transforms is not None:
            for t in transforms.element_children():
                alg = t.get_attribute("Algorithm")
                if alg == ns.TRANSFORM_EXCLUDE_SIGNATURE:
                    exclude_sig = True
                elif alg == ns.TRANSFORM_XPATH:
                    xp = _child(t, ns.DS, "XPath")
                    if xp is not None:
                        xpath_text = xp.text_content().strip()
        if uri and uri.startswith("#"):
            refs.append(Reference(Strategy.ID, target_id=uri[1:],
                                  digest_b64=digest_b64, node=ref_el))
        elif xpath_text:
            refs.append(Reference(Strategy.XPATH,
                                  path=AbsolutePath.parse(xpath_text),
                                  digest_b64=digest_b64, node=ref_el))
        elif exclude_sig:
            refs.append(Reference(Strategy.SESOAP,
                                  digest_b64=digest_b64, node=ref_el))
        else:
            refs.append(Reference(Strategy.ID, target_id=uri or "",
                                  digest_b64=digest_b64, node=ref_el))
    return refs


def _child(el: XmlNode, uri: str, local: str) -> Optional[XmlNode]:
    for c in el.element_children():
        if c.qname == (uri, local):
            return c
    return None


def _resolve_reference(env: SoapEnvelope, ref: Reference,
                       sig: XmlNode) -> tuple[Optional[XmlNode], str]:
    """Resolve a reference with its strategy's own lookup semantics."""
    if ref.kind == Strategy.ID:
        node = find_by_id(env.doc, ref.target_id or "")
        if node is None:
            return None, f"no element with wsu:Id={ref.target_id!r}"
        return node, ""
    if ref.kind == Strategy.XPATH:
        matches = evaluate_path(env.doc, ref.path)
        if not matches:
            return None, f"path {ref.path.text} matches no element"
        if len(matches) > 1:
            return None, f"path {ref.path.text} matches {len(matches)} elements"
        return matches[0], ""
    return env.root, ""


def _reference_bytes(env: SoapEnvelope, ref: Reference, sig: XmlNode,
                     node: XmlNode) -> bytes:
    if ref.kind == Strategy.SESOAP:
        return canonicalize(env.root, env.doc, excluded={sig.node_id})
    return canonicalize(node, env.doc)


# ---------------------------------------------------------------------------
# Signing
# ---------------------------------------------------------------------------

TargetSpec = Union[str, AbsolutePath, Sequence[Union[str, AbsolutePath]], None]

ACCOUNT_ID = "theSoapAccount"


def sign(env: SoapEnvelope, strategy: Strategy, target: TargetSpec,
         key: KeyPair) -> SoapEnvelope:
    """Return a signed copy of the envelope.

    ``target`` is one or more wsu:Id values (ID), one or more absolute
    paths (XPATH), or absent (SESOAP; INLINE_ACCOUNT defaults to the
    Body's wsu:Id).  All other content is left untouched.
    """
    return sign_in_place(env.copy(), strategy, target, key)


def sign_in_place(env: SoapEnvelope, strategy: Strategy, target: TargetSpec,
                  key: KeyPair) -> SoapEnvelope:
    """Sign the envelope by mutation (no defensive copy) and return it."""
    if env.signatures():
        raise AlreadySigned("envelope already carries a signature")
    sec = ensure_security_header(env)

    refs: list[Reference] = []
    if strategy == Strategy.ID:
        for t in _target_list(target):
            if not isinstance(t, str):
                raise TypeError("ID strategy takes wsu:Id strings")
            if find_by_id(env.doc, t) is None:
                raise TargetNotFound(f"no element with wsu:Id={t!r}")
            refs.append(Reference(Strategy.ID, target_id=t))
    elif strategy == Strategy.XPATH:
        # Plain strings not starting with "/" are wsu:Id references; real
        # deployments mixed the two, and the harness exercises that mix.
        for t in _target_list(target):
            if isinstance(t, str) and not t.startswith("/"):
                if find_by_id(env.doc, t) is None:
                    raise TargetNotFound(f"no element with wsu:Id={t!r}")
                refs.append(Reference(Strategy.ID, target_id=t))
                continue
            path = AbsolutePath.parse(t) if isinstance(t, str) else t
            matches = evaluate_path(env.doc, path)
            if not matches:
                raise TargetNotFound(f"path {path.text} matches no element")
            if len(matches) > 1:
                raise AmbiguousPath(
                    f"path {path.text} matches {len(matches)} elements")
            refs.append(Reference(Strategy.XPATH, path=path))
    elif strategy == Strategy.SESOAP:
        refs.append(Reference(Strategy.SESOAP))
    elif strategy == Strategy.INLINE_ACCOUNT:
        body = env.body()
        if body is None:
            raise TargetNotFound("envelope has no Body to sign")
        body_id = target if isinstance(target, str) else None
        if body_id is None:
            body_id = body.get_attribute("Id", ns.WSU)
        if body_id is None or find_by_id(env.doc, body_id) is None:
            raise TargetNotFound("Body carries no wsu:Id to reference")
        refs.append(Reference(Strategy.ID, target_id=body_id))
        refs.append(Reference(Strategy.ID, target_id=ACCOUNT_ID))

    sig = _ds("Signature")
    sig.declare_namespace("ds", ns.DS)
    signed_info = _ds("SignedInfo")
    signed_info.append_child(
        _ds("CanonicalizationMethod", attrs={"Algorithm": ns.ALG_C14N}))
    signed_info.append_child(
        _ds("SignatureMethod", attrs={"Algorithm": ns.ALG_SIGNATURE}))
    for ref in refs:
        ref.node = _build_reference_node(ref)
        signed_info.append_child(ref.node)
    sig.append_child(signed_info)
    sig.append_child(_ds("SignatureValue", text=""))
    key_info = _ds("KeyInfo")
    key_info.append_child(_ds("KeyName", text=key.key_name))
    sig.append_child(key_info)
    sec.append_child(sig)

    account_el = None
    if strategy == Strategy.INLINE_ACCOUNT:
        account_el = _build_account_shell(env, n_items=len(refs))

    # Digest after attachment: counts and exclusion sets see the final tree
    # (only text and attribute values are written below, which leaves every
    # element count unchanged).
    if account_el is not None:
        _fill_account(env, account_el, refs)

    for ref in refs:
        node, reason = _resolve_reference(env, ref, sig)
        if node is None:
            raise TargetNotFound(reason)
        data = _reference_bytes(env, ref, sig, node)
        dv = _child(ref.node, ns.DS, "DigestValue")
        _set_element_text(dv, base64.b64encode(digest(data).value).decode())

    si_bytes = canonicalize(signed_info, env.doc)
    sig_value = sign_primitive(key, si_bytes)
    _set_element_text(_child(sig, ns.DS, "SignatureValue"),
                      base64.b64encode(sig_value).decode())
    return env


def _target_list(target: TargetSpec) -> list:
    if target is None:
        raise TargetNotFound("this strategy requires an explicit target")
    if isinstance(target, (str, AbsolutePath)):
        return [target]
    return list(target)


def _build_account_shell(env: SoapEnvelope, n_items: int) -> XmlNode:
    header = env.header()
    acct = XmlNode.element("SoapAccount", ns.ACCT, "acct")
    acct.declare_namespace("acct", ns.ACCT)
    acct.set_attribute("Id", ACCOUNT_ID, ns.WSU, "wsu")
    for name in ("HeaderDescendants", "EnvelopeDescendants", "SignatureReferences"):
        el = XmlNode.element(name, ns.ACCT, "acct")
        el.append_child(XmlNode.text_node(""))
        acct.append_child(el)
    for _ in range(n_items):
        acct.append_child(XmlNode.element("SignedItem", ns.ACCT, "acct"))
    header.append_child(acct)
    return acct


def _fill_account(env: SoapEnvelope, acct: XmlNode,
                  refs: list[Reference]) -> None:
    header = env.header()
    sig = env.signatures()[0]
    items = []
    for ref in refs:
        node, reason = _resolve_reference(env, ref, sig)
        if node is None:
            raise TargetNotFound(reason)
        items.append(node)
    values = {
        "HeaderDescendants": str(count_descendants(header)),
        "EnvelopeDescendants": str(count_descendants(env.root)),
        "SignatureReferences": str(len(refs)),
    }
    signed_items = []
    for c in acct.element_children():
        if c.local in values:
            _set_element_text(c, values[c.local])
        elif c.local == "SignedItem":
            signed_items.append(c)
    for item_el, node in zip(signed_items, items):
        parent = node.parent
        item_el.set_attribute("parent", _clark(parent) if parent else "")
        item_el.set_attribute("children", str(len(node.element_children())))


def _parse_account(acct: XmlNode) -> SoapAccount:
    values = {}
    lineage = []
    for c in acct.element_children():
        if c.local == "SignedItem":
            lineage.append((
                c.get_attribute("parent") or "",
                int(c.get_attribute("children") or "0"),
            ))
        else:
            values[c.local] = c.text_content().strip()
    return SoapAccount(
        header_descendants=int(values.get("HeaderDescendants", "0")),
        envelope_descendants=int(values.get("EnvelopeDescendants", "0")),
        references_per_signature=[int(values.get("SignatureReferences", "0"))],
        lineage=lineage,
    )


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

@dataclass
class ReferenceCheck:
    target: str
    resolved_node_id: Optional[int]
    digest_ok: bool
    reason: str = ""


@dataclass
class SignatureCheck:
    signature_node_id: int
    strategy: Strategy
    signed_info_ok: bool
    references: list[ReferenceCheck] = field(default_factory=list)
    account_ok: Optional[bool] = None  # None when no accounting header applies
    account_reason: str = ""

    @property
    def valid(self) -> bool:
        refs_ok = all(r.digest_ok for r in self.references)
        return (self.signed_info_ok and refs_ok
                and self.account_ok is not False)


@dataclass
class VerificationReport:
    signatures: list[SignatureCheck]

    @property
    def valid(self) -> bool:
        return bool(self.signatures) and all(s.valid for s in self.signatures)

    def resolved_nodes(self) -> list[int]:
        out = []
        for s in self.signatures:
            for r in s.references:
                if r.resolved_node_id is not None:
                    out.append(r.resolved_node_id)
        return out


def detect_strategy(env: SoapEnvelope, sig: XmlNode) -> Strategy:
    """Infer the signing strategy from the signature's own shape."""
    refs = _parse_references(sig)
    if any(r.kind == Strategy.SESOAP for r in refs):
        return Strategy.SESOAP
    if _account_node(env) is not None:
        return Strategy.INLINE_ACCOUNT
    if any(r.kind == Strategy.XPATH for r in refs):
        return Strategy.XPATH
    return Strategy.ID


def verify(env: SoapEnvelope, key: KeyPair,
           trust: Optional[TrustStore] = None) -> VerificationReport:
    """Check every signature in the envelope.

    Each reference is re-resolved with its strategy's own lookup (the
    vulnerable first-match search for ID references) and its digest is
    recomputed; the report records which node each reference resolved
    to, so callers can detect resolution-vs-processing mismatches.
    """
    sigs = env.signatures()
    if not sigs:
        raise NoSignature("envelope carries no signature")
    checks = []
    for sig in sigs:
        strategy = detect_strategy(env, sig)
        public_key = key.public_key
        key_name_el = None
        ki = _child(sig, ns.DS, "KeyInfo")
        if ki is not None:
            key_name_el = _child(ki, ns.DS, "KeyName")
        if trust is not None:
            name = key_name_el.text_content().strip() if key_name_el is not None else ""
            trusted = trust.get(name)
            if trusted is None:
                raise UnknownKey(f"key name {name!r} not in trust store")
            public_key = trusted

        signed_info = _child(sig, ns.DS, "SignedInfo")
        sv = _child(sig, ns.DS, "SignatureValue")
        signed_info_ok = False
        if signed_info is not None and sv is not None:
            try:
                sig_bytes = base64.b64decode(sv.text_content().strip())
            except ValueError:
                sig_bytes = b""
            si_bytes = canonicalize(signed_info, env.doc)
            signed_info_ok = verify_primitive(public_key, si_bytes, sig_bytes)

        ref_checks = []
        for ref in _parse_references(sig):
            node, reason = _resolve_reference(env, ref, sig)
            if node is None:
                ref_checks.append(ReferenceCheck(
                    ref.describe(), None, False, reason))
                continue
            data = _reference_bytes(env, ref, sig, node)
            try:
                stored = base64.b64decode(ref.digest_b64)
            except ValueError:
                stored = b""
            ok = digest(data).value == stored
            ref_checks.append(ReferenceCheck(
                ref.describe(), node.node_id, ok,
                "" if ok else "digest mismatch"))

        account_ok = None
        account_reason = ""
        if strategy == Strategy.INLINE_ACCOUNT:
            acct_el = _account_node(env)
            stored_acct = _parse_account(acct_el)
            current = compute_soap_account(env)
            account_ok = (
                stored_acct.header_descendants == current.header_descendants
                and stored_acct.envelope_descendants == current.envelope_descendants
                and stored_acct.references_per_signature == current.references_per_signature
                and stored_acct.lineage == current.lineage
            )
            if not account_ok:
                account_reason = (
                    f"structure accounting mismatch: stored {stored_acct}, "
                    f"recomputed {current}")

        checks.append(SignatureCheck(
            signature_node_id=sig.node_id,
            strategy=strategy,
            signed_info_ok=signed_info_ok,
            references=ref_checks,
            account_ok=account_ok,
            account_reason=account_reason,
        ))
    return VerificationReport(checks)
