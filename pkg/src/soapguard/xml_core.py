"""Minimal namespace-aware XML document model.

Provides parsing, serialization, a deterministic simplified canonical
form, wsu:Id lookup and restricted absolute-path evaluation.  The model
is deliberately small: elements, attributes and text only.  DTDs,
comments, processing instructions and CDATA sections are rejected at
parse time.

Canonical form (used for digesting):
  * UTF-8 bytes;
  * attributes sorted by (namespace URI, local name);
  * namespace declarations emitted on the element where a prefix is
    first used in walk order, sorted by prefix;
  * text trimmed and internal whitespace collapsed to single spaces;
  * empty elements emitted as a start/end tag pair;
  * only the five built-in character entities.

Nodes cache their canonical start/end tag fragments.  The caches are
refreshed by every mutator, so canonicalization of an unchanged subtree
is a plain tree walk over precomputed strings.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .namespaces import DS, WELL_KNOWN_PREFIXES, WSU, XML_NS, is_role_none

_node_ids = itertools.count(1)


class MalformedXml(ValueError):
    """Raised by parse() on input this model refuses to represent."""

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"malformed XML at offset {position}: {reason}")


class NodeNotInDocument(ValueError):
    pass


class PathSyntaxError(ValueError):
    pass


def _escape_text(s: str) -> str:
    if "&" in s:
        s = s.replace("&", "&amp;")
    if "<" in s:
        s = s.replace("<", "&lt;")
    if ">" in s:
        s = s.replace(">", "&gt;")
    return s


def _escape_attr(s: str) -> str:
    if "&" in s:
        s = s.replace("&", "&amp;")
    if "<" in s:
        s = s.replace("<", "&lt;")
    if '"' in s:
        s = s.replace('"', "&quot;")
    return s


@dataclass
class Attr:
    prefix: str  # "" when unprefixed
    local: str
    uri: str  # "" when in no namespace
    value: str

    @property
    def name(self) -> str:
        return f"{self.prefix}:{self.local}" if self.prefix else self.local


class XmlNode:
    """Element or text node.  Identity-stable via ``node_id``."""

    __slots__ = (
        "kind", "prefix", "local", "uri", "attrs", "nsdecls", "children",
        "text", "parent", "node_id",
        "_cname", "_copen", "_cclose", "_ctext", "_ns_used",
        "_cstate", "_csub",
    )

    def __init__(self):
        self.kind = "element"
        self.prefix = ""
        self.local = ""
        self.uri = ""
        self.attrs: list[Attr] = []
        self.nsdecls: list[tuple[str, str]] = []  # (prefix-or-"", uri) as written
        self.children: list[XmlNode] = []
        self.text = ""
        self.parent: Optional[XmlNode] = None
        self.node_id = next(_node_ids)
        self._cname = ""
        self._copen = ""
        self._cclose = ""
        self._ctext: Optional[str] = None
        self._ns_used: tuple[tuple[str, str], ...] = ()
        # Whole-subtree canonical cache: _cstate is None (no cache) or a
        # tuple of (prefix, uri) pairs the rendering depends on; _csub
        # maps entry-state keys to rendered strings.  Mutators clear the
        # cache on the node and every ancestor.
        self._cstate: Optional[tuple[tuple[str, str], ...]] = None
        self._csub: Optional[dict] = None

    # -- constructors -------------------------------------------------

    @classmethod
    def element(cls, local: str, uri: str = "", prefix: str = "",
                attrs: Optional[list[Attr]] = None,
                children: Optional[list["XmlNode"]] = None) -> "XmlNode":
        n = cls()
        n.prefix = prefix
        n.local = local
        n.uri = uri
        if attrs:
            n.attrs = list(attrs)
        n._refresh()
        if children:
            for c in children:
                n.append_child(c)
        return n

    @classmethod
    def text_node(cls, text: str) -> "XmlNode":
        n = cls()
        n.kind = "text"
        n.text = text
        n._refresh_text()
        return n

    # -- cached canonical fragments ------------------------------------

    def _refresh(self) -> None:
        name = f"{self.prefix}:{self.local}" if self.prefix else self.local
        self._cname = name
        parts = [f"<{name}"]
        for a in sorted(self.attrs, key=lambda a: (a.uri, a.local)):
            parts.append(f' {a.name}="{_escape_attr(a.value)}"')
        parts.append(">")
        self._copen = "".join(parts)
        self._cclose = f"</{name}>"
        used = {}
        if self.uri or self.prefix:
            used[self.prefix] = self.uri
        for a in self.attrs:
            if a.prefix:
                used[a.prefix] = a.uri
        self._ns_used = tuple(sorted(used.items()))

    def _refresh_text(self) -> None:
        collapsed = " ".join(self.text.split())
        self._ctext = _escape_text(collapsed) if collapsed else None

    # -- accessors -----------------------------------------------------

    @property
    def qname(self) -> tuple[str, str]:
        return (self.uri, self.local)

    @property
    def tag(self) -> str:
        return self._cname

    def get_attribute(self, local: str, uri: str = "") -> Optional[str]:
        for a in self.attrs:
            if a.local == local and a.uri == uri:
                return a.value
        return None

    def element_children(self) -> list["XmlNode"]:
        return [c for c in self.children if c.kind == "element"]

    def iter_elements(self) -> Iterator["XmlNode"]:
        """All element descendants-or-self in document order."""
        yield self
        for c in self.children:
            if c.kind == "element":
                yield from c.iter_elements()

    def text_content(self) -> str:
        out = []
        for c in self.children:
            if c.kind == "text":
                out.append(c.text)
            else:
                out.append(c.text_content())
        return "".join(out)

    def ancestors(self) -> Iterator["XmlNode"]:
        n = self.parent
        while n is not None:
            yield n
            n = n.parent

    def role(self) -> Optional[str]:
        from .namespaces import SOAP_ENV
        return self.get_attribute("role", SOAP_ENV)

    # -- mutators (keep caches and parent links coherent) ---------------

    def _invalidate_up(self) -> None:
        n: Optional[XmlNode] = self
        while n is not None:
            if n.kind == "element":
                n._cstate = None
                n._csub = None
            n = n.parent

    def set_attribute(self, local: str, value: str, uri: str = "",
                      prefix: str = "") -> None:
        for a in self.attrs:
            if a.local == local and a.uri == uri:
                a.value = value
                self._refresh()
                self._invalidate_up()
                return
        self.attrs.append(Attr(prefix, local, uri, value))
        self._refresh()
        self._invalidate_up()

    def remove_attribute(self, local: str, uri: str = "") -> None:
        self.attrs = [a for a in self.attrs
                      if not (a.local == local and a.uri == uri)]
        self._refresh()
        self._invalidate_up()

    def set_text(self, text: str) -> None:
        assert self.kind == "text"
        self.text = text
        self._refresh_text()
        self._invalidate_up()

    def append_child(self, child: "XmlNode") -> None:
        self.insert_child(len(self.children), child)

    def insert_child(self, index: int, child: "XmlNode") -> None:
        if child.parent is not None:
            child.parent.remove_child(child)
        child.parent = self
        self.children.insert(index, child)
        self._invalidate_up()

    def remove_child(self, child: "XmlNode") -> None:
        self.children.remove(child)
        child.parent = None
        self._invalidate_up()

    def set_child_order(self, order: list["XmlNode"]) -> None:
        """Reorder children; ``order`` must be a permutation of them."""
        if sorted(id(c) for c in order) != sorted(id(c) for c in self.children):
            raise ValueError("not a permutation of current children")
        self.children = list(order)
        self._invalidate_up()

    def declare_namespace(self, prefix: str, uri: str) -> None:
        # nsdecls affect serialize() only; canonical output derives its
        # own declarations, so the canonical caches stay valid.
        if (prefix, uri) not in self.nsdecls:
            self.nsdecls.append((prefix, uri))

    def clone(self) -> "XmlNode":
        """Deep copy with fresh node ids."""
        n = XmlNode()
        n.kind = self.kind
        if self.kind == "text":
            n.text = self.text
            n._refresh_text()
            return n
        n.prefix, n.local, n.uri = self.prefix, self.local, self.uri
        n.attrs = [Attr(a.prefix, a.local, a.uri, a.value) for a in self.attrs]
        n.nsdecls = list(self.nsdecls)
        n._refresh()
        # canonical caches describe content only, so the copy keeps them
        n._cstate = self._cstate
        n._csub = dict(self._csub) if self._csub else None
        for c in self.children:
            cc = c.clone()
            cc.parent = n
            n.children.append(cc)
        return n

    def __repr__(self) -> str:
        if self.kind == "text":
            return f"<text {self.text[:20]!r}>"
        return f"<element {self._cname} id={self.node_id}>"


@dataclass
class XmlDocument:
    root: XmlNode
    declared_namespaces: dict[str, str] = field(default_factory=dict)

    def contains(self, node: XmlNode) -> bool:
        n = node
        while n.parent is not None:
            n = n.parent
        return n is self.root

    def find_node(self, node_id: int) -> Optional[XmlNode]:
        for el in self.root.iter_elements():
            if el.node_id == node_id:
                return el
            for c in el.children:
                if c.node_id == node_id:
                    return c
        return None

    def copy(self) -> "XmlDocument":
        return XmlDocument(self.root.clone(), dict(self.declared_namespaces))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9._-]*(?::[A-Za-z_][A-Za-z0-9._-]*)?")
_ENTITY_RE = re.compile(r"&(#x[0-9a-fA-F]+|#[0-9]+|[A-Za-z]+);")
_BUILTIN_ENTITIES = {"amp": "&", "lt": "<", "gt": ">", "quot": '"', "apos": "'"}


def _decode_entities(s: str, pos: int) -> str:
    if "&" not in s:
        return s
    out = []
    i = 0
    while True:
        amp = s.find("&", i)
        if amp < 0:
            out.append(s[i:])
            return "".join(out)
        out.append(s[i:amp])
        m = _ENTITY_RE.match(s, amp)
        if not m:
            raise MalformedXml(pos + amp, "bare '&' or unterminated entity")
        body = m.group(1)
        if body.startswith("#x"):
            out.append(chr(int(body[2:], 16)))
        elif body.startswith("#"):
            out.append(chr(int(body[1:])))
        elif body in _BUILTIN_ENTITIES:
            out.append(_BUILTIN_ENTITIES[body])
        else:
            raise MalformedXml(pos + amp, f"unknown entity &{body};")
        i = m.end()


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.n = len(text)

    def error(self, reason: str, pos: Optional[int] = None) -> MalformedXml:
        return MalformedXml(self.pos if pos is None else pos, reason)

    def parse(self) -> XmlDocument:
        self._skip_prolog()
        root, all_ns = self._parse_element({"xml": XML_NS}, {})
        # trailing content
        rest = self.text[self.pos:]
        if rest.strip():
            raise self.error("content after document root")
        return XmlDocument(root, all_ns)

    def _skip_prolog(self) -> None:
        t = self.text
        # BOM tolerated on read
        if t.startswith("﻿"):
            self.pos = 1
        self._skip_ws()
        if t.startswith("<?xml", self.pos):
            end = t.find("?>", self.pos)
            if end < 0:
                raise self.error("unterminated XML declaration")
            self.pos = end + 2
        self._skip_ws()
        if not t.startswith("<", self.pos):
            raise self.error("expected element start")
        if t.startswith("<!", self.pos) or t.startswith("<?", self.pos):
            raise self.error("DTDs, comments and processing instructions are not supported")

    def _skip_ws(self) -> None:
        t, n = self.text, self.n
        p = self.pos
        while p < n and t[p] in " \t\r\n":
            p += 1
        self.pos = p

    def _parse_element(self, scope: dict[str, str],
                       all_ns: dict[str, str]) -> tuple[XmlNode, dict[str, str]]:
        t = self.text
        start = self.pos
        assert t[start] == "<"
        self.pos += 1
        m = _NAME_RE.match(t, self.pos)
        if not m:
            raise self.error("invalid element name")
        raw_name = m.group(0)
        self.pos = m.end()

        raw_attrs: list[tuple[str, str, int]] = []
        nsdecls: list[tuple[str, str]] = []
        self_closing = False
        while True:
            self._skip_ws()
            if self.pos >= self.n:
                raise self.error("unterminated start tag", start)
            ch = t[self.pos]
            if ch == ">":
                self.pos += 1
                break
            if ch == "/":
                if not t.startswith("/>", self.pos):
                    raise self.error("expected '/>'")
                self.pos += 2
                self_closing = True
                break
            m = _NAME_RE.match(t, self.pos)
            if not m:
                raise self.error("invalid attribute name")
            aname = m.group(0)
            apos = self.pos
            self.pos = m.end()
            self._skip_ws()
            if not t.startswith("=", self.pos):
                raise self.error(f"attribute {aname} missing '='")
            self.pos += 1
            self._skip_ws()
            if self.pos >= self.n or t[self.pos] not in "\"'":
                raise self.error(f"attribute {aname} value must be quoted")
            quote = t[self.pos]
            end = t.find(quote, self.pos + 1)
            if end < 0:
                raise self.error(f"unterminated value for attribute {aname}")
            raw_value = t[self.pos + 1:end]
            if "<" in raw_value:
                raise self.error(f"'<' in value of attribute {aname}", apos)
            value = _decode_entities(raw_value, self.pos + 1)
            self.pos = end + 1
            if aname == "xmlns":
                nsdecls.append(("", value))
            elif aname.startswith("xmlns:"):
                nsdecls.append((aname[6:], value))
            else:
                raw_attrs.append((aname, value, apos))

        # namespace scope for this element
        if nsdecls:
            scope = dict(scope)
            for p, u in nsdecls:
                scope[p] = u
                all_ns.setdefault(p, u)

        node = XmlNode()
        node.nsdecls = nsdecls
        if ":" in raw_name:
            pfx, local = raw_name.split(":", 1)
            if pfx not in scope:
                raise self.error(f"undeclared namespace prefix '{pfx}'", start)
            node.prefix, node.local, node.uri = pfx, local, scope[pfx]
        else:
            node.prefix, node.local = "", raw_name
            node.uri = scope.get("", "")

        seen: set[tuple[str, str]] = set()
        for aname, value, apos in raw_attrs:
            if ":" in aname:
                pfx, local = aname.split(":", 1)
                if pfx not in scope:
                    raise self.error(f"undeclared namespace prefix '{pfx}'", apos)
                uri = scope[pfx]
            else:
                pfx, local, uri = "", aname, ""
            if (uri, local) in seen:
                raise self.error(f"duplicate attribute {aname}", apos)
            seen.add((uri, local))
            node.attrs.append(Attr(pfx, local, uri, value))
        node._refresh()

        if self_closing:
            return node, all_ns

        # children
        while True:
            if self.pos >= self.n:
                raise self.error(f"unclosed element <{raw_name}>", start)
            lt = t.find("<", self.pos)
            if lt < 0:
                raise self.error(f"unclosed element <{raw_name}>", start)
            if lt > self.pos:
                raw_text = t[self.pos:lt]
                child = XmlNode.text_node(_decode_entities(raw_text, self.pos))
                child.parent = node
                node.children.append(child)
                self.pos = lt
            if t.startswith("</", self.pos):
                close_pos = self.pos
                self.pos += 2
                m = _NAME_RE.match(t, self.pos)
                if not m or m.group(0) != raw_name:
                    got = m.group(0) if m else "?"
                    raise self.error(
                        f"mismatched end tag </{got}> for <{raw_name}>", close_pos)
                self.pos = m.end()
                self._skip_ws()
                if not t.startswith(">", self.pos):
                    raise self.error("expected '>' in end tag")
                self.pos += 1
                return node, all_ns
            if t.startswith("<!", self.pos) or t.startswith("<?", self.pos):
                raise self.error(
                    "DTDs, comments and processing instructions are not supported")
            child, all_ns = self._parse_element(scope, all_ns)
            child.parent = node
            node.children.append(child)


def parse(data: bytes | str) -> XmlDocument:
    """Parse UTF-8 XML into an XmlDocument.

    Raises MalformedXml on unbalanced tags, undeclared prefixes,
    duplicate attributes, or constructs outside the supported subset.
    """
    if isinstance(data, bytes):
        if data.startswith(b"\xef\xbb\xbf"):
            data = data[3:]
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedXml(e.start, "invalid UTF-8") from None
    else:
        text = data
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _serialize_node(node: XmlNode, out: list[str]) -> None:
    if node.kind == "text":
        out.append(_escape_text(node.text))
        return
    out.append(f"<{node._cname}")
    for p, u in node.nsdecls:
        name = f"xmlns:{p}" if p else "xmlns"
        out.append(f' {name}="{_escape_attr(u)}"')
    for a in node.attrs:
        out.append(f' {a.name}="{_escape_attr(a.value)}"')
    out.append(">")
    for c in node.children:
        _serialize_node(c, out)
    out.append(f"</{node._cname}>")


def serialize(doc: XmlDocument) -> bytes:
    """Emit the document as UTF-8.

    Attributes keep their stored order and empty elements are written
    as a start/end tag pair, so output is byte-stable across
    parse/serialize round trips.
    """
    out: list[str] = []
    _serialize_node(doc.root, out)
    return "".join(out).encode("utf-8")


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------

_SIGNATURE_QNAME = (DS, "Signature")
_CSUB_CAP = 4  # distinct entry states cached per node


def _render_canonical(node: XmlNode, excluded, out: list[str],
                      emitted: dict[str, str]) -> Optional[dict[str, str]]:
    """Append the canonical text of an element subtree to ``out``.

    Returns the prefix→uri map the subtree uses, or None when the
    rendering is not cacheable (a signature element inside, an excluded
    node inside, or a prefix bound to two different URIs).

    The rendering of a subtree depends on the surrounding walk only
    through which of its prefixes are already emitted on entry, so the
    rendered string is cached keyed on exactly that; subtrees containing
    a ds:Signature are never cached so that signature exclusion always
    re-walks down to the excluded node.
    """
    state = node._cstate
    if state is not None:
        key = tuple(emitted.get(p) == u for p, u in state)
        cached = node._csub.get(key)
        if cached is not None:
            out.append(cached)
            emitted.update(state)
            return dict(state)
    entry_emitted = dict(emitted)

    buf: list[str] = []
    used: dict[str, str] = {}
    cacheable = True
    fresh = None
    for p, u in node._ns_used:
        used[p] = u
        if emitted.get(p) != u:
            if fresh is None:
                fresh = []
            fresh.append((p, u))
            emitted[p] = u
    if fresh is None:
        buf.append(node._copen)
    else:
        open_tag = node._copen
        decls = "".join(
            f' xmlns:{p}="{_escape_attr(u)}"' if p
            else f' xmlns="{_escape_attr(u)}"'
            for p, u in fresh
        )
        cut = len(node._cname) + 1
        buf.append(open_tag[:cut] + decls + open_tag[cut:])

    for c in node.children:
        if c.kind == "text":
            if c._ctext is not None:
                buf.append(c._ctext)
            continue
        if excluded and c.node_id in excluded:
            cacheable = False
            continue
        child_used = _render_canonical(c, excluded, buf, emitted)
        if child_used is None or c.qname == _SIGNATURE_QNAME:
            cacheable = False
        else:
            for p, u in child_used.items():
                if used.get(p, u) != u:
                    cacheable = False
                used[p] = u
    buf.append(node._cclose)

    rendered = "".join(buf)
    out.append(rendered)
    if not cacheable:
        return None
    state = tuple(sorted(used.items()))
    key = tuple(entry_emitted.get(p) == u for p, u in state)
    if node._cstate != state or node._csub is None:
        node._cstate = state
        node._csub = {}
    elif len(node._csub) >= _CSUB_CAP:
        node._csub.clear()
    node._csub[key] = rendered
    return used


def canonicalize(node: XmlNode, doc: Optional[XmlDocument] = None,
                 excluded: Optional[set[int]] = None) -> bytes:
    """Deterministic byte form of a subtree, omitting ``excluded`` node ids.

    Exclusion is meant for enveloped-signature subtrees (ds:Signature
    elements); those are exactly the subtrees the cache never covers.
    """
    if doc is not None and not doc.contains(node):
        raise NodeNotInDocument(f"node {node.node_id} not in document")
    excluded = excluded or ()
    if node.kind == "text":
        return (node._ctext or "").encode("utf-8")
    if excluded and node.node_id in excluded:
        return b""
    out: list[str] = []
    _render_canonical(node, excluded, out, {"xml": XML_NS})
    return "".join(out).encode("utf-8")


# ---------------------------------------------------------------------------
# Lookup
# ---------------------------------------------------------------------------

def find_by_id(doc: XmlDocument, id: str) -> Optional[XmlNode]:
    """First element in document order whose wsu:Id equals ``id``.

    The whole tree is searched, header included; first match wins.  This
    is exactly the lookup a wrapping attack relies on.
    """
    for el in doc.root.iter_elements():
        for a in el.attrs:
            if a.local == "Id" and a.uri == WSU and a.value == id:
                return el
    return None


def count_descendants(node: XmlNode) -> int:
    """Number of element descendants of ``node`` (itself excluded)."""
    total = 0
    for c in node.children:
        if c.kind == "element":
            total += 1 + count_descendants(c)
    return total


# ---------------------------------------------------------------------------
# Restricted absolute paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathStep:
    uri: str
    local: str
    # predicate: None, ("attr", uri, local, value) or ("role", name)
    predicate: Optional[tuple] = None


@dataclass(frozen=True)
class AbsolutePath:
    """Absolute element path from the document root.

    Supports one optional predicate per step: attribute equality
    ``[@pfx:local="value"]`` or role matching ``[role(name)]`` (suffix
    comparison on soap:role).
    """

    steps: tuple[PathStep, ...]
    text: str = ""

    def __post_init__(self):
        if not self.steps:
            raise PathSyntaxError("empty path")

    @classmethod
    def parse(cls, text: str,
              nsmap: Optional[dict[str, str]] = None) -> "AbsolutePath":
        prefixes = dict(WELL_KNOWN_PREFIXES)
        if nsmap:
            prefixes.update(nsmap)
        if not text.startswith("/"):
            raise PathSyntaxError(f"path must be absolute: {text!r}")
        steps = []
        for part in text[1:].split("/"):
            if not part:
                raise PathSyntaxError(f"empty step in {text!r}")
            m = re.fullmatch(
                r"(?:([A-Za-z_][\w.-]*):)?([A-Za-z_][\w.-]*)"
                r"(?:\[(.+)\])?", part)
            if not m:
                raise PathSyntaxError(f"bad step {part!r}")
            pfx, local, pred_text = m.groups()
            uri = ""
            if pfx:
                if pfx not in prefixes:
                    raise PathSyntaxError(f"unknown prefix {pfx!r} in {text!r}")
                uri = prefixes[pfx]
            predicate = None
            if pred_text:
                pm = re.fullmatch(
                    r"@(?:([A-Za-z_][\w.-]*):)?([A-Za-z_][\w.-]*)="
                    r"[\"'](.*)[\"']", pred_text)
                rm = re.fullmatch(r"role\(([\w.-]+)\)", pred_text)
                if pm:
                    apfx, alocal, avalue = pm.groups()
                    auri = ""
                    if apfx:
                        if apfx not in prefixes:
                            raise PathSyntaxError(
                                f"unknown prefix {apfx!r} in {text!r}")
                        auri = prefixes[apfx]
                    predicate = ("attr", auri, alocal, avalue)
                elif rm:
                    predicate = ("role", rm.group(1))
                else:
                    raise PathSyntaxError(f"bad predicate {pred_text!r}")
            steps.append(PathStep(uri, local, predicate))
        return cls(tuple(steps), text)


def _step_matches(step: PathStep, node: XmlNode) -> bool:
    if node.local != step.local or node.uri != step.uri:
        return False
    pred = step.predicate
    if pred is None:
        return True
    if pred[0] == "attr":
        _, uri, local, value = pred
        return node.get_attribute(local, uri) == value
    # role predicate: suffix comparison on soap:role
    role = node.role()
    return role is not None and role.endswith("/" + pred[1])


def evaluate_path(doc: XmlDocument, path: AbsolutePath) -> list[XmlNode]:
    """All elements whose ancestor chain matches the path, document order.

    Naive evaluation: every element in the document is tested by
    rebuilding its ancestor chain from parent links and comparing it
    step by step.  A relocated element therefore stops matching its
    original path, and lookup cost scales with document size.
    """
    steps = path.steps
    depth = len(steps)
    out: list[XmlNode] = []
    for node in doc.root.iter_elements():
        chain = [node]
        p = node.parent
        while p is not None:
            chain.append(p)
            p = p.parent
        chain.reverse()
        if len(chain) != depth:
            continue
        for step, el in zip(steps, chain):
            if not _step_matches(step, el):
                break
        else:
            out.append(node)
    return out
