"""Command line front end.

Exit codes:

* 0 -- success (valid signature / trends pass / command completed)
* 1 -- clean negative result (invalid signature, trend check failed)
* 2 -- usage error or malformed input document
* 3 -- a reference target could not be found
* 4 -- the document carries no signature where one is required
* 5 -- an attack precondition failed
* 6 -- not enough data to evaluate trends
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

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
from .bench import (
    BenchConfig,
    InsufficientData,
    check_trends,
    format_trend_report,
    run_benchmark,
    write_plot_data,
    write_records_csv,
)
from .harness import attack_outcome, check_receiver_policy, defense_matrix
from .soap_model import SoapEnvelope
from .xml_core import MalformedXml, XmlNode, parse, serialize
from .xmlsig import (
    NoSignature,
    Strategy,
    TargetNotFound,
    TrustStore,
    UnknownKey,
    generate_keypair,
    sign,
    verify,
)

EX_OK = 0
EX_NEGATIVE = 1
EX_USAGE = 2
EX_NO_TARGET = 3
EX_NO_SIGNATURE = 4
EX_ATTACK = 5
EX_INSUFFICIENT = 6

_ATTACK_FUNCS = {
    AttackKind.SIMPLE_ANCESTRY: simple_ancestry,
    AttackKind.OPTIONAL_ELEMENT: optional_element,
    AttackKind.SIBLING_VALUE: sibling_value,
    AttackKind.SIBLING_ORDER: sibling_order,
    AttackKind.COUNT_PRESERVING_SIMPLE: count_preserving_simple,
}


def fixtures_dir() -> Path:
    override = os.environ.get("SOAPGUARD_FIXTURES")
    if override:
        return Path(override)
    return Path(__file__).parent / "fixtures"


def _load_envelope(path: str) -> SoapEnvelope:
    if path == "-":
        data = sys.stdin.buffer.read()
    else:
        p = Path(path)
        if not p.exists():
            candidate = fixtures_dir() / path
            if candidate.exists():
                p = candidate
        data = p.read_bytes()
    return SoapEnvelope(parse(data))


def _write_envelope(env: SoapEnvelope, out: str | None) -> None:
    data = serialize(env.doc)
    if out and out != "-":
        Path(out).write_bytes(data + b"\n")
    else:
        sys.stdout.buffer.write(data + b"\n")


def _key(args) -> "KeyPair":
    return generate_keypair(args.key_seed)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_sign(args) -> int:
    env = _load_envelope(args.input)
    strategy = Strategy(args.strategy)
    target = None
    if strategy in (Strategy.ID, Strategy.XPATH):
        if not args.target:
            print("sign: --target is required for id/xpath strategies",
                  file=sys.stderr)
            return EX_USAGE
        target = args.target if len(args.target) > 1 else args.target[0]
    elif strategy == Strategy.INLINE_ACCOUNT:
        if args.target:
            target = args.target[0]
    signed = sign(env, strategy, target, _key(args))
    _write_envelope(signed, args.out)
    return EX_OK


def cmd_verify(args) -> int:
    env = _load_envelope(args.input)
    key = _key(args)
    trust = TrustStore()
    trust.add(key)
    report = verify(env, key, trust)
    # Resolution-vs-processing mismatch warning: a valid signature whose
    # references resolve to nodes the receiver never processes is the
    # wrapping-attack signature.
    from .harness import AmbiguousBody, application_view
    try:
        view = application_view(env)
        processed = {view.processed_body.node_id}
        processed.update(n.node_id for n in view.processed_headers)
        for nid in report.resolved_nodes():
            if nid not in processed and nid != env.root.node_id:
                print("warning: a signed reference resolved to content the "
                      "receiver does not process (possible wrapping)",
                      file=sys.stderr)
                break
    except AmbiguousBody:
        print("warning: ambiguous Body placement", file=sys.stderr)
    if args.format == "machine":
        out = {
            "valid": report.valid,
            "signatures": [
                {
                    "strategy": sc.strategy.value,
                    "signed_info_ok": sc.signed_info_ok,
                    "valid": sc.valid,
                    "references": [
                        {"target": rc.target, "digest_ok": rc.digest_ok,
                         "reason": rc.reason}
                        for rc in sc.references
                    ],
                }
                for sc in report.signatures
            ],
        }
        print(json.dumps(out, indent=2))
    else:
        for sc in report.signatures:
            print(f"signature ({sc.strategy.value}): "
                  f"{'valid' if sc.valid else 'INVALID'}")
            for rc in sc.references:
                status = "ok" if rc.digest_ok else f"FAILED ({rc.reason})"
                print(f"  reference {rc.target}: {status}")
        print(f"overall: {'valid' if report.valid else 'INVALID'}")
    return EX_OK if report.valid else EX_NEGATIVE


def cmd_attack(args) -> int:
    env = _load_envelope(args.input)
    kind = AttackKind(args.attack)
    if kind == AttackKind.SIMPLE_ANCESTRY or kind == AttackKind.COUNT_PRESERVING_SIMPLE:
        payload = XmlNode.element("getQuote")
        payload.set_attribute("Symbol", args.payload_symbol)
        result = _ATTACK_FUNCS[kind](env, payload, args.new_id)
    elif kind == AttackKind.OPTIONAL_ELEMENT:
        result = optional_element(env, (ns.WSA, "ReplyTo"))
    elif kind == AttackKind.SIBLING_VALUE:
        result = sibling_value(env)
    else:
        perm = [int(x) for x in args.permutation.split(",")] \
            if args.permutation else None
        if perm is None:
            from .harness import _instruction_ids
            perm = list(range(len(_instruction_ids(env))))[::-1]
        result = sibling_order(env, perm)
    _write_envelope(result.doc, args.out)
    print(f"# intent: {result.intent}", file=sys.stderr)
    return EX_OK


def cmd_matrix(args) -> int:
    base = _load_envelope(args.base)
    key = _key(args)
    matrix = defense_matrix(list(Strategy), list(AttackKind), base, key)
    records = matrix.as_records()
    if args.format == "machine":
        print(json.dumps(records, indent=2))
    else:
        attacks = [a.value for a in AttackKind]
        width = max(len(a) for a in attacks) + 4
        swidth = max(len(s.value) for s in Strategy) + 2
        print("strategy".ljust(swidth)
              + "".join(a.ljust(width + 12) for a in attacks))
        for s in Strategy:
            row = s.value.ljust(swidth)
            for a in AttackKind:
                row += matrix.verdicts[(s, a)].ljust(width + 12)
            print(row.rstrip())
    golden_path = Path(args.golden) if args.golden else fixtures_dir() / "matrix_golden.json"
    expected = json.loads(golden_path.read_text())
    exp_map = {(r["strategy"], r["attack"]): r["verdict"] for r in expected}
    got_map = {(r["strategy"], r["attack"]): r["verdict"] for r in records}
    diffs = []
    for cell in sorted(set(exp_map) | set(got_map)):
        want, got = exp_map.get(cell), got_map.get(cell)
        if want != got:
            diffs.append(f"{cell[0]} x {cell[1]}: expected {want}, got {got}")
    if diffs:
        for d in diffs:
            print("diff: " + d, file=sys.stderr)
        return EX_NEGATIVE
    return EX_OK


def cmd_policy(args) -> int:
    env = _load_envelope(args.input)
    key = _key(args)
    trust = TrustStore()
    trust.add(key)
    report = check_receiver_policy(env, trust)
    checks = [
        ("signature inside ultimateReceiver Security",
         report.signature_in_ultimate_receiver_security),
        ("Body referenced by absolute path",
         report.body_referenced_by_absolute_path),
        ("Timestamp/ReplyTo path-referenced when present",
         report.timestamp_replyto_path_referenced),
        ("signing key is trusted", report.key_trusted),
    ]
    if args.format == "machine":
        print(json.dumps({name: ok for name, ok in checks}
                         | {"overall": report.overall}, indent=2))
    else:
        for name, ok in checks:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        print(f"overall: {'PASS' if report.overall else 'FAIL'}")
    return EX_OK if report.overall else EX_NEGATIVE


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        sizes=[int(s) for s in args.sizes.split(",")] if args.sizes
        else BenchConfig.__dataclass_fields__["sizes"].default,
        repetitions=args.repetitions,
        seed=args.seed,
    )
    records = run_benchmark(cfg)
    if args.csv:
        write_records_csv(records, args.csv)
    if args.plot_data:
        write_plot_data(records, args.plot_data)
    report = check_trends(records)
    if args.format == "machine":
        print(json.dumps({
            "evaluated_size": report.evaluated_size,
            "claims": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                       for c in report.claims],
            "monotonicity_ok": report.monotonicity_ok,
            "all_passed": report.all_passed,
        }, indent=2))
    else:
        print(format_trend_report(report), end="")
    return EX_OK if report.all_passed else EX_NEGATIVE


def cmd_demo(args) -> int:
    """The body-swap story end to end: id referencing falls, whole-envelope
    signing catches the same manipulation."""
    from .harness import application_view
    base = _load_envelope(str(fixtures_dir() / "quote_request.xml"))
    key = _key(args)
    body_id = base.body().get_attribute("Id", ns.WSU)
    payload = XmlNode.element("getQuote")
    payload.set_attribute("Symbol", "MBI")

    print("1. sign the Body by its wsu:Id reference")
    signed = sign(base, Strategy.ID, body_id, key)
    print("   verifies:", verify(signed, key).valid)

    print("2. wrap the signed Body into the header, inject a new Body")
    attacked = simple_ancestry(signed, payload.clone(), "newCMPE")
    report = verify(attacked.doc, key)
    print("   signature still verifies:", report.valid)
    view = application_view(attacked.doc)
    for c in view.processed_body.element_children():
        print("   receiver processes:", c.tag,
              "Symbol=" + (c.get_attribute("Symbol") or "?"))
    resolved = set(report.resolved_nodes())
    processed = {view.processed_body.node_id}
    processed.update(n.node_id for n in view.processed_headers)
    print("   resolved-vs-processed mismatch:",
          not resolved.issubset(processed))

    print("3. re-sign the same message over the whole envelope")
    sesoap = sign(base, Strategy.SESOAP, None, key)
    print("   verifies:", verify(sesoap, key).valid)

    print("4. repeat the body swap against the whole-envelope signature")
    attacked2 = simple_ancestry(sesoap, payload.clone(), "newCMPE")
    print("   signature verifies:", verify(attacked2.doc, key).valid)
    outcome = attack_outcome(Strategy.SESOAP, AttackKind.SIMPLE_ANCESTRY,
                             base, key)
    print("   attack succeeded:", outcome.attack_succeeded)
    return EX_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="soapguard",
        description="XML signature strategies, wrapping attacks and defenses "
                    "for SOAP messages")
    p.add_argument("--key-seed", default="demo",
                   help="deterministic key seed (default: demo)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sign", help="sign an envelope")
    sp.add_argument("input", help="envelope file, fixture name, or - for stdin")
    sp.add_argument("--strategy", required=True,
                    choices=[s.value for s in Strategy])
    sp.add_argument("--target", action="append", default=[],
                    help="wsu:Id value or absolute path (repeatable)")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_sign)

    vp = sub.add_parser("verify", help="verify an envelope's signatures")
    vp.add_argument("input")
    vp.add_argument("--format", choices=["table", "machine"], default="table")
    vp.set_defaults(func=cmd_verify)

    ap = sub.add_parser("attack", help="apply a wrapping attack")
    ap.add_argument("input")
    ap.add_argument("--attack", required=True,
                    choices=[a.value for a in AttackKind])
    ap.add_argument("--new-id", default="newCMPE")
    ap.add_argument("--payload-symbol", default="MBI")
    ap.add_argument("--permutation", default=None,
                    help="comma-separated indices for sibling-order")
    ap.add_argument("--out", default="-")
    ap.set_defaults(func=cmd_attack)

    mp = sub.add_parser("matrix", help="strategy x attack defense matrix")
    mp.add_argument("--base", default="matrix_base.xml",
                    help="unsigned base envelope (default: bundled fixture)")
    mp.add_argument("--golden", default=None,
                    help="expected matrix (default: bundled golden)")
    mp.add_argument("--format", choices=["table", "machine"], default="table")
    mp.set_defaults(func=cmd_matrix)

    pp = sub.add_parser("policy", help="four-point receiver policy check")
    pp.add_argument("input")
    pp.add_argument("--format", choices=["table", "machine"], default="table")
    pp.set_defaults(func=cmd_policy)

    bp = sub.add_parser("bench", help="timing decomposition and trend check")
    bp.add_argument("--sizes", default=None,
                    help="comma-separated byte sizes")
    bp.add_argument("--repetitions", type=int, default=20)
    bp.add_argument("--seed", type=int, default=20130615)
    bp.add_argument("--csv", default=None, help="write per-cell records here")
    bp.add_argument("--plot-data", default=None)
    bp.add_argument("--format", choices=["table", "machine"], default="table")
    bp.set_defaults(func=cmd_bench)

    dp = sub.add_parser("demo", help="end-to-end wrapping attack walkthrough")
    dp.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EX_USAGE if e.code not in (0,) else 0
    try:
        return args.func(args)
    except MalformedXml as e:
        print(f"soapguard: malformed document: {e}", file=sys.stderr)
        return EX_USAGE
    except FileNotFoundError as e:
        print(f"soapguard: {e}", file=sys.stderr)
        return EX_USAGE
    except ValueError as e:
        print(f"soapguard: {e}", file=sys.stderr)
        return EX_USAGE
    except UnknownKey as e:
        print(f"soapguard: untrusted key: {e}", file=sys.stderr)
        return EX_NEGATIVE
    except TargetNotFound as e:
        print(f"soapguard: target not found: {e}", file=sys.stderr)
        return EX_NO_TARGET
    except NoSignature as e:
        print(f"soapguard: no signature: {e}", file=sys.stderr)
        return EX_NO_SIGNATURE
    except AttackError as e:
        print(f"soapguard: attack precondition failed: {e}", file=sys.stderr)
        return EX_ATTACK
    except InsufficientData as e:
        print(f"soapguard: insufficient data: {e}", file=sys.stderr)
        return EX_INSUFFICIENT


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
