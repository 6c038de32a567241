"""soapguard: XML signatures over SOAP messages, the wrapping attacks
that defeat them, and the defenses that do (or do not) catch them.

The package has four layers:

* :mod:`soapguard.xml_core` / :mod:`soapguard.soap_model` -- a small XML
  infoset with a simplified exclusive canonical form, plus the SOAP
  envelope skeleton.
* :mod:`soapguard.xmlsig` -- signing and verification under four
  reference strategies (id attribute, absolute path, whole envelope
  minus signature, inline structure accounting).
* :mod:`soapguard.attacks` / :mod:`soapguard.harness` -- the wrapping
  attacks as document transformations, a receiver model that judges
  whether an attack actually succeeded, the defense matrix, and the
  four-point receiver policy check.
* :mod:`soapguard.bench` -- timing decomposition of the signing
  pipeline across strategies and document sizes.
"""

from .attacks import (
    AttackError,
    AttackKind,
    AttackResult,
    count_preserving_simple,
    optional_element,
    sibling_order,
    sibling_value,
    simple_ancestry,
)
from .bench import (
    BenchConfig,
    BenchRecord,
    InsufficientData,
    TrendReport,
    check_trends,
    generate_corpus,
    run_benchmark,
)
from .harness import (
    AmbiguousBody,
    DefenseMatrix,
    NotApplicable,
    Outcome,
    PolicyReport,
    application_view,
    attack_outcome,
    check_receiver_policy,
    defense_matrix,
)
from .soap_model import (
    SoapEnvelope,
    StructureViolation,
    assign_id,
    build_envelope,
    ensure_security_header,
    validate_envelope,
)
from .xml_core import (
    AbsolutePath,
    MalformedXml,
    XmlDocument,
    XmlNode,
    canonicalize,
    count_descendants,
    evaluate_path,
    find_by_id,
    parse,
    serialize,
)
from .xmlsig import (
    KeyPair,
    NoSignature,
    SignatureError,
    SoapAccount,
    Strategy,
    TargetNotFound,
    TrustStore,
    VerificationReport,
    compute_soap_account,
    generate_keypair,
    sign,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "AbsolutePath", "AmbiguousBody", "AttackError", "AttackKind",
    "AttackResult", "BenchConfig", "BenchRecord", "DefenseMatrix",
    "InsufficientData", "KeyPair", "MalformedXml", "NoSignature",
    "NotApplicable", "Outcome", "PolicyReport", "SignatureError",
    "SoapAccount", "SoapEnvelope", "Strategy", "StructureViolation",
    "TargetNotFound", "TrendReport", "TrustStore", "VerificationReport",
    "XmlDocument", "XmlNode", "application_view", "assign_id",
    "attack_outcome", "build_envelope", "canonicalize",
    "check_receiver_policy", "check_trends", "compute_soap_account",
    "count_descendants", "count_preserving_simple", "defense_matrix",
    "ensure_security_header", "evaluate_path", "find_by_id",
    "generate_corpus", "generate_keypair", "optional_element", "parse",
    "run_benchmark", "serialize", "sibling_order", "sibling_value",
    "sign", "simple_ancestry", "validate_envelope", "verify",
]
