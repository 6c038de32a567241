"""Namespace URIs and well-known prefixes used throughout the package.

All URI constants live here so that signature construction, envelope
validation and path parsing agree bit-for-bit on the vocabulary.
"""

SOAP_ENV = "http://www.w3.org/2001/12/soap-envelope"
DS = "http://www.w3.org/2000/09/xmldsig#"
WSSE = (
    "http://docs.oasis-open.org/wss/2004/01/"
    "oasis-200401-wss-wssecurity-secext-1.0.xsd"
)
WSU = (
    "http://docs.oasis-open.org/wss/2004/01/"
    "oasis-200401-wss-wssecurity-utility-1.0.xsd"
)
WSA = "http://www.w3.org/2005/08/addressing"
XML_NS = "http://www.w3.org/XML/1998/namespace"

# Inline structure-accounting header (count-based integrity records).
ACCT = "urn:soapguard:soap-account"

# SOAP role values.  The suffix is what matters: role strings are compared
# by their trailing path segment (see is_role_none / is_role_ultimate).
ROLE_NONE = "http://www.w3.org/2003/05/soap-envelope/role/none"
ROLE_ULTIMATE_RECEIVER = "http://www.w3.org/2003/05/soap-envelope/role/ultimateReceiver"

# Algorithm identifiers embedded in signature XML.
ALG_C14N = "urn:soapguard:c14n-simplified"
ALG_SIGNATURE = "http://www.w3.org/2021/04/xmldsig-more#eddsa-ed25519"
ALG_DIGEST = "http://www.w3.org/2001/04/xmlenc#sha256"
TRANSFORM_EXCLUDE_SIGNATURE = "urn:soapguard:transform:exclude-signature"
TRANSFORM_XPATH = "urn:soapguard:transform:absolute-path"

# Prefixes assumed by path text (e.g. "/soap:Envelope/soap:Body") and by
# programmatically built elements.
WELL_KNOWN_PREFIXES = {
    "soap": SOAP_ENV,
    "ds": DS,
    "wsse": WSSE,
    "wsu": WSU,
    "wsa": WSA,
    "acct": ACCT,
}


def is_role_none(value: str) -> bool:
    """True when a soap:role attribute value designates the "none" role."""
    return value.endswith("/none")


def is_role_ultimate_receiver(value: str) -> bool:
    return value.endswith("/ultimateReceiver")
