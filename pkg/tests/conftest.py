import random
from pathlib import Path

import pytest

from soapguard import SoapEnvelope, build_envelope, generate_keypair
from soapguard.xml_core import XmlNode, parse

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "soapguard" / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def key():
    return generate_keypair("demo")


def load_fixture(name: str) -> SoapEnvelope:
    return SoapEnvelope(parse((FIXTURES / name).read_bytes()))


_WORDS = ("alpha", "beta", "gamma", "delta", "omega", "lambda", "sigma")


def random_envelope(rng: random.Random, max_children: int = 4) -> SoapEnvelope:
    """Small random but well-formed envelope; Body always carries wsu:Id."""

    def random_element(depth: int) -> XmlNode:
        el = XmlNode.element(rng.choice(_WORDS).capitalize())
        for _ in range(rng.randrange(3)):
            el.set_attribute(rng.choice(_WORDS), str(rng.randrange(1000)))
        if depth < 2:
            for _ in range(rng.randrange(max_children)):
                if rng.random() < 0.3:
                    el.append_child(XmlNode.text_node(
                        " ".join(rng.choices(_WORDS, k=rng.randrange(1, 4)))))
                else:
                    el.append_child(random_element(depth + 1))
        return el

    payload = random_element(0)
    headers = [random_element(1) for _ in range(rng.randrange(3))]
    env = build_envelope(payload, headers)
    env.body().set_attribute(
        "Id", "CMPE",
        "http://docs.oasis-open.org/wss/2004/01/"
        "oasis-200401-wss-wssecurity-utility-1.0.xsd", "wsu")
    return env
