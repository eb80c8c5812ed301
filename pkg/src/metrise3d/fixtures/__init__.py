"""Shipped connection fixtures in the CLI's JSON input format."""

import json
from importlib import resources


def _load(name):
    with resources.files(__package__).joinpath(name).open(
            "r", encoding="utf-8") as fh:
        return json.load(fh)


def example_document():
    """The worked-example connection (gamma, epsilon, base point)."""
    return _load("example.json")


def flat_document():
    return _load("flat.json")


def example_connection():
    from ..projective import ConnectionSpec

    doc = example_document()
    return ConnectionSpec(doc["gamma"], doc.get("epsilon"),
                          name=doc.get("name", ""))


def flat_connection():
    from ..projective import ConnectionSpec

    doc = flat_document()
    return ConnectionSpec(doc["gamma"], doc.get("epsilon"),
                          name=doc.get("name", ""))
