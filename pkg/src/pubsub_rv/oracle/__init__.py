from .incremental import PropertyMonitor, update
from .reference import brute_force_eval
from .semantics import atom_matches
from .session import OracleSession, PropertyFileError, PropertySpec, check_log, parse_property_file
from .syntax import (
    And,
    Atom,
    Forall,
    Implies,
    Not,
    Once,
    Or,
    Property,
    PropertySyntaxError,
    Var,
    parse_property,
    render,
)

__all__ = [
    "And",
    "Atom",
    "Forall",
    "Implies",
    "Not",
    "Once",
    "Or",
    "OracleSession",
    "Property",
    "PropertyFileError",
    "PropertyMonitor",
    "PropertySpec",
    "PropertySyntaxError",
    "Var",
    "atom_matches",
    "brute_force_eval",
    "check_log",
    "parse_property",
    "parse_property_file",
    "render",
    "update",
]
