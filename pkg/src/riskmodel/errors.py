"""Exception hierarchy shared by the model engine, adapters and CLI."""

from __future__ import annotations


class RiskModelError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RiskModelError):
    """A document could not be parsed at all (syntax level)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class SchemaError(RiskModelError):
    """A document parsed but does not match the expected schema or version."""


class DanglingRefError(RiskModelError):
    """A reference does not resolve to any element in the model."""

    def __init__(self, ref: str, context: str = ""):
        detail = f" ({context})" if context else ""
        super().__init__(f"unresolved reference {ref!r}{detail}")
        self.ref = ref


class KindConflictError(RiskModelError):
    """An element id is already used by an element of a different kind."""

    def __init__(self, element_id: str, existing_kind: str, new_kind: str):
        super().__init__(
            f"id {element_id!r} already used by a {existing_kind}, cannot upsert a {new_kind}"
        )
        self.element_id = element_id
        self.existing_kind = existing_kind
        self.new_kind = new_kind


class RangeError(RiskModelError):
    """An ordinal level is outside the supported 0..4 range."""


class UnresolvedRefError(RiskModelError):
    """An analysis operation hit a reference that does not resolve."""

    def __init__(self, ref: str, context: str = ""):
        detail = f" ({context})" if context else ""
        super().__init__(f"unresolved reference {ref!r}{detail}")
        self.ref = ref


class ValidationGateError(RiskModelError):
    """An operation that requires a consistent model was given one with errors."""

    def __init__(self, findings):
        errors = [f for f in findings if f.severity.value == "error"]
        super().__init__(
            f"model has {len(errors)} validation error(s); first: "
            + (errors[0].rule_id if errors else "<none>")
        )
        self.findings = list(findings)


class RevisionMismatchError(RiskModelError):
    """A change set does not apply to the revision of the given base model."""


class TransportError(RiskModelError):
    """A remote endpoint could not be reached (retriable)."""

    def __init__(self, message: str, endpoint: str = "", element: str = ""):
        extra = " ".join(p for p in (endpoint, element) if p)
        super().__init__(f"{message}" + (f" [{extra}]" if extra else ""))
        self.endpoint = endpoint
        self.element = element


class ConflictError(RiskModelError):
    """The remote copy of an element is newer; refusing to overwrite."""

    def __init__(self, message: str, element: str = ""):
        super().__init__(message)
        self.element = element


class UnknownSuiteError(RiskModelError):
    """A test result row references a suite that was never exported."""

    def __init__(self, suite_id: str):
        super().__init__(f"unknown test suite {suite_id!r}")
        self.suite_id = suite_id
