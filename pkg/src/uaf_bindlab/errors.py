"""Exception hierarchy shared by every layer of the lab."""


class BindlabError(Exception):
    """Base class for all errors raised by uaf_bindlab."""


class ParseError(BindlabError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class SecrecyViolation(BindlabError):
    """A non-originating term reached the adversary. The scenario is broken."""


class NotDerivable(BindlabError):
    """The adversary tried to deliver a term it cannot build."""


class ProtocolReject(BindlabError):
    """An honest party refused a message. ``reason`` is a short stable name."""

    reason = "Rejected"


class CertificateRejected(ProtocolReject):
    reason = "CertificateRejected"


class AuthFailed(ProtocolReject):
    reason = "AuthFailed"


class SignatureInvalid(ProtocolReject):
    reason = "SignatureInvalid"


class ChallengeMismatch(ProtocolReject):
    reason = "ChallengeMismatch"


class BindingMismatch(ProtocolReject):
    reason = "BindingMismatch"


class MalformedMessage(ProtocolReject):
    reason = "MalformedMessage"


class IllegalBindingForVariant(BindlabError):
    pass


class UnsupportedVariant(BindlabError):
    pass


class InapplicableScenario(BindlabError):
    pass


class BoundsExceeded(BindlabError):
    pass


class MatrixMismatch(BindlabError):
    def __init__(self, diffs: list[tuple[str, str, str, str]]):
        self.diffs = diffs
        lines = [f"{model} / {column}: expected {want}, got {got}" for model, column, want, got in diffs]
        super().__init__("verdict matrix differs from the published table:\n" + "\n".join(lines))


def reject_for(reason: str, detail: str = "") -> ProtocolReject:
    """Rebuild a ProtocolReject from its stable reason name."""
    for cls in ProtocolReject.__subclasses__():
        if cls.reason == reason:
            return cls(detail or reason)
    return ProtocolReject(detail or reason)
