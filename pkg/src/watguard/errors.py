"""Exception hierarchy shared across the package."""


class WatGuardError(Exception):
    """Base class for all errors raised by this package."""


class LexError(WatGuardError):
    """Invalid token stream (unterminated string/comment, bad literal)."""

    def __init__(self, message, span=None):
        super().__init__(message)
        self.span = span


class ParseError(WatGuardError):
    """Text does not conform to the supported module grammar."""

    def __init__(self, message, span=None):
        super().__init__(message)
        self.span = span


class ClassificationError(WatGuardError):
    """Mnemonic outside the supported instruction subset."""


class StackPointerError(WatGuardError):
    """No usable stack-pointer global could be identified."""


class EmbedError(WatGuardError):
    """PRNG embedding failed (symbol collision or missing import)."""


class PassError(WatGuardError):
    """A hardening pass could not be applied."""


class LinkError(WatGuardError):
    """Module instantiation failed (unknown import, bad segment)."""


class InvokeError(WatGuardError):
    """Harness-level misuse of an instance (bad export, bad args)."""


class ReportError(WatGuardError):
    """Overhead accounting could not be computed."""


class CorpusError(WatGuardError):
    """Unknown or malformed corpus case."""
