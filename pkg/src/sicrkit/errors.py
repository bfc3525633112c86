"""Exception types shared across the toolkit."""


class SicrError(ValueError):
    """Domain error carrying a short machine-readable code.

    The code doubles as the message prefix, so ``str(err)`` always starts
    with e.g. ``"empty-series"``.
    """

    def __init__(self, code, detail=None):
        self.code = code
        self.detail = detail
        msg = code if not detail else f"{code}: {detail}"
        super().__init__(msg)


class SchemaMismatchError(SicrError):
    """A model and a panel disagree on their feature schema."""

    def __init__(self, detail=None):
        super().__init__("schema-mismatch", detail)
