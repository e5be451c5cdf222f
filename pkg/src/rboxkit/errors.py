"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """Raised when an input violates a documented domain contract.

    The CLI maps this to exit code 2 (input-validation error), so anything
    user-supplied (files, flags, box parameters) should raise this rather
    than a bare ValueError.
    """
