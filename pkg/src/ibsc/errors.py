"""Exception hierarchy.

Two families matter to callers: ``ValidationError`` (bad inputs or
configuration, CLI exit 1) and ``NumericError`` (degenerate data or solver
failures, CLI exit 2).
"""


class IBSCError(Exception):
    pass


class ValidationError(IBSCError, ValueError):
    pass


class ParseError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class EmptyClassError(ValidationError):
    pass


class SelfPairError(ValidationError):
    pass


class InfeasibleAssignmentError(ValidationError):
    pass


class NumericError(IBSCError, ArithmeticError):
    pass


class DegenerateError(NumericError):
    pass


class DegenerateLabelsError(DegenerateError):
    pass


class UncoverableAttributeError(DegenerateError):
    """No seen class carries the attribute value an unseen class needs."""

    def __init__(self, unseen_class, attr_index, target_value):
        self.unseen_class = unseen_class
        self.attr_index = attr_index
        self.target_value = target_value
        super().__init__(
            f"attribute {attr_index}={target_value} of class {unseen_class} "
            "is carried by no seen class"
        )
