"""Exceptions raised by spanparse.

Every error derives from `SpanParseError` and from the builtin exception a
caller would naturally catch for it.
"""


class SpanParseError(Exception):
    """Base class of all spanparse errors."""


# treebank


class TreebankError(SpanParseError, ValueError):
    """Malformed bracketed input or invalid tree."""


class UnbalancedParens(TreebankError):
    def __init__(self, line: int, message: str = "unbalanced parentheses"):
        super().__init__(f"{message} (line {line})")
        self.line = line


class EmptyNode(TreebankError):
    def __init__(self, position: int, message: str = "empty node"):
        super().__init__(f"{message} at token {position}")
        self.position = position


class LeafWithoutTag(TreebankError):
    def __init__(self, position: int, word: str = ""):
        super().__init__(f"word {word!r} without POS tag at token {position}")
        self.position = position


class SeparatorInLabel(TreebankError):
    def __init__(self, label: str, sep: str):
        super().__init__(f"label {label!r} contains the unary separator {sep!r}")
        self.label = label


class MissingConstituent(TreebankError):
    """A tree with no internal node above its preterminal."""


class CountsExceedCorpus(TreebankError):
    pass


# tensor


class ShapeMismatch(SpanParseError, ValueError):
    pass


class NonScalarLoss(SpanParseError, ValueError):
    pass


# model


class SentenceTooLong(SpanParseError, ValueError):
    pass


class ExternalShapeMismatch(SpanParseError, ValueError):
    pass


class IndexOutOfRange(SpanParseError, IndexError):
    pass


class SpanOutOfRange(SpanParseError, IndexError):
    pass


class UnknownLabel(SpanParseError, KeyError):
    pass


class EmptyLabelVocab(SpanParseError, ValueError):
    pass


# evaluation


class LengthMismatch(SpanParseError, ValueError):
    pass


class TokenMismatch(SpanParseError, ValueError):
    def __init__(self, index: int, message: str = "token sequences differ"):
        super().__init__(f"{message} (sentence {index})")
        self.index = index


# training and persistence


class EmptyCorpus(SpanParseError, ValueError):
    pass


class DivergenceError(SpanParseError, ArithmeticError):
    pass


class VersionError(SpanParseError, ValueError):
    pass


class ConfigError(SpanParseError, ValueError):
    pass
