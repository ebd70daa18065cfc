"""Exception types shared across the toolkit.

Service handlers map these onto HTTP status codes; everything else raises
them directly.
"""


class DidYouMeanError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


# --- DSL ---------------------------------------------------------------


class MalformedSurface(DidYouMeanError):
    """Surface text is not a well-bracketed s-expression."""

    code = "malformed_surface"


class UnknownSymbol(DidYouMeanError):
    code = "unknown_symbol"


class ArityViolation(DidYouMeanError):
    code = "arity_violation"


class EmptyProgram(DidYouMeanError):
    code = "empty_program"


class MalformedProgram(DidYouMeanError):
    """Content-token sequence does not form a grammar-valid tree."""

    code = "malformed_program"


class ExecutionFault(DidYouMeanError):
    """Runtime failure of an otherwise well-formed program (unsafe program)."""

    code = "execution_fault"


class GrammarEmpty(DidYouMeanError):
    code = "grammar_empty"


# --- model -------------------------------------------------------------


class EmptyCorpus(DidYouMeanError):
    code = "empty_corpus"


class TokenOutOfVocabulary(DidYouMeanError):
    code = "token_out_of_vocabulary"


class MalformedRecord(DidYouMeanError):
    """Interchange line violates the format's invariants."""

    code = "malformed_record"


# --- confidence --------------------------------------------------------


class EmptyDecode(DidYouMeanError):
    code = "empty_decode"


class EmptyInput(DidYouMeanError):
    code = "empty_input"


class BinUnderflow(DidYouMeanError):
    """A stratified-sampling bin has fewer items than required."""

    code = "bin_underflow"

    def __init__(self, bin_index, message=None):
        self.bin_index = bin_index
        super().__init__(message or f"bin {bin_index} has too few items")


# --- selective ---------------------------------------------------------


class DuplicateExample(DidYouMeanError):
    code = "duplicate_example"


class EmptyValidation(DidYouMeanError):
    code = "empty_validation"


class MissingGlossModel(DidYouMeanError):
    code = "missing_gloss_model"


# --- gloss -------------------------------------------------------------


class EmptyBeam(DidYouMeanError):
    """Beam search produced no terminated hypothesis."""

    code = "empty_beam"


# --- interaction service ------------------------------------------------


class ModelMissing(DidYouMeanError):
    code = "model_missing"


class DuplicateJudgment(DidYouMeanError):
    code = "duplicate_judgment"


class UnknownSession(DidYouMeanError):
    code = "unknown_session"


class UnknownItem(DidYouMeanError):
    code = "unknown_item"


class ItemClosed(DidYouMeanError):
    code = "item_closed"


class NotDecided(DidYouMeanError):
    code = "not_decided"


class SelectionIndexOutOfRange(DidYouMeanError):
    code = "index_out_of_range"


class EmptyRewrite(DidYouMeanError):
    code = "empty_rewrite"


class NothingToExport(DidYouMeanError):
    code = "nothing_to_export"
