"""Exception hierarchy shared by every layer.

Category drives the service's HTTP mapping and the CLI exit codes:
input errors exit 2, divergence 3, infeasible evaluations 4.
"""


class BagsideError(Exception):
    """Base for all domain errors."""

    category = "input"


class ValidationError(BagsideError):
    """Malformed or contract-violating input."""

    category = "input"


class InfeasibleError(BagsideError):
    """The requested evaluation cannot be carried out on this data."""

    category = "infeasible"


# corpus / file formats

class BadMagicError(ValidationError):
    """File does not start with the expected magic bytes."""


class TruncatedError(ValidationError):
    """Payload shorter than its header declares."""


class NonFiniteError(ValidationError):
    """NaN or Inf encountered where finite values are required."""


class InvalidMatrixError(ValidationError):
    """Embedding matrix violates its shape invariants."""


class MissingNullError(ValidationError):
    """Reserved id-0 name is absent or misplaced in a vocab file."""


class DuplicateNameError(ValidationError):
    """Vocab file repeats a name."""


class MalformedRecordError(ValidationError):
    """Bag record does not conform to the JSONL schema."""


class UnknownRelationError(ValidationError):
    """Relation name or id outside the vocab."""


class UnknownTypeError(ValidationError):
    """Entity type name or id outside the vocab."""


class UnknownAliasError(ValidationError):
    """Alias name or id outside the vocab."""


class EmptyBagError(ValidationError):
    """Bag carries no sentences."""


class BadEmbRowError(ValidationError):
    """Sentence references an embedding row that does not exist."""


# side information

class ZeroVectorError(ValidationError):
    """Cosine similarity is undefined for a zero-norm vector."""


class DimMismatchError(ValidationError):
    """Vector dimensions disagree."""


class BadAliasIdError(ValidationError):
    """Alias id outside the alias table."""


class BadTypeIdError(ValidationError):
    """Type id outside the type table."""


class EmptyTypesError(ValidationError):
    """Type id list must be non-empty."""


# model

class ShapeMismatchError(ValidationError):
    """Tensor shapes disagree with the declared configuration."""


class BadLabelError(ValidationError):
    """Relation label outside the probability vector."""


class CacheMismatchError(ValidationError):
    """Forward cache does not match the bag/params it is replayed against."""


# training

class DivergedError(BagsideError):
    """Training loss became non-finite.

    Carries the last finite parameters and the history up to the abort
    so callers can checkpoint what was salvageable.
    """

    category = "diverged"

    def __init__(self, message, params=None, history=None):
        super().__init__(message)
        self.params = params
        self.history = history


class ManifestMismatchError(ValidationError):
    """Checkpoint tensor manifest disagrees with its payload."""


# evaluation

class NotEnoughTriplesError(InfeasibleError):
    """Fewer scored triples than the requested N."""


class EmptyAfterFilterError(InfeasibleError):
    """No bag survives the more-than-two-sentences filter."""


class NoPositivesError(InfeasibleError):
    """Precision-recall needs at least one gold positive."""


class EmptyCurveError(InfeasibleError):
    """AUC of an empty curve is undefined."""
