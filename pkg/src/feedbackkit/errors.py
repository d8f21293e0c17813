"""Exception types shared across the pipeline and evaluation modules."""


class FeedbackKitError(Exception):
    """Base class for all toolkit errors."""


class MalformedInput(FeedbackKitError):
    """Input file or payload does not match the expected structure."""


class MalformedTimestamp(MalformedInput):
    """A cue or word timestamp could not be parsed."""


class EmptyFile(MalformedInput):
    """Input file contains no usable content."""


class UnknownFormat(FeedbackKitError):
    """Requested caption format is not supported."""


class MixedVideoIds(FeedbackKitError):
    """Segments from more than one video were passed to a single-video operation."""


class GatewayError(FeedbackKitError):
    """Base class for LLM gateway failures."""


class AuthError(GatewayError):
    """Endpoint rejected the credentials (401/403). Never retried."""


class BudgetExceeded(GatewayError):
    """Provider request counter went over the configured cap."""


class TransportError(GatewayError):
    """Transient HTTP failures persisted past the retry limit."""


class ResponseShapeError(GatewayError):
    """Endpoint payload lacks assistant message content."""


class MockMissingResponse(GatewayError):
    """Mock provider has no canned response for this prompt."""


class UnparseableJSON(FeedbackKitError):
    """Assistant output could not be parsed as a span list even after normalization."""


class NoValidSpans(FeedbackKitError):
    """Localization produced no spans that survive validation."""


class EmptyWindow(FeedbackKitError):
    """A clip window would have zero or negative length."""


class DuplicateId(FeedbackKitError):
    """The same record id appeared more than once."""


class MissingClip(FeedbackKitError):
    """A video-kind training example has no clip window."""


class LengthMismatch(FeedbackKitError):
    """Predicted distributions and targets differ in length."""


class ZeroProbabilityTarget(FeedbackKitError):
    """A target token has probability zero, i.e. the loss is infinite."""


class EmbedderFailure(FeedbackKitError):
    """Token-embedding provider failed or returned a malformed payload."""


class ParseFailure(FeedbackKitError):
    """Judge output contains no usable rating."""


class OutOfScale(FeedbackKitError):
    """Judge output rating falls outside the metric's scale."""


class NoOverlap(FeedbackKitError):
    """Predictions and ground truths share no (item_id, metric) pairs."""


class MissingCounterpartRating(FeedbackKitError):
    """An item was rated by one rater but not the other."""
