#pragma once

#include <stdexcept>

namespace samkit {

// Base class for all pipeline errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// corpus_ingest
struct UnsupportedFormat : Error { using Error::Error; };
struct CorruptSource : Error { using Error::Error; };
struct InsufficientPool : Error { using Error::Error; };

// llm_gateway
struct CassetteMiss : Error { using Error::Error; };
struct ProviderError : Error { using Error::Error; };
// Retryable provider failure (rate limit, 5xx, transport).
struct TransientProviderError : ProviderError { using ProviderError::ProviderError; };
struct ContextOverflow : Error { using Error::Error; };
struct NotFound : Error { using Error::Error; };

// synthesis / privacy
struct IncompleteTask : Error { using Error::Error; };
struct ExtractionFailure : Error { using Error::Error; };
struct TemplateError : Error { using Error::Error; };

// metrics / evaluation
struct EmptyInput : Error { using Error::Error; };
struct EmptyText : Error { using Error::Error; };
struct DegenerateSeries : Error { using Error::Error; };

// grading
struct GradeParseFailure : Error { using Error::Error; };
struct PanelFailure : Error { using Error::Error; };

// utility
struct LabelParseFailure : Error { using Error::Error; };

// reporting / run store
struct IncompleteInputs : Error { using Error::Error; };
struct LedgerCorrupt : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace samkit
