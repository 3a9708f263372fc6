#pragma once

#include <stdexcept>
#include <string>

namespace pallm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// corpus
struct UnknownTone : Error { using Error::Error; };
struct ExcludedTone : Error { using Error::Error; };
struct TooFewSpeakers : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct InvalidConfig : Error { using Error::Error; };

// policy
struct ContextOverflow : Error { using Error::Error; };
struct NonFiniteGradient : Error { using Error::Error; };

// sft
struct EmptyBatch : Error { using Error::Error; };

// rewards
struct ExternalUnavailable : Error { using Error::Error; };
struct NotSynthetic : Error { using Error::Error; };
struct GroupDiscarded : Error { using Error::Error; };

// grpo
struct ShapeMismatch : Error { using Error::Error; };

// evalx
struct LengthMismatch : Error { using Error::Error; };
struct EmptyList : Error { using Error::Error; };

// io / cli
struct IoError : Error { using Error::Error; };
struct MissingInput : Error { using Error::Error; };

}  // namespace pallm
