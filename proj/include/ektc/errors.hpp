#pragma once

#include <stdexcept>
#include <string>

namespace ektc {

/// Base class for all ektc errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// dialogue-core
class MalformedToolCall : public Error { public: using Error::Error; };
class SchemaError : public Error { public: using Error::Error; };
class UnknownPlaceholder : public Error { public: using Error::Error; };

// tool registry
class DuplicateName : public Error { public: using Error::Error; };
class UnknownTool : public Error { public: using Error::Error; };
class MissingArgument : public Error { public: using Error::Error; };

/// Transport failure talking to a knowledge-service backend, after retries.
class BackendUnavailable : public Error { public: using Error::Error; };

// llm client
class TransportError : public Error { public: using Error::Error; };
class BadRequest : public Error { public: using Error::Error; };
class BudgetExceeded : public Error { public: using Error::Error; };

// datagen / eval judges
class JudgeUnparseable : public Error { public: using Error::Error; };

// metrics
class EmptyCorpus : public Error { public: using Error::Error; };
class LengthMismatch : public Error { public: using Error::Error; };
class EmptyReference : public Error { public: using Error::Error; };
class NoNgrams : public Error { public: using Error::Error; };
class JoinFailure : public Error { public: using Error::Error; };

// cli / config
class ConfigError : public Error { public: using Error::Error; };

} // namespace ektc
