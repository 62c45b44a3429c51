#pragma once

#include <stdexcept>
#include <string>

namespace finqa {

/// Base class for every error thrown by this library. `kind()` is a stable
/// machine-readable tag used by the CLI's --json-errors output.
class Error : public std::runtime_error {
public:
    explicit Error(std::string message) : std::runtime_error(std::move(message)) {}
    virtual const char* kind() const noexcept { return "Error"; }
};

#define FINQA_DEFINE_ERROR(NAME, BASE)                                        \
    class NAME : public BASE {                                                \
    public:                                                                   \
        explicit NAME(std::string message) : BASE(std::move(message)) {}      \
        const char* kind() const noexcept override { return #NAME; }          \
    }

// Gateway
FINQA_DEFINE_ERROR(InvalidRequestError, Error);
FINQA_DEFINE_ERROR(NetworkError, Error);
FINQA_DEFINE_ERROR(AuthError, Error);
FINQA_DEFINE_ERROR(RateLimitedError, Error);
FINQA_DEFINE_ERROR(ContextOverflowError, Error);
FINQA_DEFINE_ERROR(MalformedResponseError, Error);
FINQA_DEFINE_ERROR(ScriptMissError, MalformedResponseError);

// Corpus / retrieval
FINQA_DEFINE_ERROR(EmptyDocumentError, Error);
FINQA_DEFINE_ERROR(EmptyCorpusError, Error);
FINQA_DEFINE_ERROR(EmptyIndexError, Error);
FINQA_DEFINE_ERROR(DimensionMismatchError, Error);
FINQA_DEFINE_ERROR(ProviderError, Error);
FINQA_DEFINE_ERROR(CorruptIndexError, Error);

// Roles
FINQA_DEFINE_ERROR(UnknownTopicError, Error);

// Prompts / agents
FINQA_DEFINE_ERROR(UnresolvedSlotError, Error);
FINQA_DEFINE_ERROR(UnparseableError, Error);
FINQA_DEFINE_ERROR(BothAbsentError, Error);

// Question bank
FINQA_DEFINE_ERROR(SchemaError, Error);
FINQA_DEFINE_ERROR(DuplicateIdError, SchemaError);
FINQA_DEFINE_ERROR(EmptyTableError, Error);
FINQA_DEFINE_ERROR(DistractorCollisionError, Error);
FINQA_DEFINE_ERROR(MalformedDistractorsError, Error);

// Pipeline / eval / cli
FINQA_DEFINE_ERROR(MissingDependencyError, Error);
FINQA_DEFINE_ERROR(UnsupportedFormatError, Error);
FINQA_DEFINE_ERROR(IoError, Error);

#undef FINQA_DEFINE_ERROR

} // namespace finqa
