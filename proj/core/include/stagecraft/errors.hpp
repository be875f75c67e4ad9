// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stagecraft {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

#define STAGECRAFT_DECLARE_ERROR(Name, tag)                      \
    class Name : public Error {                                  \
    public:                                                      \
        using Error::Error;                                      \
        const char* kind() const noexcept override { return tag; } \
    }

STAGECRAFT_DECLARE_ERROR(SizeError, "size_error");
STAGECRAFT_DECLARE_ERROR(StepOutOfRange, "step_out_of_range");
STAGECRAFT_DECLARE_ERROR(DimensionMismatch, "dimension_mismatch");
STAGECRAFT_DECLARE_ERROR(NoDetection, "no_detection");
STAGECRAFT_DECLARE_ERROR(BackendError, "backend_error");
STAGECRAFT_DECLARE_ERROR(StoreError, "store_error");
STAGECRAFT_DECLARE_ERROR(ConfigError, "config_error");
STAGECRAFT_DECLARE_ERROR(ScriptError, "script_error");
STAGECRAFT_DECLARE_ERROR(TemplateError, "template_error");
STAGECRAFT_DECLARE_ERROR(NoPairs, "no_pairs");
STAGECRAFT_DECLARE_ERROR(LengthMismatch, "length_mismatch");
STAGECRAFT_DECLARE_ERROR(DegenerateSet, "degenerate_set");
STAGECRAFT_DECLARE_ERROR(UnknownRelation, "unknown_relation");
STAGECRAFT_DECLARE_ERROR(UnknownCountWord, "unknown_count_word");
STAGECRAFT_DECLARE_ERROR(MissingDetection, "missing_detection");
STAGECRAFT_DECLARE_ERROR(TurnInFlight, "turn_in_flight");
STAGECRAFT_DECLARE_ERROR(NotFound, "not_found");
STAGECRAFT_DECLARE_ERROR(IoError, "io_error");

#undef STAGECRAFT_DECLARE_ERROR

class MissingConfigKey : public ConfigError {
public:
    explicit MissingConfigKey(std::string key) : ConfigError("missing config key '" + key + "'"), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

// Thrown by the prompt-book parser; offset is a byte position in the input.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset);
    std::size_t offset() const noexcept { return offset_; }
    const std::string& detail() const noexcept { return detail_; }
    const char* kind() const noexcept override { return "parse_error"; }

private:
    std::size_t offset_;
    std::string detail_;
};

class DesignFailure : public Error {
public:
    DesignFailure(const std::string& message, std::vector<std::string> transcripts);
    const std::vector<std::string>& transcripts() const noexcept { return transcripts_; }
    const char* kind() const noexcept override { return "design_failure"; }

private:
    std::vector<std::string> transcripts_;
};

struct RepairPassReport {
    std::string pass;
    bool enabled = true;
    int edits = 0;
};

class RepairFailure : public Error {
public:
    RepairFailure(const std::string& message, std::vector<RepairPassReport> passes);
    const std::vector<RepairPassReport>& passes() const noexcept { return passes_; }
    const char* kind() const noexcept override { return "repair_failure"; }

private:
    std::vector<RepairPassReport> passes_;
};

}  // namespace stagecraft
