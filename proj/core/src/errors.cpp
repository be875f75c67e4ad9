// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/errors.hpp"

#include <utility>

namespace stagecraft {

ParseError::ParseError(const std::string& message, std::size_t offset)
    : Error(message + " (at offset " + std::to_string(offset) + ")"), offset_(offset), detail_(message) {}

DesignFailure::DesignFailure(const std::string& message, std::vector<std::string> transcripts)
    : Error(message), transcripts_(std::move(transcripts)) {}

RepairFailure::RepairFailure(const std::string& message, std::vector<RepairPassReport> passes)
    : Error(message), passes_(std::move(passes)) {}

}  // namespace stagecraft
