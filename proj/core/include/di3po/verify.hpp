#pragma once

#include <string>

namespace di3po {

struct VerificationResult {
    std::string explanation;
    bool passing = false;
    int confidence = 0;  // [0, 100]
};

/// Extracts the labeled `explanation:` / `passing:` / `confidence:` fields
/// from free-form verifier text. Labels are matched case-insensitively at
/// line starts, in any order; the explanation may span lines until the next
/// label. Throws std::runtime_error naming the offending field when one is
/// missing or malformed, or when the confidence is outside [0, 100].
VerificationResult parse_verifier_response(const std::string& text);

/// Serializes a result in the documented labeled-line format; reparsing
/// yields an identical result.
std::string format_verifier_response(const VerificationResult& r);

enum class GateReason { Accepted, FailedCheck, LowConfidence };

struct GateDecision {
    bool accepted = false;
    GateReason reason = GateReason::Accepted;
};

/// Accept iff passing AND confidence strictly above the threshold.
GateDecision gate(const VerificationResult& result, int threshold = 70);

const char* gate_reason_name(GateReason r);

}  // namespace di3po
