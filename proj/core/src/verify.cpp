#include "di3po/verify.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace di3po {

namespace {

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

/// Returns the text after "<label>:" if the line starts with it (after
/// leading whitespace, case-insensitive).
std::optional<std::string> match_label(const std::string& line, const std::string& label) {
    std::string lowered = to_lower(line);
    size_t start = lowered.find_first_not_of(" \t");
    if (start == std::string::npos) return std::nullopt;
    if (lowered.compare(start, label.size(), label) != 0) return std::nullopt;
    size_t colon = start + label.size();
    if (colon >= line.size() || line[colon] != ':') return std::nullopt;
    return line.substr(colon + 1);
}

}  // namespace

VerificationResult parse_verifier_response(const std::string& text) {
    std::vector<std::string> lines;
    {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }

    std::optional<std::string> explanation, passing_raw, confidence_raw;
    static const char* kLabels[] = {"explanation", "passing", "confidence"};

    for (size_t i = 0; i < lines.size(); ++i) {
        for (const char* label : kLabels) {
            auto rest = match_label(lines[i], label);
            if (!rest) continue;
            std::string value = *rest;
            if (std::string(label) == "explanation") {
                // Free prose may continue until the next labeled line.
                size_t j = i + 1;
                while (j < lines.size()) {
                    bool next_label = false;
                    for (const char* l2 : kLabels)
                        if (match_label(lines[j], l2)) next_label = true;
                    if (next_label) break;
                    value += "\n" + lines[j];
                    ++j;
                }
                if (!explanation) explanation = trim(value);
                i = j - 1;
            } else if (std::string(label) == "passing") {
                if (!passing_raw) passing_raw = trim(value);
            } else {
                if (!confidence_raw) confidence_raw = trim(value);
            }
            break;
        }
    }

    if (!explanation || explanation->empty()) throw std::runtime_error("verifier parse error: missing field 'explanation'");
    if (!passing_raw) throw std::runtime_error("verifier parse error: missing field 'passing'");
    if (!confidence_raw) throw std::runtime_error("verifier parse error: missing field 'confidence'");

    VerificationResult r;
    r.explanation = *explanation;

    std::string p = to_lower(*passing_raw);
    if (p == "true")
        r.passing = true;
    else if (p == "false")
        r.passing = false;
    else
        throw std::runtime_error("verifier parse error: non-boolean 'passing' value: " + *passing_raw);

    try {
        size_t consumed = 0;
        int conf = std::stoi(*confidence_raw, &consumed);
        if (consumed != confidence_raw->size()) throw std::invalid_argument("trailing characters");
        if (conf < 0 || conf > 100) throw std::out_of_range("range");
        r.confidence = conf;
    } catch (const std::exception&) {
        throw std::runtime_error("verifier parse error: 'confidence' must be an integer in [0, 100], got: " +
                                 *confidence_raw);
    }
    return r;
}

std::string format_verifier_response(const VerificationResult& r) {
    std::ostringstream out;
    out << "explanation: " << r.explanation << "\n";
    out << "passing: " << (r.passing ? "true" : "false") << "\n";
    out << "confidence: " << r.confidence << "\n";
    return out.str();
}

GateDecision gate(const VerificationResult& result, int threshold) {
    GateDecision d;
    if (!result.passing) {
        d.accepted = false;
        d.reason = GateReason::FailedCheck;
    } else if (result.confidence > threshold) {
        d.accepted = true;
        d.reason = GateReason::Accepted;
    } else {
        d.accepted = false;
        d.reason = GateReason::LowConfidence;
    }
    return d;
}

const char* gate_reason_name(GateReason r) {
    switch (r) {
        case GateReason::Accepted: return "accepted";
        case GateReason::FailedCheck: return "failed-check";
        case GateReason::LowConfidence: return "low-confidence";
    }
    return "unknown";
}

}  // namespace di3po
