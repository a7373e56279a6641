#pragma once

#include <string>
#include <vector>

#include "di3po/split.hpp"
#include "di3po/textgen.hpp"
#include "di3po/verify.hpp"

namespace di3po {

enum class RecordStatus { Ok, Error };

const char* record_status_name(RecordStatus s);
RecordStatus parse_record_status(const std::string& name);

/// One generated preference pair; image paths are relative to the dataset
/// root. The winner panel always holds the correctly spelled word.
struct PairRecord {
    std::string id;
    WordPair word_pair;
    std::string background;
    std::string diptych_prompt;
    std::string diptych_path;
    std::string winner_path;
    std::string loser_path;
    int split_x = 0;
    SplitMethod split_method = SplitMethod::Fallback;
    double split_confidence = 0.0;
    Orientation orientation = Orientation::LeftCorrect;
    RecordStatus status = RecordStatus::Ok;
    std::string error;  // populated when status == Error

    bool operator==(const PairRecord&) const = default;
};

std::string pair_record_to_json(const PairRecord& r);
PairRecord pair_record_from_json(const std::string& json_line);

/// Per-record verifier outcome retained for every input record. The
/// timestamp is a logical, deterministic sequence marker rather than wall
/// time, so audit logs are byte-reproducible under a fixed seed.
struct AuditRecord {
    std::string record_id;
    std::string explanation;
    bool passing = false;
    int confidence = 0;
    std::string decision;  // "accepted" | "failed-check" | "low-confidence" | "error"
    long timestamp = 0;

    bool operator==(const AuditRecord&) const = default;
};

std::string audit_record_to_json(const AuditRecord& r);
AuditRecord audit_record_from_json(const std::string& json_line);

/// JSONL manifest IO. Writers are atomic (write-temp-then-rename).
std::vector<PairRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<PairRecord>& records);

std::vector<AuditRecord> read_audit_log(const std::string& path);
void write_audit_log(const std::string& path, const std::vector<AuditRecord>& records);

/// Writes `content` to `path` atomically via a sibling temp file + rename.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace di3po
