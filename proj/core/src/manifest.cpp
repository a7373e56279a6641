#include "di3po/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace di3po {

namespace {

using nlohmann::ordered_json;

const char* edit_kind_name(EditKind k) {
    switch (k) {
        case EditKind::Substitute: return "substitute";
        case EditKind::Duplicate: return "duplicate";
        case EditKind::Delete: return "delete";
    }
    return "unknown";
}

EditKind parse_edit_kind(const std::string& name) {
    if (name == "substitute") return EditKind::Substitute;
    if (name == "duplicate") return EditKind::Duplicate;
    if (name == "delete") return EditKind::Delete;
    throw std::invalid_argument("unknown edit kind: " + name);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

template <typename Record, typename FromJson>
std::vector<Record> read_jsonl(const std::string& path, FromJson from_json) {
    std::vector<Record> out;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(from_json(line));
    }
    return out;
}

template <typename Record, typename ToJson>
void write_jsonl(const std::string& path, const std::vector<Record>& records, ToJson to_json) {
    std::string body;
    for (const auto& r : records) {
        body += to_json(r);
        body += '\n';
    }
    atomic_write_file(path, body);
}

}  // namespace

const char* record_status_name(RecordStatus s) { return s == RecordStatus::Ok ? "ok" : "error"; }

RecordStatus parse_record_status(const std::string& name) {
    if (name == "ok") return RecordStatus::Ok;
    if (name == "error") return RecordStatus::Error;
    throw std::invalid_argument("unknown record status: " + name);
}

std::string pair_record_to_json(const PairRecord& r) {
    ordered_json edits = ordered_json::array();
    for (const auto& e : r.word_pair.edits)
        edits.push_back({{"position", e.position},
                         {"kind", edit_kind_name(e.kind)},
                         {"ch", std::string(1, e.ch)}});
    ordered_json j{{"id", r.id},
                   {"correct", r.word_pair.correct},
                   {"misspelled", r.word_pair.misspelled},
                   {"edits", std::move(edits)},
                   {"background", r.background},
                   {"diptych_prompt", r.diptych_prompt},
                   {"diptych_path", r.diptych_path},
                   {"winner_path", r.winner_path},
                   {"loser_path", r.loser_path},
                   {"split_x", r.split_x},
                   {"split_method", split_method_name(r.split_method)},
                   {"split_confidence", r.split_confidence},
                   {"orientation", r.orientation == Orientation::LeftCorrect ? "left-correct" : "right-correct"},
                   {"status", record_status_name(r.status)},
                   {"error", r.error}};
    return j.dump();
}

PairRecord pair_record_from_json(const std::string& json_line) {
    nlohmann::json j = nlohmann::json::parse(json_line);
    PairRecord r;
    r.id = j.at("id").get<std::string>();
    r.word_pair.correct = j.at("correct").get<std::string>();
    r.word_pair.misspelled = j.at("misspelled").get<std::string>();
    for (const auto& ej : j.at("edits")) {
        EditOp op;
        op.position = ej.at("position").get<int>();
        op.kind = parse_edit_kind(ej.at("kind").get<std::string>());
        std::string ch = ej.at("ch").get<std::string>();
        op.ch = ch.empty() ? '\0' : ch[0];
        r.word_pair.edits.push_back(op);
    }
    r.background = j.at("background").get<std::string>();
    r.diptych_prompt = j.at("diptych_prompt").get<std::string>();
    r.diptych_path = j.at("diptych_path").get<std::string>();
    r.winner_path = j.at("winner_path").get<std::string>();
    r.loser_path = j.at("loser_path").get<std::string>();
    r.split_x = j.at("split_x").get<int>();
    r.split_method = j.at("split_method").get<std::string>() == "edge" ? SplitMethod::Edge : SplitMethod::Fallback;
    r.split_confidence = j.at("split_confidence").get<double>();
    std::string orient = j.at("orientation").get<std::string>();
    if (orient != "left-correct" && orient != "right-correct")
        throw std::invalid_argument("unknown orientation: " + orient);
    r.orientation = orient == "left-correct" ? Orientation::LeftCorrect : Orientation::RightCorrect;
    r.status = parse_record_status(j.at("status").get<std::string>());
    r.error = j.at("error").get<std::string>();
    return r;
}

std::string audit_record_to_json(const AuditRecord& r) {
    ordered_json j{{"record_id", r.record_id}, {"explanation", r.explanation}, {"passing", r.passing},
                   {"confidence", r.confidence}, {"decision", r.decision},     {"timestamp", r.timestamp}};
    return j.dump();
}

AuditRecord audit_record_from_json(const std::string& json_line) {
    nlohmann::json j = nlohmann::json::parse(json_line);
    AuditRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.explanation = j.at("explanation").get<std::string>();
    r.passing = j.at("passing").get<bool>();
    r.confidence = j.at("confidence").get<int>();
    r.decision = j.at("decision").get<std::string>();
    r.timestamp = j.at("timestamp").get<long>();
    return r;
}

std::vector<PairRecord> read_manifest(const std::string& path) {
    return read_jsonl<PairRecord>(path, pair_record_from_json);
}

void write_manifest(const std::string& path, const std::vector<PairRecord>& records) {
    write_jsonl(path, records, pair_record_to_json);
}

std::vector<AuditRecord> read_audit_log(const std::string& path) {
    return read_jsonl<AuditRecord>(path, audit_record_from_json);
}

void write_audit_log(const std::string& path, const std::vector<AuditRecord>& records) {
    write_jsonl(path, records, audit_record_to_json);
}

void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

}  // namespace di3po
