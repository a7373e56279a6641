#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "di3po/font.hpp"
#include "di3po/manifest.hpp"
#include "di3po/pipeline.hpp"

using namespace di3po;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("di3po_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Small, fast configuration running entirely against the mock clients.
PipelineConfig quick_config(const fs::path& root, uint64_t seed = 42) {
    nlohmann::json j{
        {"dataset_root", root.string()},
        {"master_seed", seed},
        {"pair_count", 6},
        {"train",
         {{"steps", 8}, {"batch_size", 4}, {"pretrain_steps", 20}, {"diagnostic_every", 4}, {"learning_rate", 1e-3}}},
        {"task", {{"vocab", 3}}},
        {"schedule", {{"timesteps", 20}}},
        {"eval",
         {{"n_seeds", 2},
          {"prompt_count", 4},
          {"bootstrap_replicas", 50},
          {"sampler", "oracle"},
          {"inference_steps", 10}}},
    };
    return parse_pipeline_config(j.dump());
}

PairRecord sample_record() {
    PairRecord r;
    r.id = "pair-000003";
    r.word_pair.correct = "TASTE";
    r.word_pair.misspelled = "TAASTE";
    r.word_pair.edits = {{1, EditKind::Duplicate, '\0'}};
    r.background = "A quiet background.";
    r.diptych_prompt = "prompt body\nwith newline";
    r.diptych_path = "pairs/images/pair-000003.png";
    r.winner_path = "pairs/images/pair-000003_w.png";
    r.loser_path = "pairs/images/pair-000003_l.png";
    r.split_x = 63;
    r.split_method = SplitMethod::Edge;
    r.split_confidence = 1.0;
    r.orientation = Orientation::RightCorrect;
    return r;
}

}  // namespace

TEST_CASE("config defaults: counts, threshold and credential env names") {
    PipelineConfig cfg = parse_pipeline_config("{}");
    CHECK(cfg.pair_count == 300);
    CHECK(cfg.threshold == 70);
    CHECK(cfg.eval.n_seeds == 4);
    CHECK(cfg.eval.prompt_count == 100);
    CHECK(cfg.eval.bootstrap_replicas == 1000);
    CHECK(cfg.text_client.credential_env == "DI3PO_TEXT_API_KEY");
    CHECK(cfg.image_client.credential_env == "DI3PO_IMAGE_API_KEY");
    CHECK(cfg.verifier_client.credential_env == "DI3PO_VERIFIER_API_KEY");
    CHECK(cfg.ocr_client.credential_env == "DI3PO_OCR_API_KEY");
    CHECK(cfg.text_client.mock);  // mocks by default; HTTP is opt-in
}

TEST_CASE("config merge is recursive and rejects unknown keys") {
    PipelineConfig cfg = parse_pipeline_config(R"({"train": {"steps": 13}, "threshold": 85})");
    CHECK(cfg.train.steps == 13);
    CHECK(cfg.threshold == 85);
    CHECK(cfg.train.batch_size == 16);  // untouched sibling keeps its default

    CHECK_THROWS_AS(parse_pipeline_config(R"({"treshold": 85})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_pipeline_config(R"({"train": {"step": 13}})"), std::invalid_argument);
}

TEST_CASE("dotted overrides parse values as JSON, falling back to strings") {
    PipelineConfig cfg = parse_pipeline_config("{}", {{"train.steps", "21"},
                                                      {"eval.sampler", "oracle"},
                                                      {"clients.image.corruption", "no-seam"},
                                                      {"corruption_fraction", "0.25"}});
    CHECK(cfg.train.steps == 21);
    CHECK(cfg.eval.sampler == "oracle");
    CHECK(cfg.image_client.corruption == "no-seam");
    CHECK(cfg.corruption_fraction == doctest::Approx(0.25));
    CHECK_THROWS_AS(parse_pipeline_config("{}", {{"train.nope", "1"}}), std::invalid_argument);
}

TEST_CASE("config dump/parse round-trip preserves non-default values") {
    PipelineConfig cfg = parse_pipeline_config("{}");
    cfg.dataset_root = "elsewhere";
    cfg.master_seed = 99;
    cfg.train.variant = TrainVariant::SftWinners;
    cfg.eval.sampler_config.guidance_scale = 3.5;
    cfg.words = {"ALPHA", "BETA"};
    PipelineConfig back = parse_pipeline_config(pipeline_config_to_json(cfg));
    CHECK(back.dataset_root == "elsewhere");
    CHECK(back.master_seed == 99);
    CHECK(back.train.variant == TrainVariant::SftWinners);
    CHECK(back.eval.sampler_config.guidance_scale == 3.5);
    CHECK(back.words == cfg.words);
}

TEST_CASE("built-in word list is font-renderable and duplicate-free") {
    const auto& words = builtin_words();
    CHECK(words.size() >= 30);
    std::vector<std::string> sorted = words;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    for (const auto& w : words) {
        CHECK(!w.empty());
        CHECK(font::supported_text(w));
        CHECK(w.size() >= 3);  // misspellings of shorter words collapse too easily
    }
}

TEST_CASE("pair and audit records survive a JSON round-trip") {
    PairRecord r = sample_record();
    CHECK(pair_record_from_json(pair_record_to_json(r)) == r);

    PairRecord broken = r;
    broken.status = RecordStatus::Error;
    broken.error = "image model: transport failure";
    CHECK(pair_record_from_json(pair_record_to_json(broken)) == broken);

    AuditRecord a{"pair-000003", "looks fine", true, 92, "accepted", 3};
    CHECK(audit_record_from_json(audit_record_to_json(a)) == a);
    CHECK_THROWS(pair_record_from_json("not json"));
}

TEST_CASE("manifest files round-trip and atomic writes create parent directories") {
    TempDir tmp("manifest");
    std::vector<PairRecord> records{sample_record()};
    records.push_back(sample_record());
    records[1].id = "pair-000004";
    fs::path manifest = tmp.path / "nested" / "dir" / "manifest.jsonl";
    write_manifest(manifest.string(), records);
    CHECK(read_manifest(manifest.string()) == records);
    // No temp file debris is left behind.
    for (const auto& e : fs::directory_iterator(manifest.parent_path()))
        CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("pipeline end to end on mocks: generate, filter, train, eval, report") {
    TempDir tmp("e2e");
    PipelineConfig cfg = quick_config(tmp.path);

    REQUIRE(cmd_gen_pairs(cfg) == kExitOk);
    auto records = read_manifest((tmp.path / "pairs" / "manifest.jsonl").string());
    REQUIRE(records.size() == 6);
    for (const auto& r : records) {
        CHECK(r.status == RecordStatus::Ok);
        CHECK(r.split_method == SplitMethod::Edge);
        CHECK(fs::exists(tmp.path / r.winner_path));
        CHECK(fs::exists(tmp.path / r.loser_path));
    }

    REQUIRE(cmd_filter(cfg) == kExitOk);
    auto audit = read_audit_log((tmp.path / "filtered" / "audit.jsonl").string());
    REQUIRE(audit.size() == 6);  // one entry per input record
    for (size_t i = 0; i < audit.size(); ++i) {
        CHECK(audit[i].decision == "accepted");
        CHECK(audit[i].timestamp == static_cast<long>(i));  // logical, not wall time
    }
    CHECK(read_manifest((tmp.path / "filtered" / "manifest.jsonl").string()).size() == 6);

    REQUIRE(cmd_train(cfg) == kExitOk);
    CHECK(fs::exists(tmp.path / "train" / "model.ckpt"));
    CHECK(fs::exists(tmp.path / "train" / "reference.ckpt"));
    CHECK(fs::exists(tmp.path / "train" / "trace.jsonl"));

    REQUIRE(cmd_eval(cfg) == kExitOk);
    auto report = nlohmann::json::parse(read_file(tmp.path / "eval" / "report.json"));
    // The oracle sampler renders the ground truth, so every metric is perfect.
    CHECK(report.at("edit_similarity").at("average").get<double>() == 1.0);
    CHECK(report.at("word_error_rate").at("average").get<double>() == 0.0);
    CHECK(report.at("substring_match_ratio").at("best_of_n").get<double>() == 1.0);
    CHECK(report.at("n_seeds").get<int>() == 2);

    REQUIRE(cmd_report(cfg) == kExitOk);
    std::string summary = read_file(tmp.path / "report" / "summary.txt");
    CHECK(summary.find("Generated: 6") != std::string::npos);
    CHECK(summary.find("accepted") != std::string::npos);
    std::string csv = read_file(tmp.path / "report" / "trace.csv");
    CHECK(csv.rfind("step,loss,far_bg_residual,bg_fraction,target_fraction\n", 0) == 0);
}

TEST_CASE("gen-pairs resumes without touching completed records") {
    TempDir tmp("resume");
    PipelineConfig cfg = quick_config(tmp.path, 7);
    REQUIRE(cmd_gen_pairs(cfg) == kExitOk);
    fs::path manifest = tmp.path / "pairs" / "manifest.jsonl";
    auto full = read_manifest(manifest.string());
    REQUIRE(full.size() == 6);
    std::string image_before = read_file(tmp.path / full[1].diptych_path);

    // Simulate an interrupted run: keep only the first 3 records.
    write_manifest(manifest.string(), {full[0], full[1], full[2]});
    REQUIRE(cmd_gen_pairs(cfg) == kExitOk);
    auto resumed = read_manifest(manifest.string());
    REQUIRE(resumed.size() == 6);
    for (size_t i = 0; i < 6; ++i) CHECK(resumed[i] == full[i]);
    CHECK(read_file(tmp.path / full[1].diptych_path) == image_before);
}

TEST_CASE("filter: threshold above the scale rejects everything as low confidence") {
    TempDir tmp("highbar");
    PipelineConfig cfg = quick_config(tmp.path, 11);
    REQUIRE(cmd_gen_pairs(cfg) == kExitOk);
    cfg.threshold = 101;
    REQUIRE(cmd_filter(cfg) == kExitOk);
    CHECK(read_manifest((tmp.path / "filtered" / "manifest.jsonl").string()).empty());
    for (const auto& a : read_audit_log((tmp.path / "filtered" / "audit.jsonl").string()))
        CHECK(a.decision == "low-confidence");
}

TEST_CASE("corrupted records are rejected, clean ones accepted") {
    TempDir tmp("corrupt");
    PipelineConfig cfg = quick_config(tmp.path, 13);
    cfg.pair_count = 10;
    cfg.corruption_fraction = 0.3;  // first 3 records use the corrupted client
    cfg.corruption = "same-text";
    REQUIRE(cmd_gen_pairs(cfg) == kExitOk);
    REQUIRE(cmd_filter(cfg) == kExitOk);
    auto audit = read_audit_log((tmp.path / "filtered" / "audit.jsonl").string());
    REQUIRE(audit.size() == 10);
    for (size_t i = 0; i < audit.size(); ++i)
        CHECK(audit[i].decision == (i < 3 ? "failed-check" : "accepted"));
}

TEST_CASE("repeated runs produce byte-identical artifacts") {
    TempDir a("det_a"), b("det_b");
    PipelineConfig ca = quick_config(a.path, 5), cb = quick_config(b.path, 5);
    for (auto* cfg : {&ca, &cb}) {
        REQUIRE(cmd_gen_pairs(*cfg) == kExitOk);
        REQUIRE(cmd_filter(*cfg) == kExitOk);
        REQUIRE(cmd_train(*cfg) == kExitOk);
        REQUIRE(cmd_eval(*cfg) == kExitOk);
    }
    for (const char* rel : {"pairs/manifest.jsonl", "filtered/manifest.jsonl", "filtered/audit.jsonl",
                            "train/model.ckpt", "train/trace.jsonl", "eval/report.json"})
        CHECK(read_file(a.path / rel) == read_file(b.path / rel));
}

TEST_CASE("unreachable verifier yields error decisions and a partial exit code") {
    TempDir tmp("vdown");
    PipelineConfig cfg = quick_config(tmp.path, 17);
    REQUIRE(cmd_gen_pairs(cfg) == kExitOk);
    cfg.verifier_client.mock = false;
    cfg.verifier_client.endpoint = "http://127.0.0.1:9/unreachable";  // discard port
    cfg.verifier_client.max_retries = 0;
    cfg.verifier_client.timeout_s = 1.0;
    CHECK(cmd_filter(cfg) == kExitPartial);
    auto audit = read_audit_log((tmp.path / "filtered" / "audit.jsonl").string());
    REQUIRE(audit.size() == 6);
    for (const auto& a : audit) CHECK(a.decision == "error");  // never conflated with rejection
}

TEST_CASE("report flags missing artifacts with a partial exit code") {
    TempDir tmp("missing");
    PipelineConfig cfg = quick_config(tmp.path, 19);
    REQUIRE(cmd_gen_pairs(cfg) == kExitOk);
    CHECK(cmd_report(cfg) == kExitPartial);
    std::string summary = read_file(tmp.path / "report" / "summary.txt");
    CHECK(summary.find("Missing artifacts:") != std::string::npos);
}
