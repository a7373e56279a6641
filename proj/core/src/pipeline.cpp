#include "di3po/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "di3po/font.hpp"
#include "di3po/rng.hpp"
#include "di3po/split.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace di3po {

namespace {

std::string record_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pair-%06d", index);
    return buf;
}

void write_png_atomic(const std::string& path, const Raster& img) {
    std::vector<uint8_t> bytes = encode_png(img);
    atomic_write_file(path, std::string(bytes.begin(), bytes.end()));
}

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

ordered_json client_to_json(const ClientConfig& c) {
    return {{"endpoint", c.endpoint},       {"credential_env", c.credential_env},
            {"timeout_s", c.timeout_s},     {"max_retries", c.max_retries},
            {"max_inflight", c.max_inflight}, {"mock", c.mock},
            {"mock_seed", c.mock_seed},     {"corruption", c.corruption},
            {"ocr_noise", c.ocr_noise}};
}

ClientConfig client_from_json(const nlohmann::json& j) {
    ClientConfig c;
    c.endpoint = j.at("endpoint").get<std::string>();
    c.credential_env = j.at("credential_env").get<std::string>();
    c.timeout_s = j.at("timeout_s").get<double>();
    c.max_retries = j.at("max_retries").get<int>();
    c.max_inflight = j.at("max_inflight").get<int>();
    c.mock = j.at("mock").get<bool>();
    c.mock_seed = j.at("mock_seed").get<uint64_t>();
    c.corruption = j.at("corruption").get<std::string>();
    c.ocr_noise = j.at("ocr_noise").get<double>();
    return c;
}

ordered_json config_to_json_tree(const PipelineConfig& cfg) {
    ordered_json j;
    j["dataset_root"] = cfg.dataset_root;
    j["master_seed"] = cfg.master_seed;
    j["pair_count"] = cfg.pair_count;
    j["threshold"] = cfg.threshold;
    j["corruption_fraction"] = cfg.corruption_fraction;
    j["corruption"] = cfg.corruption;
    j["words"] = cfg.words;
    j["clients"] = {{"text", client_to_json(cfg.text_client)},
                    {"image", client_to_json(cfg.image_client)},
                    {"verifier", client_to_json(cfg.verifier_client)},
                    {"ocr", client_to_json(cfg.ocr_client)}};
    j["train"] = {{"steps", cfg.train.steps},
                  {"learning_rate", cfg.train.learning_rate},
                  {"batch_size", cfg.train.batch_size},
                  {"adam_beta1", cfg.train.adam_beta1},
                  {"adam_beta2", cfg.train.adam_beta2},
                  {"adam_eps", cfg.train.adam_eps},
                  {"dpo_beta", cfg.train.dpo_beta},
                  {"seed", cfg.train.seed},
                  {"variant", train_variant_name(cfg.train.variant)},
                  {"diagnostic_every", cfg.train.diagnostic_every},
                  {"halo_radius", cfg.train.halo_radius},
                  {"pretrain_steps", cfg.train.pretrain_steps},
                  {"source", cfg.train_source}};
    j["task"] = {{"image_width", cfg.task.image_width}, {"image_height", cfg.task.image_height},
                 {"motif_size", cfg.task.motif_size},   {"motif_x", cfg.task.motif_x},
                 {"motif_y", cfg.task.motif_y},         {"vocab", cfg.task.vocab},
                 {"task_seed", cfg.task.task_seed}};
    j["schedule"] = {{"timesteps", cfg.schedule_timesteps},
                     {"beta_start", cfg.beta_start},
                     {"beta_end", cfg.beta_end}};
    j["eval"] = {{"n_seeds", cfg.eval.n_seeds},
                 {"prompt_count", cfg.eval.prompt_count},
                 {"bootstrap_replicas", cfg.eval.bootstrap_replicas},
                 {"sampler", cfg.eval.sampler},
                 {"checkpoint", cfg.eval.checkpoint},
                 {"inference_steps", cfg.eval.sampler_config.num_inference_steps},
                 {"guidance_scale", cfg.eval.sampler_config.guidance_scale}};
    return j;
}

PipelineConfig config_from_json_tree(const nlohmann::json& j) {
    PipelineConfig cfg;
    cfg.dataset_root = j.at("dataset_root").get<std::string>();
    cfg.master_seed = j.at("master_seed").get<uint64_t>();
    cfg.pair_count = j.at("pair_count").get<int>();
    cfg.threshold = j.at("threshold").get<int>();
    cfg.corruption_fraction = j.at("corruption_fraction").get<double>();
    cfg.corruption = j.at("corruption").get<std::string>();
    cfg.words = j.at("words").get<std::vector<std::string>>();
    cfg.text_client = client_from_json(j.at("clients").at("text"));
    cfg.image_client = client_from_json(j.at("clients").at("image"));
    cfg.verifier_client = client_from_json(j.at("clients").at("verifier"));
    cfg.ocr_client = client_from_json(j.at("clients").at("ocr"));
    const auto& t = j.at("train");
    cfg.train.steps = t.at("steps").get<int>();
    cfg.train.learning_rate = t.at("learning_rate").get<double>();
    cfg.train.batch_size = t.at("batch_size").get<int>();
    cfg.train.adam_beta1 = t.at("adam_beta1").get<double>();
    cfg.train.adam_beta2 = t.at("adam_beta2").get<double>();
    cfg.train.adam_eps = t.at("adam_eps").get<double>();
    cfg.train.dpo_beta = t.at("dpo_beta").get<double>();
    cfg.train.seed = t.at("seed").get<uint64_t>();
    cfg.train.variant = parse_train_variant(t.at("variant").get<std::string>());
    cfg.train.diagnostic_every = t.at("diagnostic_every").get<int>();
    cfg.train.halo_radius = t.at("halo_radius").get<int>();
    cfg.train.pretrain_steps = t.at("pretrain_steps").get<int>();
    cfg.train_source = t.at("source").get<std::string>();
    const auto& tk = j.at("task");
    cfg.task.image_width = tk.at("image_width").get<int>();
    cfg.task.image_height = tk.at("image_height").get<int>();
    cfg.task.motif_size = tk.at("motif_size").get<int>();
    cfg.task.motif_x = tk.at("motif_x").get<int>();
    cfg.task.motif_y = tk.at("motif_y").get<int>();
    cfg.task.vocab = tk.at("vocab").get<int>();
    cfg.task.task_seed = tk.at("task_seed").get<uint64_t>();
    const auto& s = j.at("schedule");
    cfg.schedule_timesteps = s.at("timesteps").get<int>();
    cfg.beta_start = s.at("beta_start").get<double>();
    cfg.beta_end = s.at("beta_end").get<double>();
    const auto& e = j.at("eval");
    cfg.eval.n_seeds = e.at("n_seeds").get<int>();
    cfg.eval.prompt_count = e.at("prompt_count").get<int>();
    cfg.eval.bootstrap_replicas = e.at("bootstrap_replicas").get<int>();
    cfg.eval.sampler = e.at("sampler").get<std::string>();
    cfg.eval.checkpoint = e.at("checkpoint").get<std::string>();
    cfg.eval.sampler_config.num_inference_steps = e.at("inference_steps").get<int>();
    cfg.eval.sampler_config.guidance_scale = e.at("guidance_scale").get<double>();
    if (cfg.pair_count < 1) throw std::invalid_argument("pair_count must be >= 1");
    if (cfg.eval.n_seeds < 1) throw std::invalid_argument("eval.n_seeds must be >= 1");
    return cfg;
}

/// Overlays `user` onto `base` recursively; every user key must already
/// exist in the defaults tree.
void merge_config(ordered_json& base, const nlohmann::json& user, const std::string& prefix) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw std::invalid_argument("unknown config key: " + path);
        if (base[it.key()].is_object() && it.value().is_object()) {
            merge_config(base[it.key()], it.value(), path);
        } else {
            base[it.key()] = it.value();
        }
    }
}

void apply_dotted_override(ordered_json& tree, const std::string& key, const std::string& value) {
    ordered_json* node = &tree;
    size_t pos = 0;
    std::string path;
    for (;;) {
        size_t dot = key.find('.', pos);
        std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (!node->contains(part)) throw std::invalid_argument("unknown config key: " + key);
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded() || (node->is_string() && !parsed.is_string())) {
        *node = value;  // plain string value
    } else {
        *node = parsed;
    }
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

struct RunPaths {
    fs::path root;
    fs::path pairs_manifest() const { return root / "pairs" / "manifest.jsonl"; }
    fs::path images_dir() const { return root / "pairs" / "images"; }
    fs::path filtered_manifest() const { return root / "filtered" / "manifest.jsonl"; }
    fs::path audit_log() const { return root / "filtered" / "audit.jsonl"; }
    fs::path model_ckpt() const { return root / "train" / "model.ckpt"; }
    fs::path reference_ckpt() const { return root / "train" / "reference.ckpt"; }
    fs::path trace() const { return root / "train" / "trace.jsonl"; }
    fs::path eval_report_json() const { return root / "eval" / "report.json"; }
    fs::path eval_report_txt() const { return root / "eval" / "report.txt"; }
    fs::path summary() const { return root / "report" / "summary.txt"; }
    fs::path trace_csv() const { return root / "report" / "trace.csv"; }
};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const std::string& word_for(const PipelineConfig& cfg, int index) {
    const auto& list = cfg.words.empty() ? builtin_words() : cfg.words;
    return list[static_cast<size_t>(index) % list.size()];
}

int corrupt_count(const PipelineConfig& cfg) {
    return static_cast<int>(std::lround(cfg.corruption_fraction * cfg.pair_count));
}

}  // namespace

const std::vector<std::string>& builtin_words() {
    static const std::vector<std::string> words = {
        "TASTE",  "FRAGILE", "MARKET", "GARDEN", "WINTER", "BOTTLE", "SILVER", "CANDLE",
        "ORANGE", "PLANET",  "BRIDGE", "CASTLE", "FOREST", "ISLAND", "JACKET", "MIRROR",
        "NEEDLE", "OCEAN",   "PEPPER", "QUARTZ", "RIBBON", "SADDLE", "TEMPLE", "VELVET",
        "WALNUT", "YELLOW",  "ZIPPER", "ANCHOR", "BASKET", "COPPER", "DESERT", "ENGINE"};
    return words;
}

PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::vector<std::pair<std::string, std::string>>& overrides) {
    PipelineConfig defaults;
    defaults.text_client.credential_env = "DI3PO_TEXT_API_KEY";
    defaults.image_client.credential_env = "DI3PO_IMAGE_API_KEY";
    defaults.verifier_client.credential_env = "DI3PO_VERIFIER_API_KEY";
    defaults.ocr_client.credential_env = "DI3PO_OCR_API_KEY";
    ordered_json tree = config_to_json_tree(defaults);
    if (!json_text.empty()) {
        nlohmann::json user = nlohmann::json::parse(json_text);
        merge_config(tree, user, "");
    }
    for (const auto& [key, value] : overrides) apply_dotted_override(tree, key, value);
    return config_from_json_tree(tree);
}

PipelineConfig load_pipeline_config(const std::string& path,
                                    const std::vector<std::pair<std::string, std::string>>& overrides) {
    return parse_pipeline_config(path.empty() ? std::string{} : read_text(path), overrides);
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) { return config_to_json_tree(cfg).dump(2); }

// ---------------------------------------------------------------------------
// gen-pairs
// ---------------------------------------------------------------------------

int cmd_gen_pairs(const PipelineConfig& cfg) {
    RunPaths paths{cfg.dataset_root};
    fs::create_directories(paths.images_dir());

    std::vector<PairRecord> records;
    if (fs::exists(paths.pairs_manifest())) records = read_manifest(paths.pairs_manifest().string());
    std::vector<std::string> done;
    for (const auto& r : records)
        if (r.status == RecordStatus::Ok) done.push_back(r.id);

    auto text = make_text_model_client(cfg.text_client);
    auto image_clean = make_image_model_client(cfg.image_client);
    ClientConfig corrupted_cfg = cfg.image_client;
    corrupted_cfg.corruption = cfg.corruption;
    auto image_corrupt = make_image_model_client(corrupted_cfg);
    const int n_corrupt = corrupt_count(cfg);
    const MockDiptychLayout layout;
    const int panel_w = layout.panel_width();

    int errors = 0;
    for (int i = 0; i < cfg.pair_count; ++i) {
        std::string id = record_id(i);
        if (std::find(done.begin(), done.end(), id) != done.end()) continue;
        records.erase(std::remove_if(records.begin(), records.end(),
                                     [&](const PairRecord& r) { return r.id == id; }),
                      records.end());

        uint64_t seed_i = derive_seed(cfg.master_seed, 1000 + static_cast<uint64_t>(i));
        PairRecord rec;
        rec.id = id;
        try {
            rec.word_pair = make_misspelling(word_for(cfg, i), 0.2, derive_seed(seed_i, 1));

            // Up to 3 attempts when the background model returns empty text.
            std::string bg;
            for (int attempt = 0; attempt < 3 && bg.empty(); ++attempt)
                bg = text->generate(compose_background_request(rec.word_pair));
            if (bg.empty()) throw std::runtime_error("background model returned empty text");
            rec.background = bg;

            rec.orientation =
                (derive_seed(seed_i, 2) & 1) != 0 ? Orientation::LeftCorrect : Orientation::RightCorrect;
            rec.diptych_prompt = compose_diptych_prompt(rec.background, rec.word_pair, rec.orientation);

            ImageModelClient& image = i < n_corrupt ? *image_corrupt : *image_clean;
            Raster diptych = image.generate_diptych(rec.diptych_prompt, derive_seed(seed_i, 3));

            SplitResult split = split_diptych(diptych);
            rec.split_x = split.split_x;
            rec.split_method = split.method;
            rec.split_confidence = split.confidence;

            // Trim both panels to the nominal panel width so the seam cannot
            // leak into either side and the pair stays pixel-comparable.
            if (diptych.width < 2 * panel_w) throw std::runtime_error("diptych narrower than two panels");
            auto [left_full, rest] = split_columns(diptych, panel_w);
            auto [seam, right_full] = split_columns(rest, rest.width - panel_w);
            const Raster& winner = rec.orientation == Orientation::LeftCorrect ? left_full : right_full;
            const Raster& loser = rec.orientation == Orientation::LeftCorrect ? right_full : left_full;

            rec.diptych_path = "pairs/images/" + id + "_diptych.png";
            rec.winner_path = "pairs/images/" + id + "_winner.png";
            rec.loser_path = "pairs/images/" + id + "_loser.png";
            write_png_atomic((paths.root / rec.diptych_path).string(), diptych);
            write_png_atomic((paths.root / rec.winner_path).string(), winner);
            write_png_atomic((paths.root / rec.loser_path).string(), loser);
            rec.status = RecordStatus::Ok;
        } catch (const std::exception& e) {
            rec.status = RecordStatus::Error;
            rec.error = e.what();
        }
        if (rec.status == RecordStatus::Error) ++errors;
        records.push_back(rec);
        std::sort(records.begin(), records.end(),
                  [](const PairRecord& a, const PairRecord& b) { return a.id < b.id; });
        write_manifest(paths.pairs_manifest().string(), records);
    }

    std::printf("gen-pairs: %d records, %d errors -> %s\n", cfg.pair_count, errors,
                paths.pairs_manifest().string().c_str());
    if (errors == 0) return kExitOk;
    return errors * 2 > cfg.pair_count ? kExitFatal : kExitPartial;
}

// ---------------------------------------------------------------------------
// filter
// ---------------------------------------------------------------------------

FilterOutcome filter_dataset(const std::vector<PairRecord>& manifest, VerifierClient& verifier, int threshold,
                             const std::string& dataset_root) {
    FilterOutcome out;
    const std::string prompt = compose_verification_prompt();
    long tick = 0;
    for (const auto& rec : manifest) {
        AuditRecord audit;
        audit.record_id = rec.id;
        audit.timestamp = tick++;
        try {
            if (rec.status != RecordStatus::Ok) throw std::runtime_error("record in error state: " + rec.error);
            Raster winner = read_png((fs::path(dataset_root) / rec.winner_path).string());
            Raster loser = read_png((fs::path(dataset_root) / rec.loser_path).string());
            VerificationResult vr = parse_verifier_response(verifier.verify(winner, loser, prompt));
            GateDecision decision = gate(vr, threshold);
            audit.explanation = vr.explanation;
            audit.passing = vr.passing;
            audit.confidence = vr.confidence;
            audit.decision = decision.accepted ? "accepted" : gate_reason_name(decision.reason);
            if (decision.accepted) {
                out.accepted.push_back(rec);
                ++out.accepted_count;
            } else {
                ++out.rejected_count;
            }
        } catch (const std::exception& e) {
            audit.explanation = e.what();
            audit.decision = "error";
            ++out.error_count;
        }
        out.audit.push_back(audit);
    }
    return out;
}

int cmd_filter(const PipelineConfig& cfg) {
    RunPaths paths{cfg.dataset_root};
    if (!fs::exists(paths.pairs_manifest())) {
        std::fprintf(stderr, "filter: missing manifest %s\n", paths.pairs_manifest().string().c_str());
        return kExitUsage;
    }
    std::vector<PairRecord> manifest = read_manifest(paths.pairs_manifest().string());
    auto verifier = make_verifier_client(cfg.verifier_client);
    FilterOutcome out = filter_dataset(manifest, *verifier, cfg.threshold, cfg.dataset_root);
    write_manifest(paths.filtered_manifest().string(), out.accepted);
    write_audit_log(paths.audit_log().string(), out.audit);
    std::printf("filter: %d accepted, %d rejected, %d errors -> %s\n", out.accepted_count, out.rejected_count,
                out.error_count, paths.filtered_manifest().string().c_str());
    return out.error_count == 0 ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

/// Winner/loser latents from a filtered manifest: grayscale panels mapped to
/// [-1, 1], mask from the bounding box of differing pixels, and condition
/// tokens indexed by the sorted distinct correct words.
std::vector<PreferencePair> pairs_from_manifest(const std::vector<PairRecord>& manifest, const std::string& root,
                                                int& vocab_out) {
    std::vector<std::string> vocab;
    for (const auto& r : manifest) vocab.push_back(r.word_pair.correct);
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
    vocab_out = static_cast<int>(vocab.size());

    std::vector<PreferencePair> pairs;
    for (const auto& r : manifest) {
        Grid xw = raster_to_latent(to_grayscale(read_png((fs::path(root) / r.winner_path).string())));
        Grid xl = raster_to_latent(to_grayscale(read_png((fs::path(root) / r.loser_path).string())));
        require_same_shape(xw, xl, "pairs_from_manifest");
        int x0 = xw.width, y0 = xw.height, x1 = -1, y1 = -1;
        for (int y = 0; y < xw.height; ++y)
            for (int x = 0; x < xw.width; ++x)
                if (xw.at(x, y) != xl.at(x, y)) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
        if (x1 < 0) {  // identical panels: mark the whole image as target
            x0 = y0 = 0;
            x1 = xw.width - 1;
            y1 = xw.height - 1;
        }
        RegionMask mask = RegionMask::from_box(xw.width, xw.height, x0, y0, x1 - x0 + 1, y1 - y0 + 1);
        int token = static_cast<int>(std::lower_bound(vocab.begin(), vocab.end(), r.word_pair.correct) -
                                     vocab.begin());
        pairs.push_back({std::move(xw), std::move(xl), std::move(mask), Condition{token, false}});
    }
    return pairs;
}

std::string trace_to_jsonl(const std::vector<TraceEntry>& trace) {
    std::string out;
    for (const auto& e : trace) {
        ordered_json j{{"step", e.step}, {"loss", e.loss}};
        if (e.has_diagnostic) {
            j["far_bg_residual"] = e.far_bg_residual;
            j["bg_fraction"] = e.bg_fraction;
            j["target_fraction"] = e.target_fraction;
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace

int cmd_train(const PipelineConfig& cfg) {
    RunPaths paths{cfg.dataset_root};
    NoiseSchedule schedule = make_schedule(ScheduleKind::Linear, cfg.schedule_timesteps, cfg.beta_start, cfg.beta_end);

    std::vector<PreferencePair> dataset;
    DenoiserShape shape;
    shape.num_timesteps = cfg.schedule_timesteps;
    if (cfg.train_source == "synthetic") {
        shape.width = cfg.task.image_width;
        shape.height = cfg.task.image_height;
        shape.vocab = cfg.task.vocab;
        for (int i = 0; i < cfg.pair_count; ++i)
            dataset.push_back(gen_synthetic_pair(cfg.task, derive_seed(cfg.master_seed, 100 + i),
                                                 i % cfg.task.vocab, cfg.train.variant));
    } else if (cfg.train_source == "manifest") {
        if (!fs::exists(paths.filtered_manifest())) {
            std::fprintf(stderr, "train: missing filtered manifest %s\n", paths.filtered_manifest().string().c_str());
            return kExitUsage;
        }
        std::vector<PairRecord> manifest = read_manifest(paths.filtered_manifest().string());
        if (manifest.empty() && cfg.train.variant != TrainVariant::SftWinners) {
            std::fprintf(stderr, "train: filtered manifest is empty\n");
            return kExitUsage;
        }
        int vocab = 0;
        dataset = pairs_from_manifest(manifest, cfg.dataset_root, vocab);
        shape.width = dataset.front().x_w.width;
        shape.height = dataset.front().x_w.height;
        shape.vocab = vocab;
    } else {
        std::fprintf(stderr, "train: unknown source '%s'\n", cfg.train_source.c_str());
        return kExitUsage;
    }

    try {
        Denoiser init = Denoiser::random_init(shape, derive_seed(cfg.master_seed, 1));
        Denoiser base = cfg.train.pretrain_steps > 0
                            ? pretrain_base(dataset, cfg.train, schedule, init, cfg.train.pretrain_steps)
                            : init;
        TrainResult result = train(cfg.train.variant, dataset, cfg.train, schedule, base);
        fs::create_directories(paths.root / "train");
        result.model.save_checkpoint(paths.model_ckpt().string());
        result.reference.save_checkpoint(paths.reference_ckpt().string());
        atomic_write_file(paths.trace().string(), trace_to_jsonl(result.trace));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "train: %s\n", e.what());
        return kExitFatal;
    }
    std::printf("train: %d steps (%s) -> %s\n", cfg.train.steps, train_variant_name(cfg.train.variant),
                paths.model_ckpt().string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

namespace {

ordered_json estimate_to_json(const BootstrapEstimate& e) {
    return {{"mean", e.mean},
            {"half_width", e.half_width},
            {"percentile_lo", e.percentile_lo},
            {"percentile_hi", e.percentile_hi}};
}

ordered_json aggregate_to_json(const MetricAggregate& a) {
    return {{"average", a.average},
            {"best_of_n", a.best_of_n},
            {"average_ci", estimate_to_json(a.average_ci)},
            {"best_of_n_ci", estimate_to_json(a.best_of_n_ci)}};
}

std::string metric_report_to_json(const MetricReport& r) {
    ordered_json j;
    j["n_seeds"] = r.n_seeds;
    j["prompt_ids"] = r.prompt_ids;
    j["edit_similarity"] = aggregate_to_json(r.edit_sim_agg);
    j["word_error_rate"] = aggregate_to_json(r.wer_agg);
    j["substring_match_ratio"] = aggregate_to_json(r.substring_agg);
    j["per_prompt"] = {{"edit_similarity", r.edit_sim}, {"word_error_rate", r.wer},
                       {"substring_match_ratio", r.substring}};
    return j.dump(2);
}

/// Hard-wired perfect renderer: the ground-truth word drawn on a procedural
/// background, as the mock image model would produce it.
Raster oracle_sample(const std::string& word, uint64_t seed) {
    Raster img = mock_background_tile(64, 64, seed);
    int bw = font::box_width(static_cast<int>(word.size()));
    font::render_text(img, word, std::max(0, (img.width - bw) / 2), (img.height - font::box_height()) / 2);
    return img;
}

}  // namespace

int cmd_eval(const PipelineConfig& cfg) {
    RunPaths paths{cfg.dataset_root};
    std::unique_ptr<Denoiser> model;
    NoiseSchedule schedule = make_schedule(ScheduleKind::Linear, cfg.schedule_timesteps, cfg.beta_start, cfg.beta_end);
    if (cfg.eval.sampler == "checkpoint") {
        fs::path ckpt = cfg.eval.checkpoint.empty() ? paths.model_ckpt() : fs::path(cfg.dataset_root) / cfg.eval.checkpoint;
        if (!fs::exists(ckpt)) {
            std::fprintf(stderr, "eval: missing checkpoint %s\n", ckpt.string().c_str());
            return kExitUsage;
        }
        model = std::make_unique<Denoiser>(Denoiser::load_checkpoint(ckpt.string()));
    } else if (cfg.eval.sampler != "oracle") {
        std::fprintf(stderr, "eval: unknown sampler '%s'\n", cfg.eval.sampler.c_str());
        return kExitUsage;
    }

    auto ocr = make_ocr_client(cfg.ocr_client);
    std::vector<EvalSample> samples;
    int skipped = 0;
    for (int p = 0; p < cfg.eval.prompt_count; ++p) {
        const std::string& word = word_for(cfg, p);
        if (word.empty()) {  // no ground truth: skip with a warning count
            ++skipped;
            continue;
        }
        EvalSample sample;
        sample.prompt_id = "prompt-" + std::to_string(p);
        sample.ground_truth_spans = {word};
        for (int s = 0; s < cfg.eval.n_seeds; ++s) {
            uint64_t seed = derive_seed(cfg.master_seed, 50000 + static_cast<uint64_t>(p) * 64 + s);
            Raster img;
            if (model) {
                Grid latent = ancestral_sample(*model, Condition{p % model->shape().vocab, false},
                                               cfg.eval.sampler_config, schedule, seed);
                img = latent_to_raster(latent);
            } else {
                img = oracle_sample(word, seed);
            }
            sample.seed_ids.push_back(s);
            sample.ocr_texts.push_back(ocr->read(img));
        }
        samples.push_back(std::move(sample));
    }
    if (skipped > 0) std::fprintf(stderr, "eval: skipped %d prompts without ground truth\n", skipped);
    if (samples.empty()) {
        std::fprintf(stderr, "eval: no usable prompts\n");
        return kExitUsage;
    }

    MetricReport report = aggregate_seeds(samples, cfg.eval.n_seeds, cfg.eval.bootstrap_replicas,
                                          derive_seed(cfg.master_seed, 777));
    atomic_write_file(paths.eval_report_json().string(), metric_report_to_json(report));
    atomic_write_file(paths.eval_report_txt().string(), render_report_table(report, "Evaluation"));
    std::printf("eval: %zu prompts x %d seeds -> %s\n", samples.size(), cfg.eval.n_seeds,
                paths.eval_report_json().string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const PipelineConfig& cfg) {
    RunPaths paths{cfg.dataset_root};
    std::ostringstream summary;
    std::vector<std::string> missing;
    summary << "Pipeline run summary\n====================\n\n";

    if (fs::exists(paths.pairs_manifest())) {
        auto records = read_manifest(paths.pairs_manifest().string());
        int ok = 0;
        for (const auto& r : records) ok += r.status == RecordStatus::Ok;
        summary << "Generated: " << records.size() << " records (" << ok << " ok, " << records.size() - ok
                << " error)\n";
    } else {
        missing.push_back(paths.pairs_manifest().string());
    }

    if (fs::exists(paths.filtered_manifest()) && fs::exists(paths.audit_log())) {
        auto accepted = read_manifest(paths.filtered_manifest().string());
        auto audit = read_audit_log(paths.audit_log().string());
        int rejected = 0, errors = 0;
        for (const auto& a : audit) {
            if (a.decision == "error")
                ++errors;
            else if (a.decision != "accepted")
                ++rejected;
        }
        summary << "Filtered:  " << accepted.size() << " accepted, " << rejected << " rejected, " << errors
                << " error\n";
    } else {
        if (!fs::exists(paths.filtered_manifest())) missing.push_back(paths.filtered_manifest().string());
        if (!fs::exists(paths.audit_log())) missing.push_back(paths.audit_log().string());
    }

    if (fs::exists(paths.trace())) {
        std::istringstream in(read_text(paths.trace()));
        std::string line, csv = "step,loss,far_bg_residual,bg_fraction,target_fraction\n";
        int steps = 0;
        double last_loss = 0.0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            ++steps;
            last_loss = j.at("loss").get<double>();
            std::ostringstream row;
            row << j.at("step").get<int>() << ',' << std::setprecision(17) << j.at("loss").get<double>() << ',';
            if (j.contains("far_bg_residual")) {
                row << std::setprecision(17) << j.at("far_bg_residual").get<double>() << ','
                    << j.at("bg_fraction").get<double>() << ',' << j.at("target_fraction").get<double>();
            } else {
                row << ",,";
            }
            csv += row.str();
            csv += '\n';
        }
        atomic_write_file(paths.trace_csv().string(), csv);
        summary << "Trained:   " << steps << " steps, final loss " << last_loss << "\n";
    } else {
        summary << "Trained:   trace absent\n";
        missing.push_back(paths.trace().string());
    }

    if (fs::exists(paths.eval_report_txt())) {
        summary << "\n" << read_text(paths.eval_report_txt());
    } else {
        summary << "Evaluated: report absent\n";
        missing.push_back(paths.eval_report_txt().string());
    }

    if (!missing.empty()) {
        summary << "\nMissing artifacts:\n";
        for (const auto& m : missing) summary << "  " << m << "\n";
    }
    atomic_write_file(paths.summary().string(), summary.str());
    std::printf("%s", summary.str().c_str());
    return missing.empty() ? kExitOk : kExitPartial;
}

}  // namespace di3po
