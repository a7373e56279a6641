#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "di3po/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;  // dotted key=value pairs
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", args.overrides, "Override any config key by dotted name, e.g. train.steps=50");
}

di3po::PipelineConfig resolve_config(const CommonArgs& args,
                                     std::vector<std::pair<std::string, std::string>> extra) {
    for (const auto& kv : args.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got: " + kv);
        extra.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return di3po::load_pipeline_config(args.config_path, extra);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diptych preference-pair pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    std::vector<std::pair<std::string, std::string>> flags;
    std::string seed, count, threshold, variant, out;

    auto add_shared = [&](CLI::App* cmd) {
        add_common(cmd, args);
        cmd->add_option("--seed", seed, "Master RNG seed (master_seed)");
        cmd->add_option("--out", out, "Dataset root directory (dataset_root)");
    };

    CLI::App* gen = app.add_subcommand("gen-pairs", "Generate diptych preference pairs");
    add_shared(gen);
    gen->add_option("--count", count, "Number of pairs (pair_count)");

    CLI::App* filter = app.add_subcommand("filter", "Verify and confidence-gate generated pairs");
    add_shared(filter);
    filter->add_option("--threshold", threshold, "Confidence gate threshold (strictly above)");

    CLI::App* train = app.add_subcommand("train", "Train a denoiser on filtered pairs");
    add_shared(train);
    train->add_option("--variant", variant, "Training variant: di3po | sft_winners | dpo_background_varied");

    CLI::App* eval = app.add_subcommand("eval", "Sample, OCR and score a trained model");
    add_shared(eval);

    CLI::App* report = app.add_subcommand("report", "Summarize a pipeline run directory");
    add_shared(report);

    CLI::App* dump = app.add_subcommand("dump-config", "Print the resolved configuration as JSON");
    add_shared(dump);
    dump->add_option("--count", count, "Number of pairs (pair_count)");
    dump->add_option("--threshold", threshold, "Confidence gate threshold");
    dump->add_option("--variant", variant, "Training variant");

    CLI11_PARSE(app, argc, argv);

    if (!seed.empty()) flags.emplace_back("master_seed", seed);
    if (!count.empty()) flags.emplace_back("pair_count", count);
    if (!threshold.empty()) flags.emplace_back("threshold", threshold);
    if (!variant.empty()) flags.emplace_back("train.variant", variant);
    if (!out.empty()) flags.emplace_back("dataset_root", out);

    try {
        di3po::PipelineConfig cfg = resolve_config(args, flags);
        if (gen->parsed()) return di3po::cmd_gen_pairs(cfg);
        if (filter->parsed()) return di3po::cmd_filter(cfg);
        if (train->parsed()) return di3po::cmd_train(cfg);
        if (eval->parsed()) return di3po::cmd_eval(cfg);
        if (report->parsed()) return di3po::cmd_report(cfg);
        if (dump->parsed()) {
            std::printf("%s\n", di3po::pipeline_config_to_json(cfg).c_str());
            return di3po::kExitOk;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return di3po::kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fatal: %s\n", e.what());
        return di3po::kExitFatal;
    }
    return di3po::kExitUsage;
}
