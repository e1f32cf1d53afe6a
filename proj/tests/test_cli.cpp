#include "persona/pipeline.hpp"

#include "persona/errors.hpp"

#include <nlohmann/json.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace persona;
namespace fs = std::filesystem;

namespace {

fs::path write_tiny_config(const fs::path& dir, uint64_t seed) {
    fs::create_directories(dir);
    nlohmann::json j = {
        {"seed", seed},
        {"out_dir", (dir / "out").string()},
        {"generator",
         {{"n_customers", 400}, {"k_months", 6}, {"label_noise", 0.1}}},
        {"intent", {{"max_iter", 12}}},
        {"model",
         {{"d_proj", 16}, {"d_hidden", 16}, {"d_attn", 16}, {"d_trunk", 32}}},
        {"train", {{"max_epochs", 8}, {"patience", 8}, {"batch_size", 64}}},
        {"rag", {{"n_requests", 50}}},
    };
    fs::path path = dir / "config.json";
    std::ofstream f(path);
    f << j.dump(2);
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("unknown config keys are rejected, missing keys keep defaults") {
    fs::path dir = fs::temp_directory_path() / "persona_cli_cfg";
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "bad.json");
        f << R"({"seed": 1, "generater": {"n_customers": 10}})";
    }
    CHECK_THROWS_AS(pipeline::PipelineConfig::load(dir / "bad.json"), ConfigError);
    {
        std::ofstream f(dir / "bad2.json");
        f << R"({"train": {"learning_rate": 0.001}})";
    }
    CHECK_THROWS_AS(pipeline::PipelineConfig::load(dir / "bad2.json"), ConfigError);
    {
        std::ofstream f(dir / "ok.json");
        f << R"({"seed": 99})";
    }
    auto cfg = pipeline::PipelineConfig::load(dir / "ok.json");
    CHECK(cfg.seed == 99);
    CHECK(cfg.generator.k_months == 6);  // default retained
    fs::remove_all(dir);
}

TEST_CASE("stages refuse to run before their upstream artifacts exist") {
    fs::path dir = fs::temp_directory_path() / "persona_cli_missing";
    fs::remove_all(dir);
    fs::path cfg_path = write_tiny_config(dir, 5);
    auto cfg = pipeline::PipelineConfig::load(cfg_path);
    CHECK_THROWS_AS(pipeline::run_train(cfg), StageDependencyError);
    CHECK_THROWS_AS(pipeline::run_segment(cfg), StageDependencyError);
    fs::remove_all(dir);
}

TEST_CASE("the full chain writes every artifact and is byte-deterministic") {
    fs::path dir = fs::temp_directory_path() / "persona_cli_all";
    fs::remove_all(dir);
    fs::path cfg_path = write_tiny_config(dir, 31);
    auto cfg = pipeline::PipelineConfig::load(cfg_path);
    pipeline::run_all(cfg, false);

    const std::vector<std::string> artifacts = {
        "static.csv",        "temporal.csv",     "truth.csv",
        "split.json",        "segments.json",    "segment_quality.json",
        "hmm_model.json",    "intent_decoded.csv", "intent_score.json",
        "model.json",        "train_history.csv", "eval_report.csv",
        "shuffle_report.csv", "report_table2.csv", "chunks.json",
        "messages.jsonl",    "rag_metrics.json", "report.txt"};
    for (const auto& name : artifacts) {
        INFO("artifact ", name);
        CHECK(fs::exists(cfg.out_dir / name));
    }

    std::string table2 = slurp(cfg.out_dir / "report_table2.csv");
    std::string rag_metrics = slurp(cfg.out_dir / "rag_metrics.json");

    fs::remove_all(cfg.out_dir);
    pipeline::run_all(cfg, false);
    CHECK(slurp(cfg.out_dir / "report_table2.csv") == table2);
    CHECK(slurp(cfg.out_dir / "rag_metrics.json") == rag_metrics);

    // The sanitized model-input tables never carry ground truth.
    std::ifstream temporal(cfg.out_dir / "temporal.csv");
    std::string header;
    std::getline(temporal, header);
    CHECK(header.find("true_intent") == std::string::npos);

    fs::remove_all(dir);
}
