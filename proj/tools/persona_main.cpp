#include "persona/pipeline.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"persona: hybrid personalization pipeline"};
    app.require_subcommand(1);

    std::string config_path = "configs/default.json";
    std::string out_override, ablation_name, rag_mode;
    uint64_t seed_override = 0;
    bool have_seed = false, check = false;

    app.add_option("--config", config_path, "Pipeline config JSON")->capture_default_str();
    app.add_option("--seed", seed_override, "Master seed override")
        ->each([&](const std::string&) { have_seed = true; });
    app.add_option("--out", out_override, "Output directory override");
    app.add_flag("--check", check, "Enforce acceptance thresholds; nonzero exit on failure");
    app.add_option("--ablation", ablation_name, "Run a single named ablation setting");
    app.add_option("--rag-mode", rag_mode, "Override rag client mode (offline|http)");

    for (const char* name :
         {"gen-data", "segment", "intent", "train", "eval", "shuffle-test", "ablate", "rag-build",
          "rag-gen", "report", "all"})
        app.add_subcommand(name);

    CLI11_PARSE(app, argc, argv);

    try {
        persona::pipeline::PipelineConfig cfg =
            persona::pipeline::PipelineConfig::load(config_path);
        if (have_seed) cfg.apply_seed(seed_override);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (!rag_mode.empty()) cfg.rag.client.mode = rag_mode;

        const std::string cmd = app.get_subcommands().front()->get_name();
        bool ok = true;
        if (cmd == "gen-data") {
            persona::pipeline::run_gen_data(cfg);
        } else if (cmd == "segment") {
            persona::pipeline::run_segment(cfg);
        } else if (cmd == "intent") {
            persona::pipeline::run_intent(cfg);
        } else if (cmd == "train") {
            persona::pipeline::run_train(cfg);
        } else if (cmd == "eval") {
            ok = persona::pipeline::run_eval(cfg, check);
        } else if (cmd == "shuffle-test") {
            ok = persona::pipeline::run_shuffle_test(cfg, check);
        } else if (cmd == "ablate") {
            ok = persona::pipeline::run_ablate(cfg, check, ablation_name);
        } else if (cmd == "rag-build") {
            persona::pipeline::run_rag_build(cfg);
        } else if (cmd == "rag-gen") {
            ok = persona::pipeline::run_rag_gen(cfg, check);
        } else if (cmd == "report") {
            persona::pipeline::run_report(cfg);
        } else if (cmd == "all") {
            ok = persona::pipeline::run_all(cfg, check);
        }
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
