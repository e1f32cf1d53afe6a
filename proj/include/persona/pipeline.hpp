#pragma once

#include "persona/evalharness.hpp"
#include "persona/intent.hpp"
#include "persona/personalizer.hpp"
#include "persona/rag.hpp"
#include "persona/segmentation.hpp"
#include "persona/synthgen.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace persona::pipeline {

struct RagSection {
    std::filesystem::path corpus_dir = "data/corpus";
    rag::ClientConfig client;
    int k = 4;
    int n_requests = 400;
};

// Single config for every subcommand. A master seed derives per-stage seeds
// so one flag reseeds the whole chain coherently.
struct PipelineConfig {
    uint64_t seed = 12345;
    std::filesystem::path out_dir = "out";
    synthgen::GeneratorConfig generator = synthgen::GeneratorConfig::defaults();
    segmentation::SegmentationConfig segmentation;
    intent::IntentStageConfig intent;
    personalizer::ModelConfig model;
    personalizer::TrainConfig train;
    RagSection rag;
    uint64_t shuffle_seed = 0;

    // Unknown keys raise ConfigError; missing keys keep defaults.
    static PipelineConfig load(const std::filesystem::path& path);
    // Re-derives stage seeds from the master seed.
    void apply_seed(uint64_t master);
};

// Loaded prior-stage artifacts plus assembled model inputs.
struct Dataset {
    std::vector<CustomerStatic> statics;
    std::vector<CustomerMonth> months;
    Split split;
    personalizer::FeatureStats stats;
    std::vector<personalizer::Item> train_items, val_items, test_items;
};

Dataset load_dataset(const PipelineConfig& cfg);

void run_gen_data(const PipelineConfig& cfg);
void run_segment(const PipelineConfig& cfg);
void run_intent(const PipelineConfig& cfg);
void run_train(const PipelineConfig& cfg);
bool run_eval(const PipelineConfig& cfg, bool check);
bool run_shuffle_test(const PipelineConfig& cfg, bool check);
bool run_ablate(const PipelineConfig& cfg, bool check, const std::string& only = "");
void run_rag_build(const PipelineConfig& cfg);
bool run_rag_gen(const PipelineConfig& cfg, bool check);
void run_report(const PipelineConfig& cfg);
bool run_all(const PipelineConfig& cfg, bool check);

}  // namespace persona::pipeline
