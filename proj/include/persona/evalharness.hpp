#pragma once

#include "persona/personalizer.hpp"
#include "persona/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace persona::evalharness {

// Unweighted mean over classes of F1 = 2PR/(P+R). Classes with zero
// predicted and zero true instances contribute F1 = 0.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& truth, int n_classes);
std::vector<double> per_class_f1(const std::vector<int>& preds, const std::vector<int>& truth,
                                 int n_classes);

struct HeadReport {
    std::string head;
    double macro_f1 = 0;
    double accuracy = 0;
    std::vector<double> per_class_f1;
};

struct RunReport {
    std::string setting;
    std::array<HeadReport, 4> heads;
    double overall = 0;  // arithmetic mean of the four head macro-F1 scores
};

RunReport evaluate(const personalizer::PersonalizerModel& model,
                   const std::vector<personalizer::Item>& test_items,
                   const std::string& setting = "Full Model");

// Permutes each customer's month rows with a seeded shuffle before
// inference. Refuses non-temporal models: the test is meaningless when the
// encoder is order-invariant by construction.
RunReport shuffle_test(const personalizer::PersonalizerModel& model,
                       const std::vector<personalizer::Item>& test_items, uint64_t seed,
                       const std::string& setting = "Shuffled");

struct AblationSpec {
    std::string name;
    bool use_intent = true;
    bool use_segment = true;
    bool use_temporal = true;
};

// The four standard settings: full, no-intent, no-segment, no-temporal.
std::vector<AblationSpec> standard_ablations();

// Trains and evaluates each setting with identical data and seeds.
std::vector<RunReport> run_ablations(const std::vector<personalizer::Item>& train_items,
                                     const std::vector<personalizer::Item>& val_items,
                                     const std::vector<personalizer::Item>& test_items,
                                     const personalizer::ModelConfig& base_model,
                                     const personalizer::TrainConfig& train_cfg,
                                     const std::vector<AblationSpec>& specs);

void write_table2_csv(const std::filesystem::path& path, const std::vector<RunReport>& rows);
std::vector<RunReport> read_table2_csv(const std::filesystem::path& path);
std::string format_report_text(const std::vector<RunReport>& rows);

}  // namespace persona::evalharness
