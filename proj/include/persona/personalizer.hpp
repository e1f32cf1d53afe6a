#pragma once

#include "persona/rng.hpp"
#include "persona/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace persona::personalizer {

struct ModelConfig {
    int f_features = kNumTemporalFeatures;
    int s_features = 19;
    int k_months = 6;
    int d_proj = 32;
    int d_hidden = 32;  // per direction
    int d_attn = 32;
    int d_embed = 8;
    int d_trunk = 64;
    std::array<int, 4> head_sizes = {kNumProducts, kNumChannels, kNumTimings, kNumLevels};
    double dropout = 0.1;
    bool use_intent = true;
    bool use_segment = true;
    bool use_temporal = true;
    uint64_t seed = 0;

    // Width of the concatenated
    // [attention pool | final-step state | static | segment emb | intent emb].
    int fused_width() const;
    void validate() const;
};

// All weights live in a name-keyed map so the optimizer, serializer, and
// finite-difference checker can treat them uniformly.
struct PersonalizerModel {
    ModelConfig config;
    std::map<std::string, Eigen::MatrixXd> params;

    static PersonalizerModel init(const ModelConfig& config);
};

struct Item {
    int64_t customer_id = 0;
    int month_index = 0;          // month the label refers to (K)
    Eigen::MatrixXd temporal;     // K x F, standardized
    Eigen::VectorXd statics;      // S
    int segment_id = 0;
    int intent_id = 0;
    std::array<int, 4> labels{};  // product, channel, timing, level
};

struct ForwardResult {
    std::array<Eigen::VectorXd, 4> logits;
    Eigen::VectorXd attention;  // K, sums to 1
};

// Inference-mode forward (no dropout).
ForwardResult forward(const PersonalizerModel& model, const Item& item);

// Sum over heads of mean cross-entropy over the batch.
double multitask_loss(const std::array<std::vector<Eigen::VectorXd>, 4>& logits,
                      const std::array<std::vector<int>, 4>& labels);

// Loss and parameter gradients over a batch (training mode; dropout applied
// when dropout_rng is non-null).
double loss_and_gradients(const PersonalizerModel& model, const std::vector<Item>& batch,
                          std::map<std::string, Eigen::MatrixXd>& grads,
                          persona::Rng* dropout_rng = nullptr);

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double clip_norm = 1.0;
    int batch_size = 128;
    int max_epochs = 200;
    int patience = 12;
    uint64_t seed = 0;
    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_macro_f1;
    int best_epoch = -1;  // 0-based
};

struct TrainResult {
    PersonalizerModel model;
    TrainHistory history;
};

// AdamW + global-norm clipping + early stopping on validation overall
// macro-F1; retains the best checkpoint. Deterministic for fixed seeds.
TrainResult train(const std::vector<Item>& train_items, const std::vector<Item>& val_items,
                  const ModelConfig& mcfg, const TrainConfig& tcfg);

struct PredictionRecord {
    int64_t customer_id = 0;
    int month_index = 0;
    std::array<Eigen::VectorXd, 4> logits;
    PersonalizationAction predicted;
    Eigen::VectorXd attention_weights;
};

// Argmax per head, ties toward the lower class index.
PredictionRecord predict(const PersonalizerModel& model, const Item& item);

// Per-tensor maximum relative finite-difference error (central differences,
// 1e-6 step) over up to `entries_per_tensor` deterministic entries.
std::map<std::string, double> gradient_check(const PersonalizerModel& model,
                                             const std::vector<Item>& batch,
                                             int entries_per_tensor = 5);

void write_model_json(const std::filesystem::path& path, const PersonalizerModel& model);
PersonalizerModel read_model_json(const std::filesystem::path& path);
void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

// Train-split normalization statistics for temporal and static features.
struct FeatureStats {
    Eigen::RowVectorXd temporal_mean, temporal_sd;
    Eigen::VectorXd static_mean, static_sd;  // continuous block only (6 entries)
};

FeatureStats compute_feature_stats(const std::vector<CustomerStatic>& statics,
                                   const std::vector<CustomerMonth>& months,
                                   const std::vector<int64_t>& train_ids);

Eigen::VectorXd encode_static(const CustomerStatic& s, const FeatureStats& stats);

// One item per customer: K standardized temporal rows, encoded statics,
// pipeline-derived segment/intent ids, final-month action labels.
std::vector<Item> build_items(const std::vector<CustomerStatic>& statics,
                              const std::vector<CustomerMonth>& months,
                              const std::vector<int64_t>& customer_ids,
                              const std::map<int64_t, int>& segment_ids,
                              const std::map<int64_t, int>& intent_ids,
                              const FeatureStats& stats, int k_months);

}  // namespace persona::personalizer
