#pragma once

#include "persona/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace persona::intent {

// Scalar random-walk state model per feature; Q/R ratio with R fixed at 1.
struct KalmanParams {
    double process_var_ratio = 0.5;
};

// Forward filter + RTS backward smoother with an exact diffuse start.
std::vector<double> kalman_smooth(const std::vector<double>& series, const KalmanParams& params);

struct HmmModel {
    int n_states = kNumIntentStates;
    Eigen::VectorXd initial;         // n_states
    Eigen::MatrixXd transitions;     // n_states x n_states, row-stochastic
    Eigen::MatrixXd emission_means;  // n_states x F
    Eigen::MatrixXd emission_vars;   // n_states x F, floored at kVarianceFloor

    static constexpr double kVarianceFloor = 1e-6;
    void validate() const;
};

struct ForwardBackwardResult {
    double log_likelihood = 0;
    Eigen::MatrixXd gamma;               // K x n_states
    std::vector<Eigen::MatrixXd> xi;     // K-1 matrices, n_states x n_states
};

// Scaled forward-backward; no underflow for K up to 1e4.
ForwardBackwardResult forward_backward(const HmmModel& model, const Eigen::MatrixXd& obs);

// One Gaussian-kernel mean-shift step per state over responsibility-weighted
// observations. bandwidth = +inf reduces to the plain weighted mean.
Eigen::MatrixXd mean_shift_recenter(const Eigen::MatrixXd& means, const Eigen::MatrixXd& obs,
                                    const Eigen::MatrixXd& gamma, double bandwidth);

struct HmmFitConfig {
    int n_states = kNumIntentStates;
    int max_iter = 40;
    double tol = 1e-4;
    double bandwidth = 1.0;  // standardized units; +inf = standard Baum-Welch
    uint64_t seed = 0;
};

// Baum-Welch over per-customer sequences (each K x F) where the M-step mean
// update is mean_shift_recenter.
HmmModel fit_imsk_hmm(const std::vector<Eigen::MatrixXd>& sequences, const HmmFitConfig& config);

struct DecodedTrajectory {
    int64_t customer_id = 0;
    std::vector<int> states;
    double log_likelihood = 0;
};

// MAP state path in log space; ties break toward the lower state index.
DecodedTrajectory viterbi(const HmmModel& model, const Eigen::MatrixXd& obs);

// Maximum-score one-to-one assignment (O(n^3) Hungarian). Returns perm with
// perm[row] = assigned column.
std::vector<int> hungarian_max_assignment(const Eigen::MatrixXd& score);

struct IntentScore {
    double accuracy = 0;
    double ari = 0;
    Eigen::MatrixXd confusion;       // after relabeling, decoded x truth
    std::vector<int> state_to_truth; // optimal relabeling
};

IntentScore align_and_score(const std::vector<int>& decoded, const std::vector<int>& truth,
                            int n_states);

// ---------------------------------------------------------------------------
// End-to-end stage
// ---------------------------------------------------------------------------

struct IntentStageConfig {
    KalmanParams kalman;
    HmmFitConfig fit;
};

struct IntentStageResult {
    HmmModel model;
    std::vector<int64_t> customer_ids;       // ascending
    std::vector<std::vector<int>> decoded;   // per customer, K states
    std::vector<double> log_likelihood;      // per customer
};

// Standardizes features with train-split statistics, Kalman-smooths each
// customer-feature series, fits on train customers, decodes everyone.
// Ground-truth intent is never an input here.
IntentStageResult run_intent_stage(const std::vector<CustomerMonth>& months, const Split& split,
                                   const IntentStageConfig& config, int k_months);

void write_hmm_model_json(const std::filesystem::path& path, const HmmModel& model);
HmmModel read_hmm_model_json(const std::filesystem::path& path);
void write_decoded_csv(const std::filesystem::path& path, const IntentStageResult& result);
// Returns (customer_id, month_index) -> state rows in file order.
std::vector<std::tuple<int64_t, int, int>> read_decoded_csv(const std::filesystem::path& path);

}  // namespace persona::intent
