#pragma once

#include "persona/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace persona::synthgen {

// Per-intent multipliers applied to segment base rates.
struct IntentMultipliers {
    double activity = 1.0;        // logins, sessions
    double page_views = 1.0;      // all five page-view categories
    double card_spend = 1.0;
    double savings_balance = 1.0;
    double loan_balance = 1.0;
    double delinquency = 1.0;     // multiplies the base delinquency probability
};

// Behavioral base rates for one segment archetype.
struct SegmentBaseRates {
    double logins;
    double sessions;
    std::array<double, 5> page_views;  // card, loan, mortgage, savings, invest
    double card_spend;
    double savings_balance;
    double loan_balance;
    double delinquency_prob;
};

// Coefficients of the engagement logistic. Alignment score
//   a = w_product*[product matches rule-optimal] + w_channel*[channel matches]
//     + w_timing*[timing matches] + w_intent*[intent in {HIGH_INTENT, CONSIDERATION}]
//     + w_level*[level matches intent tier]
// and P(open) = sigmoid(open_intercept + open_slope * a), click and conversion
// sampled conditionally to preserve the funnel.
struct AlignmentWeights {
    double w_product = 0.8;
    double w_channel = 0.4;
    double w_timing = 0.3;
    double w_intent = 0.8;
    double w_level = 0.5;
    double open_intercept = -0.8;
    double open_slope = 1.0;
    double click_intercept = -1.0;
    double click_slope = 1.0;
    double conv_intercept = -1.2;
    double conv_slope = 1.0;
};

struct GeneratorConfig {
    int64_t n_customers = 35000;
    int k_months = 6;
    uint64_t seed = 12345;
    std::array<double, kNumSegments> segment_mixture{};
    // One row-stochastic 5x5 intent transition matrix per segment.
    std::array<std::array<std::array<double, kNumIntentStates>, kNumIntentStates>, kNumSegments>
        transition_matrices{};
    std::array<std::array<double, kNumIntentStates>, kNumSegments> initial_intent{};
    std::array<IntentMultipliers, kNumIntentStates> emission_multipliers{};
    std::array<SegmentBaseRates, kNumSegments> base_rates{};
    double count_noise_sigma = 0.22;     // lognormal sigma on count features
    double balance_noise_sigma = 0.20;   // lognormal sigma on currency features
    // Customer-level random effect in the page-view noise: each customer draws
    // one persistent lognormal preference per category, so the dominant
    // category varies within a segment and is observable only in the months.
    double pv_mix_sigma = 1.0;
    double label_noise = 0.1;            // per-field flip probability
    AlignmentWeights alignment_weights;

    static GeneratorConfig defaults();
    // Throws ConfigError naming the offending row / field.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

std::vector<CustomerStatic> generate_static(const GeneratorConfig& config);

std::vector<CustomerMonth> generate_trajectories(const std::vector<CustomerStatic>& statics,
                                                 const GeneratorConfig& config);

// Deterministic rule table: (segment, intent, dominant page-view category) ->
// optimal action. Documented in docs/action_rules.md.
PersonalizationAction rule_optimal_action(int segment, IntentState intent, int dominant_category);

// Recency-weighted dominant page-view category over months 1..t for one
// customer (weight = month index); ties broken toward the lower category
// index. `months` must be that customer's rows sorted by month_index.
int dominant_category(const std::vector<const CustomerMonth*>& months, int upto_month);

// Adds PersonalizationAction labels in place (rule table + label noise).
void assign_actions(std::vector<CustomerMonth>& months,
                    const std::vector<CustomerStatic>& statics, const GeneratorConfig& config);

// Adds EngagementOutcome in place.
void simulate_engagement(std::vector<CustomerMonth>& months,
                         const std::vector<CustomerStatic>& statics,
                         const GeneratorConfig& config);

// Alignment score a for one action against the rule-optimal one.
double alignment_score(const PersonalizationAction& action, const PersonalizationAction& optimal,
                       IntentState intent, const AlignmentWeights& w);

// P(sent & opened & clicked & converted) at alignment score a.
double conversion_probability(double a, const AlignmentWeights& w);

Split split_customers(const std::vector<CustomerStatic>& statics,
                      const std::array<double, 3>& ratios, uint64_t seed);

void write_split_json(const std::filesystem::path& path, const Split& split);
Split read_split_json(const std::filesystem::path& path);

// Runs the full generation chain and writes static.csv, temporal.csv,
// truth.csv, split.json into out_dir.
void generate_all(const GeneratorConfig& config, const std::filesystem::path& out_dir);

}  // namespace persona::synthgen
