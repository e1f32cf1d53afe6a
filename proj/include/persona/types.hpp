#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace persona {

// ---------------------------------------------------------------------------
// Closed vocabularies
// ---------------------------------------------------------------------------

enum class IntentState : int {
    kBrowsing = 0,
    kConsideration = 1,
    kHighIntent = 2,
    kDormant = 3,
    kChurnRisk = 4,
};
inline constexpr int kNumIntentStates = 5;

enum class Product : int {
    kCreditCard = 0,
    kSavings = 1,
    kPersonalLoan = 2,
    kMortgage = 3,
    kInvestment = 4,
    kCd = 5,
};
inline constexpr int kNumProducts = 6;

enum class Channel : int { kEmail = 0, kPush = 1, kSms = 2, kInApp = 3 };
inline constexpr int kNumChannels = 4;

enum class Timing : int { kEarlyMonth = 0, kMidMonth = 1, kLateMonth = 2 };
inline constexpr int kNumTimings = 3;

enum class Level : int { kLow = 0, kMedium = 1, kHigh = 2 };
inline constexpr int kNumLevels = 3;

inline constexpr int kNumSegments = 5;
inline constexpr int kNumRegions = 5;

const std::string& to_string(IntentState s);
const std::string& to_string(Product p);
const std::string& to_string(Channel c);
const std::string& to_string(Timing t);
const std::string& to_string(Level l);
const std::string& region_name(int region);

IntentState intent_from_string(const std::string& s);
Product product_from_string(const std::string& s);
Channel channel_from_string(const std::string& s);
Timing timing_from_string(const std::string& s);
Level level_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct PersonalizationAction {
    Product product = Product::kCreditCard;
    Channel channel = Channel::kEmail;
    Timing timing = Timing::kEarlyMonth;
    Level level = Level::kLow;

    bool operator==(const PersonalizationAction&) const = default;
};

struct EngagementOutcome {
    bool sent = false;
    bool opened = false;
    bool clicked = false;
    bool converted = false;

    bool funnel_ok() const {
        return (!converted || clicked) && (!clicked || opened) && (!opened || sent);
    }
};

struct CustomerStatic {
    int64_t customer_id = 0;
    double age = 0;
    double income = 0;
    int credit_score = 0;
    double risk_score = 0;
    int tenure_months = 0;
    double digital_engagement_index = 0;
    int region = 0;                      // 0..4
    Channel channel_pref = Channel::kEmail;
    bool holds_credit_card = false;
    bool holds_savings = false;
    bool holds_personal_loan = false;
    bool holds_mortgage = false;
    int true_segment = 0;                // validation sidecar only
};

// Temporal behavioral feature order used everywhere a feature matrix is built.
inline constexpr int kNumTemporalFeatures = 11;
extern const std::array<std::string, kNumTemporalFeatures> kTemporalFeatureNames;

struct CustomerMonth {
    int64_t customer_id = 0;
    int month_index = 0;                 // 1..K
    int logins = 0;
    int sessions = 0;
    int page_views_card = 0;
    int page_views_loan = 0;
    int page_views_mortgage = 0;
    int page_views_savings = 0;
    int page_views_invest = 0;
    double card_spend = 0;
    double savings_balance = 0;
    double loan_balance = 0;
    bool delinquency_flag = false;
    IntentState true_intent = IntentState::kBrowsing;  // validation sidecar only
    PersonalizationAction action;
    EngagementOutcome engagement;

    // Feature vector in kTemporalFeatureNames order.
    std::array<double, kNumTemporalFeatures> features() const;
};

struct Split {
    std::vector<int64_t> train_ids;
    std::vector<int64_t> val_ids;
    std::vector<int64_t> test_ids;
};

}  // namespace persona
