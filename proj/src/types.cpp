#include "persona/types.hpp"

#include "persona/errors.hpp"

#include <algorithm>

namespace persona {

namespace {

const std::array<std::string, kNumIntentStates> kIntentNames = {
    "BROWSING", "CONSIDERATION", "HIGH_INTENT", "DORMANT", "CHURN_RISK"};
const std::array<std::string, kNumProducts> kProductNames = {
    "credit_card", "savings", "personal_loan", "mortgage", "investment", "cd"};
const std::array<std::string, kNumChannels> kChannelNames = {"email", "push", "sms", "in_app"};
const std::array<std::string, kNumTimings> kTimingNames = {"early_month", "mid_month",
                                                           "late_month"};
const std::array<std::string, kNumLevels> kLevelNames = {"low", "medium", "high"};
const std::array<std::string, kNumRegions> kRegionNames = {"northeast", "southeast", "midwest",
                                                           "southwest", "west"};

template <size_t N>
int index_of(const std::array<std::string, N>& names, const std::string& s, const char* what) {
    auto it = std::find(names.begin(), names.end(), s);
    if (it == names.end()) throw DataError(std::string("unknown ") + what + ": " + s);
    return static_cast<int>(it - names.begin());
}

}  // namespace

const std::array<std::string, kNumTemporalFeatures> kTemporalFeatureNames = {
    "logins",       "sessions",        "page_views_card", "page_views_loan",
    "page_views_mortgage", "page_views_savings", "page_views_invest",
    "card_spend",   "savings_balance", "loan_balance",    "delinquency_flag"};

const std::string& to_string(IntentState s) { return kIntentNames[static_cast<int>(s)]; }
const std::string& to_string(Product p) { return kProductNames[static_cast<int>(p)]; }
const std::string& to_string(Channel c) { return kChannelNames[static_cast<int>(c)]; }
const std::string& to_string(Timing t) { return kTimingNames[static_cast<int>(t)]; }
const std::string& to_string(Level l) { return kLevelNames[static_cast<int>(l)]; }
const std::string& region_name(int region) { return kRegionNames[region]; }

IntentState intent_from_string(const std::string& s) {
    return static_cast<IntentState>(index_of(kIntentNames, s, "intent state"));
}
Product product_from_string(const std::string& s) {
    return static_cast<Product>(index_of(kProductNames, s, "product"));
}
Channel channel_from_string(const std::string& s) {
    return static_cast<Channel>(index_of(kChannelNames, s, "channel"));
}
Timing timing_from_string(const std::string& s) {
    return static_cast<Timing>(index_of(kTimingNames, s, "timing"));
}
Level level_from_string(const std::string& s) {
    return static_cast<Level>(index_of(kLevelNames, s, "level"));
}

std::array<double, kNumTemporalFeatures> CustomerMonth::features() const {
    return {static_cast<double>(logins),
            static_cast<double>(sessions),
            static_cast<double>(page_views_card),
            static_cast<double>(page_views_loan),
            static_cast<double>(page_views_mortgage),
            static_cast<double>(page_views_savings),
            static_cast<double>(page_views_invest),
            card_spend,
            savings_balance,
            loan_balance,
            delinquency_flag ? 1.0 : 0.0};
}

}  // namespace persona
