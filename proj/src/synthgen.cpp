#include "persona/synthgen.hpp"

#include "persona/csv.hpp"
#include "persona/errors.hpp"
#include "persona/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace persona::synthgen {

namespace {

// Substream tags; each (tag, customer) pair is an independent stream.
constexpr uint64_t kStreamStatic = 1;
constexpr uint64_t kStreamTrajectory = 2;
constexpr uint64_t kStreamActionNoise = 3;
constexpr uint64_t kStreamEngagement = 4;
constexpr uint64_t kStreamSplit = 5;

double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-segment static attribute distributions (five archetypes:
// rate-sensitive savers, credit revolvers, digital-first transactors,
// mortgage-focused, dormant low-engagement).
struct StaticProfile {
    double age_mu, age_sd;
    double income_log_mu, income_log_sd;
    double credit_mu, credit_sd;
    double risk_mu, risk_sd;
    double tenure_mu, tenure_sd;
    double digital_mu, digital_sd;
    std::array<double, kNumChannels> pref_weights;  // email, push, sms, in_app
    double p_cc, p_sav, p_loan, p_mort;
};

const std::array<StaticProfile, kNumSegments>& static_profiles() {
    static const std::array<StaticProfile, kNumSegments> profiles = {{
        // rate-sensitive savers
        {61, 5, std::log(75000.0), 0.20, 790, 18, 0.12, 0.05, 150, 22, 0.42, 0.09,
         {0.6, 0.1, 0.1, 0.2}, 0.50, 0.97, 0.10, 0.30},
        // credit revolvers
        {37, 5, std::log(50000.0), 0.22, 595, 24, 0.60, 0.08, 55, 16, 0.62, 0.09,
         {0.3, 0.25, 0.25, 0.2}, 0.97, 0.45, 0.45, 0.15},
        // digital-first transactors
        {27, 3, std::log(68000.0), 0.20, 705, 20, 0.28, 0.06, 26, 9, 0.88, 0.05,
         {0.1, 0.3, 0.05, 0.55}, 0.70, 0.60, 0.15, 0.05},
        // mortgage-focused
        {45, 4, std::log(100000.0), 0.18, 740, 18, 0.22, 0.05, 95, 20, 0.55, 0.09,
         {0.45, 0.15, 0.1, 0.3}, 0.65, 0.70, 0.25, 0.97},
        // dormant low-engagement
        {52, 8, std::log(38000.0), 0.26, 655, 32, 0.42, 0.09, 105, 30, 0.10, 0.05,
         {0.7, 0.05, 0.15, 0.1}, 0.30, 0.55, 0.12, 0.10},
    }};
    return profiles;
}

Level intent_tier(IntentState intent) {
    switch (intent) {
        case IntentState::kHighIntent: return Level::kHigh;
        case IntentState::kConsideration: return Level::kMedium;
        default: return Level::kLow;
    }
}

}  // namespace

GeneratorConfig GeneratorConfig::defaults() {
    GeneratorConfig c;
    c.segment_mixture = {0.22, 0.21, 0.20, 0.17, 0.20};

    using Row = std::array<double, kNumIntentStates>;
    using Mat = std::array<Row, kNumIntentStates>;
    // Sticky chains: monthly intent runs persist for a few months, which is
    // both behaviorally plausible and what makes the smoothed features
    // informative at the month level.
    const Mat steady = {{{0.75, 0.10, 0.02, 0.10, 0.03},
                         {0.10, 0.72, 0.13, 0.03, 0.02},
                         {0.08, 0.12, 0.75, 0.03, 0.02},
                         {0.12, 0.03, 0.01, 0.74, 0.10},
                         {0.05, 0.02, 0.01, 0.14, 0.78}}};
    const Mat churny = {{{0.72, 0.10, 0.02, 0.08, 0.08},
                         {0.10, 0.70, 0.12, 0.03, 0.05},
                         {0.08, 0.12, 0.72, 0.03, 0.05},
                         {0.10, 0.03, 0.01, 0.70, 0.16},
                         {0.04, 0.02, 0.01, 0.11, 0.82}}};
    const Mat engaged = {{{0.70, 0.15, 0.03, 0.09, 0.03},
                          {0.08, 0.72, 0.15, 0.03, 0.02},
                          {0.06, 0.12, 0.78, 0.02, 0.02},
                          {0.15, 0.05, 0.02, 0.68, 0.10},
                          {0.08, 0.04, 0.02, 0.12, 0.74}}};
    const Mat dormant = {{{0.62, 0.05, 0.01, 0.24, 0.08},
                          {0.12, 0.62, 0.08, 0.12, 0.06},
                          {0.08, 0.15, 0.60, 0.10, 0.07},
                          {0.05, 0.02, 0.01, 0.80, 0.12},
                          {0.03, 0.02, 0.01, 0.18, 0.76}}};
    c.transition_matrices = {steady, churny, engaged, steady, dormant};

    c.initial_intent = {{{0.35, 0.25, 0.15, 0.18, 0.07},
                         {0.32, 0.25, 0.15, 0.16, 0.12},
                         {0.30, 0.28, 0.20, 0.15, 0.07},
                         {0.35, 0.25, 0.15, 0.18, 0.07},
                         {0.15, 0.08, 0.04, 0.60, 0.13}}};

    c.emission_multipliers = {{
        {1.00, 1.00, 1.00, 1.00, 1.00, 1.0},   // BROWSING
        {1.45, 2.20, 1.10, 1.00, 1.00, 1.0},   // CONSIDERATION
        {2.20, 5.00, 2.20, 1.00, 1.00, 1.0},   // HIGH_INTENT
        {0.30, 0.25, 0.50, 0.95, 1.00, 1.0},   // DORMANT
        {0.55, 0.45, 0.40, 0.50, 1.00, 8.0},   // CHURN_RISK
    }};

    // Activity scales are deliberately uniform across archetypes: engagement
    // level is driven by the intent state, while segment identity lives in the
    // page-view mix, balances, and static attributes.
    c.base_rates = {{
        {10, 16, {3.0, 2.0, 2.0, 6.0, 3.0}, 1800, 30000, 3000, 0.02},    // savers
        {10, 16, {6.0, 3.0, 2.0, 3.0, 2.0}, 1800, 4000, 9000, 0.10},     // revolvers
        {10, 16, {3.5, 2.0, 2.0, 3.0, 5.5}, 1800, 12000, 4000, 0.03},    // digital-first
        {10, 16, {2.5, 3.0, 5.5, 3.0, 2.0}, 1800, 9000, 180000, 0.04},   // mortgage-focused
        {10, 16, {3.2, 2.8, 2.6, 4.0, 2.9}, 1800, 2500, 1500, 0.06},     // dormant
    }};
    return c;
}

void GeneratorConfig::validate() const {
    if (n_customers < 0) throw ConfigError("n_customers must be >= 0");
    if (k_months < 1) throw ConfigError("k_months must be >= 1");
    double mix = 0;
    for (double m : segment_mixture) mix += m;
    if (std::abs(mix - 1.0) > 1e-12) throw ConfigError("segment_mixture does not sum to 1");
    for (int s = 0; s < kNumSegments; ++s) {
        for (int i = 0; i < kNumIntentStates; ++i) {
            double sum = 0;
            for (double v : transition_matrices[s][i]) {
                if (v < 0) throw ConfigError("negative transition probability in segment " +
                                             std::to_string(s) + " row " + std::to_string(i));
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw ConfigError("transition matrix for segment " + std::to_string(s) + " row " +
                                  std::to_string(i) + " sums to " + format_double(sum));
        }
        double init = 0;
        for (double v : initial_intent[s]) init += v;
        if (std::abs(init - 1.0) > 1e-12)
            throw ConfigError("initial intent distribution for segment " + std::to_string(s) +
                              " does not sum to 1");
    }
    if (label_noise < 0 || label_noise > 1) throw ConfigError("label_noise outside [0,1]");
    if (count_noise_sigma < 0 || balance_noise_sigma < 0 || pv_mix_sigma < 0)
        throw ConfigError("noise sigmas must be non-negative");
}

std::vector<CustomerStatic> generate_static(const GeneratorConfig& config) {
    config.validate();
    const auto& profiles = static_profiles();
    Rng base(config.seed);
    std::vector<CustomerStatic> out;
    out.reserve(static_cast<size_t>(config.n_customers));
    for (int64_t id = 0; id < config.n_customers; ++id) {
        Rng rng = base.substream(kStreamStatic).substream(static_cast<uint64_t>(id));
        CustomerStatic s;
        s.customer_id = id;
        s.true_segment = rng.categorical(config.segment_mixture);
        const StaticProfile& p = profiles[s.true_segment];
        s.age = clip(rng.normal(p.age_mu, p.age_sd), 18, 85);
        s.income = rng.lognormal(p.income_log_mu, p.income_log_sd);
        s.credit_score = static_cast<int>(clip(std::round(rng.normal(p.credit_mu, p.credit_sd)),
                                               300, 850));
        s.risk_score = clip(rng.normal(p.risk_mu, p.risk_sd), 0, 1);
        s.tenure_months = static_cast<int>(
            std::max(0.0, std::round(rng.normal(p.tenure_mu, p.tenure_sd))));
        s.digital_engagement_index = clip(rng.normal(p.digital_mu, p.digital_sd), 0, 1);
        s.region = static_cast<int>(rng.uniform_int(kNumRegions));
        s.channel_pref = static_cast<Channel>(rng.categorical(p.pref_weights));
        s.holds_credit_card = rng.bernoulli(p.p_cc);
        s.holds_savings = rng.bernoulli(p.p_sav);
        s.holds_personal_loan = rng.bernoulli(p.p_loan);
        s.holds_mortgage = rng.bernoulli(p.p_mort);
        out.push_back(s);
    }
    return out;
}

std::vector<CustomerMonth> generate_trajectories(const std::vector<CustomerStatic>& statics,
                                                 const GeneratorConfig& config) {
    config.validate();
    Rng base(config.seed);
    std::vector<CustomerMonth> out;
    out.reserve(statics.size() * static_cast<size_t>(config.k_months));
    // Lognormal noise with unit mean: mu = -sigma^2/2.
    const double cmu = -config.count_noise_sigma * config.count_noise_sigma / 2.0;
    const double bmu = -config.balance_noise_sigma * config.balance_noise_sigma / 2.0;
    for (const auto& s : statics) {
        if (s.true_segment < 0 || s.true_segment >= kNumSegments)
            throw DataError("unknown segment id " + std::to_string(s.true_segment) +
                            " for customer " + std::to_string(s.customer_id));
        Rng rng = base.substream(kStreamTrajectory).substream(static_cast<uint64_t>(s.customer_id));
        const auto& trans = config.transition_matrices[s.true_segment];
        const auto& rates = config.base_rates[s.true_segment];
        // Persistent customer-level component of the page-view noise.
        const double pmu = -config.pv_mix_sigma * config.pv_mix_sigma / 2.0;
        std::array<double, 5> pv_pref;
        for (double& p : pv_pref) p = rng.lognormal(pmu, config.pv_mix_sigma);
        int state = rng.categorical(config.initial_intent[s.true_segment]);
        for (int month = 1; month <= config.k_months; ++month) {
            if (month > 1) state = rng.categorical(trans[state]);
            const IntentMultipliers& m = config.emission_multipliers[state];
            CustomerMonth row;
            row.customer_id = s.customer_id;
            row.month_index = month;
            row.true_intent = static_cast<IntentState>(state);
            auto count = [&](double rate) {
                return static_cast<int>(std::max(
                    0.0, std::round(rate * rng.lognormal(cmu, config.count_noise_sigma))));
            };
            auto money = [&](double rate) {
                return rate * rng.lognormal(bmu, config.balance_noise_sigma);
            };
            row.logins = count(rates.logins * m.activity);
            row.sessions = count(rates.sessions * m.activity);
            row.page_views_card = count(rates.page_views[0] * pv_pref[0] * m.page_views);
            row.page_views_loan = count(rates.page_views[1] * pv_pref[1] * m.page_views);
            row.page_views_mortgage = count(rates.page_views[2] * pv_pref[2] * m.page_views);
            row.page_views_savings = count(rates.page_views[3] * pv_pref[3] * m.page_views);
            row.page_views_invest = count(rates.page_views[4] * pv_pref[4] * m.page_views);
            row.card_spend = money(rates.card_spend * m.card_spend);
            row.savings_balance = money(rates.savings_balance * m.savings_balance);
            row.loan_balance = money(rates.loan_balance * m.loan_balance);
            row.delinquency_flag = rng.bernoulli(clip(rates.delinquency_prob * m.delinquency, 0, 1));
            out.push_back(row);
        }
    }
    return out;
}

int dominant_category(const std::vector<const CustomerMonth*>& months, int upto_month) {
    std::array<double, 5> score{};
    for (const CustomerMonth* m : months) {
        if (m->month_index > upto_month) continue;
        double w = static_cast<double>(m->month_index);
        score[0] += w * m->page_views_card;
        score[1] += w * m->page_views_loan;
        score[2] += w * m->page_views_mortgage;
        score[3] += w * m->page_views_savings;
        score[4] += w * m->page_views_invest;
    }
    int best = 0;
    for (int c = 1; c < 5; ++c)
        if (score[c] > score[best]) best = c;
    return best;
}

PersonalizationAction rule_optimal_action(int segment, IntentState intent, int dominant) {
    PersonalizationAction a;

    // Product: page-view category mapping with CD overrides for
    // savings-oriented low-readiness customers. See docs/action_rules.md.
    static const std::array<Product, 5> category_product = {
        Product::kCreditCard, Product::kPersonalLoan, Product::kMortgage, Product::kSavings,
        Product::kInvestment};
    if (segment == 4 && intent == IntentState::kDormant) {
        a.product = Product::kCd;
    } else if (dominant == 3 &&
               (intent == IntentState::kDormant || intent == IntentState::kChurnRisk)) {
        a.product = Product::kCd;
    } else {
        a.product = category_product[dominant];
    }

    // Channel: extreme intents force the channel; otherwise it follows what
    // the customer is actually reading (dominant category), with segment
    // adjustments. See docs/action_rules.md.
    if (intent == IntentState::kChurnRisk) {
        a.channel = Channel::kSms;
    } else if (intent == IntentState::kDormant) {
        a.channel = segment == 1 ? Channel::kSms : Channel::kEmail;
    } else if (intent == IntentState::kHighIntent) {
        a.channel = Channel::kPush;
    } else {  // BROWSING / CONSIDERATION: content-led
        switch (dominant) {
            case 0:
            case 1: a.channel = Channel::kInApp; break;   // card, loan
            case 2:
            case 3: a.channel = Channel::kEmail; break;   // mortgage, savings
            default: a.channel = Channel::kPush; break;   // invest
        }
        if (segment == 2 && a.channel == Channel::kEmail) a.channel = Channel::kPush;
        if (segment == 4 && a.channel == Channel::kInApp) a.channel = Channel::kEmail;
    }

    // Timing: readiness-driven at the extremes; content-led in between
    // (rate-watchers act late in the statement cycle).
    switch (intent) {
        case IntentState::kHighIntent:
        case IntentState::kChurnRisk: a.timing = Timing::kEarlyMonth; break;
        case IntentState::kDormant: a.timing = Timing::kLateMonth; break;
        default:
            a.timing = (dominant == 3 || dominant == 4) ? Timing::kLateMonth : Timing::kMidMonth;
            break;
    }

    a.level = intent_tier(intent);
    return a;
}

namespace {

std::unordered_map<int64_t, std::vector<const CustomerMonth*>> group_by_customer(
    const std::vector<CustomerMonth>& months) {
    std::unordered_map<int64_t, std::vector<const CustomerMonth*>> by_customer;
    for (const auto& m : months) by_customer[m.customer_id].push_back(&m);
    for (auto& [id, rows] : by_customer)
        std::sort(rows.begin(), rows.end(), [](const CustomerMonth* a, const CustomerMonth* b) {
            return a->month_index < b->month_index;
        });
    return by_customer;
}

template <typename Enum>
Enum flip_to_alternative(Enum value, int n_values, Rng& rng) {
    int cur = static_cast<int>(value);
    int alt = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_values - 1)));
    if (alt >= cur) ++alt;
    return static_cast<Enum>(alt);
}

}  // namespace

void assign_actions(std::vector<CustomerMonth>& months, const std::vector<CustomerStatic>& statics,
                    const GeneratorConfig& config) {
    std::unordered_map<int64_t, int> segment_of;
    for (const auto& s : statics) segment_of[s.customer_id] = s.true_segment;
    auto by_customer = group_by_customer(months);
    Rng base(config.seed);
    for (auto& row : months) {
        auto seg_it = segment_of.find(row.customer_id);
        if (seg_it == segment_of.end())
            throw DataError("month row for unknown customer " + std::to_string(row.customer_id));
        int dom = dominant_category(by_customer.at(row.customer_id), row.month_index);
        row.action = rule_optimal_action(seg_it->second, row.true_intent, dom);
        // Label noise: each field independently flipped to a uniform alternative.
        Rng rng = base.substream(kStreamActionNoise)
                      .substream(static_cast<uint64_t>(row.customer_id) * 64 +
                                 static_cast<uint64_t>(row.month_index));
        if (rng.bernoulli(config.label_noise))
            row.action.product = flip_to_alternative(row.action.product, kNumProducts, rng);
        if (rng.bernoulli(config.label_noise))
            row.action.channel = flip_to_alternative(row.action.channel, kNumChannels, rng);
        if (rng.bernoulli(config.label_noise))
            row.action.timing = flip_to_alternative(row.action.timing, kNumTimings, rng);
        if (rng.bernoulli(config.label_noise))
            row.action.level = flip_to_alternative(row.action.level, kNumLevels, rng);
    }
}

double alignment_score(const PersonalizationAction& action, const PersonalizationAction& optimal,
                       IntentState intent, const AlignmentWeights& w) {
    double a = 0.0;
    if (action.product == optimal.product) a += w.w_product;
    if (action.channel == optimal.channel) a += w.w_channel;
    if (action.timing == optimal.timing) a += w.w_timing;
    if (intent == IntentState::kHighIntent || intent == IntentState::kConsideration)
        a += w.w_intent;
    if (action.level == intent_tier(intent)) a += w.w_level;
    return a;
}

double conversion_probability(double a, const AlignmentWeights& w) {
    return sigmoid(w.open_intercept + w.open_slope * a) *
           sigmoid(w.click_intercept + w.click_slope * a) *
           sigmoid(w.conv_intercept + w.conv_slope * a);
}

void simulate_engagement(std::vector<CustomerMonth>& months,
                         const std::vector<CustomerStatic>& statics,
                         const GeneratorConfig& config) {
    std::unordered_map<int64_t, int> segment_of;
    for (const auto& s : statics) segment_of[s.customer_id] = s.true_segment;
    auto by_customer = group_by_customer(months);
    const AlignmentWeights& w = config.alignment_weights;
    Rng base(config.seed);
    for (auto& row : months) {
        int seg = segment_of.at(row.customer_id);
        int dom = dominant_category(by_customer.at(row.customer_id), row.month_index);
        PersonalizationAction optimal = rule_optimal_action(seg, row.true_intent, dom);
        double a = alignment_score(row.action, optimal, row.true_intent, w);

        Rng rng = base.substream(kStreamEngagement)
                      .substream(static_cast<uint64_t>(row.customer_id) * 64 +
                                 static_cast<uint64_t>(row.month_index));
        row.engagement.sent = true;
        row.engagement.opened = rng.bernoulli(sigmoid(w.open_intercept + w.open_slope * a));
        row.engagement.clicked =
            row.engagement.opened && rng.bernoulli(sigmoid(w.click_intercept + w.click_slope * a));
        row.engagement.converted =
            row.engagement.clicked && rng.bernoulli(sigmoid(w.conv_intercept + w.conv_slope * a));
    }
}

Split split_customers(const std::vector<CustomerStatic>& statics,
                      const std::array<double, 3>& ratios, uint64_t seed) {
    double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("split ratios sum to " + format_double(total) + ", expected 1");
    std::vector<int64_t> ids;
    ids.reserve(statics.size());
    for (const auto& s : statics) ids.push_back(s.customer_id);
    std::sort(ids.begin(), ids.end());
    Rng rng = Rng(seed).substream(kStreamSplit);
    auto perm = rng.permutation(ids.size());
    size_t n = ids.size();
    size_t n_train = static_cast<size_t>(std::floor(n * ratios[0] + 0.5));
    size_t n_train_val = static_cast<size_t>(std::floor(n * (ratios[0] + ratios[1]) + 0.5));
    Split split;
    for (size_t i = 0; i < n; ++i) {
        int64_t id = ids[perm[i]];
        if (i < n_train) split.train_ids.push_back(id);
        else if (i < n_train_val) split.val_ids.push_back(id);
        else split.test_ids.push_back(id);
    }
    std::sort(split.train_ids.begin(), split.train_ids.end());
    std::sort(split.val_ids.begin(), split.val_ids.end());
    std::sort(split.test_ids.begin(), split.test_ids.end());
    return split;
}

void write_split_json(const std::filesystem::path& path, const Split& split) {
    nlohmann::json j;
    j["train_ids"] = split.train_ids;
    j["val_ids"] = split.val_ids;
    j["test_ids"] = split.test_ids;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(0) << '\n';
}

Split read_split_json(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StageDependencyError("missing file: " + path.string());
    nlohmann::json j = nlohmann::json::parse(f);
    Split split;
    split.train_ids = j.at("train_ids").get<std::vector<int64_t>>();
    split.val_ids = j.at("val_ids").get<std::vector<int64_t>>();
    split.test_ids = j.at("test_ids").get<std::vector<int64_t>>();
    return split;
}

void generate_all(const GeneratorConfig& config, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    auto statics = generate_static(config);
    auto months = generate_trajectories(statics, config);
    assign_actions(months, statics, config);
    simulate_engagement(months, statics, config);
    Split split = split_customers(statics, {0.70, 0.15, 0.15}, config.seed);
    write_static_csv(out_dir / "static.csv", statics);
    write_temporal_csv(out_dir / "temporal.csv", months);
    write_truth_csv(out_dir / "truth.csv", statics, months);
    write_split_json(out_dir / "split.json", split);
}

}  // namespace persona::synthgen
