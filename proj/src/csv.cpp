#include "persona/csv.hpp"

#include "persona/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace persona {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path.string());
    return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StageDependencyError("missing file: " + path.string());
    return f;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
    auto f = open_in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        rows.push_back(split_line(line));
    }
    return rows;
}

void write_static_csv(const std::filesystem::path& path, const std::vector<CustomerStatic>& rows) {
    auto f = open_out(path);
    f << "customer_id,age,income,credit_score,risk_score,tenure_months,"
         "digital_engagement_index,region,channel_pref,holds_credit_card,holds_savings,"
         "holds_personal_loan,holds_mortgage\n";
    for (const auto& r : rows) {
        f << r.customer_id << ',' << format_double(r.age) << ',' << format_double(r.income) << ','
          << r.credit_score << ',' << format_double(r.risk_score) << ',' << r.tenure_months << ','
          << format_double(r.digital_engagement_index) << ',' << region_name(r.region) << ','
          << to_string(r.channel_pref) << ',' << int(r.holds_credit_card) << ','
          << int(r.holds_savings) << ',' << int(r.holds_personal_loan) << ','
          << int(r.holds_mortgage) << '\n';
    }
}

std::vector<CustomerStatic> read_static_csv(const std::filesystem::path& path) {
    auto rows = read_csv_rows(path);
    if (rows.empty()) throw DataError("empty static csv: " + path.string());
    std::vector<CustomerStatic> out;
    out.reserve(rows.size() - 1);
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& c = rows[i];
        if (c.size() != 13) throw DataError("static csv: bad column count at row " + std::to_string(i));
        CustomerStatic s;
        s.customer_id = std::stoll(c[0]);
        s.age = std::stod(c[1]);
        s.income = std::stod(c[2]);
        s.credit_score = std::stoi(c[3]);
        s.risk_score = std::stod(c[4]);
        s.tenure_months = std::stoi(c[5]);
        s.digital_engagement_index = std::stod(c[6]);
        for (int r = 0; r < kNumRegions; ++r)
            if (region_name(r) == c[7]) s.region = r;
        s.channel_pref = channel_from_string(c[8]);
        s.holds_credit_card = c[9] == "1";
        s.holds_savings = c[10] == "1";
        s.holds_personal_loan = c[11] == "1";
        s.holds_mortgage = c[12] == "1";
        s.true_segment = -1;  // not present in training-visible file
        out.push_back(s);
    }
    return out;
}

void write_temporal_csv(const std::filesystem::path& path, const std::vector<CustomerMonth>& rows) {
    auto f = open_out(path);
    f << "customer_id,month_index,logins,sessions,page_views_card,page_views_loan,"
         "page_views_mortgage,page_views_savings,page_views_invest,card_spend,savings_balance,"
         "loan_balance,delinquency_flag,action_product,action_channel,action_timing,action_level,"
         "sent,opened,clicked,converted\n";
    for (const auto& r : rows) {
        f << r.customer_id << ',' << r.month_index << ',' << r.logins << ',' << r.sessions << ','
          << r.page_views_card << ',' << r.page_views_loan << ',' << r.page_views_mortgage << ','
          << r.page_views_savings << ',' << r.page_views_invest << ','
          << format_double(r.card_spend) << ',' << format_double(r.savings_balance) << ','
          << format_double(r.loan_balance) << ',' << int(r.delinquency_flag) << ','
          << to_string(r.action.product) << ',' << to_string(r.action.channel) << ','
          << to_string(r.action.timing) << ',' << to_string(r.action.level) << ','
          << int(r.engagement.sent) << ',' << int(r.engagement.opened) << ','
          << int(r.engagement.clicked) << ',' << int(r.engagement.converted) << '\n';
    }
}

std::vector<CustomerMonth> read_temporal_csv(const std::filesystem::path& path) {
    auto rows = read_csv_rows(path);
    if (rows.empty()) throw DataError("empty temporal csv: " + path.string());
    std::vector<CustomerMonth> out;
    out.reserve(rows.size() - 1);
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& c = rows[i];
        if (c.size() != 21)
            throw DataError("temporal csv: bad column count at row " + std::to_string(i));
        CustomerMonth m;
        m.customer_id = std::stoll(c[0]);
        m.month_index = std::stoi(c[1]);
        m.logins = std::stoi(c[2]);
        m.sessions = std::stoi(c[3]);
        m.page_views_card = std::stoi(c[4]);
        m.page_views_loan = std::stoi(c[5]);
        m.page_views_mortgage = std::stoi(c[6]);
        m.page_views_savings = std::stoi(c[7]);
        m.page_views_invest = std::stoi(c[8]);
        m.card_spend = std::stod(c[9]);
        m.savings_balance = std::stod(c[10]);
        m.loan_balance = std::stod(c[11]);
        m.delinquency_flag = c[12] == "1";
        m.action.product = product_from_string(c[13]);
        m.action.channel = channel_from_string(c[14]);
        m.action.timing = timing_from_string(c[15]);
        m.action.level = level_from_string(c[16]);
        m.engagement.sent = c[17] == "1";
        m.engagement.opened = c[18] == "1";
        m.engagement.clicked = c[19] == "1";
        m.engagement.converted = c[20] == "1";
        out.push_back(m);
    }
    return out;
}

void write_truth_csv(const std::filesystem::path& path, const std::vector<CustomerStatic>& statics,
                     const std::vector<CustomerMonth>& months) {
    std::unordered_map<int64_t, int> seg;
    seg.reserve(statics.size());
    for (const auto& s : statics) seg[s.customer_id] = s.true_segment;
    auto f = open_out(path);
    f << "customer_id,month_index,true_segment,true_intent\n";
    for (const auto& m : months) {
        auto it = seg.find(m.customer_id);
        if (it == seg.end()) throw DataError("truth: month row without static row");
        f << m.customer_id << ',' << m.month_index << ',' << it->second << ','
          << to_string(m.true_intent) << '\n';
    }
}

std::vector<TruthRow> read_truth_csv(const std::filesystem::path& path) {
    auto rows = read_csv_rows(path);
    if (rows.empty()) throw DataError("empty truth csv: " + path.string());
    std::vector<TruthRow> out;
    out.reserve(rows.size() - 1);
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& c = rows[i];
        if (c.size() != 4) throw DataError("truth csv: bad column count at row " + std::to_string(i));
        out.push_back({std::stoll(c[0]), std::stoi(c[1]), std::stoi(c[2]),
                       intent_from_string(c[3])});
    }
    return out;
}

}  // namespace persona
