#include "persona/evalharness.hpp"

#include "persona/csv.hpp"
#include "persona/errors.hpp"
#include "persona/rng.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace persona::evalharness {

namespace {

const std::array<const char*, 4> kHeadNames = {"product", "channel", "timing", "level"};

std::array<int, 4> predicted_labels(const personalizer::PersonalizerModel& model,
                                    const personalizer::Item& item) {
    auto rec = personalizer::predict(model, item);
    return {static_cast<int>(rec.predicted.product), static_cast<int>(rec.predicted.channel),
            static_cast<int>(rec.predicted.timing), static_cast<int>(rec.predicted.level)};
}

RunReport report_from_labels(const std::array<std::vector<int>, 4>& preds,
                             const std::array<std::vector<int>, 4>& truth,
                             const std::array<int, 4>& n_classes, const std::string& setting) {
    RunReport rep;
    rep.setting = setting;
    double total = 0;
    for (int h = 0; h < 4; ++h) {
        HeadReport& hr = rep.heads[h];
        hr.head = kHeadNames[h];
        hr.per_class_f1 = per_class_f1(preds[h], truth[h], n_classes[h]);
        hr.macro_f1 = 0;
        for (double f : hr.per_class_f1) hr.macro_f1 += f;
        hr.macro_f1 /= hr.per_class_f1.size();
        int correct = 0;
        for (size_t i = 0; i < preds[h].size(); ++i)
            if (preds[h][i] == truth[h][i]) ++correct;
        hr.accuracy = static_cast<double>(correct) / preds[h].size();
        total += hr.macro_f1;
    }
    rep.overall = total / 4.0;
    return rep;
}

}  // namespace

std::vector<double> per_class_f1(const std::vector<int>& preds, const std::vector<int>& truth,
                                 int n_classes) {
    if (preds.empty()) throw DataError("per_class_f1: empty input");
    if (preds.size() != truth.size()) throw DataError("per_class_f1: length mismatch");
    if (n_classes < 1) throw DataError("per_class_f1: n_classes must be >= 1");
    std::vector<int> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
    for (size_t i = 0; i < preds.size(); ++i) {
        int p = preds[i], t = truth[i];
        if (p < 0 || p >= n_classes || t < 0 || t >= n_classes)
            throw DataError("per_class_f1: label out of range");
        if (p == t) {
            ++tp[p];
        } else {
            ++fp[p];
            ++fn[t];
        }
    }
    std::vector<double> f1(n_classes, 0.0);
    for (int c = 0; c < n_classes; ++c) {
        double denom = 2.0 * tp[c] + fp[c] + fn[c];
        // Zero-support and zero-prediction classes contribute 0 by convention.
        f1[c] = denom > 0 ? 2.0 * tp[c] / denom : 0.0;
    }
    return f1;
}

double macro_f1(const std::vector<int>& preds, const std::vector<int>& truth, int n_classes) {
    auto f1 = per_class_f1(preds, truth, n_classes);
    double total = 0;
    for (double f : f1) total += f;
    return total / n_classes;
}

RunReport evaluate(const personalizer::PersonalizerModel& model,
                   const std::vector<personalizer::Item>& test_items,
                   const std::string& setting) {
    if (test_items.empty()) throw DataError("evaluate: empty test set");
    std::array<std::vector<int>, 4> preds, truth;
    for (const auto& item : test_items) {
        auto p = predicted_labels(model, item);
        for (int h = 0; h < 4; ++h) {
            preds[h].push_back(p[h]);
            truth[h].push_back(item.labels[h]);
        }
    }
    return report_from_labels(preds, truth, model.config.head_sizes, setting);
}

RunReport shuffle_test(const personalizer::PersonalizerModel& model,
                       const std::vector<personalizer::Item>& test_items, uint64_t seed,
                       const std::string& setting) {
    if (!model.config.use_temporal)
        throw ProtocolError("shuffle_test applies only to temporal models");
    if (test_items.empty()) throw DataError("shuffle_test: empty test set");
    Rng base(seed);
    std::array<std::vector<int>, 4> preds, truth;
    for (const auto& item : test_items) {
        personalizer::Item shuffled = item;
        auto perm =
            base.substream(static_cast<uint64_t>(item.customer_id)).permutation(item.temporal.rows());
        for (Eigen::Index t = 0; t < item.temporal.rows(); ++t)
            shuffled.temporal.row(t) = item.temporal.row(static_cast<Eigen::Index>(perm[t]));
        auto p = predicted_labels(model, shuffled);
        for (int h = 0; h < 4; ++h) {
            preds[h].push_back(p[h]);
            truth[h].push_back(item.labels[h]);
        }
    }
    return report_from_labels(preds, truth, model.config.head_sizes, setting);
}

std::vector<AblationSpec> standard_ablations() {
    return {{"Full Model", true, true, true},
            {"No-Intent", false, true, true},
            {"No-Segment", true, false, true},
            {"No-Temporal", true, true, false}};
}

std::vector<RunReport> run_ablations(const std::vector<personalizer::Item>& train_items,
                                     const std::vector<personalizer::Item>& val_items,
                                     const std::vector<personalizer::Item>& test_items,
                                     const personalizer::ModelConfig& base_model,
                                     const personalizer::TrainConfig& train_cfg,
                                     const std::vector<AblationSpec>& specs) {
    std::vector<RunReport> rows;
    for (const auto& spec : specs) {
        personalizer::ModelConfig cfg = base_model;
        cfg.use_intent = spec.use_intent;
        cfg.use_segment = spec.use_segment;
        cfg.use_temporal = spec.use_temporal;
        auto result = personalizer::train(train_items, val_items, cfg, train_cfg);
        rows.push_back(evaluate(result.model, test_items, spec.name));
    }
    return rows;
}

void write_table2_csv(const std::filesystem::path& path, const std::vector<RunReport>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << "setting,product,channel,timing,level,overall\n";
    for (const auto& r : rows) {
        f << r.setting;
        for (const auto& h : r.heads) f << ',' << format_double(h.macro_f1);
        f << ',' << format_double(r.overall) << '\n';
    }
}

std::vector<RunReport> read_table2_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StageDependencyError("missing file: " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw DataError("empty table: " + path.string());
    std::vector<RunReport> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        RunReport r;
        std::getline(ss, r.setting, ',');
        for (int h = 0; h < 4; ++h) {
            if (!std::getline(ss, field, ',')) throw DataError("malformed table row: " + line);
            r.heads[h].head = std::string(kHeadNames[h]);
            r.heads[h].macro_f1 = std::stod(field);
        }
        if (!std::getline(ss, field, ',')) throw DataError("malformed table row: " + line);
        r.overall = std::stod(field);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string format_report_text(const std::vector<RunReport>& rows) {
    std::ostringstream out;
    out << "Predictive performance (macro-F1)\n";
    out << "---------------------------------\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s %8s %8s %8s %8s %8s\n", "setting", "product",
                  "channel", "timing", "level", "overall");
    out << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-16s %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                      r.setting.c_str(), r.heads[0].macro_f1, r.heads[1].macro_f1,
                      r.heads[2].macro_f1, r.heads[3].macro_f1, r.overall);
        out << buf;
    }
    return out.str();
}

}  // namespace persona::evalharness
