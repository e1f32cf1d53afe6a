#include "persona/evalharness.hpp"

#include "persona/errors.hpp"
#include "persona/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

using namespace persona;
using namespace persona::evalharness;
using personalizer::Item;
using personalizer::ModelConfig;
using personalizer::PersonalizerModel;

namespace {

// Independent confusion-matrix implementation of macro-F1.
double macro_f1_oracle(const std::vector<int>& preds, const std::vector<int>& truth, int c) {
    std::vector<double> tp(c, 0), fp(c, 0), fn(c, 0);
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == truth[i])
            tp[preds[i]] += 1;
        else {
            fp[preds[i]] += 1;
            fn[truth[i]] += 1;
        }
    }
    double total = 0;
    for (int k = 0; k < c; ++k) {
        double denom = 2 * tp[k] + fp[k] + fn[k];
        total += denom > 0 ? 2 * tp[k] / denom : 0.0;
    }
    return total / c;
}

ModelConfig tiny_config(uint64_t seed) {
    ModelConfig cfg;
    cfg.f_features = 3;
    cfg.s_features = 16;
    cfg.k_months = 3;
    cfg.d_proj = 4;
    cfg.d_hidden = 4;
    cfg.d_attn = 4;
    cfg.d_embed = 2;
    cfg.d_trunk = 16;
    cfg.dropout = 0.0;
    cfg.seed = seed;
    return cfg;
}

Item random_item(const ModelConfig& cfg, Rng& rng) {
    Item item;
    item.customer_id = static_cast<int64_t>(rng.uniform_int(1000000));
    item.month_index = cfg.k_months;
    item.temporal = Eigen::MatrixXd::Zero(cfg.k_months, cfg.f_features);
    for (int t = 0; t < cfg.k_months; ++t)
        for (int f = 0; f < cfg.f_features; ++f) item.temporal(t, f) = rng.normal();
    item.statics = Eigen::VectorXd::Zero(cfg.s_features);
    for (int s = 0; s < cfg.s_features; ++s) item.statics(s) = rng.normal();
    item.segment_id = static_cast<int>(rng.uniform_int(kNumSegments));
    item.intent_id = static_cast<int>(rng.uniform_int(kNumIntentStates));
    item.labels = {static_cast<int>(rng.uniform_int(kNumProducts)),
                   static_cast<int>(rng.uniform_int(kNumChannels)),
                   static_cast<int>(rng.uniform_int(kNumTimings)),
                   static_cast<int>(rng.uniform_int(kNumLevels))};
    return item;
}

// A model whose heads read the label one-hots straight out of the static
// block: statics = [product onehot6 | channel onehot4 | timing onehot3 |
// level onehot3] and everything else contributes zero.
PersonalizerModel oracle_model(const ModelConfig& cfg) {
    PersonalizerModel model = PersonalizerModel::init(cfg);
    for (auto& [name, p] : model.params) p.setZero();
    const int off = 2 * cfg.d_hidden;  // statics start after the pooled block
    auto& trunk_W = model.params.at("trunk_W");
    for (int i = 0; i < 16; ++i) trunk_W(i, off + i) = 1.0;
    auto set_head = [&](const std::string& head, int classes, int start) {
        auto& W = model.params.at("head_" + head + "_W");
        for (int c = 0; c < classes; ++c) W(c, start + c) = 2.0;
    };
    set_head("product", 6, 0);
    set_head("channel", 4, 6);
    set_head("timing", 3, 10);
    set_head("level", 3, 13);
    return model;
}

Item oracle_item(const ModelConfig& cfg, Rng& rng) {
    Item item = random_item(cfg, rng);
    item.statics.setZero();
    item.statics(item.labels[0]) = 1.0;
    item.statics(6 + item.labels[1]) = 1.0;
    item.statics(10 + item.labels[2]) = 1.0;
    item.statics(13 + item.labels[3]) = 1.0;
    return item;
}

}  // namespace

TEST_CASE("macro-F1 closed-form examples") {
    CHECK(macro_f1({0, 1, 2, 1}, {0, 1, 2, 1}, 3) == doctest::Approx(1.0));
    CHECK(macro_f1({1, 1, 0, 0}, {1, 0, 1, 0}, 2) == doctest::Approx(0.5));
    // A class absent from both predictions and truth contributes F1 = 0.
    CHECK(macro_f1({0, 1, 0, 1}, {0, 1, 0, 1}, 3) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(macro_f1({}, {}, 3), DataError);
    CHECK_THROWS_AS(macro_f1({0, 1}, {0}, 3), DataError);

    auto per = per_class_f1({1, 1, 0, 0}, {1, 0, 1, 0}, 2);
    REQUIRE(per.size() == 2);
    CHECK(per[0] == doctest::Approx(0.5));
    CHECK(per[1] == doctest::Approx(0.5));
}

TEST_CASE("macro-F1 agrees with a confusion-matrix oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(40));
        int c = 2 + static_cast<int>(rng.uniform_int(5));
        std::vector<int> preds(n), truth(n);
        for (int i = 0; i < n; ++i) {
            preds[i] = static_cast<int>(rng.uniform_int(c));
            truth[i] = static_cast<int>(rng.uniform_int(c));
        }
        CHECK(macro_f1(preds, truth, c) ==
              doctest::Approx(macro_f1_oracle(preds, truth, c)).epsilon(1e-12));
    }
}

TEST_CASE("constant predictor on balanced three classes scores one sixth") {
    std::vector<int> preds(300, 0), truth(300);
    for (int i = 0; i < 300; ++i) truth[i] = i % 3;
    CHECK(macro_f1(preds, truth, 3) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("a perfect oracle model evaluates to overall 1.0") {
    ModelConfig cfg = tiny_config(3);
    PersonalizerModel model = oracle_model(cfg);
    Rng rng(4);
    std::vector<Item> items;
    for (int i = 0; i < 60; ++i) items.push_back(oracle_item(cfg, rng));
    RunReport report = evaluate(model, items, "Oracle");
    CHECK(report.setting == "Oracle");
    CHECK(report.overall == doctest::Approx(1.0));
    for (const auto& head : report.heads) {
        CHECK(head.macro_f1 == doctest::Approx(1.0));
        CHECK(head.accuracy == doctest::Approx(1.0));
    }
}

TEST_CASE("run report invariants hold on an arbitrary model") {
    ModelConfig cfg = tiny_config(5);
    PersonalizerModel model = PersonalizerModel::init(cfg);
    Rng rng(6);
    std::vector<Item> items;
    for (int i = 0; i < 50; ++i) items.push_back(random_item(cfg, rng));
    RunReport report = evaluate(model, items);
    double mean = 0;
    for (const auto& head : report.heads) {
        CHECK(head.macro_f1 >= 0.0);
        CHECK(head.macro_f1 <= 1.0);
        CHECK(head.accuracy >= 0.0);
        CHECK(head.accuracy <= 1.0);
        mean += head.macro_f1;
    }
    CHECK(report.overall == doctest::Approx(mean / 4.0).epsilon(1e-12));
    CHECK(report.heads[0].head == "product");
    CHECK(report.heads[1].head == "channel");
    CHECK(report.heads[2].head == "timing");
    CHECK(report.heads[3].head == "level");
}

TEST_CASE("shuffle test refuses non-temporal models") {
    ModelConfig cfg = tiny_config(7);
    cfg.use_temporal = false;
    PersonalizerModel model = PersonalizerModel::init(cfg);
    Rng rng(8);
    std::vector<Item> items = {random_item(cfg, rng)};
    CHECK_THROWS_AS(shuffle_test(model, items, 1), ProtocolError);
}

TEST_CASE("shuffle test is a no-op for order-invariant encoders") {
    // Zero recurrent and attention weights force the hidden states to zero,
    // so month order cannot matter; scores must match exactly.
    ModelConfig cfg = tiny_config(9);
    PersonalizerModel model = PersonalizerModel::init(cfg);
    for (auto& [name, p] : model.params)
        if (name.rfind("gruf_", 0) == 0 || name.rfind("grub_", 0) == 0 ||
            name.rfind("attn_", 0) == 0)
            p.setZero();
    Rng rng(10);
    std::vector<Item> items;
    for (int i = 0; i < 30; ++i) items.push_back(random_item(cfg, rng));
    RunReport base = evaluate(model, items);
    RunReport shuffled = shuffle_test(model, items, 99);
    CHECK(std::abs(base.overall - shuffled.overall) <= 1e-9);
    for (int h = 0; h < 4; ++h)
        CHECK(std::abs(base.heads[h].macro_f1 - shuffled.heads[h].macro_f1) <= 1e-9);
}

TEST_CASE("shuffling identical month rows changes nothing") {
    ModelConfig cfg = tiny_config(11);
    PersonalizerModel model = PersonalizerModel::init(cfg);
    Rng rng(12);
    std::vector<Item> items;
    for (int i = 0; i < 20; ++i) {
        Item item = random_item(cfg, rng);
        for (int t = 1; t < cfg.k_months; ++t) item.temporal.row(t) = item.temporal.row(0);
        items.push_back(item);
    }
    RunReport base = evaluate(model, items);
    RunReport shuffled = shuffle_test(model, items, 7);
    CHECK(base.overall == doctest::Approx(shuffled.overall).epsilon(1e-12));
}

TEST_CASE("ablation table: four settings, deterministic, round-trips") {
    ModelConfig cfg = tiny_config(13);
    personalizer::TrainConfig tc;
    tc.max_epochs = 3;
    tc.batch_size = 16;
    tc.seed = 14;
    Rng rng(15);
    std::vector<Item> tr, va, te;
    for (int i = 0; i < 80; ++i) tr.push_back(random_item(cfg, rng));
    for (int i = 0; i < 20; ++i) va.push_back(random_item(cfg, rng));
    for (int i = 0; i < 20; ++i) te.push_back(random_item(cfg, rng));

    auto specs = standard_ablations();
    REQUIRE(specs.size() == 4);
    CHECK(specs[0].name == "Full Model");
    CHECK(specs[1].name == "No-Intent");
    CHECK(specs[2].name == "No-Segment");
    CHECK(specs[3].name == "No-Temporal");
    CHECK_FALSE(specs[1].use_intent);
    CHECK_FALSE(specs[2].use_segment);
    CHECK_FALSE(specs[3].use_temporal);

    auto rows = run_ablations(tr, va, te, cfg, tc, specs);
    REQUIRE(rows.size() == 4);
    for (size_t i = 0; i < 4; ++i) CHECK(rows[i].setting == specs[i].name);

    auto again = run_ablations(tr, va, te, cfg, tc, specs);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(rows[i].overall == again[i].overall);
        for (int h = 0; h < 4; ++h)
            CHECK(rows[i].heads[h].macro_f1 == again[i].heads[h].macro_f1);
    }

    auto path = std::filesystem::temp_directory_path() / "persona_table2_roundtrip.csv";
    write_table2_csv(path, rows);
    auto loaded = read_table2_csv(path);
    std::filesystem::remove(path);
    REQUIRE(loaded.size() == 4);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(loaded[i].setting == rows[i].setting);
        CHECK(loaded[i].overall == doctest::Approx(rows[i].overall).epsilon(1e-9));
    }

    std::string text = format_report_text(rows);
    for (const auto& spec : specs) CHECK(text.find(spec.name) != std::string::npos);
}
