#include "persona/personalizer.hpp"

#include "persona/errors.hpp"
#include "persona/rng.hpp"
#include "persona/synthgen.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <vector>

using namespace persona;
using namespace persona::personalizer;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.f_features = 3;
    cfg.s_features = 6;
    cfg.k_months = 4;
    cfg.d_proj = 5;
    cfg.d_hidden = 4;
    cfg.d_attn = 4;
    cfg.d_embed = 3;
    cfg.d_trunk = 8;
    cfg.dropout = 0.0;
    cfg.seed = 21;
    return cfg;
}

Item random_item(const ModelConfig& cfg, Rng& rng) {
    Item item;
    item.customer_id = static_cast<int64_t>(rng.uniform_int(100000));
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

void zero_params(PersonalizerModel& m) {
    for (auto& [name, p] : m.params) p.setZero();
}

}  // namespace

TEST_CASE("zero network yields zero logits and uniform attention") {
    ModelConfig cfg = small_config();
    PersonalizerModel model = PersonalizerModel::init(cfg);
    zero_params(model);
    Rng rng(1);
    Item item = random_item(cfg, rng);
    auto out = forward(model, item);
    for (int h = 0; h < 4; ++h) CHECK(out.logits[h].cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(out.attention.size() == cfg.k_months);
    for (int t = 0; t < cfg.k_months; ++t)
        CHECK(out.attention(t) == doctest::Approx(1.0 / cfg.k_months));
    // Ties break toward the lowest class index.
    auto pred = predict(model, item);
    CHECK(pred.predicted.product == Product::kCreditCard);
    CHECK(pred.predicted.channel == Channel::kEmail);
    CHECK(pred.predicted.timing == Timing::kEarlyMonth);
    CHECK(pred.predicted.level == Level::kLow);
}

TEST_CASE("single-month attention is a point mass") {
    ModelConfig cfg = small_config();
    cfg.k_months = 1;
    PersonalizerModel model = PersonalizerModel::init(cfg);
    Rng rng(2);
    Item item = random_item(cfg, rng);
    auto out = forward(model, item);
    REQUIRE(out.attention.size() == 1);
    CHECK(out.attention(0) == doctest::Approx(1.0));
}

TEST_CASE("analytic gradients match central finite differences") {
    ModelConfig cfg = small_config();
    PersonalizerModel model = PersonalizerModel::init(cfg);
    Rng rng(3);
    std::vector<Item> batch = {random_item(cfg, rng), random_item(cfg, rng)};
    auto errs = gradient_check(model, batch, 4);
    CHECK(errs.size() == model.params.size());
    for (const auto& [name, err] : errs) {
        INFO("tensor ", name);
        CHECK(err <= 1e-4);
    }
}

TEST_CASE("multitask loss closed forms") {
    // Zero logits: per-head loss is ln(n_classes).
    std::array<std::vector<Eigen::VectorXd>, 4> logits;
    std::array<std::vector<int>, 4> labels;
    std::array<int, 4> sizes = {kNumProducts, kNumChannels, kNumTimings, kNumLevels};
    for (int h = 0; h < 4; ++h) {
        logits[h] = {Eigen::VectorXd::Zero(sizes[h])};
        labels[h] = {1};
    }
    double want = std::log(6.0) + std::log(4.0) + 2 * std::log(3.0);
    CHECK(multitask_loss(logits, labels) == doctest::Approx(want).epsilon(1e-12));

    // Saturated correct logits drive the loss to ~0.
    for (int h = 0; h < 4; ++h) logits[h][0](1) = 40.0;
    CHECK(multitask_loss(logits, labels) < 1e-3);

    // Random logits against a direct log-softmax oracle.
    Rng rng(4);
    double oracle = 0;
    for (int h = 0; h < 4; ++h) {
        logits[h].clear();
        labels[h].clear();
        for (int i = 0; i < 7; ++i) {
            Eigen::VectorXd v(sizes[h]);
            for (int c = 0; c < sizes[h]; ++c) v(c) = rng.normal(0, 3);
            int y = static_cast<int>(rng.uniform_int(sizes[h]));
            logits[h].push_back(v);
            labels[h].push_back(y);
        }
        double head = 0;
        for (int i = 0; i < 7; ++i) {
            double mx = logits[h][i].maxCoeff();
            double lse = mx + std::log((logits[h][i].array() - mx).exp().sum());
            head += lse - logits[h][i](labels[h][i]);
        }
        oracle += head / 7.0;
    }
    CHECK(multitask_loss(logits, labels) == doctest::Approx(oracle).epsilon(1e-9));

    labels[0].pop_back();
    CHECK_THROWS_AS(multitask_loss(logits, labels), DataError);
}

TEST_CASE("zero learning rate leaves weights bit-identical") {
    ModelConfig cfg = small_config();
    Rng rng(5);
    std::vector<Item> items;
    for (int i = 0; i < 12; ++i) items.push_back(random_item(cfg, rng));
    TrainConfig tc;
    tc.lr = 0.0;
    tc.max_epochs = 3;
    tc.batch_size = 4;
    tc.seed = 6;
    auto result = train(items, items, cfg, tc);
    PersonalizerModel fresh = PersonalizerModel::init(cfg);
    for (const auto& [name, p] : fresh.params) {
        INFO("tensor ", name);
        CHECK(result.model.params.at(name) == p);
    }
}

TEST_CASE("training fits labels that are a function of the inputs") {
    ModelConfig cfg = small_config();
    cfg.d_trunk = 16;
    Rng rng(7);
    std::vector<Item> items;
    for (int i = 0; i < 200; ++i) {
        Item item = random_item(cfg, rng);
        // Labels computed from the static block so the mapping is learnable.
        int p6, c4, t3, l3;
        item.statics.maxCoeff(&p6);
        item.statics.head(4).maxCoeff(&c4);
        item.statics.head(3).maxCoeff(&t3);
        item.statics.tail(3).maxCoeff(&l3);
        item.labels = {p6, c4, t3, l3};
        items.push_back(item);
    }
    TrainConfig tc;
    tc.lr = 5e-3;
    tc.max_epochs = 40;
    tc.patience = 40;
    tc.batch_size = 32;
    tc.seed = 8;
    auto result = train(items, items, cfg, tc);
    CHECK(result.history.train_loss.back() < 0.5 * result.history.train_loss.front());
    int hits = 0, total = 0;
    for (const auto& item : items) {
        auto pred = predict(result.model, item);
        std::array<int, 4> got = {static_cast<int>(pred.predicted.product),
                                  static_cast<int>(pred.predicted.channel),
                                  static_cast<int>(pred.predicted.timing),
                                  static_cast<int>(pred.predicted.level)};
        for (int h = 0; h < 4; ++h) {
            if (got[h] == item.labels[h]) ++hits;
            ++total;
        }
    }
    CHECK(static_cast<double>(hits) / total > 0.85);
}

TEST_CASE("early stopping bookkeeping") {
    ModelConfig cfg = small_config();
    Rng rng(9);
    std::vector<Item> tr, va;
    for (int i = 0; i < 40; ++i) tr.push_back(random_item(cfg, rng));
    for (int i = 0; i < 16; ++i) va.push_back(random_item(cfg, rng));
    TrainConfig tc;
    tc.max_epochs = 30;
    tc.patience = 4;
    tc.batch_size = 16;
    tc.seed = 10;
    auto result = train(tr, va, cfg, tc);
    const auto& h = result.history;
    REQUIRE(!h.val_macro_f1.empty());
    CHECK(h.train_loss.size() == h.val_macro_f1.size());
    REQUIRE(h.best_epoch >= 0);
    REQUIRE(h.best_epoch < static_cast<int>(h.val_macro_f1.size()));
    double best = *std::max_element(h.val_macro_f1.begin(), h.val_macro_f1.end());
    CHECK(h.val_macro_f1[h.best_epoch] == doctest::Approx(best));
    // Training stops at most `patience` epochs after the best one.
    CHECK(static_cast<int>(h.val_macro_f1.size()) <= h.best_epoch + tc.patience + 1);
}

TEST_CASE("argmax prediction and shift invariance") {
    ModelConfig cfg = small_config();
    PersonalizerModel model = PersonalizerModel::init(cfg);
    zero_params(model);
    model.params.at("head_product_b")(1, 0) = 2.0;
    model.params.at("head_product_b")(2, 0) = 2.0;  // tie with class 1
    model.params.at("head_channel_b")(3, 0) = 1.0;
    model.params.at("head_timing_b")(2, 0) = 0.5;
    model.params.at("head_level_b")(1, 0) = 0.25;
    Rng rng(11);
    Item item = random_item(cfg, rng);
    auto pred = predict(model, item);
    CHECK(static_cast<int>(pred.predicted.product) == 1);  // tie -> lower index
    CHECK(static_cast<int>(pred.predicted.channel) == 3);
    CHECK(static_cast<int>(pred.predicted.timing) == 2);
    CHECK(static_cast<int>(pred.predicted.level) == 1);
    // Adding a constant to every logit of a head changes nothing.
    model.params.at("head_product_b").array() += 5.0;
    auto shifted = predict(model, item);
    CHECK(shifted.predicted.product == pred.predicted.product);
}

TEST_CASE("ablation flags control the fused width and the used inputs") {
    ModelConfig cfg = small_config();
    // Temporal part = attention pool (2H) + final-step state (2H).
    CHECK(cfg.fused_width() == 4 * cfg.d_hidden + cfg.s_features + 2 * cfg.d_embed);
    ModelConfig no_seg = cfg;
    no_seg.use_segment = false;
    CHECK(no_seg.fused_width() == cfg.fused_width() - cfg.d_embed);
    ModelConfig no_int = cfg;
    no_int.use_intent = false;
    CHECK(no_int.fused_width() == cfg.fused_width() - cfg.d_embed);
    ModelConfig no_tmp = cfg;
    no_tmp.use_temporal = false;
    CHECK(no_tmp.fused_width() == cfg.fused_width() - 4 * cfg.d_hidden + cfg.d_proj);

    Rng rng(12);
    {
        PersonalizerModel m = PersonalizerModel::init(no_seg);
        Item item = random_item(no_seg, rng);
        item.segment_id = 0;
        auto a = forward(m, item);
        item.segment_id = 4;
        auto b = forward(m, item);
        for (int h = 0; h < 4; ++h) CHECK(a.logits[h] == b.logits[h]);
    }
    {
        PersonalizerModel m = PersonalizerModel::init(no_int);
        Item item = random_item(no_int, rng);
        item.intent_id = 0;
        auto a = forward(m, item);
        item.intent_id = 3;
        auto b = forward(m, item);
        for (int h = 0; h < 4; ++h) CHECK(a.logits[h] == b.logits[h]);
    }
    {
        // Non-temporal models mean-pool the months: permuting rows changes
        // nothing, but the row values still matter.
        PersonalizerModel m = PersonalizerModel::init(no_tmp);
        Item item = random_item(no_tmp, rng);
        auto a = forward(m, item);
        Item swapped = item;
        swapped.temporal.row(0).swap(swapped.temporal.row(no_tmp.k_months - 1));
        auto b = forward(m, swapped);
        for (int h = 0; h < 4; ++h) CHECK(a.logits[h].isApprox(b.logits[h], 1e-12));
        item.temporal.row(0).array() += 3.0;
        auto c = forward(m, item);
        bool changed = false;
        for (int h = 0; h < 4; ++h)
            if (a.logits[h] != c.logits[h]) changed = true;
        CHECK(changed);
    }
}

TEST_CASE("training is deterministic for fixed seeds") {
    ModelConfig cfg = small_config();
    cfg.dropout = 0.1;
    Rng rng(13);
    std::vector<Item> tr, va;
    for (int i = 0; i < 30; ++i) tr.push_back(random_item(cfg, rng));
    for (int i = 0; i < 10; ++i) va.push_back(random_item(cfg, rng));
    TrainConfig tc;
    tc.max_epochs = 5;
    tc.batch_size = 8;
    tc.seed = 14;
    auto a = train(tr, va, cfg, tc);
    auto b = train(tr, va, cfg, tc);
    CHECK(a.history.train_loss == b.history.train_loss);
    CHECK(a.history.val_macro_f1 == b.history.val_macro_f1);
    for (const auto& [name, p] : a.model.params) CHECK(b.model.params.at(name) == p);
}

TEST_CASE("model JSON round trip preserves weights and outputs") {
    ModelConfig cfg = small_config();
    cfg.use_intent = false;
    PersonalizerModel model = PersonalizerModel::init(cfg);
    auto path = std::filesystem::temp_directory_path() / "persona_model_roundtrip.json";
    write_model_json(path, model);
    PersonalizerModel loaded = read_model_json(path);
    std::filesystem::remove(path);
    CHECK(loaded.config.use_intent == false);
    CHECK(loaded.config.d_hidden == cfg.d_hidden);
    REQUIRE(loaded.params.size() == model.params.size());
    for (const auto& [name, p] : model.params) CHECK(loaded.params.at(name) == p);
    Rng rng(15);
    Item item = random_item(cfg, rng);
    auto a = forward(model, item);
    auto b = forward(loaded, item);
    for (int h = 0; h < 4; ++h) CHECK(a.logits[h] == b.logits[h]);
}

TEST_CASE("model learns the generator's noise-free rule table") {
    auto gcfg = synthgen::GeneratorConfig::defaults();
    gcfg.n_customers = 300;
    gcfg.seed = 404;
    gcfg.label_noise = 0.0;
    auto statics = synthgen::generate_static(gcfg);
    auto months = synthgen::generate_trajectories(statics, gcfg);
    synthgen::assign_actions(months, statics, gcfg);

    std::vector<int64_t> ids;
    std::map<int64_t, int> seg_ids, intent_ids;
    for (const auto& s : statics) {
        ids.push_back(s.customer_id);
        seg_ids[s.customer_id] = s.true_segment;
    }
    for (const auto& m : months)
        if (m.month_index == gcfg.k_months)
            intent_ids[m.customer_id] = static_cast<int>(m.true_intent);

    auto stats = compute_feature_stats(statics, months, ids);
    auto items = build_items(statics, months, ids, seg_ids, intent_ids, stats, gcfg.k_months);

    ModelConfig mcfg;
    mcfg.d_proj = 16;
    mcfg.d_hidden = 16;
    mcfg.d_attn = 16;
    mcfg.d_trunk = 32;
    mcfg.dropout = 0.0;
    mcfg.seed = 16;
    TrainConfig tc;
    tc.lr = 3e-3;
    tc.max_epochs = 60;
    tc.patience = 60;
    tc.batch_size = 32;
    tc.seed = 17;
    auto result = train(items, items, mcfg, tc);
    int hits = 0, total = 0;
    for (const auto& item : items) {
        auto pred = predict(result.model, item);
        std::array<int, 4> got = {static_cast<int>(pred.predicted.product),
                                  static_cast<int>(pred.predicted.channel),
                                  static_cast<int>(pred.predicted.timing),
                                  static_cast<int>(pred.predicted.level)};
        for (int h = 0; h < 4; ++h) {
            if (got[h] == item.labels[h]) ++hits;
            ++total;
        }
    }
    CHECK(static_cast<double>(hits) / total >= 0.9);
}

TEST_CASE("invalid configurations are rejected") {
    ModelConfig cfg = small_config();
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    ModelConfig bad_heads = small_config();
    bad_heads.head_sizes = {5, 4, 3, 3};
    CHECK_THROWS_AS(bad_heads.validate(), ConfigError);
    TrainConfig tc;
    tc.patience = 0;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
}
