#include "persona/pipeline.hpp"

#include "persona/csv.hpp"
#include "persona/errors.hpp"
#include "persona/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace persona::pipeline {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + key + "' in section " + section);
}

std::map<int64_t, int> segment_map(const segmentation::SegmentationResult& seg) {
    std::map<int64_t, int> m;
    for (size_t i = 0; i < seg.customer_ids.size(); ++i)
        m[seg.customer_ids[i]] = seg.model_segment_ids[i];
    return m;
}

// Final-month decoded intent per customer.
std::map<int64_t, int> final_intent_map(const std::filesystem::path& path, int k_months) {
    std::map<int64_t, int> m;
    for (const auto& [id, month, state] : intent::read_decoded_csv(path))
        if (month == k_months) m[id] = state;
    if (m.empty()) throw DataError("no final-month decoded intents in " + path.string());
    return m;
}

std::vector<personalizer::PredictionRecord> predict_items(
    const personalizer::PersonalizerModel& model,
    const std::vector<personalizer::Item>& items) {
    std::vector<personalizer::PredictionRecord> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(personalizer::predict(model, item));
    return out;
}

}  // namespace

void PipelineConfig::apply_seed(uint64_t master) {
    seed = master;
    generator.seed = master;
    intent.fit.seed = master + 1;
    model.seed = master + 2;
    train.seed = master + 3;
    shuffle_seed = master + 4;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config: " + path.string());
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
    PipelineConfig cfg;
    check_keys(j, {"seed", "out_dir", "generator", "segmentation", "intent", "model", "train",
                   "rag"},
               "(top level)");
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("generator")) {
        const auto& g = j["generator"];
        check_keys(g, {"n_customers", "k_months", "label_noise", "count_noise_sigma",
                       "balance_noise_sigma", "pv_mix_sigma"},
                   "generator");
        if (g.contains("n_customers")) cfg.generator.n_customers = g["n_customers"].get<int64_t>();
        if (g.contains("k_months")) cfg.generator.k_months = g["k_months"].get<int>();
        if (g.contains("label_noise")) cfg.generator.label_noise = g["label_noise"].get<double>();
        if (g.contains("count_noise_sigma"))
            cfg.generator.count_noise_sigma = g["count_noise_sigma"].get<double>();
        if (g.contains("balance_noise_sigma"))
            cfg.generator.balance_noise_sigma = g["balance_noise_sigma"].get<double>();
        if (g.contains("pv_mix_sigma"))
            cfg.generator.pv_mix_sigma = g["pv_mix_sigma"].get<double>();
    }
    if (j.contains("segmentation")) {
        const auto& s = j["segmentation"];
        check_keys(s, {"d", "eps_percentile", "eps_override", "min_pts", "feature_indices"},
                   "segmentation");
        if (s.contains("d")) cfg.segmentation.d = s["d"].get<int>();
        if (s.contains("eps_percentile"))
            cfg.segmentation.eps_percentile = s["eps_percentile"].get<double>();
        if (s.contains("eps_override"))
            cfg.segmentation.eps_override = s["eps_override"].get<double>();
        if (s.contains("min_pts")) cfg.segmentation.min_pts = s["min_pts"].get<int>();
        if (s.contains("feature_indices"))
            cfg.segmentation.feature_indices = s["feature_indices"].get<std::vector<int>>();
    }
    if (j.contains("intent")) {
        const auto& i = j["intent"];
        check_keys(i, {"process_var_ratio", "bandwidth", "max_iter", "tol"}, "intent");
        if (i.contains("process_var_ratio"))
            cfg.intent.kalman.process_var_ratio = i["process_var_ratio"].get<double>();
        if (i.contains("bandwidth")) cfg.intent.fit.bandwidth = i["bandwidth"].get<double>();
        if (i.contains("max_iter")) cfg.intent.fit.max_iter = i["max_iter"].get<int>();
        if (i.contains("tol")) cfg.intent.fit.tol = i["tol"].get<double>();
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        check_keys(m, {"d_proj", "d_hidden", "d_attn", "d_embed", "d_trunk", "dropout"}, "model");
        if (m.contains("d_proj")) cfg.model.d_proj = m["d_proj"].get<int>();
        if (m.contains("d_hidden")) cfg.model.d_hidden = m["d_hidden"].get<int>();
        if (m.contains("d_attn")) cfg.model.d_attn = m["d_attn"].get<int>();
        if (m.contains("d_embed")) cfg.model.d_embed = m["d_embed"].get<int>();
        if (m.contains("d_trunk")) cfg.model.d_trunk = m["d_trunk"].get<int>();
        if (m.contains("dropout")) cfg.model.dropout = m["dropout"].get<double>();
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        check_keys(t, {"lr", "weight_decay", "clip_norm", "batch_size", "max_epochs", "patience"},
                   "train");
        if (t.contains("lr")) cfg.train.lr = t["lr"].get<double>();
        if (t.contains("weight_decay")) cfg.train.weight_decay = t["weight_decay"].get<double>();
        if (t.contains("clip_norm")) cfg.train.clip_norm = t["clip_norm"].get<double>();
        if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
        if (t.contains("max_epochs")) cfg.train.max_epochs = t["max_epochs"].get<int>();
        if (t.contains("patience")) cfg.train.patience = t["patience"].get<int>();
    }
    if (j.contains("rag")) {
        const auto& r = j["rag"];
        check_keys(r, {"corpus_dir", "mode", "base_url", "model", "k", "n_requests"}, "rag");
        if (r.contains("corpus_dir")) cfg.rag.corpus_dir = r["corpus_dir"].get<std::string>();
        if (r.contains("mode")) cfg.rag.client.mode = r["mode"].get<std::string>();
        if (r.contains("base_url")) cfg.rag.client.base_url = r["base_url"].get<std::string>();
        if (r.contains("model")) cfg.rag.client.model = r["model"].get<std::string>();
        if (r.contains("k")) cfg.rag.k = r["k"].get<int>();
        if (r.contains("n_requests")) cfg.rag.n_requests = r["n_requests"].get<int>();
    }
    cfg.model.k_months = cfg.generator.k_months;
    cfg.apply_seed(j.contains("seed") ? j["seed"].get<uint64_t>() : cfg.seed);
    return cfg;
}

Dataset load_dataset(const PipelineConfig& cfg) {
    Dataset ds;
    ds.statics = read_static_csv(cfg.out_dir / "static.csv");
    ds.months = read_temporal_csv(cfg.out_dir / "temporal.csv");
    ds.split = synthgen::read_split_json(cfg.out_dir / "split.json");
    auto segments = segment_map(segmentation::read_segments_json(cfg.out_dir / "segments.json"));
    auto intents = final_intent_map(cfg.out_dir / "intent_decoded.csv", cfg.generator.k_months);
    ds.stats = personalizer::compute_feature_stats(ds.statics, ds.months, ds.split.train_ids);
    ds.train_items = personalizer::build_items(ds.statics, ds.months, ds.split.train_ids, segments,
                                               intents, ds.stats, cfg.generator.k_months);
    ds.val_items = personalizer::build_items(ds.statics, ds.months, ds.split.val_ids, segments,
                                             intents, ds.stats, cfg.generator.k_months);
    ds.test_items = personalizer::build_items(ds.statics, ds.months, ds.split.test_ids, segments,
                                              intents, ds.stats, cfg.generator.k_months);
    return ds;
}

void run_gen_data(const PipelineConfig& cfg) {
    cfg.generator.validate();
    synthgen::generate_all(cfg.generator, cfg.out_dir);
}

void run_segment(const PipelineConfig& cfg) {
    auto statics = read_static_csv(cfg.out_dir / "static.csv");
    auto months = read_temporal_csv(cfg.out_dir / "temporal.csv");
    auto result = segmentation::run_segmentation(statics, months, cfg.segmentation,
                                                 cfg.generator.k_months);
    segmentation::write_segments_json(cfg.out_dir / "segments.json", result);

    auto truth = read_truth_csv(cfg.out_dir / "truth.csv");
    std::map<int64_t, int> true_segment;
    for (const auto& r : truth) true_segment[r.customer_id] = r.true_segment;
    std::vector<int> truth_vec;
    for (int64_t id : result.customer_ids) truth_vec.push_back(true_segment.at(id));
    auto quality = segmentation::segment_quality(result.assignment, truth_vec);

    json j = {{"ari", quality.ari},
              {"n_clusters", quality.n_clusters},
              {"noise_fraction", quality.noise_fraction},
              {"eps", result.eps},
              {"shrinkage_delta", result.shrinkage_delta}};
    std::ofstream f(cfg.out_dir / "segment_quality.json", std::ios::binary);
    f << j.dump(2) << '\n';
}

void run_intent(const PipelineConfig& cfg) {
    auto months = read_temporal_csv(cfg.out_dir / "temporal.csv");
    auto split = synthgen::read_split_json(cfg.out_dir / "split.json");
    auto result = intent::run_intent_stage(months, split, cfg.intent, cfg.generator.k_months);
    intent::write_hmm_model_json(cfg.out_dir / "hmm_model.json", result.model);
    intent::write_decoded_csv(cfg.out_dir / "intent_decoded.csv", result);

    auto truth = read_truth_csv(cfg.out_dir / "truth.csv");
    std::map<std::pair<int64_t, int>, int> true_intent;
    for (const auto& r : truth)
        true_intent[{r.customer_id, r.month_index}] = static_cast<int>(r.true_intent);
    std::vector<int> decoded_flat, truth_flat;
    for (size_t c = 0; c < result.customer_ids.size(); ++c)
        for (size_t t = 0; t < result.decoded[c].size(); ++t) {
            decoded_flat.push_back(result.decoded[c][t]);
            truth_flat.push_back(true_intent.at({result.customer_ids[c], static_cast<int>(t) + 1}));
        }
    auto score = intent::align_and_score(decoded_flat, truth_flat, kNumIntentStates);
    json j = {{"accuracy", score.accuracy}, {"ari", score.ari}};
    std::ofstream f(cfg.out_dir / "intent_score.json", std::ios::binary);
    f << j.dump(2) << '\n';
}

void run_train(const PipelineConfig& cfg) {
    Dataset ds = load_dataset(cfg);
    auto result = personalizer::train(ds.train_items, ds.val_items, cfg.model, cfg.train);
    personalizer::write_model_json(cfg.out_dir / "model.json", result.model);
    personalizer::write_history_csv(cfg.out_dir / "train_history.csv", result.history);
}

bool run_eval(const PipelineConfig& cfg, bool check) {
    Dataset ds = load_dataset(cfg);
    auto model = personalizer::read_model_json(cfg.out_dir / "model.json");
    auto report = evalharness::evaluate(model, ds.test_items);
    evalharness::write_table2_csv(cfg.out_dir / "eval_report.csv", {report});
    std::cout << evalharness::format_report_text({report});
    if (!check) return true;
    bool ok = report.overall >= 0.85;
    for (const auto& h : report.heads) ok = ok && h.macro_f1 >= 0.80;
    if (!ok) std::cerr << "eval: acceptance thresholds not met\n";
    return ok;
}

bool run_shuffle_test(const PipelineConfig& cfg, bool check) {
    Dataset ds = load_dataset(cfg);
    auto model = personalizer::read_model_json(cfg.out_dir / "model.json");
    auto base = evalharness::evaluate(model, ds.test_items);
    auto shuffled = evalharness::shuffle_test(model, ds.test_items, cfg.shuffle_seed);
    evalharness::write_table2_csv(cfg.out_dir / "shuffle_report.csv", {base, shuffled});
    std::cout << evalharness::format_report_text({base, shuffled});
    if (!check) return true;
    bool ok = base.overall - shuffled.overall >= 0.15;
    if (!ok) std::cerr << "shuffle-test: degradation below threshold\n";
    return ok;
}

bool run_ablate(const PipelineConfig& cfg, bool check, const std::string& only) {
    Dataset ds = load_dataset(cfg);
    auto specs = evalharness::standard_ablations();
    if (!only.empty()) {
        auto it = std::find_if(specs.begin(), specs.end(),
                               [&](const auto& s) { return s.name == only; });
        if (it == specs.end()) throw ConfigError("unknown ablation: " + only);
        specs = {*it};
    }
    auto rows = evalharness::run_ablations(ds.train_items, ds.val_items, ds.test_items, cfg.model,
                                           cfg.train, specs);
    evalharness::write_table2_csv(cfg.out_dir / "report_table2.csv", rows);
    std::cout << evalharness::format_report_text(rows);
    if (!check || rows.size() < 4) return true;
    double full = rows[0].overall;
    bool ok = full - rows[3].overall >= 0.10 && rows[1].overall < full && rows[2].overall < full;
    if (!ok) std::cerr << "ablate: acceptance thresholds not met\n";
    return ok;
}

void run_rag_build(const PipelineConfig& cfg) {
    auto store = rag::ingest_corpus(cfg.rag.corpus_dir);
    json chunks = json::array();
    for (const auto& c : store.chunks)
        chunks.push_back({{"chunk_id", c.chunk_id},
                          {"doc_id", c.doc_id},
                          {"kind", rag::to_string(c.kind)},
                          {"text", c.text}});
    std::ofstream f(cfg.out_dir / "chunks.json", std::ios::binary);
    if (!f) throw DataError("cannot write chunks.json");
    f << chunks.dump(2) << '\n';
}

bool run_rag_gen(const PipelineConfig& cfg, bool check) {
    Dataset ds = load_dataset(cfg);
    auto model = personalizer::read_model_json(cfg.out_dir / "model.json");
    auto store = rag::ingest_corpus(cfg.rag.corpus_dir);

    std::vector<rag::RagRequest> requests;
    auto preds = predict_items(model, ds.test_items);
    for (int i = 0; i < cfg.rag.n_requests; ++i) {
        const auto& item = ds.test_items[i % ds.test_items.size()];
        rag::RagRequest req;
        req.customer_id = item.customer_id;
        req.action = preds[i % preds.size()].predicted;
        req.segment_id = item.segment_id;
        req.intent = static_cast<IntentState>(item.intent_id);
        requests.push_back(req);
    }
    auto result = rag::run_batch(store, requests, cfg.rag.client, cfg.rag.k);
    rag::write_messages_jsonl(cfg.out_dir / "messages.jsonl", result);
    rag::write_metrics_json(cfg.out_dir / "rag_metrics.json", result.metrics);
    if (!check) return true;
    const auto& m = result.metrics;
    bool ok = m.response_rate == 1.0 && m.json_validity == 1.0 && m.citation_correctness == 1.0 &&
              m.avg_message_length >= 20 && m.avg_message_length <= 80;
    if (!ok) std::cerr << "rag-gen: acceptance thresholds not met\n";
    return ok;
}

void run_report(const PipelineConfig& cfg) {
    std::ostringstream out;
    auto table = evalharness::read_table2_csv(cfg.out_dir / "report_table2.csv");
    out << evalharness::format_report_text(table) << '\n';
    {
        std::ifstream f(cfg.out_dir / "shuffle_report.csv");
        if (f) {
            auto rows = evalharness::read_table2_csv(cfg.out_dir / "shuffle_report.csv");
            out << evalharness::format_report_text(rows) << '\n';
        }
    }
    for (const char* name : {"segment_quality.json", "intent_score.json", "rag_metrics.json"}) {
        std::ifstream f(cfg.out_dir / name);
        if (f) {
            out << name << ":\n";
            out << f.rdbuf() << '\n';
        }
    }

    // Projected engagement: model-chosen actions versus random actions pushed
    // through the generator's engagement logistic, using ground truth.
    Dataset ds = load_dataset(cfg);
    auto model = personalizer::read_model_json(cfg.out_dir / "model.json");
    auto truth = read_truth_csv(cfg.out_dir / "truth.csv");
    std::map<int64_t, int> true_segment;
    std::map<std::pair<int64_t, int>, IntentState> true_intent;
    for (const auto& r : truth) {
        true_segment[r.customer_id] = r.true_segment;
        true_intent[{r.customer_id, r.month_index}] = r.true_intent;
    }
    std::map<int64_t, std::vector<const CustomerMonth*>> by_customer;
    for (const auto& m : ds.months) by_customer[m.customer_id].push_back(&m);
    for (auto& [id, rows] : by_customer)
        std::sort(rows.begin(), rows.end(), [](const CustomerMonth* a, const CustomerMonth* b) {
            return a->month_index < b->month_index;
        });

    const auto& w = cfg.generator.alignment_weights;
    Rng rng = Rng(cfg.seed).substream(0x9e9aULL);
    double predicted_conv = 0, random_conv = 0;
    int n = 0;
    for (const auto& item : ds.test_items) {
        auto rec = personalizer::predict(model, item);
        IntentState ti = true_intent.at({item.customer_id, cfg.generator.k_months});
        int dom = synthgen::dominant_category(by_customer.at(item.customer_id),
                                              cfg.generator.k_months);
        auto optimal = synthgen::rule_optimal_action(true_segment.at(item.customer_id), ti, dom);
        predicted_conv += synthgen::conversion_probability(
            synthgen::alignment_score(rec.predicted, optimal, ti, w), w);
        PersonalizationAction random_action;
        random_action.product = static_cast<Product>(rng.uniform_int(kNumProducts));
        random_action.channel = static_cast<Channel>(rng.uniform_int(kNumChannels));
        random_action.timing = static_cast<Timing>(rng.uniform_int(kNumTimings));
        random_action.level = static_cast<Level>(rng.uniform_int(kNumLevels));
        random_conv += synthgen::conversion_probability(
            synthgen::alignment_score(random_action, optimal, ti, w), w);
        ++n;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "Projected engagement (test split, n=%d):\n"
                  "  conversion probability, model actions:  %.4f\n"
                  "  conversion probability, random actions: %.4f\n",
                  n, predicted_conv / n, random_conv / n);
    out << buf;

    std::ofstream f(cfg.out_dir / "report.txt", std::ios::binary);
    if (!f) throw DataError("cannot write report.txt");
    f << out.str();
    std::cout << out.str();
}

bool run_all(const PipelineConfig& cfg, bool check) {
    run_gen_data(cfg);
    run_segment(cfg);
    run_intent(cfg);
    run_train(cfg);
    bool ok = run_eval(cfg, check);
    ok = run_shuffle_test(cfg, check) && ok;
    ok = run_ablate(cfg, check) && ok;
    run_rag_build(cfg);
    ok = run_rag_gen(cfg, check) && ok;
    run_report(cfg);
    return ok;
}

}  // namespace persona::pipeline
