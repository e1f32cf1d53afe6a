#include "persona/personalizer.hpp"

#include "persona/errors.hpp"
#include "persona/evalharness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace persona::personalizer {

namespace {

constexpr double kLayerNormEps = 1e-5;

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
    Eigen::VectorXd e = (v.array() - v.maxCoeff()).exp();
    return e / e.sum();
}

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& v) {
    return (1.0 / (1.0 + (-v.array()).exp())).matrix();
}

struct GruStep {
    Eigen::VectorXd x, h_prev, z, r, n, h;
};

struct Cache {
    std::vector<Eigen::VectorXd> proj;                // pre-norm projection per t
    std::vector<double> ln_mu, ln_s;                  // layernorm stats per t
    std::vector<Eigen::VectorXd> xhat, ln_out;        // per t
    std::vector<GruStep> fwd, bwd;                    // bwd indexed by reversed step
    std::vector<Eigen::VectorXd> hcat;                // 2H per t
    std::vector<Eigen::VectorXd> key;                 // attention key per t
    Eigen::VectorXd scores, alpha, pooled;
    Eigen::VectorXd fused;
    Eigen::VectorXd trunk_pre, trunk_out;
    Eigen::VectorXd drop_mask;                        // scaled inverted-dropout mask
    std::array<Eigen::VectorXd, 4> logits;
};

const std::array<const char*, 4> kHeadNames = {"product", "channel", "timing", "level"};

GruStep gru_step(const PersonalizerModel& m, const std::string& prefix, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& h_prev) {
    const auto& Wz = m.params.at(prefix + "_Wz");
    const auto& Wr = m.params.at(prefix + "_Wr");
    const auto& Wn = m.params.at(prefix + "_Wn");
    const auto& Uz = m.params.at(prefix + "_Uz");
    const auto& Ur = m.params.at(prefix + "_Ur");
    const auto& Un = m.params.at(prefix + "_Un");
    const auto& bz = m.params.at(prefix + "_bz");
    const auto& br = m.params.at(prefix + "_br");
    const auto& bn = m.params.at(prefix + "_bn");
    GruStep s;
    s.x = x;
    s.h_prev = h_prev;
    s.z = sigmoid_vec(Wz * x + Uz * h_prev + bz.col(0));
    s.r = sigmoid_vec(Wr * x + Ur * h_prev + br.col(0));
    s.n = (Wn * x + Un * (s.r.cwiseProduct(h_prev)) + bn.col(0)).array().tanh();
    s.h = (1.0 - s.z.array()) * s.n.array() + s.z.array() * s.h_prev.array();
    return s;
}

void gru_backward(const PersonalizerModel& m, const std::string& prefix, const GruStep& s,
                  const Eigen::VectorXd& dh, Eigen::VectorXd& dx, Eigen::VectorXd& dh_prev,
                  std::map<std::string, Eigen::MatrixXd>& g) {
    const auto& Wz = m.params.at(prefix + "_Wz");
    const auto& Wr = m.params.at(prefix + "_Wr");
    const auto& Wn = m.params.at(prefix + "_Wn");
    const auto& Uz = m.params.at(prefix + "_Uz");
    const auto& Ur = m.params.at(prefix + "_Ur");
    const auto& Un = m.params.at(prefix + "_Un");

    Eigen::VectorXd dn = dh.cwiseProduct((1.0 - s.z.array()).matrix());
    Eigen::VectorXd dz = dh.cwiseProduct(s.h_prev - s.n);
    dh_prev += dh.cwiseProduct(s.z);

    Eigen::VectorXd dan = dn.cwiseProduct((1.0 - s.n.array().square()).matrix());
    g[prefix + "_Wn"] += dan * s.x.transpose();
    g[prefix + "_Un"] += dan * (s.r.cwiseProduct(s.h_prev)).transpose();
    g[prefix + "_bn"].col(0) += dan;
    Eigen::VectorXd drh = Un.transpose() * dan;
    Eigen::VectorXd dr = drh.cwiseProduct(s.h_prev);
    dh_prev += drh.cwiseProduct(s.r);

    Eigen::VectorXd daz = dz.cwiseProduct(s.z.cwiseProduct((1.0 - s.z.array()).matrix()));
    g[prefix + "_Wz"] += daz * s.x.transpose();
    g[prefix + "_Uz"] += daz * s.h_prev.transpose();
    g[prefix + "_bz"].col(0) += daz;
    dh_prev += Uz.transpose() * daz;

    Eigen::VectorXd dar = dr.cwiseProduct(s.r.cwiseProduct((1.0 - s.r.array()).matrix()));
    g[prefix + "_Wr"] += dar * s.x.transpose();
    g[prefix + "_Ur"] += dar * s.h_prev.transpose();
    g[prefix + "_br"].col(0) += dar;
    dh_prev += Ur.transpose() * dar;

    dx += Wn.transpose() * dan + Wz.transpose() * daz + Wr.transpose() * dar;
}

Cache forward_cached(const PersonalizerModel& m, const Item& item, bool training,
                     persona::Rng* dropout_rng) {
    const ModelConfig& cfg = m.config;
    if (item.temporal.rows() != cfg.k_months || item.temporal.cols() != cfg.f_features)
        throw DimensionError("forward: temporal shape mismatch");
    if (item.statics.size() != cfg.s_features)
        throw DimensionError("forward: static width mismatch");
    if (item.segment_id < 0 || item.segment_id >= kNumSegments || item.intent_id < 0 ||
        item.intent_id >= kNumIntentStates)
        throw DataError("forward: segment/intent id out of range");

    const int K = cfg.k_months;
    const int H = cfg.d_hidden;
    Cache c;

    // Projection + layer normalization per step.
    const auto& proj_W = m.params.at("proj_W");
    const auto& proj_b = m.params.at("proj_b");
    const auto& norm_scale = m.params.at("norm_scale");
    const auto& norm_shift = m.params.at("norm_shift");
    for (int t = 0; t < K; ++t) {
        Eigen::VectorXd p = proj_W * item.temporal.row(t).transpose() + proj_b.col(0);
        double mu = p.mean();
        double var = (p.array() - mu).square().mean();
        double s = std::sqrt(var + kLayerNormEps);
        Eigen::VectorXd xhat = (p.array() - mu).matrix() / s;
        c.proj.push_back(std::move(p));
        c.ln_mu.push_back(mu);
        c.ln_s.push_back(s);
        c.ln_out.push_back(norm_scale.col(0).cwiseProduct(xhat) + norm_shift.col(0));
        c.xhat.push_back(std::move(xhat));
    }

    Eigen::VectorXd pooled_part;
    if (cfg.use_temporal) {
        Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
        for (int t = 0; t < K; ++t) {
            c.fwd.push_back(gru_step(m, "gruf", c.ln_out[t], h));
            h = c.fwd.back().h;
        }
        h = Eigen::VectorXd::Zero(H);
        for (int t = K - 1; t >= 0; --t) {
            c.bwd.push_back(gru_step(m, "grub", c.ln_out[t], h));
            h = c.bwd.back().h;
        }
        for (int t = 0; t < K; ++t) {
            Eigen::VectorXd hc(2 * H);
            hc << c.fwd[t].h, c.bwd[K - 1 - t].h;
            c.hcat.push_back(std::move(hc));
        }
        // Attention pooling.
        const auto& attn_W = m.params.at("attn_W");
        const auto& attn_b = m.params.at("attn_b");
        const auto& attn_q = m.params.at("attn_q");
        c.scores.resize(K);
        for (int t = 0; t < K; ++t) {
            c.key.push_back((attn_W * c.hcat[t] + attn_b.col(0)).array().tanh());
            c.scores(t) = attn_q.col(0).dot(c.key[t]);
        }
        c.alpha = softmax(c.scores);
        c.pooled = Eigen::VectorXd::Zero(2 * H);
        for (int t = 0; t < K; ++t) c.pooled += c.alpha(t) * c.hcat[t];
        // Attention pool plus the final step's state: the labels hinge on the
        // last month, and the pooled summary alone blurs it.
        pooled_part.resize(4 * H);
        pooled_part << c.pooled, c.hcat[K - 1];
    } else {
        // Aggregate baseline: mean of the projected months (keeps levels,
        // destroys order and any notion of "the last month").
        c.alpha = Eigen::VectorXd::Constant(K, 1.0 / K);
        pooled_part = Eigen::VectorXd::Zero(cfg.d_proj);
        for (int t = 0; t < K; ++t) pooled_part += c.ln_out[t] / static_cast<double>(K);
    }

    std::vector<double> fused_vals(pooled_part.data(), pooled_part.data() + pooled_part.size());
    fused_vals.insert(fused_vals.end(), item.statics.data(),
                      item.statics.data() + item.statics.size());
    if (cfg.use_segment) {
        const auto& emb = m.params.at("emb_segment");
        for (int j = 0; j < cfg.d_embed; ++j) fused_vals.push_back(emb(item.segment_id, j));
    }
    if (cfg.use_intent) {
        const auto& emb = m.params.at("emb_intent");
        for (int j = 0; j < cfg.d_embed; ++j) fused_vals.push_back(emb(item.intent_id, j));
    }
    c.fused = Eigen::Map<Eigen::VectorXd>(fused_vals.data(), fused_vals.size());

    c.trunk_pre = m.params.at("trunk_W") * c.fused + m.params.at("trunk_b").col(0);
    c.trunk_out = c.trunk_pre.cwiseMax(0.0);
    if (training && dropout_rng != nullptr && cfg.dropout > 0) {
        c.drop_mask.resize(c.trunk_out.size());
        for (Eigen::Index i = 0; i < c.drop_mask.size(); ++i)
            c.drop_mask(i) = dropout_rng->bernoulli(1.0 - cfg.dropout) ? 1.0 / (1.0 - cfg.dropout)
                                                                       : 0.0;
        c.trunk_out = c.trunk_out.cwiseProduct(c.drop_mask);
    }
    for (int h = 0; h < 4; ++h) {
        const auto& W = m.params.at(std::string("head_") + kHeadNames[h] + "_W");
        const auto& b = m.params.at(std::string("head_") + kHeadNames[h] + "_b");
        c.logits[h] = W * c.trunk_out + b.col(0);
    }
    return c;
}

void backward_from_logits(const PersonalizerModel& m, const Item& item, const Cache& c,
                          const std::array<Eigen::VectorXd, 4>& dlogits,
                          std::map<std::string, Eigen::MatrixXd>& g) {
    const ModelConfig& cfg = m.config;
    const int K = cfg.k_months;
    const int H = cfg.d_hidden;

    Eigen::VectorXd dtrunk_out = Eigen::VectorXd::Zero(c.trunk_out.size());
    for (int h = 0; h < 4; ++h) {
        std::string wname = std::string("head_") + kHeadNames[h] + "_W";
        g[wname] += dlogits[h] * c.trunk_out.transpose();
        g[std::string("head_") + kHeadNames[h] + "_b"].col(0) += dlogits[h];
        dtrunk_out += m.params.at(wname).transpose() * dlogits[h];
    }
    if (c.drop_mask.size() > 0) dtrunk_out = dtrunk_out.cwiseProduct(c.drop_mask);
    Eigen::VectorXd dtrunk_pre =
        dtrunk_out.cwiseProduct((c.trunk_pre.array() > 0).cast<double>().matrix());
    g["trunk_W"] += dtrunk_pre * c.fused.transpose();
    g["trunk_b"].col(0) += dtrunk_pre;
    Eigen::VectorXd dfused = m.params.at("trunk_W").transpose() * dtrunk_pre;

    int at = cfg.use_temporal ? 4 * H : cfg.d_proj;
    Eigen::VectorXd dpooled_part = dfused.head(at);
    // statics carry no parameters
    int offset = at + cfg.s_features;
    if (cfg.use_segment) {
        for (int j = 0; j < cfg.d_embed; ++j)
            g["emb_segment"](item.segment_id, j) += dfused(offset + j);
        offset += cfg.d_embed;
    }
    if (cfg.use_intent) {
        for (int j = 0; j < cfg.d_embed; ++j)
            g["emb_intent"](item.intent_id, j) += dfused(offset + j);
        offset += cfg.d_embed;
    }

    std::vector<Eigen::VectorXd> dln(K, Eigen::VectorXd::Zero(cfg.d_proj));
    if (cfg.use_temporal) {
        // Attention backward.
        const auto& attn_W = m.params.at("attn_W");
        const auto& attn_q = m.params.at("attn_q");
        std::vector<Eigen::VectorXd> dh(K, Eigen::VectorXd::Zero(2 * H));
        Eigen::VectorXd dpool = dpooled_part.head(2 * H);
        dh[K - 1] += dpooled_part.tail(2 * H);
        Eigen::VectorXd dalpha(K);
        for (int t = 0; t < K; ++t) {
            dalpha(t) = dpool.dot(c.hcat[t]);
            dh[t] += c.alpha(t) * dpool;
        }
        double dot = c.alpha.dot(dalpha);
        Eigen::VectorXd dscores =
            c.alpha.cwiseProduct(dalpha - Eigen::VectorXd::Constant(K, dot));
        for (int t = 0; t < K; ++t) {
            g["attn_q"].col(0) += dscores(t) * c.key[t];
            Eigen::VectorXd dkey = dscores(t) * attn_q.col(0);
            Eigen::VectorXd dpre = dkey.cwiseProduct((1.0 - c.key[t].array().square()).matrix());
            g["attn_W"] += dpre * c.hcat[t].transpose();
            g["attn_b"].col(0) += dpre;
            dh[t] += attn_W.transpose() * dpre;
        }

        // BiGRU backward (forward direction).
        Eigen::VectorXd carry = Eigen::VectorXd::Zero(H);
        for (int t = K - 1; t >= 0; --t) {
            Eigen::VectorXd dht = dh[t].head(H) + carry;
            Eigen::VectorXd dx = Eigen::VectorXd::Zero(cfg.d_proj);
            carry = Eigen::VectorXd::Zero(H);
            gru_backward(m, "gruf", c.fwd[t], dht, dx, carry, g);
            dln[t] += dx;
        }
        // Backward direction (bwd[i] processed ln_out[K-1-i]).
        carry = Eigen::VectorXd::Zero(H);
        for (int i = K - 1; i >= 0; --i) {
            int t = K - 1 - i;
            Eigen::VectorXd dht = dh[t].tail(H) + carry;
            Eigen::VectorXd dx = Eigen::VectorXd::Zero(cfg.d_proj);
            carry = Eigen::VectorXd::Zero(H);
            gru_backward(m, "grub", c.bwd[i], dht, dx, carry, g);
            dln[t] += dx;
        }
    } else {
        for (int t = 0; t < K; ++t) dln[t] += dpooled_part / static_cast<double>(K);
    }

    // LayerNorm + projection backward.
    const auto& norm_scale = m.params.at("norm_scale");
    const auto& proj_W = m.params.at("proj_W");
    const double P = cfg.d_proj;
    for (int t = 0; t < K; ++t) {
        if (dln[t].isZero(0)) continue;
        g["norm_scale"].col(0) += dln[t].cwiseProduct(c.xhat[t]);
        g["norm_shift"].col(0) += dln[t];
        Eigen::VectorXd dxhat = dln[t].cwiseProduct(norm_scale.col(0));
        double mean_dxhat = dxhat.mean();
        double mean_dxhat_xhat = dxhat.cwiseProduct(c.xhat[t]).mean();
        Eigen::VectorXd dp =
            (dxhat.array() - mean_dxhat - c.xhat[t].array() * mean_dxhat_xhat) / c.ln_s[t];
        g["proj_W"] += dp * item.temporal.row(t);
        g["proj_b"].col(0) += dp;
        (void)P;
    }
}

std::map<std::string, Eigen::MatrixXd> zero_like(const PersonalizerModel& m) {
    std::map<std::string, Eigen::MatrixXd> g;
    for (const auto& [name, p] : m.params) g[name] = Eigen::MatrixXd::Zero(p.rows(), p.cols());
    return g;
}

}  // namespace

int ModelConfig::fused_width() const {
    int w = (use_temporal ? 4 * d_hidden : d_proj) + s_features;
    if (use_segment) w += d_embed;
    if (use_intent) w += d_embed;
    return w;
}

void ModelConfig::validate() const {
    if (f_features < 1 || s_features < 1 || k_months < 1 || d_proj < 1 || d_hidden < 1 ||
        d_attn < 1 || d_embed < 1 || d_trunk < 1)
        throw ConfigError("model dimensions must be >= 1");
    if (head_sizes != std::array<int, 4>{kNumProducts, kNumChannels, kNumTimings, kNumLevels})
        throw ConfigError("head sizes must match the action vocabularies");
    if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must be in [0, 1)");
}

PersonalizerModel PersonalizerModel::init(const ModelConfig& config) {
    config.validate();
    PersonalizerModel m;
    m.config = config;
    const int P = config.d_proj, H = config.d_hidden, A = config.d_attn, E = config.d_embed;
    auto add = [&](const std::string& name, int r, int c) {
        m.params[name] = Eigen::MatrixXd::Zero(r, c);
    };
    add("proj_W", P, config.f_features);
    add("proj_b", P, 1);
    add("norm_scale", P, 1);
    add("norm_shift", P, 1);
    for (const char* pre : {"gruf", "grub"}) {
        for (const char* gate : {"z", "r", "n"}) {
            add(std::string(pre) + "_W" + gate, H, P);
            add(std::string(pre) + "_U" + gate, H, H);
            add(std::string(pre) + "_b" + gate, H, 1);
        }
    }
    add("attn_W", A, 2 * H);
    add("attn_b", A, 1);
    add("attn_q", A, 1);
    add("emb_segment", kNumSegments, E);
    add("emb_intent", kNumIntentStates, E);
    add("trunk_W", config.d_trunk, config.fused_width());
    add("trunk_b", config.d_trunk, 1);
    for (int h = 0; h < 4; ++h) {
        add(std::string("head_") + kHeadNames[h] + "_W", config.head_sizes[h], config.d_trunk);
        add(std::string("head_") + kHeadNames[h] + "_b", config.head_sizes[h], 1);
    }

    Rng rng = Rng(config.seed).substream(0xbeefULL);
    auto is_bias = [](const std::string& name) {
        auto pos = name.rfind('_');
        if (pos == std::string::npos) return false;
        std::string suffix = name.substr(pos + 1);
        return suffix == "b" || suffix == "bz" || suffix == "br" || suffix == "bn";
    };
    for (auto& [name, p] : m.params) {
        if (is_bias(name) || name == "norm_shift") continue;  // start at zero
        if (name == "norm_scale") {
            p.setOnes();
            continue;
        }
        double lim = std::sqrt(1.0 / static_cast<double>(p.cols()));
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = (rng.uniform() * 2 - 1) * lim;
    }
    return m;
}

ForwardResult forward(const PersonalizerModel& model, const Item& item) {
    Cache c = forward_cached(model, item, false, nullptr);
    ForwardResult out;
    out.logits = c.logits;
    out.attention = c.alpha;
    return out;
}

double multitask_loss(const std::array<std::vector<Eigen::VectorXd>, 4>& logits,
                      const std::array<std::vector<int>, 4>& labels) {
    double total = 0;
    for (int h = 0; h < 4; ++h) {
        if (logits[h].empty()) throw DataError("multitask_loss: empty batch");
        if (logits[h].size() != labels[h].size())
            throw DataError("multitask_loss: logits/labels mismatch");
        double head = 0;
        for (size_t i = 0; i < logits[h].size(); ++i) {
            int y = labels[h][i];
            if (y < 0 || y >= logits[h][i].size())
                throw DataError("multitask_loss: label out of range");
            Eigen::VectorXd p = softmax(logits[h][i]);
            head -= std::log(std::max(p(y), 1e-300));
        }
        total += head / static_cast<double>(logits[h].size());
    }
    return total;
}

double loss_and_gradients(const PersonalizerModel& model, const std::vector<Item>& batch,
                          std::map<std::string, Eigen::MatrixXd>& grads,
                          persona::Rng* dropout_rng) {
    if (batch.empty()) throw DataError("loss_and_gradients: empty batch");
    grads = zero_like(model);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0;
    for (const Item& item : batch) {
        Cache c = forward_cached(model, item, true, dropout_rng);
        std::array<Eigen::VectorXd, 4> dlogits;
        for (int h = 0; h < 4; ++h) {
            int y = item.labels[h];
            if (y < 0 || y >= c.logits[h].size())
                throw DataError("loss_and_gradients: label out of range");
            Eigen::VectorXd p = softmax(c.logits[h]);
            loss -= std::log(std::max(p(y), 1e-300)) * inv_n;
            dlogits[h] = p * inv_n;
            dlogits[h](y) -= inv_n;
        }
        backward_from_logits(model, item, c, dlogits, grads);
    }
    return loss;
}

void TrainConfig::validate() const {
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (clip_norm <= 0) throw ConfigError("clip_norm must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
}

namespace {

double overall_macro_f1(const PersonalizerModel& model, const std::vector<Item>& items) {
    std::array<std::vector<int>, 4> preds, truth;
    for (const Item& it : items) {
        auto rec = predict(model, it);
        preds[0].push_back(static_cast<int>(rec.predicted.product));
        preds[1].push_back(static_cast<int>(rec.predicted.channel));
        preds[2].push_back(static_cast<int>(rec.predicted.timing));
        preds[3].push_back(static_cast<int>(rec.predicted.level));
        for (int h = 0; h < 4; ++h) truth[h].push_back(it.labels[h]);
    }
    double total = 0;
    for (int h = 0; h < 4; ++h)
        total += evalharness::macro_f1(preds[h], truth[h], model.config.head_sizes[h]);
    return total / 4.0;
}

}  // namespace

TrainResult train(const std::vector<Item>& train_items, const std::vector<Item>& val_items,
                  const ModelConfig& mcfg, const TrainConfig& tcfg) {
    tcfg.validate();
    if (train_items.empty()) throw DataError("train: empty train split");

    PersonalizerModel model = PersonalizerModel::init(mcfg);
    std::map<std::string, Eigen::MatrixXd> m1 = zero_like(model), m2 = zero_like(model);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    int64_t step = 0;

    TrainResult out;
    PersonalizerModel best = model;
    double best_f1 = -1;
    int best_epoch = -1;

    Rng shuffle_rng = Rng(tcfg.seed).substream(0x5f1eULL);
    Rng dropout_rng = Rng(tcfg.seed).substream(0xd20ULL);

    for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
        auto perm = shuffle_rng.substream(static_cast<uint64_t>(epoch)).permutation(
            train_items.size());
        double epoch_loss = 0;
        int n_batches = 0;
        for (size_t start = 0; start < train_items.size(); start += tcfg.batch_size) {
            std::vector<Item> batch;
            for (size_t i = start; i < std::min(train_items.size(),
                                                start + static_cast<size_t>(tcfg.batch_size)); ++i)
                batch.push_back(train_items[perm[i]]);
            std::map<std::string, Eigen::MatrixXd> grads;
            epoch_loss += loss_and_gradients(model, batch, grads, &dropout_rng);
            ++n_batches;

            // Global-norm clipping.
            double norm2 = 0;
            for (const auto& [name, gmat] : grads) norm2 += gmat.squaredNorm();
            double norm = std::sqrt(norm2);
            double scale = norm > tcfg.clip_norm ? tcfg.clip_norm / norm : 1.0;

            ++step;
            double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (auto& [name, p] : model.params) {
                Eigen::MatrixXd gmat = grads[name] * scale;
                m1[name] = beta1 * m1[name] + (1 - beta1) * gmat;
                m2[name] = beta2 * m2[name] + (1 - beta2) * gmat.cwiseProduct(gmat);
                Eigen::MatrixXd mhat = m1[name] / bc1;
                Eigen::MatrixXd vhat = m2[name] / bc2;
                p -= tcfg.lr * (mhat.array() / (vhat.array().sqrt() + adam_eps)).matrix();
                p -= tcfg.lr * tcfg.weight_decay * p;  // decoupled decay
            }
        }
        out.history.train_loss.push_back(n_batches > 0 ? epoch_loss / n_batches : 0.0);

        double val_f1 = val_items.empty() ? 0.0 : overall_macro_f1(model, val_items);
        out.history.val_macro_f1.push_back(val_f1);
        if (val_f1 > best_f1) {
            best_f1 = val_f1;
            best = model;
            best_epoch = epoch;
        }
        if (epoch - best_epoch >= tcfg.patience) break;
    }
    out.model = best_epoch >= 0 ? best : model;
    out.history.best_epoch = best_epoch;
    return out;
}

PredictionRecord predict(const PersonalizerModel& model, const Item& item) {
    auto fwd = forward(model, item);
    PredictionRecord rec;
    rec.customer_id = item.customer_id;
    rec.month_index = item.month_index;
    rec.logits = fwd.logits;
    rec.attention_weights = fwd.attention;
    std::array<int, 4> arg{};
    for (int h = 0; h < 4; ++h) {
        // Ties break toward the lower class index.
        int best = 0;
        for (int i = 1; i < fwd.logits[h].size(); ++i)
            if (fwd.logits[h](i) > fwd.logits[h](best)) best = i;
        arg[h] = best;
    }
    rec.predicted.product = static_cast<Product>(arg[0]);
    rec.predicted.channel = static_cast<Channel>(arg[1]);
    rec.predicted.timing = static_cast<Timing>(arg[2]);
    rec.predicted.level = static_cast<Level>(arg[3]);
    return rec;
}

std::map<std::string, double> gradient_check(const PersonalizerModel& model,
                                             const std::vector<Item>& batch,
                                             int entries_per_tensor) {
    std::map<std::string, Eigen::MatrixXd> grads;
    loss_and_gradients(model, batch, grads, nullptr);

    const double h = 1e-6;
    std::map<std::string, double> max_rel;
    PersonalizerModel probe = model;
    for (const auto& [name, p] : model.params) {
        double worst = 0;
        Eigen::Index total = p.size();
        Eigen::Index n_checks = std::min<Eigen::Index>(entries_per_tensor, total);
        for (Eigen::Index j = 0; j < n_checks; ++j) {
            Eigen::Index idx = total * j / n_checks;
            double* slot = probe.params[name].data() + idx;
            double orig = *slot;
            std::map<std::string, Eigen::MatrixXd> dummy;
            *slot = orig + h;
            double lp = loss_and_gradients(probe, batch, dummy, nullptr);
            *slot = orig - h;
            double lm = loss_and_gradients(probe, batch, dummy, nullptr);
            *slot = orig;
            double fd = (lp - lm) / (2 * h);
            double an = *(grads[name].data() + idx);
            double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            worst = std::max(worst, rel);
        }
        max_rel[name] = worst;
    }
    return max_rel;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void write_model_json(const std::filesystem::path& path, const PersonalizerModel& model) {
    nlohmann::json j;
    j["config"] = {{"f_features", model.config.f_features},
                   {"s_features", model.config.s_features},
                   {"k_months", model.config.k_months},
                   {"d_proj", model.config.d_proj},
                   {"d_hidden", model.config.d_hidden},
                   {"d_attn", model.config.d_attn},
                   {"d_embed", model.config.d_embed},
                   {"d_trunk", model.config.d_trunk},
                   {"dropout", model.config.dropout},
                   {"use_intent", model.config.use_intent},
                   {"use_segment", model.config.use_segment},
                   {"use_temporal", model.config.use_temporal},
                   {"seed", model.config.seed}};
    nlohmann::json tensors;
    for (const auto& [name, p] : model.params) {
        std::vector<double> vals;
        vals.reserve(p.size());
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            for (Eigen::Index c = 0; c < p.cols(); ++c) vals.push_back(p(r, c));
        tensors[name] = {{"rows", p.rows()}, {"cols", p.cols()}, {"values", vals}};
    }
    j["tensors"] = std::move(tensors);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(0) << '\n';
}

PersonalizerModel read_model_json(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StageDependencyError("missing file: " + path.string());
    nlohmann::json j = nlohmann::json::parse(f);
    ModelConfig cfg;
    const auto& jc = j.at("config");
    cfg.f_features = jc.at("f_features").get<int>();
    cfg.s_features = jc.at("s_features").get<int>();
    cfg.k_months = jc.at("k_months").get<int>();
    cfg.d_proj = jc.at("d_proj").get<int>();
    cfg.d_hidden = jc.at("d_hidden").get<int>();
    cfg.d_attn = jc.at("d_attn").get<int>();
    cfg.d_embed = jc.at("d_embed").get<int>();
    cfg.d_trunk = jc.at("d_trunk").get<int>();
    cfg.dropout = jc.at("dropout").get<double>();
    cfg.use_intent = jc.at("use_intent").get<bool>();
    cfg.use_segment = jc.at("use_segment").get<bool>();
    cfg.use_temporal = jc.at("use_temporal").get<bool>();
    cfg.seed = jc.at("seed").get<uint64_t>();
    PersonalizerModel m;
    m.config = cfg;
    for (const auto& [name, t] : j.at("tensors").items()) {
        Eigen::Index rows = t.at("rows").get<Eigen::Index>();
        Eigen::Index cols = t.at("cols").get<Eigen::Index>();
        auto vals = t.at("values").get<std::vector<double>>();
        Eigen::MatrixXd p(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) p(r, c) = vals[r * cols + c];
        m.params[name] = std::move(p);
    }
    return m;
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << "epoch,train_loss,val_macro_f1\n";
    for (size_t e = 0; e < history.train_loss.size(); ++e)
        f << (e + 1) << ',' << history.train_loss[e] << ',' << history.val_macro_f1[e] << '\n';
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

namespace {

// The count and currency features are lognormal-like; z-scoring the log keeps
// the encoder's inputs in a comparable range across features.
std::array<double, kNumTemporalFeatures> log_temporal(const CustomerMonth& m) {
    auto f = m.features();
    for (int j = 0; j < kNumTemporalFeatures; ++j) f[j] = std::log1p(std::max(0.0, f[j]));
    return f;
}

}  // namespace

FeatureStats compute_feature_stats(const std::vector<CustomerStatic>& statics,
                                   const std::vector<CustomerMonth>& months,
                                   const std::vector<int64_t>& train_ids) {
    std::set<int64_t> train(train_ids.begin(), train_ids.end());
    FeatureStats st;
    st.temporal_mean = Eigen::RowVectorXd::Zero(kNumTemporalFeatures);
    st.temporal_sd = Eigen::RowVectorXd::Ones(kNumTemporalFeatures);
    double n = 0;
    for (const auto& m : months) {
        if (!train.count(m.customer_id)) continue;
        auto f = log_temporal(m);
        for (int j = 0; j < kNumTemporalFeatures; ++j) st.temporal_mean(j) += f[j];
        n += 1;
    }
    if (n == 0) throw DataError("compute_feature_stats: no train rows");
    st.temporal_mean /= n;
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(kNumTemporalFeatures);
    for (const auto& m : months) {
        if (!train.count(m.customer_id)) continue;
        auto f = log_temporal(m);
        for (int j = 0; j < kNumTemporalFeatures; ++j) {
            double d = f[j] - st.temporal_mean(j);
            var(j) += d * d;
        }
    }
    st.temporal_sd = (var / n).cwiseSqrt();
    for (int j = 0; j < kNumTemporalFeatures; ++j)
        if (st.temporal_sd(j) <= 0) st.temporal_sd(j) = 1;

    st.static_mean = Eigen::VectorXd::Zero(6);
    st.static_sd = Eigen::VectorXd::Ones(6);
    double ns = 0;
    auto cont = [](const CustomerStatic& s) {
        Eigen::VectorXd v(6);
        v << s.age, std::log(std::max(1.0, s.income)), s.credit_score, s.risk_score,
            s.tenure_months, s.digital_engagement_index;
        return v;
    };
    for (const auto& s : statics) {
        if (!train.count(s.customer_id)) continue;
        st.static_mean += cont(s);
        ns += 1;
    }
    if (ns == 0) throw DataError("compute_feature_stats: no train customers");
    st.static_mean /= ns;
    Eigen::VectorXd svar = Eigen::VectorXd::Zero(6);
    for (const auto& s : statics) {
        if (!train.count(s.customer_id)) continue;
        Eigen::VectorXd d = cont(s) - st.static_mean;
        svar += d.cwiseProduct(d);
    }
    st.static_sd = (svar / ns).cwiseSqrt();
    for (int j = 0; j < 6; ++j)
        if (st.static_sd(j) <= 0) st.static_sd(j) = 1;
    return st;
}

Eigen::VectorXd encode_static(const CustomerStatic& s, const FeatureStats& stats) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(19);
    Eigen::VectorXd cont(6);
    cont << s.age, std::log(std::max(1.0, s.income)), s.credit_score, s.risk_score,
        s.tenure_months, s.digital_engagement_index;
    v.head(6) = (cont - stats.static_mean).cwiseQuotient(stats.static_sd);
    v(6 + s.region) = 1.0;
    v(11 + static_cast<int>(s.channel_pref)) = 1.0;
    v(15) = s.holds_credit_card ? 1 : 0;
    v(16) = s.holds_savings ? 1 : 0;
    v(17) = s.holds_personal_loan ? 1 : 0;
    v(18) = s.holds_mortgage ? 1 : 0;
    return v;
}

std::vector<Item> build_items(const std::vector<CustomerStatic>& statics,
                              const std::vector<CustomerMonth>& months,
                              const std::vector<int64_t>& customer_ids,
                              const std::map<int64_t, int>& segment_ids,
                              const std::map<int64_t, int>& intent_ids,
                              const FeatureStats& stats, int k_months) {
    std::map<int64_t, const CustomerStatic*> static_of;
    for (const auto& s : statics) static_of[s.customer_id] = &s;
    std::map<int64_t, std::vector<const CustomerMonth*>> by_customer;
    for (const auto& m : months) by_customer[m.customer_id].push_back(&m);

    std::vector<Item> items;
    items.reserve(customer_ids.size());
    for (int64_t id : customer_ids) {
        auto sit = static_of.find(id);
        auto mit = by_customer.find(id);
        if (sit == static_of.end() || mit == by_customer.end())
            throw DataError("build_items: customer " + std::to_string(id) + " missing");
        auto rows = mit->second;
        std::sort(rows.begin(), rows.end(), [](const CustomerMonth* a, const CustomerMonth* b) {
            return a->month_index < b->month_index;
        });
        if (static_cast<int>(rows.size()) != k_months)
            throw DataError("build_items: customer " + std::to_string(id) + " missing months");
        Item item;
        item.customer_id = id;
        item.month_index = k_months;
        item.temporal.resize(k_months, kNumTemporalFeatures);
        for (int t = 0; t < k_months; ++t) {
            auto f = log_temporal(*rows[t]);
            for (int j = 0; j < kNumTemporalFeatures; ++j)
                item.temporal(t, j) = (f[j] - stats.temporal_mean(j)) / stats.temporal_sd(j);
        }
        item.statics = encode_static(*sit->second, stats);
        item.segment_id = segment_ids.at(id);
        item.intent_id = intent_ids.at(id);
        const auto& final_action = rows.back()->action;
        item.labels = {static_cast<int>(final_action.product), static_cast<int>(final_action.channel),
                       static_cast<int>(final_action.timing), static_cast<int>(final_action.level)};
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace persona::personalizer
