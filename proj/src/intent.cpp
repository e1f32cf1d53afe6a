#include "persona/intent.hpp"

#include "persona/csv.hpp"
#include "persona/errors.hpp"
#include "persona/rng.hpp"
#include "persona/segmentation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

namespace persona::intent {

std::vector<double> kalman_smooth(const std::vector<double>& series, const KalmanParams& params) {
    if (params.process_var_ratio <= 0) throw ConfigError("process_var_ratio must be > 0");
    for (double v : series)
        if (!std::isfinite(v)) throw DataError("kalman_smooth: non-finite input");
    const size_t k = series.size();
    if (k == 0) return {};

    const double q = params.process_var_ratio;  // process variance (R = 1)
    std::vector<double> x_filt(k), p_filt(k), x_pred(k), p_pred(k);

    // Exact diffuse start: first filtered state equals the first observation.
    x_pred[0] = series[0];
    p_pred[0] = std::numeric_limits<double>::infinity();
    x_filt[0] = series[0];
    p_filt[0] = 1.0;  // limit of P*R/(P+R) as P -> inf
    for (size_t t = 1; t < k; ++t) {
        x_pred[t] = x_filt[t - 1];
        p_pred[t] = p_filt[t - 1] + q;
        double gain = p_pred[t] / (p_pred[t] + 1.0);
        x_filt[t] = x_pred[t] + gain * (series[t] - x_pred[t]);
        p_filt[t] = (1.0 - gain) * p_pred[t];
    }

    std::vector<double> smoothed(k);
    smoothed[k - 1] = x_filt[k - 1];
    for (size_t t = k - 1; t-- > 0;) {
        double c = p_filt[t] / p_pred[t + 1];
        smoothed[t] = x_filt[t] + c * (smoothed[t + 1] - x_pred[t + 1]);
    }
    return smoothed;
}

void HmmModel::validate() const {
    if (n_states < 1) throw ConfigError("hmm: n_states must be >= 1");
    if (initial.size() != n_states || transitions.rows() != n_states ||
        transitions.cols() != n_states)
        throw DimensionError("hmm: parameter shapes inconsistent with n_states");
    if (std::abs(initial.sum() - 1.0) > 1e-10) throw ConfigError("hmm: initial does not sum to 1");
    for (int s = 0; s < n_states; ++s)
        if (std::abs(transitions.row(s).sum() - 1.0) > 1e-10)
            throw ConfigError("hmm: transition row " + std::to_string(s) + " does not sum to 1");
    if ((emission_vars.array() < kVarianceFloor - 1e-15).any())
        throw ConfigError("hmm: emission variance below floor");
}

namespace {

// Log density of a diagonal Gaussian, one row per state.
Eigen::MatrixXd emission_log_density(const HmmModel& model, const Eigen::MatrixXd& obs) {
    const auto k = obs.rows();
    Eigen::MatrixXd loge(k, model.n_states);
    for (int s = 0; s < model.n_states; ++s) {
        double log_norm = 0;
        for (Eigen::Index f = 0; f < obs.cols(); ++f)
            log_norm += -0.5 * std::log(2.0 * M_PI * model.emission_vars(s, f));
        for (Eigen::Index t = 0; t < k; ++t) {
            double quad = 0;
            for (Eigen::Index f = 0; f < obs.cols(); ++f) {
                double d = obs(t, f) - model.emission_means(s, f);
                quad += d * d / model.emission_vars(s, f);
            }
            loge(t, s) = log_norm - 0.5 * quad;
        }
    }
    return loge;
}

}  // namespace

ForwardBackwardResult forward_backward(const HmmModel& model, const Eigen::MatrixXd& obs) {
    model.validate();
    if (obs.cols() != model.emission_means.cols())
        throw DimensionError("forward_backward: feature width mismatch");
    const auto k = obs.rows();
    const int ns = model.n_states;
    if (k == 0) throw DataError("forward_backward: empty observation sequence");

    Eigen::MatrixXd loge = emission_log_density(model, obs);
    // Per-step max-shift keeps scaled emissions in range; the shift is added
    // back into the log-likelihood.
    Eigen::VectorXd shift(k);
    Eigen::MatrixXd e(k, ns);
    for (Eigen::Index t = 0; t < k; ++t) {
        shift(t) = loge.row(t).maxCoeff();
        e.row(t) = (loge.row(t).array() - shift(t)).exp();
    }

    Eigen::MatrixXd alpha(k, ns), beta(k, ns);
    Eigen::VectorXd scale(k);
    alpha.row(0) = model.initial.transpose().cwiseProduct(e.row(0));
    scale(0) = alpha.row(0).sum();
    alpha.row(0) /= scale(0);
    for (Eigen::Index t = 1; t < k; ++t) {
        alpha.row(t) = (alpha.row(t - 1) * model.transitions).cwiseProduct(e.row(t));
        scale(t) = alpha.row(t).sum();
        alpha.row(t) /= scale(t);
    }
    beta.row(k - 1).setOnes();
    for (Eigen::Index t = k - 2; t >= 0; --t) {
        beta.row(t) =
            (model.transitions * beta.row(t + 1).cwiseProduct(e.row(t + 1)).transpose()).transpose();
        beta.row(t) /= scale(t + 1);
    }

    ForwardBackwardResult out;
    out.log_likelihood = scale.array().log().sum() + shift.sum();
    out.gamma = alpha.cwiseProduct(beta);
    for (Eigen::Index t = 0; t < k; ++t) out.gamma.row(t) /= out.gamma.row(t).sum();
    out.xi.reserve(k > 0 ? k - 1 : 0);
    for (Eigen::Index t = 0; t + 1 < k; ++t) {
        Eigen::MatrixXd x(ns, ns);
        for (int i = 0; i < ns; ++i)
            for (int j = 0; j < ns; ++j)
                x(i, j) = alpha(t, i) * model.transitions(i, j) * e(t + 1, j) * beta(t + 1, j);
        x /= x.sum();
        out.xi.push_back(std::move(x));
    }
    return out;
}

Eigen::MatrixXd mean_shift_recenter(const Eigen::MatrixXd& means, const Eigen::MatrixXd& obs,
                                    const Eigen::MatrixXd& gamma, double bandwidth) {
    if (bandwidth <= 0) throw ConfigError("mean_shift: bandwidth must be > 0");
    if (obs.rows() != gamma.rows()) throw DimensionError("mean_shift: obs/gamma row mismatch");
    const int ns = static_cast<int>(means.rows());
    const bool flat = std::isinf(bandwidth);
    Eigen::MatrixXd out = means;
    for (int s = 0; s < ns; ++s) {
        Eigen::VectorXd num = Eigen::VectorXd::Zero(means.cols());
        double den = 0;
        for (Eigen::Index n = 0; n < obs.rows(); ++n) {
            double w = gamma(n, s);
            if (!flat) {
                double d2 = (obs.row(n) - means.row(s)).squaredNorm();
                w *= std::exp(-d2 / (2.0 * bandwidth * bandwidth));
            }
            num += w * obs.row(n).transpose();
            den += w;
        }
        if (den < 1e-300) {
            std::cerr << "warning: mean_shift kernel weights vanished for state " << s
                      << "; keeping previous mean\n";
            continue;
        }
        out.row(s) = (num / den).transpose();
    }
    return out;
}

HmmModel fit_imsk_hmm(const std::vector<Eigen::MatrixXd>& sequences, const HmmFitConfig& config) {
    if (sequences.empty()) throw DataError("fit_imsk_hmm: no sequences");
    const int ns = config.n_states;
    const Eigen::Index nf = sequences.front().cols();
    Eigen::Index total_rows = 0;
    for (const auto& s : sequences) {
        if (s.cols() != nf) throw DimensionError("fit_imsk_hmm: inconsistent feature width");
        total_rows += s.rows();
    }

    // Pooled observations, used by initialization and by the mean-shift step.
    Eigen::MatrixXd pooled(total_rows, nf);
    Eigen::Index row = 0;
    for (const auto& s : sequences) {
        pooled.middleRows(row, s.rows()) = s;
        row += s.rows();
    }

    // Initialization: slice observations into n_states quantile bins along a
    // scoring direction; per-bin means/variances seed the emissions.
    auto init_from_score = [&](const Eigen::VectorXd& score) {
        std::vector<Eigen::Index> order(total_rows);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return score(a) != score(b) ? score(a) < score(b) : a < b;
        });
        HmmModel m;
        m.n_states = ns;
        m.initial = Eigen::VectorXd::Constant(ns, 1.0 / ns);
        m.transitions = Eigen::MatrixXd::Constant(ns, ns, 0.4 / std::max(1, ns - 1));
        for (int s = 0; s < ns; ++s) m.transitions(s, s) = ns > 1 ? 0.6 : 1.0;
        m.emission_means.resize(ns, nf);
        m.emission_vars.resize(ns, nf);
        for (int s = 0; s < ns; ++s) {
            Eigen::Index lo = total_rows * s / ns;
            Eigen::Index hi = std::max(lo + 1, total_rows * (s + 1) / ns);
            Eigen::MatrixXd bin(hi - lo, nf);
            for (Eigen::Index i = lo; i < hi; ++i) bin.row(i - lo) = pooled.row(order[i]);
            m.emission_means.row(s) = bin.colwise().mean();
            Eigen::RowVectorXd var =
                (bin.rowwise() - bin.colwise().mean()).array().square().colwise().mean();
            m.emission_vars.row(s) = var.cwiseMax(HmmModel::kVarianceFloor);
        }
        return m;
    };
    HmmModel model = init_from_score(pooled.rowwise().mean());

    // EM from a given starting point; returns the fitted model and the
    // log-likelihood of the last E-step for restart selection.
    auto run_em = [&](HmmModel m) -> std::pair<HmmModel, double> {
        double prev_ll = -std::numeric_limits<double>::infinity();
        double last_ll = -std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < config.max_iter; ++iter) {
            Eigen::VectorXd init_acc = Eigen::VectorXd::Zero(ns);
            Eigen::MatrixXd xi_acc = Eigen::MatrixXd::Zero(ns, ns);
            Eigen::MatrixXd all_gamma(total_rows, ns);
            double ll = 0;
            Eigen::Index at = 0;
            for (const auto& seq : sequences) {
                auto fb = forward_backward(m, seq);
                ll += fb.log_likelihood;
                init_acc += fb.gamma.row(0).transpose();
                for (const auto& x : fb.xi) xi_acc += x;
                all_gamma.middleRows(at, seq.rows()) = fb.gamma;
                at += seq.rows();
            }
            last_ll = ll;

            m.initial = init_acc / init_acc.sum();
            for (int s = 0; s < ns; ++s) {
                double rs = xi_acc.row(s).sum();
                if (rs > 0) m.transitions.row(s) = xi_acc.row(s) / rs;
            }
            m.emission_means =
                mean_shift_recenter(m.emission_means, pooled, all_gamma, config.bandwidth);
            for (int s = 0; s < ns; ++s) {
                double gs = all_gamma.col(s).sum();
                if (gs <= 0) continue;
                Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(nf);
                for (Eigen::Index n = 0; n < total_rows; ++n)
                    var += all_gamma(n, s) *
                           (pooled.row(n) - m.emission_means.row(s)).array().square().matrix();
                m.emission_vars.row(s) = (var / gs).cwiseMax(HmmModel::kVarianceFloor);
            }

            if (iter > 0 && ll - prev_ll < config.tol) break;
            prev_ll = ll;
        }
        return {std::move(m), last_ll};
    };

    // Multiple starts guard against the local optima Baum-Welch is prone to:
    // the rowwise-mean quantile init, one axis-aligned quantile init per
    // feature (capped), and seeded jitters of the first init. The best final
    // likelihood wins; ties keep the earlier candidate, so the procedure is
    // deterministic.
    constexpr Eigen::Index kMaxAxisInits = 8;
    constexpr int kJitterRestarts = 2;
    auto best = run_em(model);
    for (Eigen::Index f = 0; f < std::min(nf, kMaxAxisInits); ++f) {
        auto fitted = run_em(init_from_score(pooled.col(f)));
        if (fitted.second > best.second) best = std::move(fitted);
    }
    Rng restart_rng(config.seed);
    for (int r = 0; r < kJitterRestarts; ++r) {
        HmmModel cand = model;
        for (int s = 0; s < ns; ++s)
            for (Eigen::Index f = 0; f < nf; ++f)
                cand.emission_means(s, f) += restart_rng.normal(0.0, 0.5);
        auto fitted = run_em(std::move(cand));
        if (fitted.second > best.second) best = std::move(fitted);
    }
    return best.first;
}

DecodedTrajectory viterbi(const HmmModel& model, const Eigen::MatrixXd& obs) {
    model.validate();
    const auto k = obs.rows();
    const int ns = model.n_states;
    DecodedTrajectory out;
    if (k == 0) return out;

    Eigen::MatrixXd loge = emission_log_density(model, obs);
    Eigen::MatrixXd log_trans = model.transitions.array().max(1e-300).log();
    Eigen::MatrixXd delta(k, ns);
    Eigen::MatrixXi back(k, ns);
    delta.row(0) = model.initial.array().max(1e-300).log().transpose() + loge.row(0).array();
    for (Eigen::Index t = 1; t < k; ++t) {
        for (int j = 0; j < ns; ++j) {
            int best = 0;
            double best_v = delta(t - 1, 0) + log_trans(0, j);
            for (int i = 1; i < ns; ++i) {
                double v = delta(t - 1, i) + log_trans(i, j);
                if (v > best_v) {  // strict: ties keep the lower index
                    best_v = v;
                    best = i;
                }
            }
            delta(t, j) = best_v + loge(t, j);
            back(t, j) = best;
        }
    }
    int last = 0;
    for (int j = 1; j < ns; ++j)
        if (delta(k - 1, j) > delta(k - 1, last)) last = j;
    out.states.assign(k, 0);
    out.states[k - 1] = last;
    for (Eigen::Index t = k - 1; t > 0; --t) out.states[t - 1] = back(t, out.states[t]);
    out.log_likelihood = delta(k - 1, last);
    return out;
}

std::vector<int> hungarian_max_assignment(const Eigen::MatrixXd& score) {
    const int n = static_cast<int>(score.rows());
    if (score.cols() != n) throw DimensionError("hungarian: square matrix required");
    // Min-cost formulation with potentials (rows/cols 1-based internally).
    double max_v = score.maxCoeff();
    std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, 0));
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) cost[i][j] = max_v - score(i - 1, j - 1);

    std::vector<double> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0][j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assignment(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) assignment[p[j] - 1] = j - 1;
    return assignment;
}

IntentScore align_and_score(const std::vector<int>& decoded, const std::vector<int>& truth,
                            int n_states) {
    if (decoded.size() != truth.size()) throw DataError("align_and_score: coverage mismatch");
    if (decoded.empty()) throw DataError("align_and_score: empty input");
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n_states, n_states);
    for (size_t i = 0; i < decoded.size(); ++i) counts(decoded[i], truth[i]) += 1;

    IntentScore out;
    out.state_to_truth = hungarian_max_assignment(counts);
    double matched = 0;
    for (int s = 0; s < n_states; ++s) matched += counts(s, out.state_to_truth[s]);
    out.accuracy = matched / static_cast<double>(decoded.size());
    out.ari = segmentation::adjusted_rand_index(decoded, truth);
    out.confusion = Eigen::MatrixXd::Zero(n_states, n_states);
    for (size_t i = 0; i < decoded.size(); ++i)
        out.confusion(out.state_to_truth[decoded[i]], truth[i]) += 1;
    return out;
}

// ---------------------------------------------------------------------------
// Stage
// ---------------------------------------------------------------------------

IntentStageResult run_intent_stage(const std::vector<CustomerMonth>& months, const Split& split,
                                   const IntentStageConfig& config, int k_months) {
    if (months.empty()) throw DataError("run_intent_stage: empty temporal table");
    std::map<int64_t, std::vector<const CustomerMonth*>> by_customer;
    for (const auto& m : months) by_customer[m.customer_id].push_back(&m);
    for (auto& [id, rows] : by_customer) {
        if (static_cast<int>(rows.size()) != k_months)
            throw DataError("customer " + std::to_string(id) + " missing months");
        std::sort(rows.begin(), rows.end(), [](const CustomerMonth* a, const CustomerMonth* b) {
            return a->month_index < b->month_index;
        });
    }

    // Standardization statistics from train rows only, on log1p-compressed
    // features so multiplicative behavior becomes additive.
    std::set<int64_t> train_set(split.train_ids.begin(), split.train_ids.end());
    auto log_features = [](const CustomerMonth& m) {
        auto f = m.features();
        for (int j = 0; j < kNumTemporalFeatures; ++j) f[j] = std::log1p(std::max(0.0, f[j]));
        return f;
    };
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(kNumTemporalFeatures);
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(kNumTemporalFeatures);
    double n_train_rows = 0;
    for (const auto& m : months) {
        if (!train_set.count(m.customer_id)) continue;
        auto f = log_features(m);
        for (int j = 0; j < kNumTemporalFeatures; ++j) mean(j) += f[j];
        n_train_rows += 1;
    }
    if (n_train_rows == 0) throw DataError("run_intent_stage: empty train split");
    mean /= n_train_rows;
    for (const auto& m : months) {
        if (!train_set.count(m.customer_id)) continue;
        auto f = log_features(m);
        for (int j = 0; j < kNumTemporalFeatures; ++j) {
            double d = f[j] - mean(j);
            var(j) += d * d;
        }
    }
    Eigen::RowVectorXd sd = (var / n_train_rows).cwiseSqrt();
    for (int j = 0; j < kNumTemporalFeatures; ++j)
        if (sd(j) <= 0) sd(j) = 1;

    // Standardize, Kalman-smooth each feature series, then collapse to the
    // intent-facing observation channels: an activity index (logins, sessions,
    // spend), a page-view index (segment-specific category mix averages out),
    // and per-customer-centered balance drifts. The near-binary delinquency
    // flag is deliberately excluded: its variance collapses for any state that
    // isolates flagged months, which lets a delinquency split dominate the
    // likelihood and starve the engagement-level states.
    auto build_sequence = [&](const std::vector<const CustomerMonth*>& rows) {
        Eigen::MatrixXd base(rows.size(), kNumTemporalFeatures);
        for (size_t t = 0; t < rows.size(); ++t) {
            auto f = log_features(*rows[t]);
            for (int j = 0; j < kNumTemporalFeatures; ++j) base(t, j) = (f[j] - mean(j)) / sd(j);
        }
        for (int j = 0; j < kNumTemporalFeatures; ++j) {
            std::vector<double> col(base.rows());
            for (Eigen::Index t = 0; t < base.rows(); ++t) col[t] = base(t, j);
            auto smoothed = kalman_smooth(col, config.kalman);
            for (Eigen::Index t = 0; t < base.rows(); ++t) base(t, j) = smoothed[t];
        }
        Eigen::MatrixXd seq(base.rows(), 4);
        const double sav_mean = base.col(8).mean();
        const double loan_mean = base.col(9).mean();
        for (Eigen::Index t = 0; t < base.rows(); ++t) {
            seq(t, 0) = (base(t, 0) + base(t, 1) + base(t, 7)) / 3.0;
            seq(t, 1) = base.row(t).segment(2, 5).mean();
            seq(t, 2) = base(t, 8) - sav_mean;
            seq(t, 3) = base(t, 9) - loan_mean;
        }
        return seq;
    };

    std::vector<Eigen::MatrixXd> train_sequences;
    train_sequences.reserve(split.train_ids.size());
    for (int64_t id : split.train_ids) {
        auto it = by_customer.find(id);
        if (it == by_customer.end()) throw DataError("train id not in temporal table");
        train_sequences.push_back(build_sequence(it->second));
    }

    IntentStageResult out;
    out.model = fit_imsk_hmm(train_sequences, config.fit);
    for (const auto& [id, rows] : by_customer) {
        auto decoded = viterbi(out.model, build_sequence(rows));
        out.customer_ids.push_back(id);
        out.decoded.push_back(decoded.states);
        out.log_likelihood.push_back(decoded.log_likelihood);
    }
    return out;
}

void write_hmm_model_json(const std::filesystem::path& path, const HmmModel& model) {
    nlohmann::json j;
    j["n_states"] = model.n_states;
    j["initial"] = std::vector<double>(model.initial.data(), model.initial.data() + model.initial.size());
    auto mat_to_json = [](const Eigen::MatrixXd& m) {
        std::vector<std::vector<double>> rows;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            std::vector<double> row(m.cols());
            for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
            rows.push_back(std::move(row));
        }
        return rows;
    };
    j["transitions"] = mat_to_json(model.transitions);
    j["emission_means"] = mat_to_json(model.emission_means);
    j["emission_vars"] = mat_to_json(model.emission_vars);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(0) << '\n';
}

HmmModel read_hmm_model_json(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StageDependencyError("missing file: " + path.string());
    nlohmann::json j = nlohmann::json::parse(f);
    HmmModel m;
    m.n_states = j.at("n_states").get<int>();
    auto init = j.at("initial").get<std::vector<double>>();
    m.initial = Eigen::Map<Eigen::VectorXd>(init.data(), init.size());
    auto mat_from_json = [&](const char* key) {
        auto rows = j.at(key).get<std::vector<std::vector<double>>>();
        Eigen::MatrixXd out(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (size_t r = 0; r < rows.size(); ++r)
            for (size_t c = 0; c < rows[r].size(); ++c) out(r, c) = rows[r][c];
        return out;
    };
    m.transitions = mat_from_json("transitions");
    m.emission_means = mat_from_json("emission_means");
    m.emission_vars = mat_from_json("emission_vars");
    return m;
}

void write_decoded_csv(const std::filesystem::path& path, const IntentStageResult& result) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << "customer_id,month_index,decoded_state\n";
    for (size_t c = 0; c < result.customer_ids.size(); ++c)
        for (size_t t = 0; t < result.decoded[c].size(); ++t)
            f << result.customer_ids[c] << ',' << (t + 1) << ',' << result.decoded[c][t] << '\n';
}

std::vector<std::tuple<int64_t, int, int>> read_decoded_csv(const std::filesystem::path& path) {
    auto rows = read_csv_rows(path);
    std::vector<std::tuple<int64_t, int, int>> out;
    for (size_t i = 1; i < rows.size(); ++i)
        out.emplace_back(std::stoll(rows[i][0]), std::stoi(rows[i][1]), std::stoi(rows[i][2]));
    return out;
}

}  // namespace persona::intent
