#include "powertrace/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>

#include "powertrace/errors.hpp"
#include "powertrace/log.hpp"
#include "powertrace/rng.hpp"

namespace powertrace {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct DirCache {
    Eigen::MatrixXd r, z, n, rh, h; // hidden x T, processing order
};

// x columns in processing order; h gets one column per step. cache may be
// null for inference.
void gru_forward(const GruCell& c, const Eigen::MatrixXd& x, Eigen::MatrixXd& h,
                 DirCache* cache) {
    const Eigen::Index t_len = x.cols();
    const Eigen::Index d = c.b_r.size();
    h.resize(d, t_len);
    if (cache) {
        cache->r.resize(d, t_len);
        cache->z.resize(d, t_len);
        cache->n.resize(d, t_len);
        cache->rh.resize(d, t_len);
    }
    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(d);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        const Eigen::VectorXd r =
            (c.w_r * x.col(t) + c.u_r * h_prev + c.b_r).unaryExpr(&sigmoid);
        const Eigen::VectorXd z =
            (c.w_z * x.col(t) + c.u_z * h_prev + c.b_z).unaryExpr(&sigmoid);
        const Eigen::VectorXd rh = r.cwiseProduct(h_prev);
        const Eigen::VectorXd n =
            (c.w_n * x.col(t) + c.u_n * rh + c.b_n).array().tanh();
        const Eigen::VectorXd ht =
            ((1.0 - z.array()) * n.array() + z.array() * h_prev.array()).matrix();
        h.col(t) = ht;
        if (cache) {
            cache->r.col(t) = r;
            cache->z.col(t) = z;
            cache->n.col(t) = n;
            cache->rh.col(t) = rh;
        }
        h_prev = ht;
    }
    if (cache) cache->h = h;
}

// Backpropagation through time for one direction. dh_out holds the loss
// gradient w.r.t. each h_t (processing order); parameter gradients are
// accumulated into g.
void gru_backward(const GruCell& c, const Eigen::MatrixXd& x, const DirCache& cache,
                  const Eigen::MatrixXd& dh_out, GruCell& g) {
    const Eigen::Index t_len = x.cols();
    const Eigen::Index d = c.b_r.size();
    Eigen::VectorXd dh_carry = Eigen::VectorXd::Zero(d);
    for (Eigen::Index t = t_len - 1; t >= 0; --t) {
        const Eigen::VectorXd dh = dh_out.col(t) + dh_carry;
        const Eigen::VectorXd h_prev =
            t > 0 ? Eigen::VectorXd(cache.h.col(t - 1)) : Eigen::VectorXd::Zero(d);
        const auto r = cache.r.col(t).array();
        const auto z = cache.z.col(t).array();
        const auto n = cache.n.col(t).array();

        const Eigen::VectorXd dz_pre =
            (dh.array() * (h_prev.array() - n) * z * (1.0 - z)).matrix();
        const Eigen::VectorXd dn_pre =
            (dh.array() * (1.0 - z) * (1.0 - n * n)).matrix();
        const Eigen::VectorXd drh = c.u_n.transpose() * dn_pre;
        const Eigen::VectorXd dr_pre =
            (drh.array() * h_prev.array() * r * (1.0 - r)).matrix();

        dh_carry = (dh.array() * z).matrix() + drh.cwiseProduct(cache.r.col(t)) +
                   c.u_z.transpose() * dz_pre + c.u_r.transpose() * dr_pre;

        g.w_r.noalias() += dr_pre * x.col(t).transpose();
        g.w_z.noalias() += dz_pre * x.col(t).transpose();
        g.w_n.noalias() += dn_pre * x.col(t).transpose();
        g.u_r.noalias() += dr_pre * h_prev.transpose();
        g.u_z.noalias() += dz_pre * h_prev.transpose();
        g.u_n.noalias() += dn_pre * cache.rh.col(t).transpose();
        g.b_r += dr_pre;
        g.b_z += dz_pre;
        g.b_n += dn_pre;
    }
}

// Probabilities, k x T. Shared by inference and validation accuracy.
Eigen::MatrixXd forward_probs(const ClassifierModel& m, const Eigen::MatrixXd& x) {
    const Eigen::Index t_len = x.cols();
    const Eigen::Index d = m.hidden;
    Eigen::MatrixXd hf, hb_rev;
    gru_forward(m.fwd, x, hf, nullptr);
    const Eigen::MatrixXd x_rev = x.rowwise().reverse();
    gru_forward(m.bwd, x_rev, hb_rev, nullptr);

    Eigen::MatrixXd probs(m.k, t_len);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        Eigen::VectorXd logits = m.w_out.leftCols(d) * hf.col(t) +
                                 m.w_out.rightCols(d) * hb_rev.col(t_len - 1 - t) +
                                 m.b_out;
        const double mx = logits.maxCoeff();
        Eigen::VectorXd e = (logits.array() - mx).exp();
        probs.col(t) = e / e.sum();
    }
    return probs;
}

double forward_loss(const ClassifierModel& m,
                    const std::vector<Eigen::MatrixXd>& inputs,
                    const std::vector<std::vector<int>>& labels) {
    double ce = 0.0;
    std::int64_t steps = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Eigen::MatrixXd probs = forward_probs(m, inputs[i]);
        for (Eigen::Index t = 0; t < inputs[i].cols(); ++t)
            ce -= std::log(std::max(probs(labels[i][t], t), 1e-300));
        steps += inputs[i].cols();
    }
    return ce / static_cast<double>(steps);
}

void zero_params(ClassifierModel& m) {
    for (auto& v : param_views(m)) std::fill(v.data, v.data + v.size, 0.0);
}

void fisher_yates(std::vector<std::size_t>& idx, RandomStream& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.next_u64() % i]);
}

struct ChunkRef {
    std::size_t seq;
    std::size_t start;
    std::size_t len;
};

} // namespace

std::vector<ParamView> param_views(ClassifierModel& model) {
    std::vector<ParamView> v;
    auto add = [&v](const std::string& name, Eigen::MatrixXd& m) {
        v.push_back({name, m.data(), m.size()});
    };
    auto addv = [&v](const std::string& name, Eigen::VectorXd& b) {
        v.push_back({name, b.data(), b.size()});
    };
    auto add_cell = [&](const std::string& prefix, GruCell& c) {
        add(prefix + ".w_r", c.w_r);
        add(prefix + ".w_z", c.w_z);
        add(prefix + ".w_n", c.w_n);
        add(prefix + ".u_r", c.u_r);
        add(prefix + ".u_z", c.u_z);
        add(prefix + ".u_n", c.u_n);
        addv(prefix + ".b_r", c.b_r);
        addv(prefix + ".b_z", c.b_z);
        addv(prefix + ".b_n", c.b_n);
    };
    add_cell("fwd", model.fwd);
    add_cell("bwd", model.bwd);
    add("w_out", model.w_out);
    addv("b_out", model.b_out);
    return v;
}

ClassifierModel init_classifier(int k, int hidden, int input_dim,
                                std::uint64_t seed) {
    if (k < 1 || hidden < 1 || input_dim < 1)
        throw ConfigError("classifier: k, hidden, input_dim must be >= 1");
    ClassifierModel m;
    m.input_dim = input_dim;
    m.hidden = hidden;
    m.k = k;
    m.feat_mean = Eigen::VectorXd::Zero(input_dim);
    m.feat_std = Eigen::VectorXd::Ones(input_dim);
    auto size_cell = [&](GruCell& c) {
        c.w_r.resize(hidden, input_dim);
        c.w_z.resize(hidden, input_dim);
        c.w_n.resize(hidden, input_dim);
        c.u_r.resize(hidden, hidden);
        c.u_z.resize(hidden, hidden);
        c.u_n.resize(hidden, hidden);
        c.b_r.resize(hidden);
        c.b_z.resize(hidden);
        c.b_n.resize(hidden);
    };
    size_cell(m.fwd);
    size_cell(m.bwd);
    m.w_out.resize(k, 2 * hidden);
    m.b_out.resize(k);

    RandomStream rng(derive_seed(seed, {streams::kInit}));
    const double s_gru = 1.0 / std::sqrt(static_cast<double>(hidden));
    const double s_out = 1.0 / std::sqrt(2.0 * hidden);
    for (auto& view : param_views(m)) {
        const double s = view.name == "w_out" || view.name == "b_out" ? s_out : s_gru;
        for (std::ptrdiff_t i = 0; i < view.size; ++i)
            view.data[i] = (2.0 * rng.uniform01() - 1.0) * s;
    }
    return m;
}

ClassifierModel make_zero_like(const ClassifierModel& model) {
    ClassifierModel g = model;
    zero_params(g);
    return g;
}

void ClassifierModel::validate() const {
    if (k < 1 || hidden < 1 || input_dim < 1)
        throw ConfigError("classifier: bad dimensions");
    if (feat_mean.size() != input_dim || feat_std.size() != input_dim)
        throw ConfigError("classifier: feature stats must have input_dim entries");
    for (Eigen::Index i = 0; i < feat_std.size(); ++i)
        if (!(feat_std[i] > 0.0))
            throw ConfigError("classifier: feature std must be > 0");
    if (w_out.rows() != k || w_out.cols() != 2 * hidden || b_out.size() != k)
        throw ConfigError("classifier: output projection shape mismatch");
    auto& self = const_cast<ClassifierModel&>(*this);
    for (const auto& v : param_views(self))
        for (std::ptrdiff_t i = 0; i < v.size; ++i)
            if (!std::isfinite(v.data[i]))
                throw ConfigError("classifier: non-finite weight in " + v.name);
}

Eigen::MatrixXd normalize_features(const ClassifierModel& model,
                                   const FeatureSeries& features) {
    const std::size_t n = features.a.size();
    Eigen::MatrixXd x(2, n);
    for (std::size_t t = 0; t < n; ++t) {
        x(0, t) = (static_cast<double>(features.a[t]) - model.feat_mean[0]) /
                  model.feat_std[0];
        x(1, t) = (static_cast<double>(features.da[t]) - model.feat_mean[1]) /
                  model.feat_std[1];
    }
    return x;
}

double compute_loss_and_grads(const ClassifierModel& model,
                              const std::vector<Eigen::MatrixXd>& inputs,
                              const std::vector<std::vector<int>>& labels,
                              double loss_scale, ClassifierModel& grads) {
    zero_params(grads);
    std::int64_t total_steps = 0;
    for (const auto& x : inputs) total_steps += x.cols();
    if (total_steps == 0) return 0.0;

    const Eigen::Index d = model.hidden;
    double ce = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Eigen::MatrixXd& x = inputs[i];
        const Eigen::Index t_len = x.cols();
        const Eigen::MatrixXd x_rev = x.rowwise().reverse();

        DirCache cf, cb;
        Eigen::MatrixXd hf, hb_rev;
        gru_forward(model.fwd, x, hf, &cf);
        gru_forward(model.bwd, x_rev, hb_rev, &cb);

        Eigen::MatrixXd dhf = Eigen::MatrixXd::Zero(d, t_len);
        Eigen::MatrixXd dhb_rev = Eigen::MatrixXd::Zero(d, t_len);
        const double step_scale = loss_scale / static_cast<double>(total_steps);
        for (Eigen::Index t = 0; t < t_len; ++t) {
            const Eigen::Index tr = t_len - 1 - t;
            Eigen::VectorXd logits = model.w_out.leftCols(d) * hf.col(t) +
                                     model.w_out.rightCols(d) * hb_rev.col(tr) +
                                     model.b_out;
            const double mx = logits.maxCoeff();
            Eigen::VectorXd p = (logits.array() - mx).exp();
            p /= p.sum();
            const int y = labels[i][t];
            ce -= std::log(std::max(p[y], 1e-300));

            Eigen::VectorXd dlogit = p * step_scale;
            dlogit[y] -= step_scale;
            grads.w_out.leftCols(d).noalias() += dlogit * hf.col(t).transpose();
            grads.w_out.rightCols(d).noalias() += dlogit * hb_rev.col(tr).transpose();
            grads.b_out += dlogit;
            dhf.col(t) += model.w_out.leftCols(d).transpose() * dlogit;
            dhb_rev.col(tr) += model.w_out.rightCols(d).transpose() * dlogit;
        }
        gru_backward(model.fwd, x, cf, dhf, grads.fwd);
        gru_backward(model.bwd, x_rev, cb, dhb_rev, grads.bwd);
    }
    return loss_scale * ce / static_cast<double>(total_steps);
}

Eigen::MatrixXd predict_state_probs(const ClassifierModel& model,
                                    const FeatureSeries& features) {
    model.validate();
    const Eigen::MatrixXd x = normalize_features(model, features);
    const Eigen::MatrixXd probs = forward_probs(model, x);
    return probs.transpose(); // one row per timestep
}

namespace {

double chunk_accuracy(const ClassifierModel& m,
                      const std::vector<Eigen::MatrixXd>& inputs,
                      const std::vector<std::vector<int>>& labels) {
    std::int64_t hits = 0, total = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Eigen::MatrixXd probs = forward_probs(m, inputs[i]);
        for (Eigen::Index t = 0; t < inputs[i].cols(); ++t) {
            Eigen::Index arg;
            probs.col(t).maxCoeff(&arg);
            hits += arg == labels[i][t];
        }
        total += inputs[i].cols();
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

} // namespace

TrainingReport train_classifier(ClassifierModel& model,
                                const std::vector<FeatureSeries>& features,
                                const std::vector<StateLabels>& labels, int k,
                                const TrainingConfig& config, std::uint64_t seed) {
    if (features.empty() || features.size() != labels.size())
        throw ConfigError("train_classifier: need aligned, non-empty dataset");
    if (k < 1) throw ConfigError("train_classifier: k must be >= 1");
    if (config.chunk_len < 1 || config.epochs < 1 || config.batch_chunks < 1)
        throw ConfigError("train_classifier: bad hyperparameters");
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].a.size() != labels[i].size() ||
            features[i].a.size() != features[i].da.size())
            throw ConfigError("train_classifier: sequence " + std::to_string(i) +
                              " features and labels misaligned");
        for (int y : labels[i])
            if (y < 0 || y >= k)
                throw ConfigError("train_classifier: label " + std::to_string(y) +
                                  " out of range for k=" + std::to_string(k));
    }

    std::vector<ChunkRef> chunks;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::size_t n = features[i].a.size();
        for (std::size_t s = 0; s < n; s += config.chunk_len)
            chunks.push_back({i, s, std::min<std::size_t>(config.chunk_len, n - s)});
    }
    if (chunks.empty()) throw ConfigError("train_classifier: no timesteps");

    std::vector<std::size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), 0);
    RandomStream split_rng(derive_seed(seed, {streams::kSplit}));
    fisher_yates(order, split_rng);
    std::size_t n_val = 0;
    if (chunks.size() >= 2)
        n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(config.val_fraction * chunks.size()));
    std::vector<std::size_t> val_ids(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_ids(order.begin() + n_val, order.end());
    if (train_ids.empty()) std::swap(train_ids, val_ids);

    // z-score stats from the training chunks only
    double sum_a = 0, sum_da = 0, sumsq_a = 0, sumsq_da = 0;
    std::int64_t count = 0;
    for (std::size_t id : train_ids) {
        const ChunkRef& c = chunks[id];
        const FeatureSeries& f = features[c.seq];
        for (std::size_t t = c.start; t < c.start + c.len; ++t) {
            const double a = static_cast<double>(f.a[t]);
            const double da = static_cast<double>(f.da[t]);
            sum_a += a;
            sum_da += da;
            sumsq_a += a * a;
            sumsq_da += da * da;
            ++count;
        }
    }
    const double mean_a = sum_a / count;
    const double mean_da = sum_da / count;
    double std_a = std::sqrt(std::max(0.0, sumsq_a / count - mean_a * mean_a));
    double std_da = std::sqrt(std::max(0.0, sumsq_da / count - mean_da * mean_da));
    if (std_a < 1e-12) std_a = 1.0;
    if (std_da < 1e-12) std_da = 1.0;

    model = init_classifier(k, config.hidden, 2, seed);
    model.feat_mean << mean_a, mean_da;
    model.feat_std << std_a, std_da;

    auto materialize = [&](const std::vector<std::size_t>& ids,
                           std::vector<Eigen::MatrixXd>& xs,
                           std::vector<std::vector<int>>& ys) {
        xs.clear();
        ys.clear();
        for (std::size_t id : ids) {
            const ChunkRef& c = chunks[id];
            const FeatureSeries& f = features[c.seq];
            Eigen::MatrixXd x(2, c.len);
            std::vector<int> y(c.len);
            for (std::size_t t = 0; t < c.len; ++t) {
                x(0, t) = (static_cast<double>(f.a[c.start + t]) - mean_a) / std_a;
                x(1, t) = (static_cast<double>(f.da[c.start + t]) - mean_da) / std_da;
                y[t] = labels[c.seq][c.start + t];
            }
            xs.push_back(std::move(x));
            ys.push_back(std::move(y));
        }
    };
    std::vector<Eigen::MatrixXd> train_x, val_x;
    std::vector<std::vector<int>> train_y, val_y;
    materialize(train_ids, train_x, train_y);
    materialize(val_ids.empty() ? train_ids : val_ids, val_x, val_y);

    // Adam over the flattened parameter list
    std::vector<ParamView> views = param_views(model);
    std::ptrdiff_t total_params = 0;
    for (const auto& v : views) total_params += v.size;
    std::vector<double> adam_m(total_params, 0.0), adam_v(total_params, 0.0);
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    std::int64_t adam_t = 0;

    ClassifierModel grads = make_zero_like(model);
    std::vector<ParamView> grad_views = param_views(grads);

    TrainingReport report;
    ClassifierModel best = model;
    double best_acc = -1.0;
    int since_best = 0;

    std::vector<std::size_t> epoch_order(train_x.size());
    std::iota(epoch_order.begin(), epoch_order.end(), 0);
    std::vector<Eigen::MatrixXd> batch_x;
    std::vector<std::vector<int>> batch_y;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        RandomStream shuffle_rng(
            derive_seed(seed, {streams::kShuffle, static_cast<std::uint64_t>(epoch)}));
        fisher_yates(epoch_order, shuffle_rng);

        double epoch_ce = 0.0;
        std::int64_t epoch_steps = 0;
        for (std::size_t b = 0; b < epoch_order.size();
             b += static_cast<std::size_t>(config.batch_chunks)) {
            batch_x.clear();
            batch_y.clear();
            std::int64_t batch_steps = 0;
            const std::size_t end = std::min(
                epoch_order.size(), b + static_cast<std::size_t>(config.batch_chunks));
            for (std::size_t j = b; j < end; ++j) {
                batch_x.push_back(train_x[epoch_order[j]]);
                batch_y.push_back(train_y[epoch_order[j]]);
                batch_steps += batch_x.back().cols();
            }
            const double loss =
                compute_loss_and_grads(model, batch_x, batch_y, 1.0, grads);
            if (!std::isfinite(loss))
                throw TrainingError("epoch " + std::to_string(epoch) +
                                    ": non-finite training loss");
            epoch_ce += loss * static_cast<double>(batch_steps);
            epoch_steps += batch_steps;

            ++adam_t;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t));
            std::ptrdiff_t off = 0;
            for (std::size_t vi = 0; vi < views.size(); ++vi) {
                double* w = views[vi].data;
                const double* g = grad_views[vi].data;
                for (std::ptrdiff_t c = 0; c < views[vi].size; ++c) {
                    const std::ptrdiff_t idx = off + c;
                    adam_m[idx] = kBeta1 * adam_m[idx] + (1.0 - kBeta1) * g[c];
                    adam_v[idx] = kBeta2 * adam_v[idx] + (1.0 - kBeta2) * g[c] * g[c];
                    w[c] -= config.learning_rate * (adam_m[idx] / bc1) /
                            (std::sqrt(adam_v[idx] / bc2) + kEps);
                }
                off += views[vi].size;
            }
        }
        report.loss_curve.push_back(epoch_ce / static_cast<double>(epoch_steps));
        report.epochs_run = epoch + 1;

        const double acc = chunk_accuracy(model, val_x, val_y);
        if (acc > best_acc) {
            best_acc = acc;
            best = model;
            report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }

    model = best;
    report.final_train_loss = report.loss_curve.back();
    report.val_accuracy = best_acc;
    return report;
}

double numeric_gradient_check(const ClassifierModel& model,
                              const Eigen::MatrixXd& input,
                              const std::vector<int>& labels) {
    if (static_cast<std::size_t>(input.cols()) != labels.size())
        throw ConfigError("numeric_gradient_check: input/label length mismatch");
    const std::vector<Eigen::MatrixXd> xs = {input};
    const std::vector<std::vector<int>> ys = {labels};

    ClassifierModel grads = make_zero_like(model);
    compute_loss_and_grads(model, xs, ys, 1.0, grads);

    ClassifierModel work = model;
    std::vector<ParamView> wv = param_views(work);
    std::vector<ParamView> gv = param_views(grads);

    constexpr double kStep = 1e-4;
    double max_rel = 0.0;
    for (std::size_t vi = 0; vi < wv.size(); ++vi) {
        for (std::ptrdiff_t c = 0; c < wv[vi].size; ++c) {
            const double orig = wv[vi].data[c];
            wv[vi].data[c] = orig + kStep;
            const double lp = forward_loss(work, xs, ys);
            wv[vi].data[c] = orig - kStep;
            const double lm = forward_loss(work, xs, ys);
            wv[vi].data[c] = orig;
            const double gn = (lp - lm) / (2.0 * kStep);
            const double ga = gv[vi].data[c];
            const double rel =
                std::abs(ga - gn) / std::max(1e-4, std::abs(ga) + std::abs(gn));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

} // namespace powertrace
