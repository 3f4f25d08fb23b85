#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "powertrace/gmm.hpp"
#include "powertrace/workload.hpp"

namespace powertrace {

// One gated recurrent cell (update gate z, reset gate r, tanh candidate):
//   r_t = sigmoid(w_r x_t + u_r h_{t-1} + b_r)
//   z_t = sigmoid(w_z x_t + u_z h_{t-1} + b_z)
//   n_t = tanh(w_n x_t + u_n (r_t .* h_{t-1}) + b_n)
//   h_t = (1 - z_t) .* n_t + z_t .* h_{t-1}
struct GruCell {
    Eigen::MatrixXd w_r, w_z, w_n; // hidden x input
    Eigen::MatrixXd u_r, u_z, u_n; // hidden x hidden
    Eigen::VectorXd b_r, b_z, b_n; // hidden
};

// Bidirectional recurrent classifier over (active-count, delta) feature
// rows: per-timestep softmax(w_out [h_fwd; h_bwd] + b_out) over k states.
// Feature normalization stats live in the model so inference scales
// inputs exactly like training did.
struct ClassifierModel {
    int input_dim = 2;
    int hidden = 64;
    int k = 0;
    Eigen::VectorXd feat_mean; // input_dim
    Eigen::VectorXd feat_std;  // input_dim, strictly positive
    GruCell fwd, bwd;
    Eigen::MatrixXd w_out; // k x 2*hidden
    Eigen::VectorXd b_out; // k

    void validate() const;
};

struct TrainingConfig {
    int hidden = 64;
    int epochs = 50;
    double learning_rate = 1e-3;
    int chunk_len = 512;
    int batch_chunks = 16;
    int patience = 10;
    double val_fraction = 0.15;
};

struct TrainingReport {
    int epochs_run = 0;
    double final_train_loss = 0.0;
    double val_accuracy = 0.0; // of the returned (best) snapshot
    int best_epoch = -1;
    std::vector<double> loss_curve; // mean per-timestep cross-entropy per epoch
};

// Flat view over every parameter tensor, in a fixed order shared by the
// model, its gradient accumulator, and the optimizer state.
struct ParamView {
    std::string name;
    double* data;
    std::ptrdiff_t size;
};
std::vector<ParamView> param_views(ClassifierModel& model);

ClassifierModel init_classifier(int k, int hidden, int input_dim,
                                std::uint64_t seed);
ClassifierModel make_zero_like(const ClassifierModel& model);

// (a_t, da_t) columns z-scored with the model's stored stats.
Eigen::MatrixXd normalize_features(const ClassifierModel& model,
                                   const FeatureSeries& features);

// Mean per-timestep cross-entropy over all chunks, times loss_scale;
// accumulates analytic gradients into `grads` (zeroed first). Inputs are
// already-normalized column sequences.
double compute_loss_and_grads(const ClassifierModel& model,
                              const std::vector<Eigen::MatrixXd>& inputs,
                              const std::vector<std::vector<int>>& labels,
                              double loss_scale, ClassifierModel& grads);

// Full-sequence bidirectional pass; one probability row per timestep,
// rows non-negative and summing to 1.
Eigen::MatrixXd predict_state_probs(const ClassifierModel& model,
                                    const FeatureSeries& features);

TrainingReport train_classifier(ClassifierModel& model,
                                const std::vector<FeatureSeries>& features,
                                const std::vector<StateLabels>& labels, int k,
                                const TrainingConfig& config, std::uint64_t seed);

// Central-difference check (step 1e-4) of the analytic gradients over
// every parameter coordinate; returns the max relative error
// |ga - gn| / max(1e-4, |ga| + |gn|).
double numeric_gradient_check(const ClassifierModel& model,
                              const Eigen::MatrixXd& input,
                              const std::vector<int>& labels);

} // namespace powertrace
