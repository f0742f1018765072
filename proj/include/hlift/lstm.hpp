#pragma once

#include "hlift/io.hpp"
#include "hlift/rng.hpp"
#include "hlift/tensor_prep.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace hlift {

/// One LSTM layer. Gate rows are stacked [input; forget; cell; output], each
/// `hidden` rows tall.
struct LstmLayer {
    Eigen::MatrixXd Wx; // 4H x I
    Eigen::MatrixXd Wh; // 4H x H
    Eigen::VectorXd b;  // 4H

    Eigen::Index input_size() const { return Wx.cols(); }
    Eigen::Index hidden_size() const { return Wh.cols(); }
};

struct DenseLayer {
    Eigen::MatrixXd W; // out x in
    Eigen::VectorXd b; // out
};

/// Stacked LSTM followed by a dense head on the last hidden state. Inverted
/// dropout is applied to the outputs of the first layer.
struct NetworkParams {
    std::vector<LstmLayer> layers;
    DenseLayer head;
    double dropout_rate = 0.2;

    Eigen::Index input_size() const { return layers.front().input_size(); }
    Eigen::Index output_size() const { return head.W.rows(); }
    Eigen::Index n_parameters() const;
    void validate() const;

    /// Flat parameter vector: per layer Wx, Wh, b (column-major), then head W, b.
    Eigen::VectorXd pack() const;
    void unpack(const Eigen::VectorXd& flat);
    /// Zero-valued parameters with this network's shapes.
    NetworkParams zeros_like() const;
};

struct Architecture {
    Eigen::Index input_size = 0;
    std::vector<Eigen::Index> hidden{32, 16};
    Eigen::Index output_size = 0;
    double dropout_rate = 0.2;
};

/// Xavier-uniform kernels (input and recurrent), forget-gate bias 1, other biases 0.
NetworkParams init_network(const Architecture& arch, std::uint64_t seed);

/// L x H mask of inverted-dropout multipliers: 0 with probability `rate`, else 1/(1-rate).
Eigen::MatrixXd sample_dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

/// Deterministic forward pass (no dropout) on one L x F window.
Eigen::VectorXd forward(const NetworkParams& net, const Eigen::MatrixXd& window);
/// Forward pass with an explicit dropout mask on the first layer's outputs.
Eigen::VectorXd forward(const NetworkParams& net, const Eigen::MatrixXd& window, const Eigen::MatrixXd& mask);
/// MC-dropout forward pass; the mask is drawn from `rng`.
Eigen::VectorXd forward_dropout(const NetworkParams& net, const Eigen::MatrixXd& window, Rng& rng);

/// Exact reverse-mode d prediction[output] / d window (L x F), deterministic mode.
Eigen::MatrixXd input_gradient(const NetworkParams& net, const Eigen::MatrixXd& window, Eigen::Index output);

struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd grad; // packed layout
};

/// Mean over samples of the squared prediction error norm, with its parameter
/// gradient. `masks` (one per sample) enables dropout; nullptr is deterministic.
LossGradient loss_and_gradient(const NetworkParams& net, const WindowedDataset& data,
                               const std::vector<Eigen::MatrixXd>* masks = nullptr);
double mse(const NetworkParams& net, const WindowedDataset& data);

struct TrainConfig {
    double learning_rate = 1e-3;
    int max_epochs = 500;
    int patience = 15;
    int batch_size = 0; ///< 0 = full batch
    std::uint64_t seed = 0;
    double clip_norm = 5.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct TrainingTrace {
    std::vector<double> train_loss; ///< dropout-active loss per epoch
    std::vector<double> val_loss;   ///< deterministic validation loss per epoch
    double initial_val_loss = 0.0;
    double best_val_loss = 0.0;
    int best_epoch = 0;             ///< 1-based
    int epochs_run = 0;
    bool early_stopped = false;
};

struct TrainResult {
    NetworkParams params;
    TrainingTrace trace;
};

/// Adam on the mean squared error with global-norm clipping. Early stopping
/// watches the validation loss and the best epoch's weights are returned.
/// Throws Training (naming the epoch) when the loss turns non-finite.
TrainResult train(const NetworkParams& init, const WindowedDataset& train_set, const WindowedDataset& val_set,
                  const TrainConfig& cfg);
TrainResult train(const Architecture& arch, const WindowedDataset& train_set, const WindowedDataset& val_set,
                  const TrainConfig& cfg);

/// Grid entry; the dropout rate is fixed outside the grid.
struct Candidate {
    std::vector<Eigen::Index> hidden{32, 16};
    double learning_rate = 1e-3;
    int max_epochs = 500;
    int patience = 15;
};

struct GridResult {
    Candidate candidate;
    std::size_t index = 0; ///< position in the input list
    double val_mse = 0.0;
    TrainingTrace trace;
};

/// Trains every candidate with the same seed policy and ranks by best validation
/// loss (stable for ties).
std::vector<GridResult> grid_search(const std::vector<Candidate>& candidates, const WindowedDataset& train_set,
                                    const WindowedDataset& val_set, const TrainConfig& base, double dropout_rate);

io::json network_to_json(const NetworkParams& net);
/// Validates every shape against the declared architecture.
NetworkParams network_from_json(const io::json& j);

} // namespace hlift
