#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cohhgn/metrics.hpp"
#include "cohhgn/model.hpp"

namespace cohhgn {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 100;
    double lr = 0.001;
    double lr_decay_factor = 0.1;  // applied every lr_decay_every epochs
    int lr_decay_every = 3;
    double l2 = 1e-5;
    std::uint64_t seed = 42;

    void validate() const;
};

// Standard Adam; L2 enters as a coefficient added to the gradient.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<std::pair<std::string, Tensor>> params, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void step(double lr, double l2);
    void zero_grads();
    std::size_t n_params() const { return params_.size(); }

private:
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    EvalReport validation;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = 0;        // 1-based, argmax validation M@20
    double best_val_m20 = 0.0;
};

// Scores every session in eval mode (dropout off).
std::vector<std::vector<double>> model_scores(Model& model, const std::vector<PseudoSession>& sessions);
EvalReport evaluate_model(Model& model, const std::vector<PseudoSession>& sessions,
                          const std::vector<int>& ks);

// Mini-batch training with the step-wise learning-rate schedule; the model is
// left holding the best-validation-M@20 parameters. Deterministic per seed.
TrainResult train(Model& model, const std::vector<PseudoSession>& train_sessions,
                  const std::vector<PseudoSession>& val_sessions, const TrainConfig& config);

double lr_for_epoch(const TrainConfig& config, int epoch);  // 1-based epoch

}  // namespace cohhgn
