#include "cohhgn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cohhgn {

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1 || lr <= 0.0 || lr_decay_factor <= 0.0 ||
        lr_decay_every < 1 || l2 < 0.0)
        throw ConfigError("TrainConfig: all fields must be positive");
}

AdamOptimizer::AdamOptimizer(std::vector<std::pair<std::string, Tensor>> params, double beta1,
                             double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    // every learnable tensor exactly once
    for (std::size_t i = 0; i < params_.size(); ++i)
        for (std::size_t j = i + 1; j < params_.size(); ++j)
            if (params_[i].second.node() == params_[j].second.node())
                throw ConfigError("AdamOptimizer: tensor registered twice: " + params_[i].first);
    for (auto& [name, p] : params_) {
        (void)name;
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void AdamOptimizer::step(double lr, double l2) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k].second;
        p.node()->ensure_grad();
        auto& data = p.data();
        auto& grad = p.grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            double g = grad[i] + l2 * data[i];
            m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
            v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
            double mhat = m_[k][i] / bc1;
            double vhat = v_[k][i] / bc2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void AdamOptimizer::zero_grads() {
    for (auto& [name, p] : params_) {
        (void)name;
        p.zero_grad();
    }
}

double lr_for_epoch(const TrainConfig& config, int epoch) {
    int decays = (epoch - 1) / config.lr_decay_every;
    return config.lr * std::pow(config.lr_decay_factor, decays);
}

std::vector<std::vector<double>> model_scores(Model& model,
                                              const std::vector<PseudoSession>& sessions) {
    std::vector<std::vector<double>> out;
    out.reserve(sessions.size());
    std::mt19937_64 rng(0);  // unused in eval mode
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        SessionBatch b = make_batch(sessions, i, i + 1);
        Tensor y = model.forward_one(b.inputs[0], /*training=*/false, rng);
        out.push_back(y.data());
    }
    return out;
}

EvalReport evaluate_model(Model& model, const std::vector<PseudoSession>& sessions,
                          const std::vector<int>& ks) {
    if (sessions.empty()) throw DataError("evaluate_model: empty session set");
    auto scores = model_scores(model, sessions);
    std::vector<int> labels;
    for (const auto& s : sessions) labels.push_back(s.items.back());
    return evaluate_rankings(scores, labels, ks);
}

namespace {

std::vector<std::vector<double>> snapshot(const ModelParams& params) {
    std::vector<std::vector<double>> out;
    for (auto& [name, p] : params.parameters()) {
        (void)name;
        out.push_back(p.data());
    }
    return out;
}

void restore(ModelParams& params, const std::vector<std::vector<double>>& snap) {
    auto ps = params.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i].second.data() = snap[i];
}

}  // namespace

TrainResult train(Model& model, const std::vector<PseudoSession>& train_sessions,
                  const std::vector<PseudoSession>& val_sessions, const TrainConfig& config) {
    config.validate();
    if (train_sessions.empty()) throw DataError("train: no training sessions");

    AdamOptimizer opt(model.params().parameters());
    std::mt19937_64 order_rng(config.seed);
    std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    TrainResult result;
    std::vector<std::vector<double>> best;
    double last_finite_loss = 0.0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double lr = lr_for_epoch(config, epoch);
        std::vector<std::size_t> order(train_sessions.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), order_rng);

        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
            std::size_t b1 = std::min(order.size(), b0 + config.batch_size);
            std::vector<PseudoSession> chunk;
            chunk.reserve(b1 - b0);
            for (std::size_t i = b0; i < b1; ++i) chunk.push_back(train_sessions[order[i]]);
            SessionBatch batch = make_batch(chunk, 0, chunk.size());

            Tape tape;
            double loss_val = 0.0;
            {
                TapeScope scope(tape);
                Tensor loss = model.batch_loss(batch, /*training=*/true, dropout_rng);
                loss_val = loss.item();
                if (!std::isfinite(loss_val)) {
                    std::ostringstream os;
                    os << "train: loss diverged at epoch " << epoch << " batch " << n_batches
                       << "; last finite loss " << last_finite_loss;
                    throw NumericError(os.str());
                }
                opt.zero_grads();
                tape.backward(loss);
            }
            opt.step(lr, config.l2);
            last_finite_loss = loss_val;
            loss_sum += loss_val;
            ++n_batches;
        }

        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        log.train_loss = loss_sum / std::max<std::size_t>(1, n_batches);
        if (!val_sessions.empty()) {
            log.validation = evaluate_model(model, val_sessions, {10, 20});
            double m20 = log.validation.mrr_at.at(20);
            if (result.log.empty() || m20 > result.best_val_m20) {
                result.best_val_m20 = m20;
                result.best_epoch = epoch;
                best = snapshot(model.params());
            }
        } else {
            // no validation set: last epoch wins
            result.best_epoch = epoch;
            best = snapshot(model.params());
        }
        result.log.push_back(std::move(log));
    }

    if (!best.empty()) restore(model.params(), best);
    return result;
}

}  // namespace cohhgn
