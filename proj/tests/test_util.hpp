#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "cohhgn/tensor.hpp"

namespace cohhgn::testutil {

// Central finite differences of f against the autodiff gradient of every
// entry of every parameter; returns the worst relative error.
inline double finite_diff_check(const std::vector<Tensor>& params,
                                const std::function<Tensor()>& f, double step = 1e-5) {
    Tape tape;
    {
        TapeScope scope(tape);
        for (auto p : params) p.zero_grad();
        Tensor loss = f();
        tape.backward(loss);
    }
    std::vector<std::vector<double>> autodiff;
    for (const auto& p : params) autodiff.push_back(p.grad());

    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor p = params[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            double orig = p.data()[i];
            p.data()[i] = orig + step;
            double fp = f().item();
            p.data()[i] = orig - step;
            double fm = f().item();
            p.data()[i] = orig;
            double numeric = (fp - fm) / (2.0 * step);
            double ad = autodiff[k][i];
            // the floor keeps roundoff noise on near-zero gradients from
            // dominating the relative error
            double denom = std::max({std::abs(numeric), std::abs(ad), 1e-6});
            worst = std::max(worst, std::abs(numeric - ad) / denom);
        }
    }
    return worst;
}

inline Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, bool requires_grad) {
    std::size_t n = 1;
    for (int d : shape) n *= d;
    std::vector<double> data(n);
    for (auto& v : data) v = 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
    return Tensor::from(shape, std::move(data), requires_grad);
}

}  // namespace cohhgn::testutil
