#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cohhgn/tensor.hpp"
#include "test_util.hpp"

using namespace cohhgn;
using testutil::finite_diff_check;
using testutil::random_tensor;

TEST_CASE("softmax basics") {
    Tensor v = Tensor::from({2}, {0.0, 0.0});
    Tensor y = softmax_vec(v);
    CHECK(y.at(0) == doctest::Approx(0.5));
    CHECK(y.at(1) == doctest::Approx(0.5));

    // large inputs stay finite (max subtraction)
    Tensor big = Tensor::from({3}, {1000.0, 999.0, 998.0});
    Tensor yb = softmax_vec(big);
    double s = yb.at(0) + yb.at(1) + yb.at(2);
    CHECK(std::abs(s - 1.0) < 1e-12);
    CHECK(yb.at(0) > yb.at(1));
}

TEST_CASE("softmax rows normalize within 1e-12") {
    std::mt19937_64 rng(11);
    Tensor m = random_tensor({7, 5}, rng, false);
    Tensor y = softmax_rows(m);
    for (int i = 0; i < 7; ++i) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) {
            CHECK(y.at(i, j) >= 0.0);
            s += y.at(i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("leaky relu slope") {
    Tensor x = Tensor::from({2}, {-1.0, 2.0});
    Tensor y = leaky_relu(x, 0.01);
    CHECK(y.at(0) == doctest::Approx(-0.01));
    CHECK(y.at(1) == doctest::Approx(2.0));
}

TEST_CASE("matmul matches triple loop oracle") {
    std::mt19937_64 rng(3);
    Tensor a = random_tensor({2, 3}, rng, false);
    Tensor b = random_tensor({3, 4}, rng, false);
    Tensor c = matmul(a, b);
    REQUIRE(c.shape() == std::vector<int>{2, 4});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += a.at(i, k) * b.at(k, j);
            CHECK(c.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
        }
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("simple analytic gradients") {
    Tensor x = Tensor::from({1}, {3.0}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        x.zero_grad();
        Tensor y = mul(x, x);
        tape.backward(y);
    }
    CHECK(x.grad()[0] == doctest::Approx(6.0));

    Tensor z = Tensor::from({1}, {0.0}, true);
    Tape tape2;
    {
        TapeScope scope(tape2);
        z.zero_grad();
        Tensor y = sigmoid(z);
        tape2.backward(y);
    }
    CHECK(z.grad()[0] == doctest::Approx(0.25));
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    Tape tape;
    TapeScope scope(tape);
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("fan-out accumulates like the unrolled tree") {
    // y = x*x + x*x via a shared subexpression
    Tensor x = Tensor::from({1}, {2.0}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        x.zero_grad();
        Tensor sq = mul(x, x);
        Tensor y = add(sq, sq);
        tape.backward(y);
    }
    CHECK(x.grad()[0] == doctest::Approx(8.0));
}

TEST_CASE("finite difference check across every differentiable op") {
    std::mt19937_64 rng(17);
    Tensor a = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({3, 4}, rng, true);
    Tensor w = random_tensor({5, 4}, rng, true);
    Tensor v = random_tensor({4}, rng, true);
    Tensor u = random_tensor({3}, rng, true);

    auto check = [&](const std::vector<Tensor>& params, const std::function<Tensor()>& f) {
        CHECK(finite_diff_check(params, f) < 1e-4);
    };

    check({a, b}, [&] { return sum(mul(add(a, b), sub(a, b))); });
    check({a, b}, [&] { return sum(div(a, add_scalar(mul(b, b), 1.0))); });
    check({a}, [&] { return sum(scale(a, 2.5)); });
    check({a, b}, [&] { return sum(maximum(a, b)); });
    check({a, w}, [&] { return sum(linear(a, w)); });
    check({a, v}, [&] { return sum(matvec(a, v)); });
    check({u, a}, [&] { return sum(vecmat(u, a)); });
    check({a, v}, [&] { return sum(add_rowvec(a, v)); });
    check({a, v}, [&] { return sum(mul_rowvec(a, v)); });
    check({u, v}, [&] { return sum(outer(u, v)); });
    check({a, b}, [&] { return sum(concat_cols(a, b)); });
    check({u, v}, [&] { return sum(concat_vec(u, v)); });
    check({a}, [&] { return sum(cols(a, 1, 3)); });
    check({a}, [&] { return sum(mul(row(a, 1), row(a, 1))); });
    check({a}, [&] { return sum(mul(col(a, 2), col(a, 2))); });
    check({a}, [&] { return sum(mul(rows(a, {0, 2, 2}), rows(a, {0, 2, 2}))); });
    check({v}, [&] { return sum(mul(gather_vec(v, {1, 3, 1}), gather_vec(v, {1, 3, 1}))); });
    check({a}, [&] { return sum(mul(mean_rows(a), mean_rows(a))); });
    check({a}, [&] { return sum(sigmoid(a)); });
    check({a}, [&] { return sum(tanh_t(a)); });
    check({a}, [&] { return sum(leaky_relu(a, 0.01)); });
    check({a}, [&] { return sum(exp_t(a)); });
    check({a}, [&] { return sum(log_t(add_scalar(mul(a, a), 1.0))); });
    check({a}, [&] { return sum(mul(softmax_rows(a), a)); });
    check({v}, [&] { return sum(mul(softmax_vec(v), v)); });
    check({u, v}, [&] { return dot(mul(u, u), gather_vec(v, {0, 1, 2})); });

    // relu away from the kink
    Tensor pos = Tensor::from({4}, {0.5, 1.5, -0.7, -2.0}, true);
    check({pos}, [&] { return sum(relu(pos)); });

    // segment ops
    std::vector<int> seg = {0, 0, 1, 1, 1, 3};
    Tensor scores = random_tensor({6}, rng, true);
    Tensor vals = random_tensor({6, 4}, rng, true);
    check({scores, vals}, [&] {
        Tensor sm = segment_softmax(scores, seg, 4);
        Tensor out = segment_weighted_sum(sm, vals, seg, 4);
        return sum(mul(out, out));
    });
}

TEST_CASE("segment softmax normalizes per segment and handles empties") {
    Tensor s = Tensor::from({5}, {1.0, 2.0, 3.0, -1.0, 0.0});
    std::vector<int> seg = {0, 0, 2, 2, 2};
    Tensor y = segment_softmax(s, seg, 3);
    CHECK(std::abs(y.at(0) + y.at(1) - 1.0) < 1e-12);
    CHECK(std::abs(y.at(2) + y.at(3) + y.at(4) - 1.0) < 1e-12);

    Tensor vals = Tensor::from({5, 2}, {1, 1, 2, 2, 3, 3, 4, 4, 5, 5});
    Tensor out = segment_weighted_sum(y, vals, seg, 3);
    CHECK(out.at(1, 0) == 0.0);  // empty segment -> zero row
}

TEST_CASE("he_init moments and determinism") {
    const int n = 128 * 128;
    Tensor t = he_init({128, 128}, 99);
    double mean = std::accumulate(t.data().begin(), t.data().end(), 0.0) / n;
    double var = 0.0;
    for (double x : t.data()) var += (x - mean) * (x - mean);
    double sd = std::sqrt(var / n);
    CHECK(sd == doctest::Approx(std::sqrt(2.0 / 128)).epsilon(0.08));  // 0.125 +- 0.01
    CHECK(std::abs(sd - 0.125) < 0.01);
    CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(static_cast<double>(n)));

    Tensor t2 = he_init({128, 128}, 99);
    CHECK(t.data() == t2.data());
    Tensor t3 = he_init({128, 128}, 100);
    CHECK(t.data() != t3.data());
}

TEST_CASE("shape errors carry both shapes") {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({3, 3}, std::vector<double>(9, 0.0));
    try {
        add(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("(2,3)") != std::string::npos);
        CHECK(msg.find("(3,3)") != std::string::npos);
    }
}

TEST_CASE("dropout eval mode and zero rate are identity") {
    std::mt19937_64 rng(5);
    Tensor a = random_tensor({3, 3}, rng, false);
    Tensor y1 = dropout(a, 0.5, rng, false);
    CHECK(y1.data() == a.data());
    Tensor y2 = dropout(a, 0.0, rng, true);
    CHECK(y2.data() == a.data());
}
