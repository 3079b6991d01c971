// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gdistill/error.hpp"
#include "gdistill/grad_check.hpp"
#include "gdistill/ops.hpp"
#include "gdistill/random.hpp"
#include "gdistill/tape.hpp"
#include "gdistill/tensor.hpp"

#include <cmath>

using namespace gdistill;

namespace {

const double kLn2 = std::log(2.0);

Tensor random_tensor(int64_t rows, int64_t cols, uint64_t seed, double scale = 1.0) {
    RandomStream rng(seed);
    Tensor t({rows, cols});
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<real>(scale * rng.normal());
    return t;
}

} // namespace

TEST_CASE("tensor shape/value invariants") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
    Tensor t = Tensor::from_rows({{1, 2}, {3, 4}});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 2);
    CHECK(t.at(1, 0) == 3.0);
    CHECK(t.all_finite());
    t.at(0, 1) = std::numeric_limits<real>::infinity();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("matmul identity, hand product, annihilator") {
    Tape tape;
    Value eye = tape.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
    Value a = tape.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
    Tensor prod = tape.value(matmul(eye, a));
    CHECK(prod.at(0, 0) == 1.0);
    CHECK(prod.at(0, 1) == 2.0);
    CHECK(prod.at(1, 0) == 3.0);
    CHECK(prod.at(1, 1) == 4.0);

    Value b = tape.constant(Tensor::from_rows({{1, 0}, {0, 1}, {1, 1}}));
    Value c = tape.constant(Tensor::from_rows({{2}, {3}}));
    Tensor bc = tape.value(matmul(b, c));
    CHECK(bc.rows() == 3);
    CHECK(bc[0] == 2.0);
    CHECK(bc[1] == 3.0);
    CHECK(bc[2] == 5.0);

    Value zero = tape.constant(Tensor::zeros(2, 2));
    Tensor za = tape.value(matmul(zero, a));
    for (int64_t i = 0; i < za.size(); ++i) CHECK(za[i] == 0.0);

    Value bad = tape.constant(Tensor::zeros(3, 3));
    CHECK_THROWS_AS(matmul(a, bad), DimensionError);
}

TEST_CASE("row_softmax closed forms") {
    Tape tape;
    Value x = tape.constant(Tensor::from_rows({{0, 0}}));
    Tensor s = tape.value(row_softmax(x, 1.0));
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-12));

    Value y = tape.constant(Tensor::from_rows({{kLn2, 0}}));
    Tensor s1 = tape.value(row_softmax(y, 1.0));
    CHECK(s1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(s1[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Tensor s2 = tape.value(row_softmax(y, 0.5));
    CHECK(s2[0] == doctest::Approx(4.0 / 5.0).epsilon(1e-12));
    CHECK(s2[1] == doctest::Approx(1.0 / 5.0).epsilon(1e-12));

    CHECK_THROWS_AS(row_softmax(y, 0.0), ConfigError);
    CHECK_THROWS_AS(row_softmax(y, -1.0), ConfigError);
}

TEST_CASE("row_softmax rows are distributions and shift-invariant") {
    Tape tape;
    Tensor x = random_tensor(17, 9, 42, 3.0);
    Tensor shifted = x;
    RandomStream rng(7);
    for (int64_t r = 0; r < x.rows(); ++r) {
        real c = static_cast<real>(rng.uniform(-5, 5));
        for (int64_t j = 0; j < x.cols(); ++j) shifted.at(r, j) += c;
    }
    for (real tau : {0.25, 0.5, 1.0}) {
        Tensor s = tape.value(row_softmax(tape.constant(x), tau));
        Tensor s2 = tape.value(row_softmax(tape.constant(shifted), tau));
        for (int64_t r = 0; r < s.rows(); ++r) {
            real sum = 0;
            for (int64_t j = 0; j < s.cols(); ++j) {
                CHECK(s.at(r, j) >= 0.0);
                CHECK(s.at(r, j) <= 1.0);
                sum += s.at(r, j);
                CHECK(std::fabs(s.at(r, j) - s2.at(r, j)) < 1e-9);
            }
            CHECK(std::fabs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("relu forward and subgradient") {
    Tape tape;
    Value x = tape.constant(Tensor({3}, {-1, 0, 2}));
    Tensor y = tape.value(relu(x));
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);

    Value neg = tape.constant(Tensor({3}, {-5, -1, -0.25}));
    Tensor z = tape.value(relu(neg));
    for (int64_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

    // d sum(relu(x)) at x=[-1,2] is [0,1]
    Tape t2;
    Value inp = t2.input(Tensor({2}, {-1, 2}), true);
    Value loss = sum_all(relu(inp));
    t2.backward(loss);
    Tensor g = t2.grad(inp);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 1.0);
}

TEST_CASE("dropout identity, concentration, scaling") {
    RandomStream rng(11);
    Tape tape;
    Tensor x = Tensor::full({100, 100}, 1.0);
    Value v = tape.constant(x);

    Value same = dropout(v, 0.0, true, rng);
    CHECK(same.id == v.id);
    Value same2 = dropout(v, 0.7, false, rng);
    CHECK(same2.id == v.id);

    Value dropped = dropout(v, 0.5, true, rng);
    const Tensor& d = tape.value(dropped);
    int64_t survivors = 0;
    for (int64_t i = 0; i < d.size(); ++i) {
        if (d[i] != 0.0) {
            CHECK(d[i] == doctest::Approx(2.0)); // inverted scaling 1/(1-p)
            ++survivors;
        }
    }
    double fraction = static_cast<double>(survivors) / static_cast<double>(d.size());
    CHECK(fraction > 0.45);
    CHECK(fraction < 0.55);

    CHECK_THROWS_AS(dropout(v, 1.0, true, rng), ConfigError);
    CHECK_THROWS_AS(dropout(v, -0.1, true, rng), ConfigError);
}

TEST_CASE("gather_rows forward and backward scatter") {
    Tape tape;
    Value x = tape.input(Tensor::from_rows({{1}, {2}, {3}}), true);
    Tensor picked = tape.value(gather_rows(x, {2, 0}));
    CHECK(picked.rows() == 2);
    CHECK(picked[0] == 3.0);
    CHECK(picked[1] == 1.0);

    Tensor empty = tape.value(gather_rows(x, {}));
    CHECK(empty.rows() == 0);
    CHECK(empty.cols() == 1);

    Tensor identity = tape.value(gather_rows(x, {0, 1, 2}));
    for (int64_t i = 0; i < 3; ++i) CHECK(identity[i] == tape.value(x)[i]);

    CHECK_THROWS_AS(gather_rows(x, {3}), IndexError);
    CHECK_THROWS_AS(gather_rows(x, {-1}), IndexError);

    // duplicate rows accumulate gradient
    Tape t2;
    Value y = t2.input(Tensor::from_rows({{1}, {2}}), true);
    Value loss = sum_all(gather_rows(y, {0, 0, 1}));
    t2.backward(loss);
    Tensor g = t2.grad(y);
    CHECK(g[0] == 2.0);
    CHECK(g[1] == 1.0);
}

TEST_CASE("backward basics: ones, x, unused, non-scalar") {
    Parameter w{"w", Tensor::from_rows({{1, 2}, {3, 4}}), true};
    {
        Tape tape;
        Value wv = tape.leaf(w);
        tape.backward(sum_all(wv));
        Tensor g = tape.grad_for(w);
        for (int64_t i = 0; i < 4; ++i) CHECK(g[i] == 1.0);
    }
    {
        // d( sum(w*w)/2 ) = w
        Tape tape;
        Value wv = tape.leaf(w);
        tape.backward(scale(sum_all(mul(wv, wv)), 0.5));
        Tensor g = tape.grad_for(w);
        for (int64_t i = 0; i < 4; ++i) CHECK(g[i] == w.tensor[i]);
    }
    {
        Parameter unused{"unused", Tensor::from_rows({{5, 5}}), true};
        Tape tape;
        Value wv = tape.leaf(w);
        Value uv = tape.leaf(unused);
        (void)uv;
        tape.backward(sum_all(wv));
        Tensor g = tape.grad_for(unused);
        for (int64_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
    }
    {
        Tape tape;
        Value wv = tape.leaf(w);
        CHECK_THROWS_AS(tape.backward(wv), ContractError);
    }
}

TEST_CASE("backward is linear over loss sums") {
    Parameter w{"w", random_tensor(3, 4, 99), true};
    auto grad_of = [&](bool first, bool second) {
        Tape tape;
        Value wv = tape.leaf(w);
        Value l1 = sum_all(mul(wv, wv));
        Value l2 = mean_all(relu(wv));
        Value loss = first && second ? add(l1, l2) : (first ? l1 : l2);
        tape.backward(loss);
        return tape.grad_for(w);
    };
    Tensor g_sum = grad_of(true, true);
    Tensor g1 = grad_of(true, false);
    Tensor g2 = grad_of(false, true);
    for (int64_t i = 0; i < g_sum.size(); ++i) {
        CHECK(std::fabs(g_sum[i] - (g1[i] + g2[i])) < 1e-10);
    }
}

TEST_CASE("grad_check: quadratic exact, eps contract") {
    std::vector<Parameter> params{{"w", random_tensor(3, 3, 5), true}};
    LossBuilder quadratic = [](Tape& tape, std::vector<Parameter>& ps) {
        Value w = tape.leaf(ps[0]);
        return scale(sum_all(mul(w, w)), 0.5);
    };
    GradCheckReport report = grad_check(quadratic, params, 1e-5);
    CHECK(report.max_rel_err <= 1e-6);

    CHECK_THROWS_AS(grad_check(quadratic, params, 1e-2), ConfigError);
    CHECK_THROWS_AS(grad_check(quadratic, params, 1e-8), ConfigError);
}

TEST_CASE("grad_check covers matmul/softmax/gather composite") {
    std::vector<Parameter> params{{"w1", random_tensor(4, 5, 21), true},
                                  {"w2", random_tensor(5, 3, 22), true}};
    Tensor x = random_tensor(6, 4, 23);
    std::vector<int> labels{0, 2, 1, 2, 0, 1};
    LossBuilder builder = [&](Tape& tape, std::vector<Parameter>& ps) {
        Value h = relu(matmul(tape.constant(x), tape.leaf(ps[0])));
        Value logits = matmul(h, tape.leaf(ps[1]));
        Value logp = log_row_softmax(logits, 0.5);
        return scale(mean_all(gather_cols(logp, labels)), -1.0);
    };
    GradCheckReport report = grad_check(builder, params, 1e-4);
    CHECK(report.max_rel_err <= 1e-4);
}

TEST_CASE("derived seeds are stable and independent") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));

    RandomStream r1(derive_seed(7, "x"));
    RandomStream r2(derive_seed(7, "x"));
    for (int i = 0; i < 10; ++i) CHECK(r1.next_u64() == r2.next_u64());
}

TEST_CASE("sample_without_replacement yields distinct indices") {
    RandomStream rng(3);
    std::vector<int> s = rng.sample_without_replacement(20, 10);
    CHECK(s.size() == 10);
    std::sort(s.begin(), s.end());
    CHECK(std::unique(s.begin(), s.end()) == s.end());
    for (int v : s) {
        CHECK(v >= 0);
        CHECK(v < 20);
    }
    CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), ContractError);
}
