// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gdistill/error.hpp"
#include "gdistill/grad_check.hpp"
#include "gdistill/models.hpp"
#include "gdistill/objectives.hpp"

#include <cmath>

using namespace gdistill;

namespace {

const double kLn2 = std::log(2.0);
// KL((1/2,1/2) || (1/4,3/4)) = 0.5 ln 2 + 0.5 ln(2/3)
const double kKlHalfQuarter = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);

Tensor random_tensor(int64_t rows, int64_t cols, uint64_t seed, double scale = 1.0) {
    RandomStream rng(seed);
    Tensor t({rows, cols});
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<real>(scale * rng.normal());
    return t;
}

} // namespace

TEST_CASE("ce_loss closed forms") {
    Tape tape;
    // softmax prob 1 on the true class -> 0
    Value sure = tape.constant(Tensor::from_rows({{1000.0, 0.0}}));
    CHECK(ce_loss(tape, sure, {0}).value() == doctest::Approx(0.0).epsilon(1e-12));

    Value even = tape.constant(Tensor::from_rows({{0.0, 0.0}}));
    CHECK(ce_loss(tape, even, {0}).value() == doctest::Approx(kLn2).epsilon(1e-12));

    // duplicating rows leaves the mean unchanged
    Value one = tape.constant(Tensor::from_rows({{0.3, -0.7, 1.1}}));
    Value two = tape.constant(Tensor::from_rows({{0.3, -0.7, 1.1}, {0.3, -0.7, 1.1}}));
    CHECK(ce_loss(tape, one, {2}).value() ==
          doctest::Approx(ce_loss(tape, two, {2, 2}).value()).epsilon(1e-14));

    Value empty = tape.constant(Tensor({0, 3}));
    CHECK_THROWS_AS(ce_loss(tape, empty, {}), ContractError);
    CHECK_THROWS_AS(ce_loss(tape, one, {0, 1}), DimensionError);
}

TEST_CASE("kl_loss closed forms and contracts") {
    Tape tape;
    // teacher (0.5, 0.5), student (0.25, 0.75), one node, weight 1
    Tensor teacher = Tensor::from_rows({{0.0, 0.0}});
    Value student = tape.constant(Tensor::from_rows({{0.0, kLn2 + kLn2 / 2 - kLn2 / 2}}));
    // student logits chosen to softmax to (0.25, 0.75): [0, ln 3]
    Value student3 = tape.constant(Tensor::from_rows({{0.0, std::log(3.0)}}));
    std::vector<real> w{1.0};
    CHECK(kl_loss(tape, teacher, student3, 1.0, &w).value() ==
          doctest::Approx(kKlHalfQuarter).epsilon(1e-12));
    (void)student;

    // identical logits -> 0 for any tau
    Tensor same = random_tensor(5, 4, 8);
    for (real tau : {0.25, 0.5, 1.0}) {
        Value sv = tape.constant(same);
        CHECK(std::fabs(kl_loss(tape, same, sv, tau).value()) < 1e-10);
    }

    // all-zero weights -> 0
    Tensor t2 = random_tensor(3, 4, 9);
    Value s2 = tape.constant(random_tensor(3, 4, 10));
    std::vector<real> zeros(3, 0.0);
    CHECK(kl_loss(tape, t2, s2, 1.0, &zeros).value() == 0.0);

    CHECK_THROWS_AS(kl_loss(tape, t2, s2, 0.0, nullptr), ConfigError);
    CHECK_THROWS_AS(kl_loss(tape, t2, s2, 1.5, nullptr), ConfigError);
    std::vector<real> neg{1.0, -0.5, 0.5};
    CHECK_THROWS_AS(kl_loss(tape, t2, s2, 1.0, &neg), ConfigError);
}

TEST_CASE("kl_loss sends no gradient to the teacher side") {
    Parameter teacher_param{"teacher", random_tensor(4, 3, 11), true};
    Parameter student_param{"student", random_tensor(4, 3, 12), true};
    Tape tape;
    Value s = tape.leaf(student_param);
    tape.leaf(teacher_param); // on the tape but only its VALUES feed kl_loss
    LossValue kl = kl_loss(tape, teacher_param.tensor, s, 0.5);
    tape.backward(kl.node);
    Tensor gt = tape.grad_for(teacher_param);
    for (int64_t i = 0; i < gt.size(); ++i) CHECK(gt[i] == 0.0);
    Tensor gs = tape.grad_for(student_param);
    bool any = false;
    for (int64_t i = 0; i < gs.size(); ++i) any = any || gs[i] != 0.0;
    CHECK(any);
}

TEST_CASE("g2m_loss composes CE and KL with lambda") {
    Tensor teacher = random_tensor(6, 3, 13);
    Tensor logits = random_tensor(6, 3, 14);
    std::vector<int> labels{0, 1, 2, 0, 1, 2};
    std::vector<int> labeled{0, 2, 4};
    for (double lambda : {0.25, 0.5, 0.9}) {
        Tape tape;
        Value s = tape.constant(logits);
        LossValue g2m = g2m_loss(tape, s, labeled, labels, teacher, 0.5, lambda);
        LossValue ce = ce_loss(tape, gather_rows(s, labeled), {labels[0], labels[2], labels[4]});
        LossValue kl = kl_loss(tape, teacher, s, 0.5);
        CHECK(g2m.value() ==
              doctest::Approx(lambda * ce.value() + (1 - lambda) * kl.value()).epsilon(1e-14));
    }
    Tape tape;
    Value s = tape.constant(logits);
    CHECK_THROWS_AS(g2m_loss(tape, s, labeled, labels, teacher, 0.5, 0.0), ConfigError);
    CHECK_THROWS_AS(g2m_loss(tape, s, labeled, labels, teacher, 0.5, 1.0), ConfigError);
    CHECK_NOTHROW(g2m_loss(tape, s, labeled, labels, teacher, 0.5, 0.0, true));
    CHECK_NOTHROW(g2m_loss(tape, s, labeled, labels, teacher, 0.5, 1.0, true));
}

TEST_CASE("rc_loss averages per-student CE") {
    Tape tape;
    Value a = tape.constant(random_tensor(4, 3, 15));
    Value b = tape.constant(random_tensor(4, 3, 16));
    std::vector<int> la{0, 1, 2, 0}, lb{2, 2, 1, 0};

    // K=1 reduces to plain CE
    LossValue single = rc_loss(tape, {a}, {la});
    CHECK(single.value() == doctest::Approx(ce_loss(tape, a, la).value()).epsilon(1e-15));

    LossValue both = rc_loss(tape, {a, b}, {la, lb});
    CHECK(both.value() == doctest::Approx(0.5 * (ce_loss(tape, a, la).value() +
                                                 ce_loss(tape, b, lb).value()))
                              .epsilon(1e-14));

    // identical students on equal-size subsets equal the pooled CE
    Tensor big = random_tensor(6, 3, 17);
    Value bv = tape.constant(big);
    std::vector<int> labels{0, 1, 2, 0, 1, 2};
    Value first = gather_rows(bv, {0, 1, 2});
    Value second = gather_rows(bv, {3, 4, 5});
    LossValue split_rc = rc_loss(tape, {first, second}, {{0, 1, 2}, {0, 1, 2}});
    LossValue pooled = ce_loss(tape, bv, labels);
    CHECK(split_rc.value() == doctest::Approx(pooled.value()).epsilon(1e-12));

    CHECK_THROWS_AS(rc_loss(tape, {a}, {{}}), ContractError);
    CHECK_THROWS_AS(rc_loss(tape, {a, b}, {la}), ContractError);
}

TEST_CASE("na_output_loss closed forms") {
    Tape tape;
    Value z = tape.constant(Tensor::from_rows({{1.0, 0.0}}));
    Value zt = tape.constant(Tensor::from_rows({{0.0, 0.0}}));
    CHECK(na_output_loss(tape, {z}, {zt}).value() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(na_output_loss(tape, {z}, {z}).value() == 0.0);

    // quadratic homogeneity: scaling both by 2 scales the loss by 4
    Value z2 = scale(z, 2.0);
    Value zt2 = scale(zt, 2.0);
    CHECK(na_output_loss(tape, {z2}, {zt2}).value() == doctest::Approx(4.0).epsilon(1e-15));

    Value wrong = tape.constant(Tensor::from_rows({{0.0, 0.0}, {0.0, 0.0}}));
    CHECK_THROWS_AS(na_output_loss(tape, {z}, {wrong}), DimensionError);
}

TEST_CASE("na_hidden_loss closed forms") {
    Tape tape;
    Value h = tape.constant(Tensor::from_rows({{1.0, 1.0}}));
    Value ht = tape.constant(Tensor::from_rows({{0.0, 0.0}}));
    // L=2: one hidden layer, one node: ||(1,1)||^2 = 2
    CHECK(na_hidden_loss(tape, {{h}}, {{ht}}).value() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(na_hidden_loss(tape, {{h}}, {{h}}).value() == 0.0);

    // L=3: one zero-diff layer and one diff-2.0 layer -> / (L-1) = 1.0
    Value d0 = tape.constant(Tensor::from_rows({{0.5, 0.5}}));
    Value diff = tape.constant(Tensor::from_rows({{1.0, 1.0}}));
    Value diff_t = tape.constant(Tensor::from_rows({{0.0, 0.0}}));
    CHECK(na_hidden_loss(tape, {{d0, diff}}, {{d0, diff_t}}).value() ==
          doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(na_hidden_loss(tape, {{h, h}}, {{ht}}), ContractError);
}

TEST_CASE("na_loss and adagmlp_loss arithmetic") {
    Tape tape;
    LossValue na_o{tape.constant(Tensor::scalar(0.4)), {}};
    LossValue na_h{tape.constant(Tensor::scalar(0.8)), {}};
    CHECK(na_loss(tape, &na_o, &na_h, 0.5).value() == doctest::Approx(0.6).epsilon(1e-15));
    LossValue zero_o{tape.constant(Tensor::scalar(0.0)), {}};
    LossValue zero_h{tape.constant(Tensor::scalar(0.0)), {}};
    CHECK(na_loss(tape, &zero_o, &zero_h, 0.5).value() == 0.0);
    // lambda_na ~ 1 approaches the NA-O term
    CHECK(na_loss(tape, &na_o, &na_h, 0.99).value() ==
          doctest::Approx(0.99 * 0.4 + 0.01 * 0.8).epsilon(1e-12));
    CHECK_THROWS_AS(na_loss(tape, &na_o, &na_h, 1.0), ConfigError);
    CHECK_NOTHROW(na_loss(tape, &na_o, &na_h, 1.0, true));

    LossValue rc{tape.constant(Tensor::scalar(0.6)), {}};
    LossValue adakd{tape.constant(Tensor::scalar(0.2)), {}};
    LossValue na{tape.constant(Tensor::scalar(0.1)), {}};
    CHECK(adagmlp_loss(tape, rc, adakd, &na, 0.5).value() ==
          doctest::Approx(0.5).epsilon(1e-15));
    CHECK(adagmlp_loss(tape, rc, adakd, nullptr, 0.5).value() ==
          doctest::Approx(0.4).epsilon(1e-15));
    CHECK_THROWS_AS(adagmlp_loss(tape, rc, adakd, &na, 0.0), ConfigError);
    CHECK_NOTHROW(adagmlp_loss(tape, rc, adakd, &na, 0.0, true));
}

TEST_CASE("gradient checks for each loss at 1e-4") {
    Tensor x = random_tensor(6, 4, 30);
    Tensor teacher = random_tensor(6, 3, 31, 2.0);
    std::vector<int> labels{0, 1, 2, 0, 1, 2};
    std::vector<int> labeled{0, 1, 3, 5};
    std::vector<int> labeled_labels{0, 1, 0, 2};

    std::vector<Parameter> params{{"w1", random_tensor(4, 5, 32), true},
                                  {"b1", Tensor({1, 5}), true},
                                  {"w2", random_tensor(5, 3, 33), true},
                                  {"b2", Tensor({1, 3}), true}};

    auto forward = [&](Tape& tape, std::vector<Parameter>& ps, const Tensor& input) {
        Value h = relu(add_rowvec(matmul(tape.constant(input), tape.leaf(ps[0])),
                                  tape.leaf(ps[1])));
        Value logits = add_rowvec(matmul(h, tape.leaf(ps[2])), tape.leaf(ps[3]));
        return std::pair<Value, Value>(h, logits);
    };

    SUBCASE("ce") {
        LossBuilder b = [&](Tape& tape, std::vector<Parameter>& ps) {
            auto [h, logits] = forward(tape, ps, x);
            return ce_loss(tape, gather_rows(logits, labeled), labeled_labels).node;
        };
        CHECK(grad_check(b, params, 1e-5).max_rel_err <= 1e-4);
    }
    SUBCASE("kl at tau 1 and 0.5") {
        for (real tau : {1.0, 0.5}) {
            LossBuilder b = [&, tau](Tape& tape, std::vector<Parameter>& ps) {
                auto [h, logits] = forward(tape, ps, x);
                return kl_loss(tape, teacher, logits, tau).node;
            };
            CHECK(grad_check(b, params, 1e-5).max_rel_err <= 1e-4);
        }
    }
    SUBCASE("na_o and na_h with frozen masks") {
        Tensor masked_x = x;
        for (int64_t r = 0; r < masked_x.rows(); ++r) masked_x.at(r, 1) = 0.0;
        LossBuilder bo = [&](Tape& tape, std::vector<Parameter>& ps) {
            auto [h, logits] = forward(tape, ps, x);
            auto [hm, logits_m] = forward(tape, ps, masked_x);
            return na_output_loss(tape, {logits}, {logits_m}).node;
        };
        CHECK(grad_check(bo, params, 1e-3).max_rel_err <= 1e-4);
        LossBuilder bh = [&](Tape& tape, std::vector<Parameter>& ps) {
            auto [h, logits] = forward(tape, ps, x);
            auto [hm, logits_m] = forward(tape, ps, masked_x);
            return na_hidden_loss(tape, {{h}}, {{hm}}).node;
        };
        CHECK(grad_check(bh, params, 1e-3).max_rel_err <= 1e-4);
    }
    SUBCASE("g2m") {
        LossBuilder b = [&](Tape& tape, std::vector<Parameter>& ps) {
            auto [h, logits] = forward(tape, ps, x);
            return g2m_loss(tape, logits, labeled, labels, teacher, 0.5, 0.4).node;
        };
        CHECK(grad_check(b, params, 1e-5).max_rel_err <= 1e-4);
    }
}
