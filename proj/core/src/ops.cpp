// SPDX-License-Identifier: Apache-2.0

#include "gdistill/ops.hpp"

#include "gdistill/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gdistill {

namespace {

Tape& same_tape(Value a, Value b) {
    if (a.tape == nullptr || a.tape != b.tape) {
        throw ContractError("operands live on different tapes");
    }
    return *a.tape;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch");
    }
}

} // namespace

void mm_nn(const real* a, const real* b, real* c, int64_t m, int64_t k, int64_t n,
           bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, real(0));
    for (int64_t i = 0; i < m; ++i) {
        const real* arow = a + i * k;
        real* crow = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            real av = arow[p];
            if (av == real(0)) continue;
            const real* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void mm_tn(const real* a, const real* b, real* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const real* arow = a + i * k;
        const real* brow = b + i * n;
        for (int64_t p = 0; p < k; ++p) {
            real av = arow[p];
            if (av == real(0)) continue;
            real* crow = c + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void mm_nt(const real* a, const real* b, real* c, int64_t m, int64_t n, int64_t k) {
    for (int64_t i = 0; i < m; ++i) {
        const real* arow = a + i * n;
        real* crow = c + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const real* brow = b + p * n;
            real acc = real(0);
            for (int64_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
            crow[p] += acc;
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree");
    }
    Tensor out({a.rows(), b.cols()});
    mm_nn(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols(), false);
    return out;
}

Value matmul(Value av, Value bv) {
    Tape& tape = same_tape(av, bv);
    const Tensor& a = tape.value(av);
    const Tensor& b = tape.value(bv);
    Tensor out = matmul(a, b);
    bool needs = tape.requires_grad(av) || tape.requires_grad(bv);
    if (!needs) return tape.make_node(std::move(out), false, nullptr);
    int aid = av.id, bid = bv.id;
    int64_t m = a.rows(), k = a.cols(), n = b.cols();
    return tape.make_node(std::move(out), true, [aid, bid, m, k, n](Tape& t, const Tensor& g) {
        const Tensor& a = t.value(Value{&t, aid});
        const Tensor& b = t.value(Value{&t, bid});
        if (t.wants_grad(aid)) {
            mm_nt(g.data(), b.data(), t.grad_buffer(aid).data(), m, n, k);
        }
        if (t.wants_grad(bid)) {
            mm_tn(a.data(), g.data(), t.grad_buffer(bid).data(), m, k, n);
        }
    });
}

Value add(Value av, Value bv) {
    Tape& tape = same_tape(av, bv);
    const Tensor& a = tape.value(av);
    const Tensor& b = tape.value(bv);
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    bool needs = tape.requires_grad(av) || tape.requires_grad(bv);
    if (!needs) return tape.make_node(std::move(out), false, nullptr);
    int aid = av.id, bid = bv.id;
    return tape.make_node(std::move(out), true, [aid, bid](Tape& t, const Tensor& g) {
        for (int id : {aid, bid}) {
            if (!t.wants_grad(id)) continue;
            Tensor& gb = t.grad_buffer(id);
            for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    });
}

Value sub(Value av, Value bv) {
    Tape& tape = same_tape(av, bv);
    const Tensor& a = tape.value(av);
    const Tensor& b = tape.value(bv);
    check_same_shape(a, b, "sub");
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    bool needs = tape.requires_grad(av) || tape.requires_grad(bv);
    if (!needs) return tape.make_node(std::move(out), false, nullptr);
    int aid = av.id, bid = bv.id;
    return tape.make_node(std::move(out), true, [aid, bid](Tape& t, const Tensor& g) {
        if (t.wants_grad(aid)) {
            Tensor& gb = t.grad_buffer(aid);
            for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
        if (t.wants_grad(bid)) {
            Tensor& gb = t.grad_buffer(bid);
            for (int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Value mul(Value av, Value bv) {
    Tape& tape = same_tape(av, bv);
    const Tensor& a = tape.value(av);
    const Tensor& b = tape.value(bv);
    check_same_shape(a, b, "mul");
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    bool needs = tape.requires_grad(av) || tape.requires_grad(bv);
    if (!needs) return tape.make_node(std::move(out), false, nullptr);
    int aid = av.id, bid = bv.id;
    return tape.make_node(std::move(out), true, [aid, bid](Tape& t, const Tensor& g) {
        const Tensor& a = t.value(Value{&t, aid});
        const Tensor& b = t.value(Value{&t, bid});
        if (t.wants_grad(aid)) {
            Tensor& gb = t.grad_buffer(aid);
            for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * b[i];
        }
        if (t.wants_grad(bid)) {
            Tensor& gb = t.grad_buffer(bid);
            for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
        }
    });
}

Value square(Value a) { return mul(a, a); }

Value scale(Value av, real c) {
    Tape& tape = *av.tape;
    const Tensor& a = tape.value(av);
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= c;
    if (!tape.requires_grad(av)) return tape.make_node(std::move(out), false, nullptr);
    int aid = av.id;
    return tape.make_node(std::move(out), true, [aid, c](Tape& t, const Tensor& g) {
        if (!t.wants_grad(aid)) return;
        Tensor& gb = t.grad_buffer(aid);
        for (int64_t i = 0; i < g.size(); ++i) gb[i] += c * g[i];
    });
}

Value add_rowvec(Value xv, Value bv) {
    Tape& tape = same_tape(xv, bv);
    const Tensor& x = tape.value(xv);
    const Tensor& b = tape.value(bv);
    if (x.rank() != 2 || b.rank() != 2 || b.rows() != 1 || b.cols() != x.cols()) {
        throw DimensionError("add_rowvec: bias must be [1 x cols(x)]");
    }
    Tensor out = x;
    int64_t n = x.rows(), c = x.cols();
    for (int64_t r = 0; r < n; ++r) {
        for (int64_t j = 0; j < c; ++j) out.at(r, j) += b[j];
    }
    bool needs = tape.requires_grad(xv) || tape.requires_grad(bv);
    if (!needs) return tape.make_node(std::move(out), false, nullptr);
    int xid = xv.id, bid = bv.id;
    return tape.make_node(std::move(out), true, [xid, bid, n, c](Tape& t, const Tensor& g) {
        if (t.wants_grad(xid)) {
            Tensor& gx = t.grad_buffer(xid);
            for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (t.wants_grad(bid)) {
            Tensor& gb = t.grad_buffer(bid);
            for (int64_t r = 0; r < n; ++r) {
                for (int64_t j = 0; j < c; ++j) gb[j] += g.at(r, j);
            }
        }
    });
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = std::max(real(0), out[i]);
    return out;
}

Value relu(Value xv) {
    Tape& tape = *xv.tape;
    const Tensor& x = tape.value(xv);
    Tensor out = relu(x);
    if (!tape.requires_grad(xv)) return tape.make_node(std::move(out), false, nullptr);
    int xid = xv.id;
    return tape.make_node(std::move(out), true, [xid](Tape& t, const Tensor& g) {
        if (!t.wants_grad(xid)) return;
        const Tensor& x = t.value(Value{&t, xid});
        Tensor& gx = t.grad_buffer(xid);
        // subgradient at 0 defined as 0
        for (int64_t i = 0; i < g.size(); ++i) gx[i] += x[i] > real(0) ? g[i] : real(0);
    });
}

Tensor make_dropout_mask(const std::vector<int64_t>& shape, real p, RandomStream& rng) {
    if (p < real(0) || p >= real(1)) {
        throw ConfigError("dropout: p must be in [0, 1)");
    }
    Tensor mask(shape);
    real keep_scale = real(1) / (real(1) - p);
    for (int64_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.bernoulli(static_cast<double>(p)) ? real(0) : keep_scale;
    }
    return mask;
}

Value dropout_with_mask(Value xv, Tensor scaled_mask) {
    Tape& tape = *xv.tape;
    const Tensor& x = tape.value(xv);
    check_same_shape(x, scaled_mask, "dropout");
    Tensor out = x;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= scaled_mask[i];
    if (!tape.requires_grad(xv)) return tape.make_node(std::move(out), false, nullptr);
    int xid = xv.id;
    return tape.make_node(std::move(out), true,
                          [xid, mask = std::move(scaled_mask)](Tape& t, const Tensor& g) {
                              if (!t.wants_grad(xid)) return;
                              Tensor& gx = t.grad_buffer(xid);
                              for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                          });
}

Value dropout(Value xv, real p, bool training, RandomStream& rng) {
    if (p < real(0) || p >= real(1)) {
        throw ConfigError("dropout: p must be in [0, 1)");
    }
    if (!training || p == real(0)) return xv;
    return dropout_with_mask(xv, make_dropout_mask(xv.tensor().shape(), p, rng));
}

Value gather_rows(Value xv, const std::vector<int>& idx) {
    Tape& tape = *xv.tape;
    const Tensor& x = tape.value(xv);
    int64_t n = x.rows(), c = x.cols();
    for (int i : idx) {
        if (i < 0 || i >= n) {
            throw IndexError("gather_rows: index " + std::to_string(i) + " out of [0, " +
                             std::to_string(n) + ")");
        }
    }
    Tensor out({static_cast<int64_t>(idx.size()), c});
    for (size_t r = 0; r < idx.size(); ++r) {
        const real* src = x.data() + static_cast<int64_t>(idx[r]) * c;
        std::copy(src, src + c, out.data() + static_cast<int64_t>(r) * c);
    }
    if (!tape.requires_grad(xv)) return tape.make_node(std::move(out), false, nullptr);
    int xid = xv.id;
    return tape.make_node(std::move(out), true, [xid, idx, c](Tape& t, const Tensor& g) {
        if (!t.wants_grad(xid)) return;
        Tensor& gx = t.grad_buffer(xid);
        for (size_t r = 0; r < idx.size(); ++r) {
            real* dst = gx.data() + static_cast<int64_t>(idx[r]) * c;
            const real* src = g.data() + static_cast<int64_t>(r) * c;
            for (int64_t j = 0; j < c; ++j) dst[j] += src[j];
        }
    });
}

Value gather_cols(Value xv, const std::vector<int>& idx) {
    Tape& tape = *xv.tape;
    const Tensor& x = tape.value(xv);
    int64_t n = x.rows(), c = x.cols();
    if (static_cast<int64_t>(idx.size()) != n) {
        throw DimensionError("gather_cols: one column index per row required");
    }
    for (int i : idx) {
        if (i < 0 || i >= c) throw IndexError("gather_cols: column index out of range");
    }
    Tensor out({n, 1});
    for (int64_t r = 0; r < n; ++r) out[r] = x.at(r, idx[static_cast<size_t>(r)]);
    if (!tape.requires_grad(xv)) return tape.make_node(std::move(out), false, nullptr);
    int xid = xv.id;
    return tape.make_node(std::move(out), true, [xid, idx](Tape& t, const Tensor& g) {
        if (!t.wants_grad(xid)) return;
        Tensor& gx = t.grad_buffer(xid);
        int64_t c = gx.cols();
        for (int64_t r = 0; r < g.size(); ++r) {
            gx[r * c + idx[static_cast<size_t>(r)]] += g[r];
        }
    });
}

namespace {

void check_temperature(real temperature) {
    if (!(temperature > real(0))) {
        throw ConfigError("softmax temperature must be positive");
    }
}

} // namespace

Tensor row_softmax(const Tensor& x, real temperature) {
    check_temperature(temperature);
    Tensor out = x;
    int64_t n = x.rows(), c = x.cols();
    for (int64_t r = 0; r < n; ++r) {
        real* row = out.data() + r * c;
        real mx = row[0] / temperature;
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j] / temperature);
        real sum = real(0);
        for (int64_t j = 0; j < c; ++j) {
            row[j] = std::exp(row[j] / temperature - mx);
            sum += row[j];
        }
        for (int64_t j = 0; j < c; ++j) row[j] /= sum;
    }
    return out;
}

Value row_softmax(Value xv, real temperature) {
    Tape& tape = *xv.tape;
    Tensor out = row_softmax(tape.value(xv), temperature);
    if (!tape.requires_grad(xv)) return tape.make_node(std::move(out), false, nullptr);
    int xid = xv.id;
    int out_id = tape.size(); // node created below
    Value res = tape.make_node(std::move(out), true,
                               [xid, out_id, temperature](Tape& t, const Tensor& g) {
                                   if (!t.wants_grad(xid)) return;
                                   const Tensor& s = t.value(Value{&t, out_id});
                                   Tensor& gx = t.grad_buffer(xid);
                                   int64_t n = s.rows(), c = s.cols();
                                   for (int64_t r = 0; r < n; ++r) {
                                       real dot = real(0);
                                       for (int64_t j = 0; j < c; ++j) {
                                           dot += g.at(r, j) * s.at(r, j);
                                       }
                                       for (int64_t j = 0; j < c; ++j) {
                                           gx.at(r, j) += s.at(r, j) * (g.at(r, j) - dot) / temperature;
                                       }
                                   }
                               });
    return res;
}

Value log_row_softmax(Value xv, real temperature) {
    check_temperature(temperature);
    Tape& tape = *xv.tape;
    const Tensor& x = tape.value(xv);
    Tensor out = x;
    int64_t n = x.rows(), c = x.cols();
    for (int64_t r = 0; r < n; ++r) {
        real* row = out.data() + r * c;
        real mx = row[0] / temperature;
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j] / temperature);
        real sum = real(0);
        for (int64_t j = 0; j < c; ++j) sum += std::exp(row[j] / temperature - mx);
        real lse = std::log(sum);
        for (int64_t j = 0; j < c; ++j) row[j] = row[j] / temperature - mx - lse;
    }
    if (!tape.requires_grad(xv)) return tape.make_node(std::move(out), false, nullptr);
    int xid = xv.id;
    int out_id = tape.size();
    return tape.make_node(std::move(out), true,
                          [xid, out_id, temperature](Tape& t, const Tensor& g) {
                              if (!t.wants_grad(xid)) return;
                              const Tensor& logp = t.value(Value{&t, out_id});
                              Tensor& gx = t.grad_buffer(xid);
                              int64_t n = logp.rows(), c = logp.cols();
                              for (int64_t r = 0; r < n; ++r) {
                                  real gsum = real(0);
                                  for (int64_t j = 0; j < c; ++j) gsum += g.at(r, j);
                                  for (int64_t j = 0; j < c; ++j) {
                                      real s = std::exp(logp.at(r, j));
                                      gx.at(r, j) += (g.at(r, j) - s * gsum) / temperature;
                                  }
                              }
                          });
}

Value row_sum(Value xv) {
    Tape& tape = *xv.tape;
    const Tensor& x = tape.value(xv);
    int64_t n = x.rows(), c = x.cols();
    Tensor out({n, 1});
    for (int64_t r = 0; r < n; ++r) {
        real acc = real(0);
        for (int64_t j = 0; j < c; ++j) acc += x.at(r, j);
        out[r] = acc;
    }
    if (!tape.requires_grad(xv)) return tape.make_node(std::move(out), false, nullptr);
    int xid = xv.id;
    return tape.make_node(std::move(out), true, [xid, c](Tape& t, const Tensor& g) {
        if (!t.wants_grad(xid)) return;
        Tensor& gx = t.grad_buffer(xid);
        for (int64_t r = 0; r < g.size(); ++r) {
            for (int64_t j = 0; j < c; ++j) gx[r * c + j] += g[r];
        }
    });
}

Value sum_all(Value xv) {
    Tape& tape = *xv.tape;
    const Tensor& x = tape.value(xv);
    real acc = real(0);
    for (int64_t i = 0; i < x.size(); ++i) acc += x[i];
    Tensor out = Tensor::scalar(acc);
    if (!tape.requires_grad(xv)) return tape.make_node(std::move(out), false, nullptr);
    int xid = xv.id;
    return tape.make_node(std::move(out), true, [xid](Tape& t, const Tensor& g) {
        if (!t.wants_grad(xid)) return;
        Tensor& gx = t.grad_buffer(xid);
        for (int64_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
    });
}

Value mean_all(Value xv) {
    Tape& tape = *xv.tape;
    const Tensor& x = tape.value(xv);
    if (x.size() == 0) throw ContractError("mean_all: empty tensor");
    real inv = real(1) / static_cast<real>(x.size());
    return scale(sum_all(xv), inv);
}

Value axpby(real a, Value x, real b, Value y) { return add(scale(x, a), scale(y, b)); }

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != x.cols()) {
        throw DimensionError("add_rowvec: bias must be [1 x cols(x)]");
    }
    Tensor out = x;
    for (int64_t r = 0; r < x.rows(); ++r) {
        for (int64_t j = 0; j < x.cols(); ++j) out.at(r, j) += bias[j];
    }
    return out;
}

std::vector<int> row_argmax(const Tensor& x) {
    std::vector<int> out(static_cast<size_t>(x.rows()));
    for (int64_t r = 0; r < x.rows(); ++r) {
        int best = 0;
        for (int64_t j = 1; j < x.cols(); ++j) {
            if (x.at(r, j) > x.at(r, best)) best = static_cast<int>(j);
        }
        out[static_cast<size_t>(r)] = best;
    }
    return out;
}

} // namespace gdistill
