#include <doctest.h>

#include <cmath>

#include "awe/adam.hpp"
#include "awe/error.hpp"
#include "awe/gru.hpp"
#include "awe/ops.hpp"
#include "awe/params.hpp"
#include "awe/tape.hpp"
#include "oracles.hpp"

using namespace awe;
using namespace awe::nn;

TEST_SUITE("tensor") {
  TEST_CASE("shape and data length must agree") {
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
    Tensor t({2, 3}, std::vector<double>(6, 1.0));
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
  }

  TEST_CASE("require_finite names the location") {
    Tensor t(2, 2);
    t(1, 0) = std::nan("");
    try {
      require_finite(t, "probe");
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("flat index 2") != std::string::npos);
      CHECK(std::string(e.what()).find("probe") != std::string::npos);
    }
    t(1, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(require_finite(t, "probe"), NumericError);
  }

  TEST_CASE("gemm variants agree with a triple loop") {
    Rng rng(3);
    for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {5, 7, 9}, {13, 3, 17}, {8, 16, 8}, {70, 5, 11}}) {
      const Tensor a = oracle::random_matrix(m, k, rng);
      const Tensor b = oracle::random_matrix(k, n, rng);
      const Tensor bt = transpose(b);
      const Tensor at = transpose(a);
      Tensor c, c_nt, c_tn;
      gemm(a, b, c);
      gemm_nt(a, bt, c_nt);
      gemm_tn(at, b, c_tn);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t p = 0; p < k; ++p) s += a(i, p) * b(p, j);
          CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-13));
          CHECK(c_nt(i, j) == doctest::Approx(s).epsilon(1e-13));
          CHECK(c_tn(i, j) == doctest::Approx(s).epsilon(1e-13));
        }
      }
    }
  }

  TEST_CASE("gemm rows do not depend on batch composition") {
    Rng rng(4);
    const Tensor a = oracle::random_matrix(11, 23, rng);
    const Tensor b = oracle::random_matrix(23, 19, rng);
    Tensor full;
    gemm(a, b, full);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      Tensor row(1, a.cols());
      for (std::size_t p = 0; p < a.cols(); ++p) row(0, p) = a(i, p);
      Tensor one;
      gemm(row, b, one);
      for (std::size_t j = 0; j < b.cols(); ++j) CHECK(one(0, j) == full(i, j));
    }
  }

  TEST_CASE("mismatched inner dimensions") {
    Tensor c;
    CHECK_THROWS_AS(gemm(Tensor(2, 3), Tensor(4, 2), c), DimensionError);
  }
}

TEST_SUITE("rng") {
  TEST_CASE("same seed, same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(a.position() == 100);
  }

  TEST_CASE("forks are independent of the parent position") {
    Rng a(7);
    Rng f1 = a.fork("stage");
    a.next_u64();
    Rng f2 = a.fork("stage");
    CHECK(f1.next_u64() == f2.next_u64());
    CHECK(derive_seed(7, "x") != derive_seed(7, "y"));
  }

  TEST_CASE("uniform_int stays in range") {
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
      const auto v = r.uniform_int(std::int64_t{-3}, std::int64_t{4});
      CHECK(v >= -3);
      CHECK(v <= 4);
    }
  }
}

TEST_SUITE("gru") {
  TEST_CASE("zero weights halve the previous state") {
    const auto p = GruCellParams::zeros(3, 4);
    const Tensor h = Tensor::vector({1.0, -2.0, 0.5, 4.0});
    const Tensor out = gru_cell_forward(p, Tensor::vector({9.0, -9.0, 3.0}), h);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == 0.5 * h[i]);
  }

  TEST_CASE("zero weights and zero state give zero") {
    const auto p = GruCellParams::zeros(3, 4);
    const Tensor out = gru_cell_forward(p, Tensor::vector({1.0, 2.0, 3.0}), Tensor::vector(4));
    for (double v : out.values()) CHECK(v == 0.0);
  }

  TEST_CASE("random cell matches the scalar gate equations") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const auto p = GruCellParams::random(3, 4, rng);
      std::vector<double> x(3), h(4);
      for (double& v : x) v = rng.normal();
      for (double& v : h) v = rng.normal();
      const Tensor out = gru_cell_forward(p, Tensor::vector(x), Tensor::vector(h));
      const auto ref = oracle::gru_cell(p.w_input, p.w_hidden, p.bias, x, h);
      for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(out[i] - ref[i]) <= 1e-12);
    }
  }

  TEST_CASE("shape mismatch is a dimension error") {
    const auto p = GruCellParams::zeros(3, 4);
    CHECK_THROWS_AS(gru_cell_forward(p, Tensor::vector(2), Tensor::vector(4)), DimensionError);
    CHECK_THROWS_AS(gru_cell_forward(p, Tensor::vector(3), Tensor::vector(5)), DimensionError);
  }

  TEST_CASE("fused step gradients match finite differences") {
    Rng rng(11);
    const std::size_t b = 3, in = 5, hd = 4;
    auto p = GruCellParams::random(in, hd, rng);
    Tensor x = oracle::random_matrix(b, in, rng);
    Tensor h0 = oracle::random_matrix(b, hd, rng, 0.5);
    Tensor target = oracle::random_matrix(b, hd, rng);
    auto run = [&](Tape& tape) {
      GruVars v{tape.parameter(p.w_input), tape.parameter(p.w_hidden), tape.parameter(p.bias)};
      Var xs = tape.parameter(x);
      Var h = tape.parameter(h0);
      h = gru_cell(v, xs, h);
      h = gru_cell(v, xs, h);
      return weighted_sq_error(h, target, std::vector<double>(b, 1.0));
    };
    Tape tape;
    const auto grads = tape.backward(run(tape));
    const double err = oracle::max_relative_error({&p.w_input, &p.w_hidden, &p.bias, &x, &h0}, grads, [&] {
      Tape t(false);
      return run(t).value()[0];
    });
    CHECK(err <= 1e-5);
  }
}

TEST_SUITE("tape") {
  TEST_CASE("theta^T theta has gradient 2 theta") {
    Tape tape;
    const Tensor theta({1, 4}, {1.5, -2.0, 0.25, 3.0});
    Var t = tape.parameter(theta);
    const auto g = tape.backward(sum(mul(t, t)));
    REQUIRE(g.size() == 1);
    for (std::size_t i = 0; i < 4; ++i) CHECK(g[0][i] == 2.0 * theta[i]);
    CHECK(tape.size() == 0);
  }

  TEST_CASE("constant loss gives zero gradients") {
    Tape tape;
    tape.parameter(Tensor(2, 2, 1.0));
    Var c = tape.constant(Tensor::scalar(3.0));
    const auto g = tape.backward(c);
    REQUIRE(g.size() == 1);
    for (double v : g[0].values()) CHECK(v == 0.0);
  }

  TEST_CASE("non-scalar loss is rejected") {
    Tape tape;
    Var t = tape.parameter(Tensor(2, 2, 1.0));
    CHECK_THROWS_AS(tape.backward(t), NumericError);
  }

  TEST_CASE("stale handles are detected") {
    Tape tape;
    Var t = tape.parameter(Tensor(1, 1, 1.0));
    tape.backward(sum(t));
    CHECK_THROWS_AS(t.value(), NumericError);
    Tape other;
    Var u = other.parameter(Tensor(1, 1, 1.0));
    Var v = tape.parameter(Tensor(1, 1, 1.0));
    CHECK_THROWS_AS(add(u, v), NumericError);
  }

  TEST_CASE("non-finite forward values raise") {
    Tape tape;
    Var t = tape.parameter(Tensor(1, 1, 1000.0));
    CHECK_THROWS_AS(scale(t, 1e308), NumericError);
  }

  TEST_CASE("log_softmax and pick match the scalar formula") {
    Rng rng(5);
    const Tensor logits = oracle::random_matrix(3, 7, rng, 2.0);
    Tape tape(false);
    Var ls = log_softmax_rows(tape.constant(logits));
    for (std::size_t r = 0; r < 3; ++r) {
      std::vector<double> row(logits.row(r).begin(), logits.row(r).end());
      const auto ref = oracle::log_softmax(row);
      for (std::size_t c = 0; c < 7; ++c) CHECK(std::abs(ls.value()(r, c) - ref[c]) <= 1e-12);
    }
    const std::vector<Entry> picks{{0, 1}, {2, 6}};
    Var p = pick(ls, picks);
    CHECK(p.value()[1] == ls.value()(2, 6));
  }

  TEST_CASE("op gradients match finite differences") {
    Rng rng(8);
    Tensor a = oracle::random_matrix(4, 5, rng);
    Tensor b = oracle::random_matrix(5, 3, rng);
    Tensor c = oracle::random_matrix(4, 3, rng);
    Tensor bias = oracle::random_matrix(1, 3, rng);
    const std::vector<std::uint8_t> keep{1, 0, 1, 1};
    const std::vector<std::size_t> rows{3, 0, 0, 2};
    std::vector<double> w(24);
    for (double& v : w) v = rng.normal();
    auto run = [&](Tape& tape) {
      Var va = tape.parameter(a), vb = tape.parameter(b), vc = tape.parameter(c), vbias = tape.parameter(bias);
      Var m = add_bias(matmul(va, vb), vbias);
      Var s = blend(keep, tanh(m), sigmoid(vc));
      Var g = gather_rows(concat_cols(s, relu(sub(vc, m))), rows);
      Var n = row_normalize(slice_cols(g, 1, 4));
      Var ls = log_softmax_rows(matmul_nt(n, concat_rows(std::vector<Var>{slice_rows(vc, 0, 2), m})));
      Var parts = concat_cols(scale(one_minus(ls), 0.5), add_scalar(mul(m, vc), 1.0));
      Var out = weighted_sum(slice_cols(parts, 0, 6), w);
      return add(out, mean(matmul_block(va, vb, 1, 3)));
    };
    Tape tape;
    const auto grads = tape.backward(run(tape));
    const double err = oracle::max_relative_error({&a, &b, &c, &bias}, grads, [&] {
      Tape t(false);
      return run(t).value()[0];
    });
    CHECK(err <= 1e-6);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("first step moves by the learning rate against the gradient sign") {
    for (double g : {3.0, -0.02, 1e-3}) {
      ParameterStore ps;
      ps.add("theta", Tensor::scalar(1.0));
      Adam opt(ps, {});
      opt.step(ps, {Tensor::scalar(g)});
      const double moved = ps.at(0)[0] - 1.0;
      CHECK(moved == doctest::Approx(-0.001 * (g > 0 ? 1.0 : -1.0)).epsilon(1e-4));
      CHECK(opt.step_count() == 1);
    }
  }

  TEST_CASE("zero gradient leaves parameters unchanged and decays moments") {
    ParameterStore ps;
    ps.add("theta", Tensor::scalar(1.0));
    Adam opt(ps, {});
    opt.step(ps, {Tensor::scalar(2.0)});
    const double p1 = ps.at(0)[0];
    const double m1 = opt.first_moments()[0][0];
    const double v1 = opt.second_moments()[0][0];
    opt.step(ps, {Tensor::scalar(0.0)});
    CHECK(opt.first_moments()[0][0] == doctest::Approx(0.9 * m1));
    CHECK(opt.second_moments()[0][0] == doctest::Approx(0.999 * v1));
    ParameterStore fresh;
    fresh.add("theta", Tensor::scalar(1.0));
    Adam opt2(fresh, {});
    opt2.step(fresh, {Tensor::scalar(0.0)});
    CHECK(fresh.at(0)[0] == 1.0);
    CHECK(p1 < 1.0);
  }

  TEST_CASE("ten steps on theta^2 shrink |theta| monotonically") {
    ParameterStore ps;
    ps.add("theta", Tensor::scalar(1.0));
    Adam opt(ps, {});
    double prev = 1.0;
    for (int i = 0; i < 10; ++i) {
      opt.step(ps, {Tensor::scalar(2.0 * ps.at(0)[0])});
      CHECK(std::abs(ps.at(0)[0]) < prev);
      prev = std::abs(ps.at(0)[0]);
    }
  }

  TEST_CASE("NaN gradient aborts naming the parameter") {
    ParameterStore ps;
    ps.add("enc.w", Tensor::scalar(1.0));
    ps.add("dec.w", Tensor::scalar(1.0));
    Adam opt(ps, {});
    try {
      opt.step(ps, {Tensor::scalar(1.0), Tensor::scalar(std::nan(""))});
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("dec.w") != std::string::npos);
    }
    CHECK(ps.at(0)[0] == 1.0);
  }

  TEST_CASE("gradient shape mismatch") {
    ParameterStore ps;
    ps.add("w", Tensor(2, 2));
    Adam opt(ps, {});
    CHECK_THROWS_AS(opt.step(ps, {Tensor(2, 3)}), DimensionError);
  }
}

TEST_SUITE("plateau") {
  TEST_CASE("increasing history keeps the rate") {
    std::vector<double> h;
    for (int i = 0; i < 30; ++i) h.push_back(0.1 * i);
    CHECK(reduce_lr_on_plateau(h, 0.001, 0.5, 10) == 0.001);
  }

  TEST_CASE("ten flat epochs after the max halve once") {
    std::vector<double> h{0.1, 0.2, 0.5};
    for (int i = 0; i < 10; ++i) h.push_back(0.5);
    CHECK(reduce_lr_on_plateau(h, 0.001, 0.5, 10) == 0.0005);
  }

  TEST_CASE("twenty flat epochs halve twice") {
    std::vector<double> h(21, 0.4);
    CHECK(reduce_lr_on_plateau(h, 0.001, 0.5, 10) == 0.00025);
  }

  TEST_CASE("invalid arguments") {
    CHECK_THROWS_AS(reduce_lr_on_plateau({}, 0.001, 0.5, 10), ConfigError);
    const std::vector<double> h{0.1};
    CHECK_THROWS_AS(reduce_lr_on_plateau(h, 0.001, 1.5, 10), ConfigError);
    CHECK_THROWS_AS(reduce_lr_on_plateau(h, 0.001, 0.5, 0), ConfigError);
  }
}

TEST_SUITE("params") {
  TEST_CASE("uniform init stays within the fan-in bound") {
    Rng rng(2);
    const Tensor t = uniform_init(10, 10, 16, rng);
    for (double v : t.values()) CHECK(std::abs(v) <= 0.25);
  }

  TEST_CASE("names are unique") {
    ParameterStore ps;
    ps.add("a", Tensor(1, 1));
    CHECK_THROWS(ps.add("a", Tensor(1, 1)));
    CHECK(ps.index_of("a") == 0);
  }
}
