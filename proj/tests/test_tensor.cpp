#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "gensync/gradcheck.hpp"
#include "gensync/mlp.hpp"
#include "gensync/optim.hpp"
#include "gensync/rng.hpp"
#include "gensync/tensor.hpp"

using namespace gensync;

TEST_CASE("matmul identity and hand cases") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor out = matmul(eye, a);
  for (int i = 0; i < 4; ++i) CHECK(out.at(i) == doctest::Approx(a.at(i)));

  Tensor row = Tensor::from_data({1, 2}, {1, 2});
  Tensor col = Tensor::from_data({2, 1}, {3, 4});
  CHECK(matmul(row, col).value() == doctest::Approx(11.0));
}

TEST_CASE("matmul shape errors name both shapes") {
  Tensor a = Tensor::zeros({4, 3});
  Tensor b = Tensor::zeros({5, 2});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[4x3]") != std::string::npos);
    CHECK(msg.find("[5x2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  RandomStream rng(42);
  Tensor a = Tensor::randn({4, 3}, rng, 1.0, true);
  Tensor b = Tensor::randn({3, 5}, rng, 1.0, true);
  auto f = [&] { return sum(matmul(a, b)); };
  auto report = grad_check(f, {{"a", a}, {"b", b}}, 1e-6);
  CHECK(report.max_rel_err < 1e-7);
}

TEST_CASE("matmul is associative on well-conditioned inputs") {
  RandomStream rng(7);
  Tensor a = Tensor::randn({3, 4}, rng, 1.0);
  Tensor b = Tensor::randn({4, 5}, rng, 1.0);
  Tensor c = Tensor::randn({5, 2}, rng, 1.0);
  Tensor lhs = matmul(a, matmul(b, c));
  Tensor rhs = matmul(matmul(a, b), c);
  for (int64_t i = 0; i < lhs.size(); ++i) {
    const double denom = std::max(1.0, std::abs(lhs.at(i)));
    CHECK(std::abs(lhs.at(i) - rhs.at(i)) / denom < 1e-9);
  }
}

TEST_CASE("hadamard basics") {
  Tensor x = Tensor::from_data({3}, {1, 2, 3});
  Tensor z = Tensor::from_data({3}, {0, 0, 0});
  Tensor ones = Tensor::from_data({3}, {1, 1, 1});
  Tensor h = hadamard(x, z);
  for (int i = 0; i < 3; ++i) CHECK(h.at(i) == 0.0);
  h = hadamard(x, ones);
  for (int i = 0; i < 3; ++i) CHECK(h.at(i) == x.at(i));
  Tensor p = hadamard(Tensor::from_data({2}, {2, 3}), Tensor::from_data({2}, {5, 7}));
  CHECK(p.at(0) == 10.0);
  CHECK(p.at(1) == 21.0);
  CHECK_THROWS_AS(hadamard(x, Tensor::zeros({2})), DimensionError);
}

TEST_CASE("softmax rows") {
  Tensor a = softmax_rows(Tensor::from_data({1, 2}, {0, 0}));
  CHECK(a.at(0) == doctest::Approx(0.5));
  CHECK(a.at(1) == doctest::Approx(0.5));

  Tensor big = softmax_rows(Tensor::from_data({1, 3}, {1000, 1000, 1000}));
  for (int i = 0; i < 3; ++i) CHECK(big.at(i) == doctest::Approx(1.0 / 3.0));
  CHECK(big.all_finite());

  Tensor c = softmax_rows(Tensor::from_data({1, 2}, {0.0, std::log(3.0)}));
  CHECK(c.at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(c.at(1) == doctest::Approx(0.75).epsilon(1e-12));

  RandomStream rng(3);
  Tensor r = softmax_rows(Tensor::randn({6, 5}, rng, 4.0));
  for (int i = 0; i < 6; ++i) {
    double s = 0;
    for (int j = 0; j < 5; ++j) {
      const double v = r.at(i, j);
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("mlp zero final layer and identity layer") {
  RandomStream rng(11);
  MLPParams net = make_mlp({3, 4, 2}, rng, /*zero_final=*/true);
  Tensor y = mlp_apply(net, Tensor::from_data({3}, {0.3, -1.0, 2.0}));
  CHECK(y.at(0) == 0.0);
  CHECK(y.at(1) == 0.0);

  MLPParams id_net;
  id_net.layers.push_back({Tensor::from_data({2, 2}, {1, 0, 0, 1}), Tensor::zeros({2})});
  Tensor out = mlp_apply(id_net, Tensor::from_data({2}, {1, 2}));
  CHECK(out.at(0) == 1.0);
  CHECK(out.at(1) == 2.0);

  CHECK_THROWS_AS(mlp_apply(net, Tensor::zeros({5})), DimensionError);
}

TEST_CASE("mlp gradient matches finite differences") {
  RandomStream rng(5);
  MLPParams net = make_mlp({4, 6, 3}, rng);
  Tensor x = Tensor::randn({4}, rng, 1.0, true);
  auto f = [&] { return sum(mlp_apply(net, x)); };
  std::vector<std::pair<std::string, Tensor>> params{{"x", x}};
  int idx = 0;
  for (const auto& t : net.parameters()) params.emplace_back("p" + std::to_string(idx++), t);
  auto report = grad_check(f, params, 1e-5);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("backward basics and accumulation") {
  Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = sum(x);
    tape.backward(loss);
  }
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);

  x.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = sum(hadamard(x, x));
    tape.backward(loss);
  }
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));

  // a node used on two paths receives the sum of both adjoints
  x.zero_grad();
  Tensor c = Tensor::from_data({3}, {10, 20, 30});
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = add(sum(x), sum(hadamard(x, c)));
    tape.backward(loss);
  }
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(1.0 + c.at(i)));
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = add(x, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("tape entries are topologically ordered") {
  RandomStream rng(9);
  Tensor a = Tensor::randn({3, 3}, rng, 1.0, true);
  Tensor b = Tensor::randn({3, 3}, rng, 1.0, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor u = matmul(a, b);
    Tensor v = add(u, b);
    sum(hadamard(v, u));
  }
  for (const auto& rec : tape.records()) {
    for (uint64_t in : rec.input_ids) CHECK(in < rec.output_id);
  }
}

TEST_CASE("grad_check handles quadratic, constant and non-deterministic maps") {
  Tensor x = Tensor::scalar(3.0, true);
  auto f = [&] { return hadamard(x, x); };
  auto report = grad_check(f, {{"x", x}}, 1e-5);
  CHECK(report.max_rel_err < 1e-9);

  Tensor y = Tensor::scalar(2.0, true);
  auto fc = [&] { return Tensor::scalar(7.0); };
  // constant map: analytic 0, numeric 0, rel err 0
  auto rc = grad_check(fc, {{"y", y}}, 1e-5);
  CHECK(rc.max_rel_err == 0.0);

  int calls = 0;
  auto fnd = [&] { return Tensor::scalar(static_cast<double>(++calls)); };
  CHECK_THROWS_AS(grad_check(fnd, {{"y", y}}, 1e-5), ContractError);
}

TEST_CASE("adam update magnitudes") {
  Tensor p = Tensor::scalar(1.0, true);
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.1;

  // zero gradient leaves the parameter where it is
  adam_step(p, {0.0}, st, cfg);
  CHECK(p.value() == 1.0);
  CHECK(st.step == 1);

  // first non-trivial step moves by ~lr
  Tensor q = Tensor::scalar(1.0, true);
  AdamState st2;
  adam_step(q, {1.0}, st2, cfg);
  CHECK(q.value() == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("adam converges on a 1-d quadratic") {
  Tensor p = Tensor::scalar(0.0, true);
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.1;
  for (int i = 0; i < 100; ++i) {
    const double g = 2.0 * (p.value() - 2.0);
    adam_step(p, {g}, st, cfg);
  }
  CHECK(std::abs(p.value() - 2.0) < 0.05);
}

TEST_CASE("forward ops keep finite inputs finite") {
  RandomStream rng(17);
  Tensor big = Tensor::randn({4, 4}, rng, 500.0);
  CHECK(softmax_rows(big).all_finite());
  CHECK(sigmoid(big).all_finite());
  CHECK(tanh_op(big).all_finite());
  CHECK(matmul(big, big).all_finite());
}

TEST_CASE("normalize_rows unit cases") {
  Tensor q = Tensor::from_data({3, 4}, {2, 0, 0, 0, 0.5, 0.5, 0.5, 0.5, 1, 1, 1, 1});
  Tensor u = normalize_rows(q);
  CHECK(u.at(0, 0) == doctest::Approx(1.0));
  CHECK(u.at(0, 1) == 0.0);
  // an already-unit row stays put
  for (int j = 0; j < 4; ++j) CHECK(u.at(1, j) == doctest::Approx(0.5).epsilon(1e-15));
  for (int j = 0; j < 4; ++j) CHECK(u.at(2, j) == doctest::Approx(0.5));

  Tensor zero = Tensor::from_data({1, 4}, {0, 0, 0, 0});
  CHECK_THROWS_AS(normalize_rows(zero), DegenerateRotationError);
}

TEST_CASE("structural ops gradcheck") {
  RandomStream rng(23);
  Tensor a = Tensor::randn({3, 7}, rng, 1.0, true);
  Tensor b = Tensor::randn({7}, rng, 1.0, true);
  Tensor v0 = Tensor::randn({5}, rng, 1.0, true);
  Tensor v1 = Tensor::randn({5}, rng, 1.0, true);
  Tensor quats = Tensor::randn({4, 4}, rng, 1.0, true);
  auto f = [&] {
    Tensor s = slice_cols(add_row_bias(a, b), 1, 6);
    Tensor t = stack_rows({v0, v1});
    Tensor u = matmul(s, transpose(softmax_rows(t)));
    Tensor n = normalize_rows(quats);
    return add(sum(clamp_sym(u, 10.0)), sum(n));
  };
  auto report = grad_check(
      f, {{"a", a}, {"b", b}, {"v0", v0}, {"v1", v1}, {"q", quats}}, 1e-6);
  CHECK(report.max_rel_err < 1e-7);
}
