#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rarts/tape.hpp"

using rarts::grad_check;
using rarts::Matrix;
using rarts::Tape;

TEST_CASE("constant forward") {
  Tape t;
  int c = t.constant(3.0);
  CHECK(t.forward({}, c) == 3.0);
}

TEST_CASE("square of -2") {
  Tape t;
  int x = t.leaf("x", 1, 1);
  int f = t.mul(x, x);
  CHECK(t.forward({{"x", Matrix::scalar(-2.0)}}, f) == 4.0);
}

// L_train(w, a) = w^2 - 2*a*w + a^2
static int build_l_train(Tape& t) {
  int w = t.leaf("w", 1, 1);
  int a = t.leaf("a", 1, 1);
  int ww = t.mul(w, w);
  int aw = t.scale(t.mul(a, w), -2.0);
  int aa = t.mul(a, a);
  return t.add(t.add(ww, aw), aa);
}

TEST_CASE("quadratic training loss at (-2, 2)") {
  Tape t;
  int f = build_l_train(t);
  std::map<std::string, Matrix> at{{"w", Matrix::scalar(-2.0)},
                                   {"a", Matrix::scalar(2.0)}};
  CHECK(t.forward(at, f) == doctest::Approx(16.0).epsilon(1e-15));

  auto g = t.backward(f);
  CHECK(g["w"].as_scalar() == doctest::Approx(-8.0).epsilon(1e-15));
  CHECK(g["a"].as_scalar() == doctest::Approx(8.0).epsilon(1e-15));
}

TEST_CASE("constant root has zero leaf gradients") {
  Tape t;
  int x = t.leaf("x", 3, 1);
  int c = t.constant(1.5);
  (void)t.sum(x);  // x participates in the tape but not in the root
  t.forward({{"x", Matrix::column({1, 2, 3})}}, c);
  auto g = t.backward(c);
  for (double v : g["x"].data) CHECK(v == 0.0);
}

TEST_CASE("softmax gradient at the uniform point") {
  Tape t;
  int x = t.leaf("x", 3, 1);
  int s = t.softmax(x);
  int e0 = t.constant(Matrix::column({1, 0, 0}));
  int f = t.dot(s, e0);
  t.forward({{"x", Matrix::column({0, 0, 0})}}, f);
  auto g = t.backward(f);
  CHECK(g["x"].data[0] == doctest::Approx(2.0 / 9).epsilon(1e-12));
  CHECK(g["x"].data[1] == doctest::Approx(-1.0 / 9).epsilon(1e-12));
  CHECK(g["x"].data[2] == doctest::Approx(-1.0 / 9).epsilon(1e-12));
}

TEST_CASE("backward before forward is an error") {
  Tape t;
  int x = t.leaf("x", 1, 1);
  int f = t.mul(x, x);
  CHECK_THROWS_AS(t.backward(f), rarts::TapeError);
}

TEST_CASE("non-scalar root rejected") {
  Tape t;
  int x = t.leaf("x", 2, 1);
  CHECK_THROWS_AS(t.forward({{"x", Matrix::column({1, 2})}}, x), rarts::TapeError);
}

TEST_CASE("shape mismatch names the node") {
  Tape t;
  int a = t.constant(Matrix(2, 2));
  int b = t.constant(Matrix(3, 3));
  CHECK_THROWS_WITH_AS(t.matmul(a, b),
                       doctest::Contains("matmul: inner dimensions disagree"),
                       rarts::TapeError);
}

TEST_CASE("non-finite intermediate reported with node index") {
  Tape t;
  int x = t.leaf("x", 1, 1);
  int f = t.mul(x, x);
  CHECK_THROWS_WITH_AS(t.forward({{"x", Matrix::scalar(1e200)}}, f),
                       doctest::Contains("non-finite"), rarts::TapeError);
}

TEST_CASE("grad_check: linear function is exact") {
  auto build = [](Tape& t) {
    int x = t.leaf("x", 4, 1);
    int c = t.constant(Matrix::column({1.0, -2.0, 0.5, 3.0}));
    return t.dot(c, x);
  };
  double err = grad_check(build, {{"x", Matrix::column({0.3, -1.1, 2.0, 0.0})}}, 1e-5);
  CHECK(err < 1e-9);
}

TEST_CASE("grad_check: quadratic training loss") {
  auto build = [](Tape& t) { return build_l_train(t); };
  double err = grad_check(
      build, {{"w", Matrix::scalar(-2.0)}, {"a", Matrix::scalar(2.0)}}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check: eps must be positive") {
  auto build = [](Tape& t) { return t.leaf("x", 1, 1); };
  CHECK_THROWS_AS(grad_check(build, {{"x", Matrix::scalar(1.0)}}, 0.0),
                  std::invalid_argument);
}

// every primitive against central differences on randomized inputs
TEST_CASE("primitive adjoints match finite differences") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  auto rand_mat = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.data) v = u(rng);
    return m;
  };

  std::vector<std::pair<const char*, std::function<int(Tape&)>>> cases = {
      {"add", [](Tape& t) {
         return t.sum(t.add(t.leaf("p", 3, 2), t.leaf("q", 3, 2)));
       }},
      {"sub", [](Tape& t) {
         return t.sum(t.sub(t.leaf("p", 3, 2), t.leaf("q", 3, 2)));
       }},
      {"mul", [](Tape& t) {
         return t.sum(t.mul(t.leaf("p", 3, 2), t.leaf("q", 3, 2)));
       }},
      {"matmul", [](Tape& t) {
         return t.squared_norm(t.matmul(t.leaf("m", 2, 3), t.leaf("v", 3, 2)));
       }},
      {"scale", [](Tape& t) { return t.sum(t.scale(t.leaf("p", 3, 2), -1.7)); }},
      {"scale_elem", [](Tape& t) {
         return t.sum(t.scale_elem(t.leaf("s", 3, 1), 1, t.leaf("p", 3, 2)));
       }},
      {"neg", [](Tape& t) { return t.sum(t.neg(t.leaf("p", 3, 2))); }},
      {"tanh", [](Tape& t) { return t.sum(t.tanh(t.leaf("p", 3, 2))); }},
      {"relu", [](Tape& t) { return t.sum(t.relu(t.leaf("p", 3, 2))); }},
      {"softmax", [](Tape& t) {
         return t.dot(t.softmax(t.leaf("s", 3, 1)), t.leaf("q3", 3, 1));
       }},
      {"squared_norm", [](Tape& t) { return t.squared_norm(t.leaf("p", 3, 2)); }},
      {"mse", [](Tape& t) {
         return t.mse(t.leaf("p", 3, 2), t.leaf("q", 3, 2));
       }},
  };

  for (auto& [name, build] : cases) {
    CAPTURE(name);
    std::map<std::string, Matrix> point{{"p", rand_mat(3, 2)},
                                        {"q", rand_mat(3, 2)},
                                        {"m", rand_mat(2, 3)},
                                        {"v", rand_mat(3, 2)},
                                        {"s", rand_mat(3, 1)},
                                        {"q3", rand_mat(3, 1)}};
    // keep relu away from its kink
    for (double& v : point["p"].data)
      if (std::abs(v) < 0.05) v = 0.5;
    CHECK(grad_check(build, point, 1e-6) < 1e-6);
  }
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix x(4, 1);
    for (double& v : x.data) v = u(rng);
    auto f1 = [](Tape& t) { return t.squared_norm(t.tanh(t.leaf("x", 4, 1))); };
    auto f2 = [](Tape& t) {
      int xl = t.leaf("x", 4, 1);
      return t.dot(xl, t.softmax(xl));
    };
    auto fsum = [&](Tape& t) { return t.add(f1(t), f2(t)); };

    auto grad_of = [&](const std::function<int(Tape&)>& b) {
      Tape t;
      int root = b(t);
      t.forward({{"x", x}}, root);
      return t.backward(root)["x"];
    };
    Matrix g1 = grad_of(f1), g2 = grad_of(f2), gs = grad_of(fsum);
    for (std::size_t i = 0; i < gs.size(); ++i)
      CHECK(gs.data[i] == doctest::Approx(g1.data[i] + g2.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("forward+backward is bit-identical across reruns") {
  Matrix x = Matrix::column({0.1, -0.7, 1.3});
  auto run_once = [&]() {
    Tape t;
    int xl = t.leaf("x", 3, 1);
    int root = t.squared_norm(t.softmax(t.tanh(xl)));
    double v = t.forward({{"x", x}}, root);
    auto g = t.backward(root);
    return std::make_pair(v, g["x"].data);
  };
  auto [v1, g1] = run_once();
  auto [v2, g2] = run_once();
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}
