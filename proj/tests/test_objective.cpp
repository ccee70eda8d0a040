#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rarts/objective.hpp"
#include "rarts/tape.hpp"

using namespace rarts;

static ParamVector sc(const char* name, double v) { return ParamVector::scalar(name, v); }

TEST_CASE("quadratic objective values") {
  auto obj = quadratic_objective();
  CHECK(obj->eval_train(sc("w", -2), sc("alpha", 2)) == 16.0);
  // at the bilevel minimizer (alpha, w) = (1, 1) the training loss is 0
  CHECK(obj->eval_train(sc("w", 1), sc("alpha", 1)) == 0.0);
  CHECK(obj->eval_val(sc("y", 1), sc("alpha", 1)) == 0.0);
  CHECK(obj->grad_y_val(sc("y", 5), sc("alpha", 0))[0] == 0.0);
}

TEST_CASE("inner argmin of the quadratic training loss is the identity") {
  CHECK(inner_argmin_quadratic(2.0) == 2.0);
  CHECK(inner_argmin_quadratic(0.0) == 0.0);
  CHECK(inner_argmin_quadratic(-3.5) == -3.5);
}

TEST_CASE("quadratic mixed derivative is constant -2") {
  auto obj = quadratic_objective();
  REQUIRE(obj->has_mixed_train_apply());
  ParamVector v = sc("w", 3.0);
  CHECK(obj->mixed_train_apply(sc("w", 7), sc("alpha", -1), v)[0] == -6.0);
}

TEST_CASE("lagrangian hand value") {
  auto obj = quadratic_objective();
  HyperParams hp;
  hp.lambda = 10;
  hp.beta = 10;
  double L = eval_lagrangian(*obj, sc("y", 0), sc("w", -2), sc("alpha", 2), hp);
  CHECK(L == doctest::Approx(177.0).epsilon(1e-15));
}

TEST_CASE("penalty vanishes when y equals w") {
  auto obj = quadratic_objective();
  HyperParams hp;
  hp.lambda = 3.0;
  for (double beta : {0.0, 5.0, 100.0}) {
    hp.beta = beta;
    double L = eval_lagrangian(*obj, sc("w", 1.5), sc("w", 1.5), sc("alpha", -0.5), hp);
    double expect = obj->eval_val(sc("y", 1.5), sc("alpha", -0.5)) +
                    hp.lambda * obj->eval_train(sc("w", 1.5), sc("alpha", -0.5));
    CHECK(L == expect);
  }
}

TEST_CASE("penalty is symmetric under swapping y and w") {
  auto obj = quadratic_objective();
  HyperParams hp;
  hp.beta = 7.0;
  auto pen = [&](double a, double b) {
    // isolate the penalty by subtracting the loss terms
    double L = eval_lagrangian(*obj, sc("y", a), sc("w", b), sc("alpha", 0.3), hp);
    return L - obj->eval_val(sc("y", a), sc("alpha", 0.3)) -
           hp.lambda * obj->eval_train(sc("w", b), sc("alpha", 0.3));
  };
  CHECK(pen(1.2, -0.4) == doctest::Approx(pen(-0.4, 1.2)).epsilon(1e-15));
}

TEST_CASE("lagrangian rejects shape-incompatible y and w") {
  auto obj = quadratic_objective();
  ParamVector w;
  w.append("w", Matrix(2, 1));
  CHECK_THROWS_AS(eval_lagrangian(*obj, sc("y", 0), w, sc("alpha", 0), HyperParams{}),
                  std::invalid_argument);
}

TEST_CASE("hyper parameter validation") {
  HyperParams hp;
  hp.lambda = 0.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = HyperParams{};
  hp.eta_w = -1.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}

// analytic gradients vs the autodiff engine on the same formulas
TEST_CASE("quadratic analytic gradients agree with the tape") {
  auto obj = quadratic_objective();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);

  auto train_graph = [](Tape& t) {
    int w = t.leaf("w", 1, 1), a = t.leaf("a", 1, 1);
    return t.add(t.add(t.mul(w, w), t.scale(t.mul(a, w), -2.0)), t.mul(a, a));
  };
  auto val_graph = [](Tape& t) {
    int y = t.leaf("y", 1, 1), a = t.leaf("a", 1, 1);
    return t.add(t.add(t.mul(a, y), t.scale(a, -2.0)), t.constant(1.0));
  };

  for (int i = 0; i < 20; ++i) {
    const double wv = u(rng), av = u(rng);
    Tape tt;
    int root = train_graph(tt);
    tt.forward({{"w", Matrix::scalar(wv)}, {"a", Matrix::scalar(av)}}, root);
    auto g = tt.backward(root);
    CHECK(obj->grad_w_train(sc("w", wv), sc("alpha", av))[0] ==
          doctest::Approx(g["w"].as_scalar()).epsilon(1e-10));
    CHECK(obj->grad_alpha_train(sc("w", wv), sc("alpha", av))[0] ==
          doctest::Approx(g["a"].as_scalar()).epsilon(1e-10));

    Tape tv;
    int rv = val_graph(tv);
    tv.forward({{"y", Matrix::scalar(wv)}, {"a", Matrix::scalar(av)}}, rv);
    auto gv = tv.backward(rv);
    CHECK(obj->grad_y_val(sc("y", wv), sc("alpha", av))[0] ==
          doctest::Approx(gv["y"].as_scalar()).epsilon(1e-10));
    CHECK(obj->grad_alpha_val(sc("y", wv), sc("alpha", av))[0] ==
          doctest::Approx(gv["a"].as_scalar()).epsilon(1e-10));
  }
}

TEST_CASE("param vector segments tile exactly") {
  ParamVector p;
  p.append("a", Matrix(2, 2));
  p.append("b", Matrix(3, 1));
  CHECK(p.size() == 7);
  CHECK(p.find("b").offset == 4);
  CHECK_THROWS_AS(p.find("c"), std::out_of_range);
  ParamVector q = p.zeros_like();
  CHECK(p.shape_compatible(q));
  ParamVector r;
  r.append("a", Matrix(2, 2));
  CHECK(!p.shape_compatible(r));
}
