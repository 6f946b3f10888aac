#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "snipe/estimators.hpp"
#include "snipe/graph.hpp"
#include "snipe/moments.hpp"
#include "snipe/outcome_model.hpp"

namespace testutil {

// Three-unit fixture used across suites: units 0 and 1 share the
// neighborhood {0, 1}, unit 2 is isolated, all effects first order.
// Every closed-form quantity of this instance is known exactly.
inline snipe::Graph toy_graph() {
  snipe::Graph g;
  g.n = 3;
  g.in_neighbors = {{0, 1}, {0, 1}, {2}};
  return g;
}

inline snipe::InteractionModel toy_model() {
  snipe::InteractionModel m;
  m.beta = 1;
  m.graph = toy_graph();
  m.coef.resize(3);
  m.set_alpha(0, {}, 0.0);
  m.set_alpha(0, {0}, 1.0);
  m.set_alpha(0, {1}, 1.0);
  m.set_alpha(1, {}, -2.0);
  m.set_alpha(1, {0}, 1.0);
  m.set_alpha(1, {1}, 1.0);
  m.set_alpha(2, {}, -0.5);
  m.set_alpha(2, {2}, 1.0);
  return m;
}

inline Eigen::MatrixXd toy_x() {
  Eigen::MatrixXd x(3, 1);
  x << 0.5, 0.0, -0.5;
  return x;
}

inline snipe::Design toy_design() { return snipe::Design::constant(3, 0.5); }

inline snipe::Dataset toy_dataset(std::vector<int> z) {
  const snipe::InteractionModel model = toy_model();
  Eigen::VectorXd y = evaluate_potential(model, z);
  return snipe::Dataset(std::move(z), std::move(y), toy_x(), toy_graph(),
                        toy_design(), 1);
}

// Scratch file in the working directory, removed on scope exit.
struct TempFile {
  std::string path;
  explicit TempFile(std::string name) : path(std::move(name)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace testutil
