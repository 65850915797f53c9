#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "symcert/model.hpp"

namespace symcert::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(SYMCERT_FIXTURE_DIR) / name;
}

inline Matrix gaussian(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Vector gaussian(std::mt19937_64& rng, int size, double scale = 1.0) {
  return gaussian(rng, size, 1, scale).col(0);
}

inline Matrix random_symmetric(std::mt19937_64& rng, int n) {
  const Matrix a = gaussian(rng, n, n);
  return 0.5 * (a + a.transpose());
}

/// in -> hidden (ReLU) -> out, weights scaled by 1/sqrt(fan-in).
inline Network random_two_layer(std::mt19937_64& rng, int in, int hidden, int out,
                                Activation act = Activation::relu()) {
  return Network(in, {AffineBlock{gaussian(rng, hidden, in, 1.0 / std::sqrt(in)), gaussian(rng, hidden, 0.1)},
                      ActivationBlock{act, hidden},
                      AffineBlock{gaussian(rng, out, hidden, 1.0 / std::sqrt(hidden)), Vector::Zero(out)}});
}

/// Equilibrium layer with ||W||_2 = rho, followed by a scalar readout.
inline Network random_deq(std::mt19937_64& rng, int in, int width, double rho = 0.5) {
  EquilibriumBlock eq;
  eq.feedback = gaussian(rng, width, width);
  eq.feedback *= rho / spectral_norm(eq.feedback, 1000, 1e-14);
  eq.input = gaussian(rng, width, in, 1.0 / std::sqrt(in));
  eq.bias = gaussian(rng, width, 0.1);
  eq.activation = Activation::relu();
  return Network(in, {eq, AffineBlock{gaussian(rng, 1, width, 1.0 / std::sqrt(width)), Vector::Zero(1)}});
}

}  // namespace symcert::testing
