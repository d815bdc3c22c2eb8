#pragma once

#include <random>

#include "boba/error.hpp"
#include "boba/linalg.hpp"
#include "doctest.h"

// Asserts that expr throws boba::Error carrying the given code.
#define CHECK_ERROR_CODE(expr, expected_code)                    \
  do {                                                           \
    bool thrown_ = false;                                        \
    try {                                                        \
      (void)(expr);                                              \
    } catch (const boba::Error& e_) {                            \
      thrown_ = true;                                            \
      CHECK_MESSAGE(e_.code() == (expected_code), e_.what());    \
    }                                                            \
    CHECK_MESSAGE(thrown_, "expected boba::Error from " #expr);  \
  } while (false)

namespace testing {

inline boba::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                  double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  boba::Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

inline boba::Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

}  // namespace testing
