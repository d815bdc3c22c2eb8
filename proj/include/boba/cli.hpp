#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "boba/linalg.hpp"

namespace boba {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// Entry point of boba_sim; argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Synthetic benchmark input: n columns of which round(0.13 n) are IPM
/// Byzantines around a random c-vertex simplex, plus exact server vertices.
struct BenchInstance {
  Matrix gradients;
  Matrix server;
  int f = 0;
  int c = 0;
};

BenchInstance make_bench_instance(int n, Eigen::Index d, int c, std::uint64_t seed);

struct BenchRow {
  std::string agr;
  int n = 0;
  Eigen::Index d = 0;
  double seconds = 0.0;  // median over repeats
  int k = 0;             // TrSVD calls (BOBA rules)
};

std::vector<BenchRow> run_bench(const std::vector<int>& n_list, const std::vector<Eigen::Index>& d_list,
                                const std::vector<std::string>& agrs, int c, int repeats, std::uint64_t seed);

}  // namespace boba
