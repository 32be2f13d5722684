#pragma once

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace netcausal {

// Row-major so serialized buffers match in-memory layout.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct training_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct infeasible_error : std::runtime_error {
  double residual;
  infeasible_error(const std::string& msg, double r)
      : std::runtime_error(msg), residual(r) {}
};

// NETCAUSAL_LOG: 0 = warnings only (default), 1 = info, 2 = debug.
inline int log_level() {
  static const int level = [] {
    const char* v = std::getenv("NETCAUSAL_LOG");
    if (!v) return 0;
    try {
      return std::stoi(v);
    } catch (...) {
      return 0;
    }
  }();
  return level;
}

inline void log_warn(const std::string& msg) {
  std::cerr << "[warn] " << msg << "\n";
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[info] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[debug] " << msg << "\n";
}

// All RNG streams derive from one root seed; splitmix64 decorrelates streams.
inline std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::uint64_t stream = 0) {
  return std::mt19937_64(mix_seed(root, stream));
}

inline void check_finite(const Mat& m, const char* where) {
  if (!m.allFinite())
    throw numeric_error(std::string("non-finite values in ") + where);
}

inline std::string fnv1a64_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace netcausal
