#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace simknot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error categories map onto the CLI exit codes (2 usage, 3 numeric, 4 io).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
};

// splitmix64; used to derive independent child seeds from a master seed.
uint64_t mix_seed(uint64_t a, uint64_t b);

// Deterministic RNG with hand-rolled distributions so outputs do not depend
// on the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0);

  uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // Box-Muller, cached spare
  int uniform_int(int n);                  // [0, n)
  Rng child(uint64_t stream);              // independent derived stream

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<int> shuffled_indices(int n, Rng& rng);

// FNV-1a over the raw bytes, for buffer/network immutability checks.
uint64_t checksum_bytes(const void* data, size_t n, uint64_t h = 1469598103934665603ULL);
uint64_t checksum(const Mat& m, uint64_t h = 1469598103934665603ULL);
uint64_t checksum(const Vec& v, uint64_t h = 1469598103934665603ULL);

double clamp(double v, double lo, double hi);

// Runs jobs on up to `jobs` worker threads; each job must be independent.
void run_parallel(const std::vector<std::function<void()>>& tasks, int jobs);

// Shortest text form that parses back to the exact same double.
std::string format_double(double v);

bool ends_with(const std::string& s, const std::string& suffix);

}  // namespace simknot
