#pragma once

// Shared plumbing: error types, a dense row-major matrix, a deterministic
// parallel map, content digests, and canonical number formatting.

#include <charconv>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taste {

// Missing or unreadable input (CLI exit code 2).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration (CLI exit code 3).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degenerate statistics, e.g. zero-variance samples (CLI exit code 4).
struct StatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  std::span<double> row(int r) { return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)}; }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Static-partition parallel map over [0, n). Each index is processed exactly
// once and workers write to disjoint state, so results do not depend on the
// worker count. threads <= 1 runs inline.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& body);

// FNV-1a, used for input digests in run manifests and for RNG substream keys.
uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 14695981039346656037ull);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t v);

// Shortest round-trip decimal form; canonical float encoding for documents.
std::string format_double(double v);
// Fixed 12-significant-digit form for plot-ready CSV tables.
std::string format_double12(double v);

bool parse_double(std::string_view s, double& out);
bool parse_int64(std::string_view s, int64_t& out);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string join(std::span<const std::string> parts, char sep);

// stderr warning sink; kept as a function so tests can stay quiet.
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace taste
