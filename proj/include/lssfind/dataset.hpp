#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "signed_set.hpp"

namespace lss {

// n x p feature matrix (column-major) plus response vector.
class Dataset {
 public:
  Dataset() = default;

  // `columns[k]` holds feature k+1 for all samples.
  Dataset(std::vector<std::vector<double>> columns, std::vector<double> y) : y_(std::move(y)) {
    if (columns.empty()) throw ValidationError("dataset needs at least one feature");
    n_ = y_.size();
    p_ = columns.size();
    x_.reserve(n_ * p_);
    for (auto& col : columns) {
      if (col.size() != n_) throw ValidationError("feature column length does not match response length");
      x_.insert(x_.end(), col.begin(), col.end());
    }
  }

  // Empty dataset with p features.
  static Dataset empty(std::size_t p) {
    return Dataset(std::vector<std::vector<double>>(p), {});
  }

  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t p() const noexcept { return p_; }

  // 0-based feature column.
  [[nodiscard]] std::span<const double> column(std::size_t k) const { return {x_.data() + k * n_, n_}; }
  [[nodiscard]] double x(std::size_t i, std::size_t k) const { return x_[k * n_ + i]; }
  [[nodiscard]] std::span<const double> y() const noexcept { return y_; }

  [[nodiscard]] std::vector<double> row(std::size_t i) const {
    std::vector<double> r(p_);
    for (std::size_t k = 0; k < p_; ++k) r[k] = x(i, k);
    return r;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t n_{0};
  std::size_t p_{0};
  std::vector<double> x_;
  std::vector<double> y_;
};

}  // namespace lss
