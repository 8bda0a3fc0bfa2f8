#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lvorder/error.hpp"

namespace lvorder {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// p variables x n samples. Rows are mean-centered on construction, so every
// regression downstream is intercept-free.
class DataMatrix {
 public:
  DataMatrix() = default;

  DataMatrix(RowMatrix values, std::vector<std::string> ids)
      : values_(std::move(values)), ids_(std::move(ids)) {
    if (static_cast<std::size_t>(values_.rows()) != ids_.size())
      throw InvalidArgument("DataMatrix: " + std::to_string(ids_.size()) + " ids for " +
                            std::to_string(values_.rows()) + " rows");
    std::set<std::string> seen(ids_.begin(), ids_.end());
    if (seen.size() != ids_.size()) throw InvalidArgument("DataMatrix: variable ids must be unique");
    means_ = values_.rowwise().mean();
    if (values_.cols() > 0) values_.colwise() -= means_;
  }

  // Default ids x1..xp.
  explicit DataMatrix(RowMatrix values) : DataMatrix(values, default_ids(values.rows())) {}

  static std::vector<std::string> default_ids(Eigen::Index p) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) ids.push_back("x" + std::to_string(i + 1));
    return ids;
  }

  std::size_t variables() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t samples() const { return static_cast<std::size_t>(values_.cols()); }

  const RowMatrix& values() const { return values_; }
  const Vector& means() const { return means_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t row) const { return ids_.at(row); }

  auto row(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)); }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ids_.begin());
  }

  std::size_t index_of(const std::string& id) const {
    if (auto i = find(id)) return *i;
    throw InvalidArgument("unknown variable id '" + id + "'");
  }

  // Sub-matrix of the given rows, in the given order.
  DataMatrix select(std::span<const std::size_t> rows) const {
    RowMatrix out(static_cast<Eigen::Index>(rows.size()), values_.cols());
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out.row(static_cast<Eigen::Index>(k)) = values_.row(static_cast<Eigen::Index>(rows[k]));
      ids.push_back(ids_.at(rows[k]));
    }
    return DataMatrix(std::move(out), std::move(ids));
  }

  // Sub-matrix of the given sample columns, in the given order.
  DataMatrix select_samples(std::span<const std::size_t> cols) const {
    RowMatrix out(values_.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
      out.col(static_cast<Eigen::Index>(k)) = values_.col(static_cast<Eigen::Index>(cols[k]));
    return DataMatrix(std::move(out), ids_);
  }

 private:
  RowMatrix values_;
  Vector means_;
  std::vector<std::string> ids_;
};

}  // namespace lvorder
