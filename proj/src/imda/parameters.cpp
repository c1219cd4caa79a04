#include "imda/parameters.hpp"

#include <algorithm>

#include "imda/error.hpp"

namespace imda {

std::size_t Layout::add(std::string name, std::size_t rows, std::size_t cols) {
  entries_.push_back({std::move(name), rows, cols, total_});
  total_ += rows * cols;
  return entries_.size() - 1;
}

ParameterVector::ParameterVector(Layout layout)
    : layout_(std::move(layout)), values_(layout_.total_size(), 0.0) {}

ParameterVector::ParameterVector(Layout layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_.total_size())
    throw ShapeError("parameter vector: " + std::to_string(values_.size()) +
                     " values for a layout of " + std::to_string(layout_.total_size()));
}

ParameterVector ParameterVector::flatten(const Layout& layout,
                                         const std::vector<Matrix>& matrices) {
  if (matrices.size() != layout.num_entries())
    throw ShapeError("flatten: matrix count does not match layout");
  ParameterVector out(layout);
  for (std::size_t i = 0; i < matrices.size(); ++i) out.set_matrix(i, matrices[i]);
  return out;
}

std::vector<Matrix> ParameterVector::unflatten() const {
  std::vector<Matrix> out;
  out.reserve(layout_.num_entries());
  for (std::size_t i = 0; i < layout_.num_entries(); ++i) out.push_back(matrix(i));
  return out;
}

Matrix ParameterVector::matrix(std::size_t entry) const {
  const auto& e = layout_.entry(entry);
  const auto src = entry_values(entry);
  return Matrix(e.rows, e.cols, std::vector<double>(src.begin(), src.end()));
}

void ParameterVector::set_matrix(std::size_t entry, const Matrix& m) {
  const auto& e = layout_.entry(entry);
  if (m.rows() != e.rows || m.cols() != e.cols)
    throw ShapeError("parameter '" + e.name + "': expected " + std::to_string(e.rows) +
                     "x" + std::to_string(e.cols) + ", got " + m.shape_string());
  std::copy(m.values().begin(), m.values().end(), values_.begin() + e.offset);
}

std::span<double> ParameterVector::entry_values(std::size_t entry) {
  const auto& e = layout_.entry(entry);
  return {values_.data() + e.offset, e.size()};
}

std::span<const double> ParameterVector::entry_values(std::size_t entry) const {
  const auto& e = layout_.entry(entry);
  return {values_.data() + e.offset, e.size()};
}

double ParameterVector::squared_norm() const { return imda::squared_norm(values_); }

void ParameterVector::axpy(double scale, const ParameterVector& other) {
  require_same_layout(*this, other, "axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

void require_same_layout(const ParameterVector& a, const ParameterVector& b,
                         const char* context) {
  if (!(a.layout() == b.layout()))
    throw ShapeError(std::string(context) + ": parameter layouts differ (" +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                     " values)");
}

}  // namespace imda
