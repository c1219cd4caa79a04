#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "imda/matrix.hpp"

namespace imda {

struct LayoutEntry {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

// Maps a flat coordinate range back to named layer matrices.
class Layout {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  const std::vector<LayoutEntry>& entries() const { return entries_; }
  const LayoutEntry& entry(std::size_t i) const { return entries_.at(i); }
  std::size_t num_entries() const { return entries_.size(); }
  std::size_t total_size() const { return total_; }

  friend bool operator==(const Layout&, const Layout&) = default;

 private:
  std::vector<LayoutEntry> entries_;
  std::size_t total_ = 0;
};

// Flat parameter (or gradient) storage for one block: u, v or v'.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(Layout layout);
  ParameterVector(Layout layout, std::vector<double> values);

  static ParameterVector flatten(const Layout& layout, const std::vector<Matrix>& matrices);
  std::vector<Matrix> unflatten() const;

  Matrix matrix(std::size_t entry) const;
  void set_matrix(std::size_t entry, const Matrix& m);
  std::span<double> entry_values(std::size_t entry);
  std::span<const double> entry_values(std::size_t entry) const;

  const Layout& layout() const { return layout_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double squared_norm() const;
  // this += scale * other
  void axpy(double scale, const ParameterVector& other);
  ParameterVector zeros_like() const { return ParameterVector(layout_); }

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  Layout layout_;
  std::vector<double> values_;
};

void require_same_layout(const ParameterVector& a, const ParameterVector& b,
                         const char* context);

}  // namespace imda
