#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace isgd::ad {

enum class BlockKind { weight, bias };

/// A contiguous, row-major block of the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t layer = 0;
  BlockKind kind = BlockKind::weight;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  [[nodiscard]] std::size_t size() const { return rows * cols; }
  friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

class ParamLayout {
 public:
  ParamLayout() = default;

  /// Appends a block after the current end and returns its offset.
  std::size_t add(std::string name, std::size_t layer, BlockKind kind, std::size_t rows,
                  std::size_t cols);

  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] const std::vector<ParamBlock>& blocks() const { return blocks_; }
  [[nodiscard]] const ParamBlock& block(std::size_t layer, BlockKind kind) const;

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t size_ = 0;
};

/// Layout for an unstructured vector of n parameters (one block).
std::shared_ptr<const ParamLayout> flat_layout(std::size_t n);

class LayoutMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat parameter vector tagged with its layout. Element-wise arithmetic
/// between vectors requires equal layouts.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::shared_ptr<const ParamLayout> layout);
  ParamVector(std::shared_ptr<const ParamLayout> layout, std::vector<double> data);

  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] const std::shared_ptr<const ParamLayout>& layout() const { return layout_; }
  [[nodiscard]] std::span<double> values() { return data_; }
  [[nodiscard]] std::span<const double> values() const { return data_; }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::span<double> block(const ParamBlock& b) {
    return std::span<double>(data_).subspan(b.offset, b.size());
  }
  [[nodiscard]] std::span<const double> block(const ParamBlock& b) const {
    return std::span<const double>(data_).subspan(b.offset, b.size());
  }

  [[nodiscard]] bool same_layout(const ParamVector& other) const;
  void require_same_layout(const ParamVector& other) const;

  /// Zero vector with this vector's layout.
  [[nodiscard]] ParamVector zeros_like() const;

  ParamVector& operator+=(const ParamVector& o);
  ParamVector& operator-=(const ParamVector& o);
  ParamVector& operator*=(double s);
  /// this += alpha * x
  ParamVector& axpy(double alpha, const ParamVector& x);

  [[nodiscard]] double dot(const ParamVector& o) const;
  [[nodiscard]] double norm() const;
  [[nodiscard]] bool all_finite() const;

  friend ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
  friend ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
  friend ParamVector operator*(double s, ParamVector a) { return a *= s; }

 private:
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> data_;
};

}  // namespace isgd::ad
