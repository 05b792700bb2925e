#include "isgd/autodiff/param_vector.hpp"

#include <cmath>
#include <utility>

#include "isgd/simd/kernels.hpp"

namespace isgd::ad {

std::size_t ParamLayout::add(std::string name, std::size_t layer, BlockKind kind,
                             std::size_t rows, std::size_t cols) {
  const std::size_t offset = size_;
  blocks_.push_back(ParamBlock{std::move(name), layer, kind, offset, rows, cols});
  size_ += rows * cols;
  return offset;
}

const ParamBlock& ParamLayout::block(std::size_t layer, BlockKind kind) const {
  for (const auto& b : blocks_) {
    if (b.layer == layer && b.kind == kind) return b;
  }
  throw std::out_of_range("no parameter block for layer " + std::to_string(layer));
}

std::shared_ptr<const ParamLayout> flat_layout(std::size_t n) {
  auto layout = std::make_shared<ParamLayout>();
  layout->add("theta", 0, BlockKind::weight, n, 1);
  return layout;
}

ParamVector::ParamVector(std::shared_ptr<const ParamLayout> layout)
    : layout_(std::move(layout)), data_(layout_ ? layout_->size() : 0, 0.0) {}

ParamVector::ParamVector(std::shared_ptr<const ParamLayout> layout, std::vector<double> data)
    : layout_(std::move(layout)), data_(std::move(data)) {
  if (!layout_ || layout_->size() != data_.size()) {
    throw LayoutMismatch("parameter data size does not match its layout");
  }
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (layout_ == other.layout_) return true;
  if (!layout_ || !other.layout_) return false;
  return *layout_ == *other.layout_;
}

void ParamVector::require_same_layout(const ParamVector& other) const {
  if (!same_layout(other)) {
    throw LayoutMismatch("parameter vectors have different layouts (" +
                         std::to_string(size()) + " vs " + std::to_string(other.size()) +
                         " entries)");
  }
}

ParamVector ParamVector::zeros_like() const { return ParamVector(layout_); }

ParamVector& ParamVector::operator+=(const ParamVector& o) { return axpy(1.0, o); }

ParamVector& ParamVector::operator-=(const ParamVector& o) { return axpy(-1.0, o); }

ParamVector& ParamVector::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

ParamVector& ParamVector::axpy(double alpha, const ParamVector& x) {
  require_same_layout(x);
  simd::kernels().axpy(alpha, x.data_.data(), data_.data(), data_.size());
  return *this;
}

double ParamVector::dot(const ParamVector& o) const {
  require_same_layout(o);
  return simd::kernels().dot(data_.data(), o.data_.data(), data_.size());
}

double ParamVector::norm() const {
  return std::sqrt(simd::kernels().dot(data_.data(), data_.data(), data_.size()));
}

bool ParamVector::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace isgd::ad
