#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace faag {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over one flat parameter block.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamParams p)
      : params_(p),
        m_(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(size))),
        v_(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(size))) {}

  // `step` is the 1-based update count shared by blocks updated together.
  void update(std::span<double> value, std::span<const double> grad, std::int64_t step) {
    const auto n = static_cast<Eigen::Index>(value.size());
    Eigen::Map<Eigen::ArrayXd> x(value.data(), n);
    const Eigen::Map<const Eigen::ArrayXd> g(grad.data(), n);
    m_ = params_.beta1 * m_ + (1.0 - params_.beta1) * g;
    v_ = params_.beta2 * v_ + (1.0 - params_.beta2) * g.square();
    const double c1 = 1.0 - std::pow(params_.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(params_.beta2, static_cast<double>(step));
    x -= params_.learning_rate * (m_ / c1) / ((v_ / c2).sqrt() + params_.eps);
  }

  template <typename Derived, typename GradDerived>
  void update(Eigen::PlainObjectBase<Derived>& value, const Eigen::PlainObjectBase<GradDerived>& grad,
              std::int64_t step) {
    update(std::span<double>(value.data(), static_cast<std::size_t>(value.size())),
           std::span<const double>(grad.data(), static_cast<std::size_t>(grad.size())), step);
  }

 private:
  AdamParams params_;
  Eigen::ArrayXd m_;
  Eigen::ArrayXd v_;
};

}  // namespace faag
