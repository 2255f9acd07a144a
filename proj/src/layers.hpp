#pragma once

#include <cstddef>
#include <random>
#include <span>

#include "hypuc/net.hpp"

namespace hypuc::detail {

struct Shape {
  std::size_t channels = 1;
  std::size_t length = 1;
  std::size_t size() const { return channels * length; }
};

// A differentiable map between flat buffers of fixed shape. Layers hold no
// parameters themselves; they read and write a slice of the model's flat
// parameter vector.
class Layer {
 public:
  explicit Layer(Shape in) : in_(in) {}
  virtual ~Layer() = default;

  Shape input_shape() const { return in_; }
  virtual Shape output_shape() const = 0;
  virtual std::size_t param_count() const { return 0; }
  virtual void init(std::span<double> /*params*/, std::mt19937_64& /*rng*/) const {}

  virtual void forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const = 0;
  // Accumulates into grad_params; overwrites grad_in (skipped when empty).
  virtual void backward(std::span<const double> params, std::span<const double> in, std::span<const double> out,
                        std::span<const double> grad_out, std::span<double> grad_in,
                        std::span<double> grad_params) const = 0;

 protected:
  Shape in_;
};

class Conv1d final : public Layer {
 public:
  Conv1d(Shape in, std::size_t out_channels, std::size_t kernel);
  Shape output_shape() const override { return {out_channels_, in_.length}; }
  std::size_t param_count() const override;
  void init(std::span<double> params, std::mt19937_64& rng) const override;
  void forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const override;
  void backward(std::span<const double> params, std::span<const double> in, std::span<const double> out,
                std::span<const double> grad_out, std::span<double> grad_in,
                std::span<double> grad_params) const override;

 private:
  std::size_t out_channels_;
  std::size_t kernel_;
};

class Dense final : public Layer {
 public:
  // `gain` scales the uniform init bound: 6 for ReLU inputs (He), 3 for linear outputs.
  Dense(Shape in, std::size_t units, double gain);
  Shape output_shape() const override { return {units_, 1}; }
  std::size_t param_count() const override { return units_ * in_.size() + units_; }
  void init(std::span<double> params, std::mt19937_64& rng) const override;
  void forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const override;
  void backward(std::span<const double> params, std::span<const double> in, std::span<const double> out,
                std::span<const double> grad_out, std::span<double> grad_in,
                std::span<double> grad_params) const override;

 private:
  std::size_t units_;
  double gain_;
};

class Activate final : public Layer {
 public:
  Activate(Shape in, Activation kind) : Layer(in), kind_(kind) {}
  Shape output_shape() const override { return in_; }
  void forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const override;
  void backward(std::span<const double> params, std::span<const double> in, std::span<const double> out,
                std::span<const double> grad_out, std::span<double> grad_in,
                std::span<double> grad_params) const override;

 private:
  Activation kind_;
};

class AvgPool2 final : public Layer {
 public:
  explicit AvgPool2(Shape in) : Layer(in) {}
  Shape output_shape() const override { return {in_.channels, in_.length / 2}; }
  void forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const override;
  void backward(std::span<const double> params, std::span<const double> in, std::span<const double> out,
                std::span<const double> grad_out, std::span<double> grad_in,
                std::span<double> grad_params) const override;
};

}  // namespace hypuc::detail
