#include "layers.hpp"

#include <algorithm>
#include <cmath>

namespace hypuc::detail {

Conv1d::Conv1d(Shape in, std::size_t out_channels, std::size_t kernel)
    : Layer(in), out_channels_(out_channels), kernel_(kernel) {}

std::size_t Conv1d::param_count() const { return out_channels_ * in_.channels * kernel_ + out_channels_; }

void Conv1d::init(std::span<double> params, std::mt19937_64& rng) const {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_.channels * kernel_));
  std::uniform_real_distribution<double> u(-bound, bound);
  const std::size_t nw = out_channels_ * in_.channels * kernel_;
  for (std::size_t i = 0; i < nw; ++i) params[i] = u(rng);
  for (std::size_t i = nw; i < params.size(); ++i) params[i] = 0.0;
}

// Layout: weight[co][ci][k], then bias[co]. Zero "same" padding, odd kernel.
void Conv1d::forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const {
  const std::size_t L = in_.length, C = in_.channels, K = kernel_;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);
  const double* bias = params.data() + out_channels_ * C * K;
  for (std::size_t co = 0; co < out_channels_; ++co) {
    double* o = out.data() + co * L;
    for (std::size_t t = 0; t < L; ++t) o[t] = bias[co];
    for (std::size_t ci = 0; ci < C; ++ci) {
      const double* x = in.data() + ci * L;
      const double* w = params.data() + (co * C + ci) * K;
      for (std::size_t k = 0; k < K; ++k) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
        const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
        const std::size_t t1 = shift > 0 ? L - static_cast<std::size_t>(shift) : L;
        const double wk = w[k];
        for (std::size_t t = t0; t < t1; ++t) o[t] += wk * x[static_cast<std::ptrdiff_t>(t) + shift];
      }
    }
  }
}

void Conv1d::backward(std::span<const double> params, std::span<const double> in, std::span<const double>,
                      std::span<const double> grad_out, std::span<double> grad_in,
                      std::span<double> grad_params) const {
  const std::size_t L = in_.length, C = in_.channels, K = kernel_;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);
  double* gbias = grad_params.data() + out_channels_ * C * K;
  if (!grad_in.empty()) std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (std::size_t co = 0; co < out_channels_; ++co) {
    const double* g = grad_out.data() + co * L;
    double gb = 0.0;
    for (std::size_t t = 0; t < L; ++t) gb += g[t];
    gbias[co] += gb;
    for (std::size_t ci = 0; ci < C; ++ci) {
      const double* x = in.data() + ci * L;
      const double* w = params.data() + (co * C + ci) * K;
      double* gw = grad_params.data() + (co * C + ci) * K;
      double* gx = grad_in.empty() ? nullptr : grad_in.data() + ci * L;
      for (std::size_t k = 0; k < K; ++k) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
        const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
        const std::size_t t1 = shift > 0 ? L - static_cast<std::size_t>(shift) : L;
        double acc = 0.0;
        for (std::size_t t = t0; t < t1; ++t) acc += g[t] * x[static_cast<std::ptrdiff_t>(t) + shift];
        gw[k] += acc;
        if (gx) {
          const double wk = w[k];
          for (std::size_t t = t0; t < t1; ++t) gx[static_cast<std::ptrdiff_t>(t) + shift] += wk * g[t];
        }
      }
    }
  }
}

Dense::Dense(Shape in, std::size_t units, double gain) : Layer(in), units_(units), gain_(gain) {}

void Dense::init(std::span<double> params, std::mt19937_64& rng) const {
  const double fan_in = static_cast<double>(in_.size());
  const double bound = std::sqrt(gain_ / fan_in);
  std::uniform_real_distribution<double> u(-bound, bound);
  const std::size_t nw = units_ * in_.size();
  for (std::size_t i = 0; i < nw; ++i) params[i] = u(rng);
  for (std::size_t i = nw; i < params.size(); ++i) params[i] = 0.0;
}

// Layout: weight[out][in], then bias[out].
void Dense::forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const {
  const std::size_t n = in_.size();
  const double* bias = params.data() + units_ * n;
  for (std::size_t j = 0; j < units_; ++j) {
    const double* w = params.data() + j * n;
    double acc = bias[j];
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * in[i];
    out[j] = acc;
  }
}

void Dense::backward(std::span<const double> params, std::span<const double> in, std::span<const double>,
                     std::span<const double> grad_out, std::span<double> grad_in,
                     std::span<double> grad_params) const {
  const std::size_t n = in_.size();
  double* gbias = grad_params.data() + units_ * n;
  if (!grad_in.empty()) std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (std::size_t j = 0; j < units_; ++j) {
    const double g = grad_out[j];
    if (g == 0.0) continue;
    gbias[j] += g;
    double* gw = grad_params.data() + j * n;
    for (std::size_t i = 0; i < n; ++i) gw[i] += g * in[i];
    if (!grad_in.empty()) {
      const double* w = params.data() + j * n;
      for (std::size_t i = 0; i < n; ++i) grad_in[i] += g * w[i];
    }
  }
}

void Activate::forward(std::span<const double>, std::span<const double> in, std::span<double> out) const {
  if (kind_ == Activation::relu) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  }
}

void Activate::backward(std::span<const double>, std::span<const double> in, std::span<const double> out,
                        std::span<const double> grad_out, std::span<double> grad_in, std::span<double>) const {
  if (grad_in.empty()) return;
  if (kind_ == Activation::relu) {
    for (std::size_t i = 0; i < in.size(); ++i) grad_in[i] = in[i] > 0.0 ? grad_out[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < in.size(); ++i) grad_in[i] = grad_out[i] * (1.0 - out[i] * out[i]);
  }
}

void AvgPool2::forward(std::span<const double>, std::span<const double> in, std::span<double> out) const {
  const std::size_t L = in_.length, Lo = L / 2;
  for (std::size_t c = 0; c < in_.channels; ++c)
    for (std::size_t t = 0; t < Lo; ++t) out[c * Lo + t] = 0.5 * (in[c * L + 2 * t] + in[c * L + 2 * t + 1]);
}

void AvgPool2::backward(std::span<const double>, std::span<const double>, std::span<const double>,
                        std::span<const double> grad_out, std::span<double> grad_in, std::span<double>) const {
  if (grad_in.empty()) return;
  const std::size_t L = in_.length, Lo = L / 2;
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (std::size_t c = 0; c < in_.channels; ++c)
    for (std::size_t t = 0; t < Lo; ++t) {
      const double g = 0.5 * grad_out[c * Lo + t];
      grad_in[c * L + 2 * t] = g;
      grad_in[c * L + 2 * t + 1] = g;
    }
}

}  // namespace hypuc::detail
