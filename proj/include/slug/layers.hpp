#pragma once

#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "slug/common.hpp"
#include "slug/tensor.hpp"

// Layer primitives. Each layer is a pure function of (input, params):
// forward evaluates it, backward pulls an output cotangent back to input
// and parameter cotangents, tangent pushes (input tangent, parameter
// tangent) forward. No layer holds mutable state, so instances are safe
// to share across threads.

namespace slug::nn {

struct LayoutRecord {
  std::string id;           // e.g. "3:conv/K"
  std::vector<int> dims;    // logical tensor dims
  std::size_t offset = 0;   // position in the flat parameter vector
  std::size_t size = 0;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual const char* kind() const = 0;
  // Resolves the output shape, throwing ConfigError if the input does
  // not compose with this layer.
  virtual Shape infer(Shape in) = 0;
  virtual std::size_t param_count() const = 0;
  virtual void append_layout(std::vector<LayoutRecord>& out,
                             const std::string& prefix) const {
    (void)out;
    (void)prefix;
  }
  // Fan-in sizes per parameter, used by the initializer. Appends
  // param_count() entries; 0 means "not a weight" (biases, offsets).
  virtual void append_fan_in(std::vector<int>& out) const {
    for (std::size_t i = 0; i < param_count(); ++i) out.push_back(0);
  }

  virtual void forward(const double* in, const double* params,
                       double* out) const = 0;
  virtual void backward(const double* in, const double* params,
                        const double* cot_out, double* cot_in,
                        double* cot_params) const = 0;
  virtual void tangent(const double* in, const double* din,
                       const double* params, const double* dparams,
                       double* dout) const = 0;

  Shape in_shape;
  Shape out_shape;
};

// ---------------------------------------------------------------------------

class DenseLayer : public Layer {
 public:
  explicit DenseLayer(int out_dim) : out_dim_(out_dim) {}

  const char* kind() const override { return "dense"; }

  Shape infer(Shape in) override {
    if (in.size() == 0) throw ConfigError("dense: empty input shape");
    in_shape = in;
    in_dim_ = static_cast<int>(in.size());
    out_shape = Shape{1, 1, out_dim_};
    return out_shape;
  }

  std::size_t param_count() const override {
    return static_cast<std::size_t>(out_dim_) * in_dim_ + out_dim_;
  }

  void append_layout(std::vector<LayoutRecord>& out,
                     const std::string& prefix) const override {
    out.push_back({prefix + "/W", {out_dim_, in_dim_}, 0,
                   static_cast<std::size_t>(out_dim_) * in_dim_});
    out.push_back({prefix + "/b", {out_dim_}, 0,
                   static_cast<std::size_t>(out_dim_)});
  }

  void append_fan_in(std::vector<int>& out) const override {
    for (int i = 0; i < out_dim_ * in_dim_; ++i) out.push_back(in_dim_);
    for (int i = 0; i < out_dim_; ++i) out.push_back(0);
  }

  void forward(const double* in, const double* params,
               double* out) const override {
    const double* W = params;
    const double* b = params + static_cast<std::size_t>(out_dim_) * in_dim_;
    for (int o = 0; o < out_dim_; ++o) {
      const double* row = W + static_cast<std::size_t>(o) * in_dim_;
      double acc = b[o];
      for (int i = 0; i < in_dim_; ++i) acc += row[i] * in[i];
      out[o] = acc;
    }
  }

  void backward(const double* in, const double* params, const double* cot_out,
                double* cot_in, double* cot_params) const override {
    const double* W = params;
    double* dW = cot_params;
    double* db = cot_params + static_cast<std::size_t>(out_dim_) * in_dim_;
    for (int i = 0; i < in_dim_; ++i) cot_in[i] = 0.0;
    for (int o = 0; o < out_dim_; ++o) {
      const double g = cot_out[o];
      const double* row = W + static_cast<std::size_t>(o) * in_dim_;
      double* drow = dW + static_cast<std::size_t>(o) * in_dim_;
      for (int i = 0; i < in_dim_; ++i) {
        cot_in[i] += g * row[i];
        drow[i] = g * in[i];
      }
      db[o] = g;
    }
  }

  void tangent(const double* in, const double* din, const double* params,
               const double* dparams, double* dout) const override {
    const double* W = params;
    const double* dW = dparams;
    const double* db = dparams + static_cast<std::size_t>(out_dim_) * in_dim_;
    for (int o = 0; o < out_dim_; ++o) {
      const double* row = W + static_cast<std::size_t>(o) * in_dim_;
      const double* drow = dW + static_cast<std::size_t>(o) * in_dim_;
      double acc = db[o];
      for (int i = 0; i < in_dim_; ++i) acc += drow[i] * in[i] + row[i] * din[i];
      dout[o] = acc;
    }
  }

 private:
  int out_dim_;
  int in_dim_ = 0;
};

// ---------------------------------------------------------------------------

// 2-D convolution, stride 1, zero ("same") padding, odd square kernel.
// Kernel storage K[((ky*k + kx)*c_in + ci)*c_out + co] keeps the output
// channel contiguous so the inner loops vectorize.
class ConvLayer : public Layer {
 public:
  ConvLayer(int ksize, int out_channels) : k_(ksize), cout_(out_channels) {
    if (k_ < 1 || k_ % 2 == 0) {
      throw ConfigError("conv: kernel size must be odd and positive, got " +
                        std::to_string(k_));
    }
  }

  const char* kind() const override { return "conv"; }

  Shape infer(Shape in) override {
    if (in.w < 1 || in.h < 1 || in.c < 1) {
      throw ConfigError("conv: bad input shape " + in.str());
    }
    in_shape = in;
    cin_ = in.c;
    out_shape = Shape{in.w, in.h, cout_};
    return out_shape;
  }

  std::size_t param_count() const override {
    return static_cast<std::size_t>(k_) * k_ * cin_ * cout_ + cout_;
  }

  void append_layout(std::vector<LayoutRecord>& out,
                     const std::string& prefix) const override {
    out.push_back({prefix + "/K", {k_, k_, cin_, cout_}, 0,
                   static_cast<std::size_t>(k_) * k_ * cin_ * cout_});
    out.push_back({prefix + "/b", {cout_}, 0, static_cast<std::size_t>(cout_)});
  }

  void append_fan_in(std::vector<int>& out) const override {
    const int fan = k_ * k_ * cin_;
    for (int i = 0; i < k_ * k_ * cin_ * cout_; ++i) out.push_back(fan);
    for (int i = 0; i < cout_; ++i) out.push_back(0);
  }

  void forward(const double* in, const double* params,
               double* out) const override {
    const double* K = params;
    const double* b = params + static_cast<std::size_t>(k_) * k_ * cin_ * cout_;
    const int W = in_shape.w, H = in_shape.h, r = k_ / 2;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double* o = out + (static_cast<std::size_t>(y) * W + x) * cout_;
        for (int co = 0; co < cout_; ++co) o[co] = b[co];
        for (int ky = 0; ky < k_; ++ky) {
          const int yi = y + ky - r;
          if (yi < 0 || yi >= H) continue;
          for (int kx = 0; kx < k_; ++kx) {
            const int xi = x + kx - r;
            if (xi < 0 || xi >= W) continue;
            const double* px = in + (static_cast<std::size_t>(yi) * W + xi) * cin_;
            const double* kk =
                K + (static_cast<std::size_t>(ky) * k_ + kx) * cin_ * cout_;
            for (int ci = 0; ci < cin_; ++ci) {
              const double v = px[ci];
              const double* krow = kk + static_cast<std::size_t>(ci) * cout_;
              for (int co = 0; co < cout_; ++co) o[co] += v * krow[co];
            }
          }
        }
      }
    }
  }

  void backward(const double* in, const double* params, const double* cot_out,
                double* cot_in, double* cot_params) const override {
    const double* K = params;
    const std::size_t ksz = static_cast<std::size_t>(k_) * k_ * cin_ * cout_;
    double* dK = cot_params;
    double* db = cot_params + ksz;
    const int W = in_shape.w, H = in_shape.h, r = k_ / 2;
    std::memset(cot_in, 0, sizeof(double) * in_shape.size());
    std::memset(dK, 0, sizeof(double) * ksz);
    for (int co = 0; co < cout_; ++co) db[co] = 0.0;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double* g = cot_out + (static_cast<std::size_t>(y) * W + x) * cout_;
        for (int co = 0; co < cout_; ++co) db[co] += g[co];
        for (int ky = 0; ky < k_; ++ky) {
          const int yi = y + ky - r;
          if (yi < 0 || yi >= H) continue;
          for (int kx = 0; kx < k_; ++kx) {
            const int xi = x + kx - r;
            if (xi < 0 || xi >= W) continue;
            const std::size_t poff = (static_cast<std::size_t>(yi) * W + xi) * cin_;
            const double* px = in + poff;
            double* gx = cot_in + poff;
            const std::size_t koff =
                (static_cast<std::size_t>(ky) * k_ + kx) * cin_ * cout_;
            for (int ci = 0; ci < cin_; ++ci) {
              const double* krow = K + koff + static_cast<std::size_t>(ci) * cout_;
              double* dkrow = dK + koff + static_cast<std::size_t>(ci) * cout_;
              const double v = px[ci];
              double acc = 0.0;
              for (int co = 0; co < cout_; ++co) {
                acc += g[co] * krow[co];
                dkrow[co] += g[co] * v;
              }
              gx[ci] += acc;
            }
          }
        }
      }
    }
  }

  void tangent(const double* in, const double* din, const double* params,
               const double* dparams, double* dout) const override {
    const double* K = params;
    const double* dK = dparams;
    const double* db = dparams + static_cast<std::size_t>(k_) * k_ * cin_ * cout_;
    const int W = in_shape.w, H = in_shape.h, r = k_ / 2;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double* o = dout + (static_cast<std::size_t>(y) * W + x) * cout_;
        for (int co = 0; co < cout_; ++co) o[co] = db[co];
        for (int ky = 0; ky < k_; ++ky) {
          const int yi = y + ky - r;
          if (yi < 0 || yi >= H) continue;
          for (int kx = 0; kx < k_; ++kx) {
            const int xi = x + kx - r;
            if (xi < 0 || xi >= W) continue;
            const std::size_t poff = (static_cast<std::size_t>(yi) * W + xi) * cin_;
            const double* px = in + poff;
            const double* dpx = din + poff;
            const std::size_t koff =
                (static_cast<std::size_t>(ky) * k_ + kx) * cin_ * cout_;
            for (int ci = 0; ci < cin_; ++ci) {
              const double v = px[ci];
              const double dv = dpx[ci];
              const double* krow = K + koff + static_cast<std::size_t>(ci) * cout_;
              const double* dkrow = dK + koff + static_cast<std::size_t>(ci) * cout_;
              for (int co = 0; co < cout_; ++co) {
                o[co] += dv * krow[co] + v * dkrow[co];
              }
            }
          }
        }
      }
    }
  }

 private:
  int k_;
  int cout_;
  int cin_ = 0;
};

// ---------------------------------------------------------------------------

// ELU, alpha = 1. Continuously differentiable, which keeps central
// finite differences honest near zero.
class EluLayer : public Layer {
 public:
  const char* kind() const override { return "elu"; }

  Shape infer(Shape in) override {
    in_shape = in;
    out_shape = in;
    return in;
  }

  std::size_t param_count() const override { return 0; }

  void forward(const double* in, const double*, double* out) const override {
    const std::size_t n = in_shape.size();
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = in[i] > 0.0 ? in[i] : std::expm1(in[i]);
    }
  }

  void backward(const double* in, const double*, const double* cot_out,
                double* cot_in, double*) const override {
    const std::size_t n = in_shape.size();
    for (std::size_t i = 0; i < n; ++i) {
      cot_in[i] = cot_out[i] * (in[i] > 0.0 ? 1.0 : std::exp(in[i]));
    }
  }

  void tangent(const double* in, const double* din, const double*,
               const double*, double* dout) const override {
    const std::size_t n = in_shape.size();
    for (std::size_t i = 0; i < n; ++i) {
      dout[i] = din[i] * (in[i] > 0.0 ? 1.0 : std::exp(in[i]));
    }
  }
};

// ---------------------------------------------------------------------------

// Per-channel normalization with frozen statistics: the (mean, var)
// pairs are part of the NetworkSpec, not of the parameter vector, so the
// map stays deterministic per sample. gamma/beta are trainable.
class NormLayer : public Layer {
 public:
  explicit NormLayer(std::vector<double> stats = {}) : stats_(std::move(stats)) {}

  const char* kind() const override { return "norm"; }

  Shape infer(Shape in) override {
    in_shape = in;
    out_shape = in;
    c_ = in.c;
    if (stats_.empty()) {
      stats_.assign(static_cast<std::size_t>(2) * c_, 0.0);
      for (int i = 0; i < c_; ++i) stats_[c_ + i] = 1.0;  // unit variance
    }
    if (stats_.size() != static_cast<std::size_t>(2) * c_) {
      throw ConfigError("norm: expected " + std::to_string(2 * c_) +
                        " stats values, got " + std::to_string(stats_.size()));
    }
    inv_.resize(c_);
    for (int i = 0; i < c_; ++i) {
      inv_[i] = 1.0 / std::sqrt(stats_[c_ + i] + 1e-5);
    }
    return in;
  }

  std::size_t param_count() const override {
    return static_cast<std::size_t>(2) * c_;
  }

  void append_layout(std::vector<LayoutRecord>& out,
                     const std::string& prefix) const override {
    out.push_back({prefix + "/gamma", {c_}, 0, static_cast<std::size_t>(c_)});
    out.push_back({prefix + "/beta", {c_}, 0, static_cast<std::size_t>(c_)});
  }

  const std::vector<double>& stats() const { return stats_; }

  void forward(const double* in, const double* params,
               double* out) const override {
    const double* gamma = params;
    const double* beta = params + c_;
    const std::size_t px = in_shape.size() / c_;
    for (std::size_t p = 0; p < px; ++p) {
      const double* xi = in + p * c_;
      double* yo = out + p * c_;
      for (int ch = 0; ch < c_; ++ch) {
        yo[ch] = gamma[ch] * (xi[ch] - stats_[ch]) * inv_[ch] + beta[ch];
      }
    }
  }

  void backward(const double* in, const double* params, const double* cot_out,
                double* cot_in, double* cot_params) const override {
    const double* gamma = params;
    double* dgamma = cot_params;
    double* dbeta = cot_params + c_;
    for (int ch = 0; ch < c_; ++ch) {
      dgamma[ch] = 0.0;
      dbeta[ch] = 0.0;
    }
    const std::size_t px = in_shape.size() / c_;
    for (std::size_t p = 0; p < px; ++p) {
      const double* xi = in + p * c_;
      const double* g = cot_out + p * c_;
      double* gi = cot_in + p * c_;
      for (int ch = 0; ch < c_; ++ch) {
        gi[ch] = g[ch] * gamma[ch] * inv_[ch];
        dgamma[ch] += g[ch] * (xi[ch] - stats_[ch]) * inv_[ch];
        dbeta[ch] += g[ch];
      }
    }
  }

  void tangent(const double* in, const double* din, const double* params,
               const double* dparams, double* dout) const override {
    const double* gamma = params;
    const double* dgamma = dparams;
    const double* dbeta = dparams + c_;
    const std::size_t px = in_shape.size() / c_;
    for (std::size_t p = 0; p < px; ++p) {
      const double* xi = in + p * c_;
      const double* dxi = din + p * c_;
      double* o = dout + p * c_;
      for (int ch = 0; ch < c_; ++ch) {
        o[ch] = dgamma[ch] * (xi[ch] - stats_[ch]) * inv_[ch] +
                gamma[ch] * dxi[ch] * inv_[ch] + dbeta[ch];
      }
    }
  }

 private:
  std::vector<double> stats_;  // c means followed by c variances
  std::vector<double> inv_;
  int c_ = 0;
};

// ---------------------------------------------------------------------------

// 2x2 average pooling, stride 2.
class DownLayer : public Layer {
 public:
  const char* kind() const override { return "down"; }

  Shape infer(Shape in) override {
    if (in.w % 2 != 0 || in.h % 2 != 0) {
      throw ConfigError("down: input dims must be even, got " + in.str());
    }
    in_shape = in;
    out_shape = Shape{in.w / 2, in.h / 2, in.c};
    return out_shape;
  }

  std::size_t param_count() const override { return 0; }

  void forward(const double* in, const double*, double* out) const override {
    const int W = in_shape.w, C = in_shape.c;
    const int ow = out_shape.w, oh = out_shape.h;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const double* a = in + ((2 * y) * static_cast<std::size_t>(W) + 2 * x) * C;
        const double* b = a + C;
        const double* c = in + ((2 * y + 1) * static_cast<std::size_t>(W) + 2 * x) * C;
        const double* d = c + C;
        double* o = out + (static_cast<std::size_t>(y) * ow + x) * C;
        for (int ch = 0; ch < C; ++ch) {
          o[ch] = 0.25 * (a[ch] + b[ch] + c[ch] + d[ch]);
        }
      }
    }
  }

  void backward(const double*, const double*, const double* cot_out,
                double* cot_in, double*) const override {
    const int W = in_shape.w, C = in_shape.c;
    const int ow = out_shape.w, oh = out_shape.h;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const double* g = cot_out + (static_cast<std::size_t>(y) * ow + x) * C;
        double* a = cot_in + ((2 * y) * static_cast<std::size_t>(W) + 2 * x) * C;
        double* b = a + C;
        double* c = cot_in + ((2 * y + 1) * static_cast<std::size_t>(W) + 2 * x) * C;
        double* d = c + C;
        for (int ch = 0; ch < C; ++ch) {
          const double v = 0.25 * g[ch];
          a[ch] = v;
          b[ch] = v;
          c[ch] = v;
          d[ch] = v;
        }
      }
    }
  }

  void tangent(const double*, const double* din, const double*, const double*,
               double* dout) const override {
    forward(din, nullptr, dout);
  }
};

// ---------------------------------------------------------------------------

// 2x nearest-neighbour upsampling.
class UpLayer : public Layer {
 public:
  const char* kind() const override { return "up"; }

  Shape infer(Shape in) override {
    in_shape = in;
    out_shape = Shape{in.w * 2, in.h * 2, in.c};
    return out_shape;
  }

  std::size_t param_count() const override { return 0; }

  void forward(const double* in, const double*, double* out) const override {
    const int W = in_shape.w, H = in_shape.h, C = in_shape.c;
    const int ow = out_shape.w;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double* s = in + (static_cast<std::size_t>(y) * W + x) * C;
        double* a = out + ((2 * y) * static_cast<std::size_t>(ow) + 2 * x) * C;
        double* b = a + C;
        double* c = out + ((2 * y + 1) * static_cast<std::size_t>(ow) + 2 * x) * C;
        double* d = c + C;
        for (int ch = 0; ch < C; ++ch) {
          a[ch] = s[ch];
          b[ch] = s[ch];
          c[ch] = s[ch];
          d[ch] = s[ch];
        }
      }
    }
  }

  void backward(const double*, const double*, const double* cot_out,
                double* cot_in, double*) const override {
    const int W = in_shape.w, H = in_shape.h, C = in_shape.c;
    const int ow = out_shape.w;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double* gi = cot_in + (static_cast<std::size_t>(y) * W + x) * C;
        const double* a = cot_out + ((2 * y) * static_cast<std::size_t>(ow) + 2 * x) * C;
        const double* b = a + C;
        const double* c = cot_out + ((2 * y + 1) * static_cast<std::size_t>(ow) + 2 * x) * C;
        const double* d = c + C;
        for (int ch = 0; ch < C; ++ch) {
          gi[ch] = a[ch] + b[ch] + c[ch] + d[ch];
        }
      }
    }
  }

  void tangent(const double*, const double* din, const double*, const double*,
               double* dout) const override {
    forward(din, nullptr, dout);
  }
};

// ---------------------------------------------------------------------------

// Pure view changes. Data is copied unchanged.
class FlattenLayer : public Layer {
 public:
  const char* kind() const override { return "flatten"; }

  Shape infer(Shape in) override {
    in_shape = in;
    out_shape = Shape{1, 1, static_cast<int>(in.size())};
    return out_shape;
  }

  std::size_t param_count() const override { return 0; }

  void forward(const double* in, const double*, double* out) const override {
    std::memcpy(out, in, sizeof(double) * in_shape.size());
  }
  void backward(const double*, const double*, const double* cot_out,
                double* cot_in, double*) const override {
    std::memcpy(cot_in, cot_out, sizeof(double) * in_shape.size());
  }
  void tangent(const double*, const double* din, const double*, const double*,
               double* dout) const override {
    std::memcpy(dout, din, sizeof(double) * in_shape.size());
  }
};

class ReshapeLayer : public Layer {
 public:
  explicit ReshapeLayer(Shape target) : target_(target) {}

  const char* kind() const override { return "reshape"; }

  Shape infer(Shape in) override {
    if (in.size() != target_.size()) {
      throw ConfigError("reshape: cannot view " + in.str() + " as " +
                        target_.str());
    }
    in_shape = in;
    out_shape = target_;
    return target_;
  }

  std::size_t param_count() const override { return 0; }

  Shape target() const { return target_; }

  void forward(const double* in, const double*, double* out) const override {
    std::memcpy(out, in, sizeof(double) * in_shape.size());
  }
  void backward(const double*, const double*, const double* cot_out,
                double* cot_in, double*) const override {
    std::memcpy(cot_in, cot_out, sizeof(double) * in_shape.size());
  }
  void tangent(const double*, const double* din, const double*, const double*,
               double* dout) const override {
    std::memcpy(dout, din, sizeof(double) * in_shape.size());
  }

 private:
  Shape target_;
};

// ---------------------------------------------------------------------------

// Residual block: y = x + body(x) with body = conv3-norm-elu-conv3-norm,
// channel preserving. backward/tangent recompute the body activations
// from the block input instead of stashing them.
class ResidualLayer : public Layer {
 public:
  ResidualLayer() {
    body_.emplace_back(std::make_unique<ConvLayer>(3, 0));  // cout set in infer
    body_.emplace_back(std::make_unique<NormLayer>());
    body_.emplace_back(std::make_unique<EluLayer>());
    body_.emplace_back(std::make_unique<ConvLayer>(3, 0));
    body_.emplace_back(std::make_unique<NormLayer>());
  }

  explicit ResidualLayer(std::vector<double> stats1, std::vector<double> stats2) {
    body_.emplace_back(std::make_unique<ConvLayer>(3, 0));
    body_.emplace_back(std::make_unique<NormLayer>(std::move(stats1)));
    body_.emplace_back(std::make_unique<EluLayer>());
    body_.emplace_back(std::make_unique<ConvLayer>(3, 0));
    body_.emplace_back(std::make_unique<NormLayer>(std::move(stats2)));
  }

  const char* kind() const override { return "res"; }

  Shape infer(Shape in) override {
    in_shape = in;
    out_shape = in;
    // rebuild body convs now that the channel count is known
    body_[0] = std::make_unique<ConvLayer>(3, in.c);
    body_[3] = std::make_unique<ConvLayer>(3, in.c);
    Shape s = in;
    offsets_.clear();
    std::size_t off = 0;
    for (auto& l : body_) {
      s = l->infer(s);
      offsets_.push_back(off);
      off += l->param_count();
      if (!(s == in)) {
        throw ConfigError("res: body must preserve shape");
      }
    }
    total_params_ = off;
    return in;
  }

  std::size_t param_count() const override { return total_params_; }

  void append_layout(std::vector<LayoutRecord>& out,
                     const std::string& prefix) const override {
    for (std::size_t i = 0; i < body_.size(); ++i) {
      std::vector<LayoutRecord> sub;
      body_[i]->append_layout(sub, prefix + "." + std::to_string(i) + ":" +
                                       body_[i]->kind());
      for (auto& r : sub) {
        r.offset += offsets_[i];
        out.push_back(std::move(r));
      }
    }
  }

  void append_fan_in(std::vector<int>& out) const override {
    for (const auto& l : body_) l->append_fan_in(out);
  }

  const std::vector<std::unique_ptr<Layer>>& body() const { return body_; }

  void forward(const double* in, const double* params,
               double* out) const override {
    const std::size_t n = in_shape.size();
    std::vector<double> buf_a(in, in + n), buf_b(n);
    for (std::size_t i = 0; i < body_.size(); ++i) {
      body_[i]->forward(buf_a.data(), params + offsets_[i], buf_b.data());
      std::swap(buf_a, buf_b);
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] + buf_a[i];
  }

  void backward(const double* in, const double* params, const double* cot_out,
                double* cot_in, double* cot_params) const override {
    const std::size_t n = in_shape.size();
    // recompute body inputs
    std::vector<std::vector<double>> acts(body_.size() + 1);
    acts[0].assign(in, in + n);
    for (std::size_t i = 0; i < body_.size(); ++i) {
      acts[i + 1].resize(n);
      body_[i]->forward(acts[i].data(), params + offsets_[i], acts[i + 1].data());
    }
    std::vector<double> g(cot_out, cot_out + n), gi(n);
    for (std::size_t i = body_.size(); i-- > 0;) {
      body_[i]->backward(acts[i].data(), params + offsets_[i], g.data(),
                         gi.data(), cot_params + offsets_[i]);
      std::swap(g, gi);
    }
    for (std::size_t i = 0; i < n; ++i) cot_in[i] = cot_out[i] + g[i];
  }

  void tangent(const double* in, const double* din, const double* params,
               const double* dparams, double* dout) const override {
    const std::size_t n = in_shape.size();
    std::vector<double> act(in, in + n), act_next(n);
    std::vector<double> t(din, din + n), t_next(n);
    for (std::size_t i = 0; i < body_.size(); ++i) {
      body_[i]->tangent(act.data(), t.data(), params + offsets_[i],
                        dparams + offsets_[i], t_next.data());
      body_[i]->forward(act.data(), params + offsets_[i], act_next.data());
      std::swap(act, act_next);
      std::swap(t, t_next);
    }
    for (std::size_t i = 0; i < n; ++i) dout[i] = din[i] + t[i];
  }

 private:
  std::vector<std::unique_ptr<Layer>> body_;
  std::vector<std::size_t> offsets_;
  std::size_t total_params_ = 0;
};

}  // namespace slug::nn
