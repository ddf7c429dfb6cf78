#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "spg/kernels/kernels.hpp"
#include "spg/util/errors.hpp"
#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

// 1-D convolutional layers with hand-written backward passes. Data is
// Mat<T> with rows = channels, cols = time. Layers keep the forward trace
// they need for backward internally, so the usage pattern is strictly
// forward(x) then backward(dy) on the same instance, one sample at a time;
// parameter gradients accumulate across samples until zero_grad.
//
// Everything is templated on the scalar type: float for training and
// inference, double for the finite-difference gradient checks in the tests.

namespace spg::nn {

template <typename T>
struct ParamRef {
  std::string name;
  std::vector<T>* w;
  std::vector<T>* g;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Mat<T> forward(const Mat<T>& x) = 0;
  virtual Mat<T> backward(const Mat<T>& dy) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    (void)prefix;
    (void)out;
  }
  virtual int out_len(int in_len) const { return in_len; }
  virtual int out_channels(int in_ch) const { return in_ch; }
  // Input index range that can influence outputs [lo, hi] (both inclusive).
  virtual void in_span(long& lo, long& hi) const {
    (void)lo;
    (void)hi;
  }
};

// ---------------------------------------------------------------------------
// im2col / col2im for stride-s kernels with explicit left padding.

template <typename T>
void im2col(const Mat<T>& x, int k, int stride, int pad_left, int tout, Mat<T>& col) {
  int cin = x.rows, tin = x.cols;
  col.resize(cin * k, tout);
  for (int c = 0; c < cin; ++c) {
    const T* xr = x.row(c);
    for (int j = 0; j < k; ++j) {
      T* cr = col.row(c * k + j);
      for (int t = 0; t < tout; ++t) {
        int src = t * stride + j - pad_left;
        cr[t] = (src >= 0 && src < tin) ? xr[src] : T(0);
      }
    }
  }
}

template <typename T>
void col2im_add(const Mat<T>& col, int k, int stride, int pad_left, int tin, Mat<T>& x) {
  int cin = x.rows;
  for (int c = 0; c < cin; ++c) {
    T* xr = x.row(c);
    for (int j = 0; j < k; ++j) {
      const T* cr = col.row(c * k + j);
      for (int t = 0; t < col.cols; ++t) {
        int dst = t * stride + j - pad_left;
        if (dst >= 0 && dst < tin) xr[dst] += cr[t];
      }
    }
  }
}

// ---------------------------------------------------------------------------

template <typename T>
class Conv1d : public Layer<T> {
 public:
  // Padding keeps out_len = in_len / stride for divisible inputs: total
  // pad is k - stride, split causally (all left) or centered.
  Conv1d(int cin, int cout, int k, int stride = 1, bool causal = false, bool has_bias = true)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), has_bias_(has_bias) {
    if (k < stride) throw ConfigError("conv kernel must be >= stride");
    int pad_total = k - stride;
    pad_left_ = causal ? pad_total : pad_total / 2;
    w_.assign(size_t(cout) * cin * k, T(0));
    gw_.assign(w_.size(), T(0));
    b_.assign(has_bias ? cout : 0, T(0));
    gb_.assign(b_.size(), T(0));
  }

  void init_kaiming(Rng rng, double gain = std::numbers::sqrt2) {
    double std = gain / std::sqrt(double(cin_) * k_);
    for (auto& v : w_) v = T(rng.normal() * std);
    for (auto& v : b_) v = T(0);
  }

  int out_len(int in_len) const override { return (in_len + (k_ - stride_) - k_) / stride_ + 1; }
  int out_channels(int) const override { return cout_; }

  void in_span(long& lo, long& hi) const override {
    lo = lo * stride_ - pad_left_;
    hi = hi * stride_ - pad_left_ + k_ - 1;
  }

  Mat<T> forward(const Mat<T>& x) override {
    if (x.rows != cin_) throw ConfigError("conv input channel mismatch");
    in_len_ = x.cols;
    int tout = out_len(x.cols);
    if (tout <= 0) throw DataError("conv input shorter than kernel");
    im2col(x, k_, stride_, pad_left_, tout, col_);
    Mat<T> y(cout_, tout);
    kernels::gemm_nn_t<T>(cout_, tout, cin_ * k_, w_.data(), col_.data(), y.data(), false);
    if (has_bias_)
      for (int c = 0; c < cout_; ++c) {
        T* yr = y.row(c);
        for (int t = 0; t < tout; ++t) yr[t] += b_[c];
      }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy) override {
    int tout = dy.cols;
    if (has_bias_)
      for (int c = 0; c < cout_; ++c) {
        const T* dr = dy.row(c);
        for (int t = 0; t < tout; ++t) gb_[c] += dr[t];
      }
    kernels::gemm_nt_t<T>(cout_, cin_ * k_, tout, dy.data(), col_.data(), gw_.data(), true);
    Mat<T> dcol(cin_ * k_, tout);
    kernels::gemm_tn_t<T>(cin_ * k_, tout, cout_, w_.data(), dy.data(), dcol.data(), false);
    Mat<T> dx(cin_, in_len_);
    col2im_add(dcol, k_, stride_, pad_left_, in_len_, dx);
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".w", &w_, &gw_});
    if (has_bias_) out.push_back({prefix + ".b", &b_, &gb_});
  }

  std::vector<T>& weights() { return w_; }

 private:
  int cin_, cout_, k_, stride_, pad_left_ = 0;
  bool has_bias_;
  std::vector<T> w_, b_, gw_, gb_;
  Mat<T> col_;
  int in_len_ = 0;
};

// Transposed convolution that upsamples exactly stride-fold; it is the
// adjoint of the matching Conv1d, with weights stored as that conv would
// store them: [cin][cout * k] viewed from this layer's direction.
template <typename T>
class ConvTranspose1d : public Layer<T> {
 public:
  ConvTranspose1d(int cin, int cout, int k, int stride)
      : cin_(cin), cout_(cout), k_(k), stride_(stride) {
    if (k < stride) throw ConfigError("deconv kernel must be >= stride");
    int pad_total = k - stride;
    pad_left_ = pad_total / 2;
    w_.assign(size_t(cin) * cout * k, T(0));
    gw_.assign(w_.size(), T(0));
    b_.assign(cout, T(0));
    gb_.assign(b_.size(), T(0));
  }

  void init_kaiming(Rng rng, double gain = std::numbers::sqrt2) {
    double std = gain / std::sqrt(double(cin_) * k_ / stride_);
    for (auto& v : w_) v = T(rng.normal() * std);
    for (auto& v : b_) v = T(0);
  }

  int out_len(int in_len) const override { return in_len * stride_; }
  int out_channels(int) const override { return cout_; }

  void in_span(long& lo, long& hi) const override {
    long a = lo + pad_left_ - (k_ - 1);
    lo = a >= 0 ? (a + stride_ - 1) / stride_ : -((-a) / stride_);
    hi = (hi + pad_left_) / stride_;
  }

  Mat<T> forward(const Mat<T>& x) override {
    if (x.rows != cin_) throw ConfigError("deconv input channel mismatch");
    x_ = x;
    int tout = out_len(x.cols);
    Mat<T> dcol(cout_ * k_, x.cols);
    kernels::gemm_tn_t<T>(cout_ * k_, x.cols, cin_, w_.data(), x.data(), dcol.data(), false);
    Mat<T> y(cout_, tout);
    col2im_add(dcol, k_, stride_, pad_left_, tout, y);
    for (int c = 0; c < cout_; ++c) {
      T* yr = y.row(c);
      for (int t = 0; t < tout; ++t) yr[t] += b_[c];
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy) override {
    for (int c = 0; c < cout_; ++c) {
      const T* dr = dy.row(c);
      for (int t = 0; t < dy.cols; ++t) gb_[c] += dr[t];
    }
    Mat<T> col;
    im2col(dy, k_, stride_, pad_left_, x_.cols, col);
    kernels::gemm_nt_t<T>(cin_, cout_ * k_, x_.cols, x_.data(), col.data(), gw_.data(), true);
    Mat<T> dx(cin_, x_.cols);
    kernels::gemm_nn_t<T>(cin_, x_.cols, cout_ * k_, w_.data(), col.data(), dx.data(), false);
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".w", &w_, &gw_});
    out.push_back({prefix + ".b", &b_, &gb_});
  }

 private:
  int cin_, cout_, k_, stride_, pad_left_ = 0;
  std::vector<T> w_, b_, gw_, gb_;
  Mat<T> x_;
};

enum class Act { elu, tanh, lrelu };

template <typename T>
class Activation : public Layer<T> {
 public:
  explicit Activation(Act kind, T slope = T(0.1)) : kind_(kind), slope_(slope) {}

  Mat<T> forward(const Mat<T>& x) override {
    y_ = x;
    for (auto& v : y_.v) {
      switch (kind_) {
        case Act::elu: v = v > T(0) ? v : std::expm1(v); break;
        case Act::tanh: v = std::tanh(v); break;
        case Act::lrelu: v = v > T(0) ? v : slope_ * v; break;
      }
    }
    return y_;
  }

  Mat<T> backward(const Mat<T>& dy) override {
    Mat<T> dx(dy.rows, dy.cols);
    for (size_t i = 0; i < dy.v.size(); ++i) {
      T y = y_.v[i], d;
      switch (kind_) {
        case Act::elu: d = y > T(0) ? T(1) : y + T(1); break;
        case Act::tanh: d = T(1) - y * y; break;
        default: d = y > T(0) ? T(1) : slope_; break;
      }
      dx.v[i] = dy.v[i] * d;
    }
    return dx;
  }

 private:
  Act kind_;
  T slope_;
  Mat<T> y_;
};

template <typename T>
class AvgPool1d : public Layer<T> {
 public:
  explicit AvgPool1d(int factor) : f_(factor) {}

  int out_len(int in_len) const override { return in_len / f_; }

  void in_span(long& lo, long& hi) const override {
    lo = lo * f_;
    hi = hi * f_ + f_ - 1;
  }

  Mat<T> forward(const Mat<T>& x) override {
    in_len_ = x.cols;
    int tout = x.cols / f_;
    Mat<T> y(x.rows, tout);
    for (int c = 0; c < x.rows; ++c) {
      const T* xr = x.row(c);
      T* yr = y.row(c);
      for (int t = 0; t < tout; ++t) {
        T s = T(0);
        for (int j = 0; j < f_; ++j) s += xr[t * f_ + j];
        yr[t] = s / T(f_);
      }
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy) override {
    Mat<T> dx(dy.rows, in_len_);
    for (int c = 0; c < dy.rows; ++c) {
      const T* dr = dy.row(c);
      T* xr = dx.row(c);
      for (int t = 0; t < dy.cols; ++t)
        for (int j = 0; j < f_; ++j) xr[t * f_ + j] = dr[t] / T(f_);
    }
    return dx;
  }

 private:
  int f_;
  int in_len_ = 0;
};

// Mean over time: [C][T] -> [C][1].
template <typename T>
class GlobalMeanPool : public Layer<T> {
 public:
  int out_len(int) const override { return 1; }

  Mat<T> forward(const Mat<T>& x) override {
    in_len_ = x.cols;
    Mat<T> y(x.rows, 1);
    for (int c = 0; c < x.rows; ++c) {
      T s = T(0);
      const T* xr = x.row(c);
      for (int t = 0; t < x.cols; ++t) s += xr[t];
      y.at(c, 0) = s / T(x.cols);
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy) override {
    Mat<T> dx(dy.rows, in_len_);
    for (int c = 0; c < dy.rows; ++c) {
      T g = dy.at(c, 0) / T(in_len_);
      T* xr = dx.row(c);
      for (int t = 0; t < in_len_; ++t) xr[t] = g;
    }
    return dx;
  }

 private:
  int in_len_ = 0;
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;

  template <typename L, typename... Args>
  L* add(Args&&... args) {
    auto p = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = p.get();
    layers_.push_back(std::move(p));
    return raw;
  }

  size_t size() const { return layers_.size(); }
  Layer<T>* layer(size_t i) { return layers_[i].get(); }

  Mat<T> forward(const Mat<T>& x) override {
    Mat<T> h = x;
    for (auto& l : layers_) h = l->forward(h);
    return h;
  }

  // Forward that also returns the output of an intermediate layer (the
  // feature tap used by the priors and the speaker embedder).
  Mat<T> forward_tap(const Mat<T>& x, size_t tap_index, Mat<T>& tap) {
    Mat<T> h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i]->forward(h);
      if (i == tap_index) tap = h;
    }
    return h;
  }

  Mat<T> backward(const Mat<T>& dy) override {
    Mat<T> g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  // Backward from the final output with an extra gradient injected at a
  // tap point (for losses attached to intermediate features).
  Mat<T> backward_with_tap(const Mat<T>& dy, size_t tap_index, const Mat<T>& dtap) {
    Mat<T> g = dy;
    for (size_t i = layers_.size(); i-- > 0;) {
      if (i == tap_index) {
        if (!g.same_shape(dtap)) throw ConfigError("tap gradient shape mismatch");
        for (size_t j = 0; j < g.v.size(); ++j) g.v[j] += dtap.v[j];
      }
      g = layers_[i]->backward(g);
    }
    return g;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_params(prefix + "." + std::to_string(i), out);
  }

  int out_len(int in_len) const override {
    for (auto& l : layers_) in_len = l->out_len(in_len);
    return in_len;
  }

  int out_channels(int in_ch) const override {
    for (auto& l : layers_) in_ch = l->out_channels(in_ch);
    return in_ch;
  }

  void in_span(long& lo, long& hi) const override {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) (*it)->in_span(lo, hi);
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <typename T>
void zero_grads(const std::vector<ParamRef<T>>& params) {
  for (auto& p : params) std::fill(p.g->begin(), p.g->end(), T(0));
}

template <typename T>
void scale_grads(const std::vector<ParamRef<T>>& params, T s) {
  for (auto& p : params)
    for (auto& g : *p.g) g *= s;
}

}  // namespace spg::nn
