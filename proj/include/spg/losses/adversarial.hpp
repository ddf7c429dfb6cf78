#pragma once

#include <memory>
#include <vector>

#include "spg/nn/adam.hpp"
#include "spg/nn/layers.hpp"
#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

namespace spg::losses {

// Least-squares GAN objectives over a set of score maps.
//   generator:      mean over maps of mean((s - 1)^2)
//   discriminator:  mean over real maps of mean((s - 1)^2)
//                 + mean over fake maps of mean(s^2)
// Gradients follow the same normalization.

template <typename T>
T lsgan_generator_loss(const std::vector<Mat<T>>& fake_scores,
                       std::vector<Mat<T>>* dscores = nullptr) {
  if (fake_scores.empty()) return T(0);
  T total = T(0);
  T inv_maps = T(1) / T(fake_scores.size());
  if (dscores) dscores->clear();
  for (const auto& s : fake_scores) {
    T inv_n = T(1) / T(s.v.size());
    T l = T(0);
    Mat<T> d(s.rows, s.cols);
    for (size_t i = 0; i < s.v.size(); ++i) {
      T e = s.v[i] - T(1);
      l += e * e * inv_n;
      d.v[i] = T(2) * e * inv_n * inv_maps;
    }
    total += l * inv_maps;
    if (dscores) dscores->push_back(std::move(d));
  }
  return total;
}

template <typename T>
T lsgan_discriminator_loss(const std::vector<Mat<T>>& real_scores,
                           const std::vector<Mat<T>>& fake_scores,
                           std::vector<Mat<T>>* dreal = nullptr,
                           std::vector<Mat<T>>* dfake = nullptr) {
  T total = T(0);
  if (dreal) dreal->clear();
  if (dfake) dfake->clear();
  if (!real_scores.empty()) {
    T inv_maps = T(1) / T(real_scores.size());
    for (const auto& s : real_scores) {
      T inv_n = T(1) / T(s.v.size());
      Mat<T> d(s.rows, s.cols);
      for (size_t i = 0; i < s.v.size(); ++i) {
        T e = s.v[i] - T(1);
        total += e * e * inv_n * inv_maps;
        d.v[i] = T(2) * e * inv_n * inv_maps;
      }
      if (dreal) dreal->push_back(std::move(d));
    }
  }
  if (!fake_scores.empty()) {
    T inv_maps = T(1) / T(fake_scores.size());
    for (const auto& s : fake_scores) {
      T inv_n = T(1) / T(s.v.size());
      Mat<T> d(s.rows, s.cols);
      for (size_t i = 0; i < s.v.size(); ++i) {
        total += s.v[i] * s.v[i] * inv_n * inv_maps;
        d.v[i] = T(2) * s.v[i] * inv_n * inv_maps;
      }
      if (dfake) dfake->push_back(std::move(d));
    }
  }
  return total;
}

// One scoring head. Concrete implementations below; tests inject trivial
// ones with closed-form behavior.
template <typename T>
class ScoreHead {
 public:
  virtual ~ScoreHead() = default;
  virtual Mat<T> score(const Mat<T>& x) = 0;          // x: [1][n]
  virtual Mat<T> backward(const Mat<T>& dscore) = 0;  // returns dL/dx
  virtual void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) = 0;
};

// Period head: fold the waveform into [period][n/period] and convolve over
// the folded time axis, so periodic artifacts at that period line up
// channel-wise.
template <typename T>
class PeriodHead : public ScoreHead<T> {
 public:
  PeriodHead(int period, Rng rng) : period_(period) {
    auto* c1 = net_.template add<nn::Conv1d<T>>(period, 16, 5, 3);
    net_.template add<nn::Activation<T>>(nn::Act::lrelu);
    auto* c2 = net_.template add<nn::Conv1d<T>>(16, 32, 5, 3);
    net_.template add<nn::Activation<T>>(nn::Act::lrelu);
    auto* c3 = net_.template add<nn::Conv1d<T>>(32, 1, 3, 1);
    c1->init_kaiming(rng.derive("c1"));
    c2->init_kaiming(rng.derive("c2"));
    c3->init_kaiming(rng.derive("c3"));
  }

  Mat<T> score(const Mat<T>& x) override {
    n_ = x.cols;
    int cols = (x.cols + period_ - 1) / period_;
    Mat<T> folded(period_, cols);
    for (int i = 0; i < x.cols; ++i) folded.at(i % period_, i / period_) = x.at(0, i);
    return net_.forward(folded);
  }

  Mat<T> backward(const Mat<T>& dscore) override {
    Mat<T> dfolded = net_.backward(dscore);
    Mat<T> dx(1, n_);
    for (int i = 0; i < n_; ++i) dx.at(0, i) = dfolded.at(i % period_, i / period_);
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) override {
    net_.collect_params(prefix, out);
  }

 private:
  int period_;
  int n_ = 0;
  nn::Sequential<T> net_;
};

// Scale head: average-pool the waveform, then a strided conv stack.
template <typename T>
class ScaleHead : public ScoreHead<T> {
 public:
  ScaleHead(int scale, Rng rng) {
    if (scale > 1) net_.template add<nn::AvgPool1d<T>>(scale);
    auto* c1 = net_.template add<nn::Conv1d<T>>(1, 16, 15, 4);
    net_.template add<nn::Activation<T>>(nn::Act::lrelu);
    auto* c2 = net_.template add<nn::Conv1d<T>>(16, 32, 15, 4);
    net_.template add<nn::Activation<T>>(nn::Act::lrelu);
    auto* c3 = net_.template add<nn::Conv1d<T>>(32, 1, 3, 1);
    c1->init_kaiming(rng.derive("c1"));
    c2->init_kaiming(rng.derive("c2"));
    c3->init_kaiming(rng.derive("c3"));
  }

  Mat<T> score(const Mat<T>& x) override { return net_.forward(x); }
  Mat<T> backward(const Mat<T>& dscore) override { return net_.backward(dscore); }
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) override {
    net_.collect_params(prefix, out);
  }

 private:
  nn::Sequential<T> net_;
};

// The full critic bank: period heads at 2,3,5,7,11 and scale heads at
// 1,2,4.
template <typename T>
class DiscriminatorBank {
 public:
  explicit DiscriminatorBank(Rng rng) {
    for (int p : {2, 3, 5, 7, 11})
      heads_.push_back(std::make_unique<PeriodHead<T>>(p, rng.derive("period", p)));
    for (int s : {1, 2, 4})
      heads_.push_back(std::make_unique<ScaleHead<T>>(s, rng.derive("scale", s)));
  }

  size_t size() const { return heads_.size(); }
  ScoreHead<T>& head(size_t i) { return *heads_[i]; }

  std::vector<Mat<T>> score_all(const Mat<T>& x) {
    std::vector<Mat<T>> out;
    for (auto& h : heads_) out.push_back(h->score(x));
    return out;
  }

  // dscores must have been produced against the most recent score_all on
  // the same input. Returns dL/dx (sum over heads).
  Mat<T> backward_all(const std::vector<Mat<T>>& dscores, int n) {
    Mat<T> dx(1, n);
    for (size_t i = 0; i < heads_.size(); ++i) {
      Mat<T> d = heads_[i]->backward(dscores[i]);
      for (int j = 0; j < n; ++j) dx.at(0, j) += d.at(0, j);
    }
    return dx;
  }

  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    for (size_t i = 0; i < heads_.size(); ++i)
      heads_[i]->collect_params("disc." + std::to_string(i), out);
    return out;
  }

 private:
  std::vector<std::unique_ptr<ScoreHead<T>>> heads_;
};

}  // namespace spg::losses
