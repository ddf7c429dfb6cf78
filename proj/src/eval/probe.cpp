#include "spg/eval/probe.hpp"

#include <algorithm>
#include <cmath>

#include "spg/util/errors.hpp"
#include "spg/util/rng.hpp"

namespace spg::eval {

ProbeResult train_linear_probe(const std::vector<std::vector<float>>& x_train,
                               const std::vector<int>& y_train,
                               const std::vector<std::vector<float>>& x_eval,
                               const std::vector<int>& y_eval, int classes, uint64_t seed,
                               int steps, double lr) {
  if (x_train.empty() || x_eval.empty()) throw DataError("probe needs non-empty splits");
  size_t dim = x_train[0].size();

  // Standardize features with training statistics.
  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (const auto& x : x_train)
    for (size_t d = 0; d < dim; ++d) mean[d] += x[d];
  for (auto& m : mean) m /= double(x_train.size());
  for (const auto& x : x_train)
    for (size_t d = 0; d < dim; ++d) sd[d] += (x[d] - mean[d]) * (x[d] - mean[d]);
  for (auto& s : sd) s = std::max(std::sqrt(s / double(x_train.size())), 1e-6);

  auto norm = [&](const std::vector<float>& x) {
    std::vector<double> z(dim);
    for (size_t d = 0; d < dim; ++d) z[d] = (x[d] - mean[d]) / sd[d];
    return z;
  };

  // W: [classes][dim+1], last column is the bias.
  std::vector<double> w(size_t(classes) * (dim + 1), 0.0);
  std::vector<double> g(w.size()), m1(w.size(), 0.0), m2(w.size(), 0.0);
  Rng rng(seed);
  for (auto& v : w) v = rng.normal() * 0.01;

  std::vector<std::vector<double>> zx;
  zx.reserve(x_train.size());
  for (const auto& x : x_train) zx.push_back(norm(x));

  double inv_n = 1.0 / double(x_train.size());
  for (int step = 1; step <= steps; ++step) {
    std::fill(g.begin(), g.end(), 0.0);
    for (size_t i = 0; i < zx.size(); ++i) {
      std::vector<double> s(classes);
      double mx = -1e300;
      for (int c = 0; c < classes; ++c) {
        const double* wc = &w[size_t(c) * (dim + 1)];
        double acc = wc[dim];
        for (size_t d = 0; d < dim; ++d) acc += wc[d] * zx[i][d];
        s[c] = acc;
        mx = std::max(mx, acc);
      }
      double z = 0.0;
      for (int c = 0; c < classes; ++c) {
        s[c] = std::exp(s[c] - mx);
        z += s[c];
      }
      for (int c = 0; c < classes; ++c) {
        double p = s[c] / z;
        double err = (p - (c == y_train[i] ? 1.0 : 0.0)) * inv_n;
        double* gc = &g[size_t(c) * (dim + 1)];
        for (size_t d = 0; d < dim; ++d) gc[d] += err * zx[i][d];
        gc[dim] += err;
      }
    }
    double b1 = 1.0 - std::pow(0.9, step), b2 = 1.0 - std::pow(0.999, step);
    for (size_t j = 0; j < w.size(); ++j) {
      m1[j] = 0.9 * m1[j] + 0.1 * g[j];
      m2[j] = 0.999 * m2[j] + 0.001 * g[j] * g[j];
      w[j] -= lr * (m1[j] / b1) / (std::sqrt(m2[j] / b2) + 1e-8);
    }
  }

  ProbeResult res;
  res.train_count = int(x_train.size());
  res.eval_count = int(x_eval.size());
  std::vector<int> class_count(classes, 0);
  int correct = 0;
  for (size_t i = 0; i < x_eval.size(); ++i) {
    auto z = norm(x_eval[i]);
    int best = 0;
    double best_s = -1e300;
    for (int c = 0; c < classes; ++c) {
      const double* wc = &w[size_t(c) * (dim + 1)];
      double acc = wc[dim];
      for (size_t d = 0; d < dim; ++d) acc += wc[d] * z[d];
      if (acc > best_s) {
        best_s = acc;
        best = c;
      }
    }
    if (best == y_eval[i]) ++correct;
    ++class_count[y_eval[i]];
  }
  res.accuracy = double(correct) / double(x_eval.size());
  res.majority_baseline =
      double(*std::max_element(class_count.begin(), class_count.end())) / double(x_eval.size());
  return res;
}

std::vector<double> quartile_edges(std::vector<double> values) {
  if (values.empty()) throw DataError("no values for quartile edges");
  std::sort(values.begin(), values.end());
  auto q = [&](double f) {
    double idx = f * double(values.size() - 1);
    size_t lo = size_t(idx);
    double frac = idx - double(lo);
    return lo + 1 < values.size() ? values[lo] * (1 - frac) + values[lo + 1] * frac : values[lo];
  };
  return {q(0.25), q(0.5), q(0.75)};
}

int quartile_class(double v, const std::vector<double>& edges) {
  int c = 0;
  for (double e : edges)
    if (v > e) ++c;
  return c;
}

}  // namespace spg::eval
