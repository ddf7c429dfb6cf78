#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "spg/nn/adam.hpp"
#include "spg/nn/layers.hpp"
#include "spg/nn/serialize.hpp"
#include "spg/util/rng.hpp"

using namespace spg;
using namespace spg::nn;

namespace {

// Central-difference gradient check over every parameter and every input
// element of a network, in double precision. loss = sum(w .* y) with fixed
// random w so all outputs matter.
void gradcheck(Sequential<double>& net, int cin, int tin, uint64_t seed, double tol = 1e-6) {
  Rng rng(seed);
  Mat<double> x(cin, tin);
  for (auto& v : x.v) v = rng.normal() * 0.7;

  Mat<double> y0 = net.forward(x);
  Mat<double> w(y0.rows, y0.cols);
  for (auto& v : w.v) v = rng.uniform(-1.0, 1.0);

  auto loss = [&](const Mat<double>& in) {
    Mat<double> y = net.forward(in);
    double s = 0;
    for (size_t i = 0; i < y.v.size(); ++i) s += w.v[i] * y.v[i];
    return s;
  };

  std::vector<ParamRef<double>> params;
  net.collect_params("net", params);
  zero_grads(params);
  net.forward(x);
  Mat<double> dx = net.backward(w);

  const double h = 1e-5;
  // Input gradients.
  for (size_t i = 0; i < x.v.size(); i += 7) {
    Mat<double> xp = x, xm = x;
    xp.v[i] += h;
    xm.v[i] -= h;
    double fd = (loss(xp) - loss(xm)) / (2 * h);
    CHECK(dx.v[i] == doctest::Approx(fd).epsilon(tol).scale(0.5));
  }
  // Parameter gradients.
  for (auto& p : params) {
    for (size_t i = 0; i < p.w->size(); i += 5) {
      double keep = (*p.w)[i];
      (*p.w)[i] = keep + h;
      double lp = loss(x);
      (*p.w)[i] = keep - h;
      double lm = loss(x);
      (*p.w)[i] = keep;
      double fd = (lp - lm) / (2 * h);
      CHECK((*p.g)[i] == doctest::Approx(fd).epsilon(tol).scale(0.5));
    }
  }
}

}  // namespace

TEST_CASE("conv1d output length and padding") {
  Conv1d<float> c(3, 5, 8, 4);
  CHECK(c.out_len(64) == 16);
  CHECK(c.out_len(320) == 80);
  Conv1d<float> c2(3, 5, 7, 1);
  CHECK(c2.out_len(50) == 50);
  CHECK_THROWS_AS(Conv1d<float>(1, 1, 2, 4), ConfigError);
}

TEST_CASE("conv transpose upsamples exactly stride-fold") {
  ConvTranspose1d<float> d(4, 2, 8, 4);
  CHECK(d.out_len(16) == 64);
  Rng rng(1);
  d.init_kaiming(rng.derive("w"));
  Mat<float> x(4, 16);
  for (auto& v : x.v) v = float(rng.normal());
  auto y = d.forward(x);
  CHECK(y.rows == 2);
  CHECK(y.cols == 64);
}

TEST_CASE("gradcheck: single conv") {
  Sequential<double> net;
  auto* c = net.add<Conv1d<double>>(2, 3, 5, 1);
  c->init_kaiming(Rng(11).derive("w"));
  gradcheck(net, 2, 17, 100);
}

TEST_CASE("gradcheck: strided conv") {
  Sequential<double> net;
  auto* c = net.add<Conv1d<double>>(3, 4, 8, 4);
  c->init_kaiming(Rng(12).derive("w"));
  gradcheck(net, 3, 32, 101);
}

TEST_CASE("gradcheck: causal conv") {
  Sequential<double> net;
  auto* c = net.add<Conv1d<double>>(2, 2, 6, 2, true);
  c->init_kaiming(Rng(13).derive("w"));
  gradcheck(net, 2, 24, 102);
}

TEST_CASE("gradcheck: conv transpose") {
  Sequential<double> net;
  auto* d = net.add<ConvTranspose1d<double>>(3, 2, 8, 4);
  d->init_kaiming(Rng(14).derive("w"));
  gradcheck(net, 3, 9, 103);
}

TEST_CASE("gradcheck: activations") {
  for (Act a : {Act::elu, Act::tanh, Act::lrelu}) {
    Sequential<double> net;
    auto* c = net.add<Conv1d<double>>(2, 3, 3, 1);
    c->init_kaiming(Rng(15).derive("w"));
    net.add<Activation<double>>(a);
    gradcheck(net, 2, 11, 104 + int(a));
  }
}

TEST_CASE("gradcheck: pooling") {
  Sequential<double> net;
  net.add<AvgPool1d<double>>(4);
  gradcheck(net, 3, 32, 108);
}

TEST_CASE("gradcheck: encoder-decoder stack") {
  Sequential<double> net;
  auto r = Rng(16);
  auto* c1 = net.add<Conv1d<double>>(1, 4, 8, 4);
  net.add<Activation<double>>(Act::elu);
  auto* c2 = net.add<Conv1d<double>>(4, 6, 4, 2);
  net.add<Activation<double>>(Act::elu);
  auto* d1 = net.add<ConvTranspose1d<double>>(6, 4, 4, 2);
  net.add<Activation<double>>(Act::elu);
  auto* d2 = net.add<ConvTranspose1d<double>>(4, 1, 8, 4);
  net.add<Activation<double>>(Act::tanh);
  c1->init_kaiming(r.derive("c1"));
  c2->init_kaiming(r.derive("c2"));
  d1->init_kaiming(r.derive("d1"));
  d2->init_kaiming(r.derive("d2"));
  CHECK(net.out_len(64) == 64);
  gradcheck(net, 1, 64, 109);
}

TEST_CASE("gradcheck: tap gradient injection") {
  Sequential<double> net;
  auto r = Rng(17);
  auto* c1 = net.add<Conv1d<double>>(2, 3, 3, 1);
  net.add<Activation<double>>(Act::elu);
  auto* c2 = net.add<Conv1d<double>>(3, 2, 3, 1);
  c1->init_kaiming(r.derive("c1"));
  c2->init_kaiming(r.derive("c2"));

  Rng rng(200);
  Mat<double> x(2, 13);
  for (auto& v : x.v) v = rng.normal();

  Mat<double> tap;
  Mat<double> y = net.forward_tap(x, 1, tap);
  Mat<double> wy(y.rows, y.cols), wt(tap.rows, tap.cols);
  for (auto& v : wy.v) v = rng.uniform(-1.0, 1.0);
  for (auto& v : wt.v) v = rng.uniform(-1.0, 1.0);

  auto loss = [&](const Mat<double>& in) {
    Mat<double> t;
    Mat<double> out = net.forward_tap(in, 1, t);
    double s = 0;
    for (size_t i = 0; i < out.v.size(); ++i) s += wy.v[i] * out.v[i];
    for (size_t i = 0; i < t.v.size(); ++i) s += wt.v[i] * t.v[i];
    return s;
  };

  net.forward_tap(x, 1, tap);
  Mat<double> dx = net.backward_with_tap(wy, 1, wt);
  const double h = 1e-5;
  for (size_t i = 0; i < x.v.size(); i += 3) {
    Mat<double> xp = x, xm = x;
    xp.v[i] += h;
    xm.v[i] -= h;
    double fd = (loss(xp) - loss(xm)) / (2 * h);
    CHECK(dx.v[i] == doctest::Approx(fd).epsilon(1e-6).scale(0.5));
  }
}

TEST_CASE("receptive field span tracking") {
  Sequential<float> net;
  net.add<Conv1d<float>>(1, 2, 8, 4);       // causal=false, pad_left = 2
  net.add<Activation<float>>(Act::elu);
  net.add<Conv1d<float>>(2, 2, 4, 2);       // pad_left = 1
  long lo = 0, hi = 0;
  net.in_span(lo, hi);
  // Output 0 depends on conv2 inputs [-1, 2] -> conv1 inputs [-6, 13].
  CHECK(lo == -6);
  CHECK(hi == 13);
}

TEST_CASE("adam first step moves weights by ~lr in the gradient direction") {
  std::vector<double> w = {1.0, -2.0, 0.5};
  std::vector<double> g = {0.3, -0.7, 0.0};
  std::vector<ParamRef<double>> params{{"w", &w, &g}};
  Adam<double> opt(params);
  opt.step(0.01);
  // After bias correction, first update is lr * g / (|g| + eps).
  CHECK(w[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(w[2] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr<double>(0, 100, 2e-4, 2e-5) == doctest::Approx(2e-4));
  CHECK(cosine_lr<double>(100, 100, 2e-4, 2e-5) == doctest::Approx(2e-5));
  CHECK(cosine_lr<double>(50, 100, 2e-4, 2e-5) == doctest::Approx((2e-4 + 2e-5) / 2));
}

TEST_CASE("checkpoint container round-trips and detects corruption") {
  Sequential<float> net;
  auto* c = net.add<Conv1d<float>>(2, 3, 5, 1);
  c->init_kaiming(Rng(77).derive("w"));
  std::vector<ParamRef<float>> params;
  net.collect_params("m", params);

  nlohmann::json meta = {{"kind", "test"}, {"value", 42}};
  std::string path = "test_ckpt.bin";
  write_blob_file(path, meta, params_to_blobs(params));

  std::vector<float> orig = *params[0].w;
  for (auto& v : *params[0].w) v = -9.0f;
  std::vector<TensorBlob> blobs;
  auto meta2 = read_blob_file(path, blobs);
  CHECK(meta2["kind"] == "test");
  CHECK(meta2["value"] == 42);
  blobs_to_params(blobs, params);
  for (size_t i = 0; i < orig.size(); ++i) CHECK((*params[0].w)[i] == orig[i]);

  // Flip one byte in the middle: checksum must catch it.
  {
    FILE* f = fopen(path.c_str(), "r+b");
    fseek(f, 30, SEEK_SET);
    int ch = fgetc(f);
    fseek(f, 30, SEEK_SET);
    fputc(ch ^ 0x40, f);
    fclose(f);
  }
  std::vector<TensorBlob> blobs2;
  CHECK_THROWS_AS(read_blob_file(path, blobs2), DataError);
  std::remove(path.c_str());
}
