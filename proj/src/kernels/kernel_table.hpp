#pragma once

// Internal: the function-pointer table a backend fills in.

namespace spg::kernels {

struct KernelTable {
  void (*gemm_nn)(int, int, int, const float*, const float*, float*, bool);
  void (*gemm_tn)(int, int, int, const float*, const float*, float*, bool);
  void (*gemm_nt)(int, int, int, const float*, const float*, float*, bool);
  float (*dot)(const float*, const float*, int);
  float (*sumsq)(const float*, int);
  float (*asum)(const float*, int);
  void (*axpy)(int, float, const float*, float*);
  int (*nearest)(const float*, const float*, int, int, float*);
};

namespace avx2 {
extern const KernelTable table;
}

}  // namespace spg::kernels
