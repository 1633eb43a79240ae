// SPDX-License-Identifier: Apache-2.0
#include "mssf/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mssf {

void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n < 1 ? 1 : n);
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace mssf
