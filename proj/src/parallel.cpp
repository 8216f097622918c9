#include "kkl/parallel.hpp"

#include <omp.h>

namespace kkl {

void set_thread_limit(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int thread_limit() { return omp_get_max_threads(); }

}  // namespace kkl
