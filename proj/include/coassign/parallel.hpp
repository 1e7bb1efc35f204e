#pragma once

// Execution policy for kernels that ship both an OpenMP and a serial
// reference path.  The serial path is the one the tests pin results to; the
// parallel path must reproduce it exactly.

#ifdef _OPENMP
#include <omp.h>
#endif

namespace coassign {

enum class Exec { Serial, Parallel };

inline int max_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace coassign
