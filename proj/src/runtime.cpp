#include "pllvi/runtime.hpp"

#include <cstdlib>  // defines __GLIBC__ on glibc

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pllvi {

void configure_allocator() {
#if defined(__GLIBC__)
  // Setting any threshold turns off glibc's adaptive mmap threshold, so pin
  // it at its ceiling and keep freed heap memory for the next batch.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TOP_PAD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

}  // namespace pllvi
