#pragma once

namespace pllvi {

// Training allocates and frees multi-megabyte tape buffers every batch. With
// glibc defaults those go through mmap/munmap and heap trimming, which costs
// about as much system time as the arithmetic. Raises the thresholds so the
// memory is reused; a no-op on other C libraries. Call once at startup.
void configure_allocator();

}  // namespace pllvi
