#pragma once

namespace mvd::ndgrad {

/// Raises glibc's mmap and trim thresholds so large matrix temporaries are
/// reused from the heap. No-op on other C libraries.
void tune_allocator();

}  // namespace mvd::ndgrad
