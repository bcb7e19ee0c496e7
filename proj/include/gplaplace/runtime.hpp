#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gplaplace {

/// Keeps large temporaries on the heap between optimiser evaluations. With glibc defaults the
/// multi-megabyte work matrices of the sparse objective are unmapped after every call and
/// page-faulted back in, which roughly doubles fitting time. Intended for executables; call once
/// at startup. A no-op on other C libraries.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
}

}  // namespace gplaplace
