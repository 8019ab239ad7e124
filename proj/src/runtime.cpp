#include "anerf/runtime.hpp"

#include <malloc.h>

namespace anerf {

void tune_allocator() {
#ifdef M_TRIM_THRESHOLD
    mallopt(M_TRIM_THRESHOLD, 64 << 20);
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
#endif
}

}  // namespace anerf
