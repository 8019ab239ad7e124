#pragma once

namespace anerf {

// Tune glibc malloc for the render/train loops: they allocate and free
// matrix buffers at a high rate, and the default trim/mmap thresholds make
// the allocator hand pages back to the kernel on every free (observed 6x
// wall-clock on the render path). Call once at program start.
void tune_allocator();

}  // namespace anerf
