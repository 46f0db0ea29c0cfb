/******************************************************************************
 * Copyright 2026 The diffreg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * @file runtime.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_RUNTIME_HPP
#define DIFFREG_RUNTIME_HPP

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace diffreg {

/// Keeps freed large blocks in the heap instead of returning them to the OS.
///
/// Every optimization step allocates and frees the same multi-megabyte
/// buffers (im2col matrices, activations). With glibc defaults each of them
/// is a fresh mmap and pays page faults on first touch, which dominates the
/// step time on small images. Process-wide; call once from main().
inline void tune_allocator()
{
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TOP_PAD, 64 * 1024 * 1024);
#endif
}

}  // namespace diffreg

#endif  // DIFFREG_RUNTIME_HPP
