#include "nahmtx/kern.hpp"

namespace nahmtx::kern {

const Kernels* neon_set(); // defined in neon.cpp (null off-aarch64)

namespace {

const Kernels* pick()
{
    if (const Kernels* k = avx2_if_supported())
        return k;
    if (const Kernels* k = neon_set())
        return k;
    return &scalar;
}

const Kernels* g_active = pick();

} // namespace

const Kernels& active() { return *g_active; }

void set_active(const Kernels& k) { g_active = &k; }

} // namespace nahmtx::kern
