#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nahmtx {

using cplx = std::complex<double>;

// Deterministic uniform generator. std::mt19937_64 with an explicit mapping
// to doubles; distributions from <random> are implementation-defined, so the
// mapping is done by hand to keep outputs byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : s_{seed ? seed : 0x9e3779b97f4a7c15ull} {}

    std::uint64_t next_u64()
    {
        // xorshift* variant; fixed algorithm, no library dependence
        std::uint64_t x = s_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        s_ = x;
        return x * 0x2545f4914f6cdd1dull;
    }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    cplx unit_complex();
    // standard normal via Box-Muller on the deterministic uniforms
    double normal();

private:
    std::uint64_t s_;
};

// Static-partition parallel loop. Chunks are assigned by index, results that
// need combining are the caller's responsibility (combine in chunk order for
// determinism). nthreads <= 1 runs inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  int nthreads);

// Global worker count used by solvers; set once by the CLI, defaults to 1.
int worker_threads();
void set_worker_threads(int n);

// Shortest-round-trip formatting for CSV determinism.
std::string fmt_double(double v);
std::string fmt_cplx(cplx v);

// FNV-1a 64-bit content hash, hex string.
std::uint64_t fnv1a(const void* data, std::size_t n);
std::string fnv1a_hex(const std::string& s);

std::string read_file(const std::string& path);       // throws MissingArtifact
void write_file(const std::string& path, const std::string& body);

} // namespace nahmtx
