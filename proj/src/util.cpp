#include "nahmtx/util.hpp"

#include "nahmtx/errors.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace nahmtx {

cplx Rng::unit_complex()
{
    double th = 2.0 * M_PI * uniform();
    return {std::cos(th), std::sin(th)};
}

double Rng::normal()
{
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300)
        u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {
std::atomic<int> g_workers{1};
}

int worker_threads() { return g_workers.load(); }
void set_worker_threads(int n) { g_workers.store(n < 1 ? 1 : n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  int nthreads)
{
    if (n == 0)
        return;
    if (nthreads <= 1 || n == 1) {
        body(0, n);
        return;
    }
    std::size_t nt = std::min<std::size_t>(nthreads, n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi)
            break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool)
        th.join();
}

std::string fmt_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

std::string fmt_cplx(cplx v)
{
    return fmt_double(v.real()) + (v.imag() < 0 || std::signbit(v.imag()) ? "-" : "+") +
           fmt_double(std::fabs(v.imag())) + "i";
}

std::uint64_t fnv1a(const void* data, std::size_t n)
{
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string fnv1a_hex(const std::string& s)
{
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(s.data(), s.size())));
    return buf;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw MissingArtifact("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& body)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw MissingArtifact("cannot write " + path);
    out << body;
}

} // namespace nahmtx
