#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylevar {

// Training and tests run in double precision; define STYLEVAR_SINGLE_PRECISION
// to switch the whole library to float.
#ifdef STYLEVAR_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename... Args>
[[noreturn]] inline void fail(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    throw Error(os.str());
}

template <typename... Args>
inline void require(bool cond, Args&&... args) {
    if (!cond) fail(std::forward<Args>(args)...);
}

inline bool all_finite(const std::vector<real>& v) {
    for (real x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

// Barrier toggle for NaN/Inf checks on numerically sensitive ops
// (softmax, layer norm, cross-entropy inputs). On by default.
inline bool& finite_checks() {
    static bool enabled = true;
    return enabled;
}

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::vector<real>& v, std::uint64_t h = 0xcbf29ce484222325ull) {
    return v.empty() ? h : fnv1a(v.data(), v.size() * sizeof(real), h);
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

}  // namespace stylevar
