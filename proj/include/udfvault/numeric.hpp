#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <type_traits>

#include "udfvault/dtype.hpp"

namespace udfvault {

namespace detail {

constexpr double pow2(int n) noexcept
{
    double r = 1.0;
    for (int i = 0; i < n; ++i)
        r *= 2.0;
    return r;
}

} // namespace detail

/// Conversion of a binary64 result to an output element type.
///
/// Integers: NaN becomes 0, otherwise round half to even and saturate at the
/// type bounds (so +-inf map to max/min). Floats: IEEE rounding of the cast,
/// with every NaN stored as the positive quiet NaN. Which operand's NaN an
/// operation propagates is not fixed by the source (compilers may commute
/// operands), so only a canonical NaN keeps outputs reproducible.
template <class T>
T cast_from_double(double v) noexcept
{
    if constexpr (std::is_floating_point_v<T>) {
        if (std::isnan(v))
            return std::numeric_limits<T>::quiet_NaN();
        return static_cast<T>(v);
    } else {
        if (std::isnan(v))
            return 0;
        // Default rounding mode is round-to-nearest-even and is never changed here.
        const double r = std::nearbyint(v);
        // 2^(digits) is exactly representable; comparing against it avoids the
        // inexact double value of max().
        constexpr double upper = detail::pow2(std::numeric_limits<T>::digits);
        constexpr double lower = std::is_signed_v<T> ? -upper : 0.0;
        if (r >= upper)
            return std::numeric_limits<T>::max();
        if (r <= lower)
            return std::numeric_limits<T>::min();
        return static_cast<T>(r);
    }
}

/// Reads one numeric element as binary64. The kind must be numeric.
double load_as_double(const std::uint8_t* p, TypeKind kind) noexcept;
/// Writes `v` to a numeric element according to cast_from_double.
void store_from_double(std::uint8_t* p, TypeKind kind, double v) noexcept;

} // namespace udfvault
