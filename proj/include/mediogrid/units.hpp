#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace mediogrid
{
    using Seconds = double;
    using Mbps = double;
    using Bytes = std::uint64_t;

    using NodeId = std::string;
    using ClusterId = std::string;

    inline constexpr Bytes kBytesPerMB = 1'000'000;
    inline constexpr Bytes kBytesPerGB = 1'000'000'000;
    inline constexpr double kBitsPerByte = 8.0;

    // Resolution of simulation time. Comparisons between event times and the
    // wire representation of timestamps both use this grid.
    inline constexpr Seconds kTimeQuantum = 1e-9;

    inline constexpr Bytes megabytes(std::uint64_t mb) noexcept { return mb * kBytesPerMB; }

    inline constexpr double to_megabits(Bytes bytes) noexcept
    {
        return static_cast<double>(bytes) * kBitsPerByte / 1e6;
    }

    /// Snap a time onto the nanosecond grid.
    inline Seconds quantize_time(Seconds t) noexcept
    {
        return std::round(t * 1e9) / 1e9;
    }
} // namespace mediogrid
