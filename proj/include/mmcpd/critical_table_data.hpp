#pragma once

// Generated by `mmcpd critval`; mirrors data/critical_values.txt.

#include <array>
#include <cstddef>
#include <cstdint>

namespace mmcpd {

struct CriticalValueEntry {
    int dim = 0;
    double level = 0.0;
    double value = 0.0;
    double standard_error = 0.0;
    std::size_t replications = 0;
    std::size_t grid_points = 0;
    std::uint64_t seed = 0;
};

/// Published critical value for d = 2 at level 0.05.
inline constexpr double kReferenceCriticalValueD2Level05 = 2.408;

inline constexpr std::array<CriticalValueEntry, 15> kShippedCriticalValues = {{
    CriticalValueEntry{1, 0.1, 1.481150, 0.004527, 100000, 10000, 20190401},
    CriticalValueEntry{1, 0.05, 1.835510, 0.007779, 100000, 10000, 20190401},
    CriticalValueEntry{1, 0.01, 2.637277, 0.015277, 100000, 10000, 20190401},
    CriticalValueEntry{2, 0.1, 2.100654, 0.004790, 100000, 10000, 20190401},
    CriticalValueEntry{2, 0.05, 2.492962, 0.008950, 100000, 10000, 20190401},
    CriticalValueEntry{2, 0.01, 3.350056, 0.015992, 100000, 10000, 20190401},
    CriticalValueEntry{3, 0.1, 2.602125, 0.005943, 100000, 10000, 20190401},
    CriticalValueEntry{3, 0.05, 3.036589, 0.008188, 100000, 10000, 20190401},
    CriticalValueEntry{3, 0.01, 3.953005, 0.018173, 100000, 10000, 20190401},
    CriticalValueEntry{4, 0.1, 3.072133, 0.006464, 100000, 10000, 20190401},
    CriticalValueEntry{4, 0.05, 3.528626, 0.008959, 100000, 10000, 20190401},
    CriticalValueEntry{4, 0.01, 4.501264, 0.021492, 100000, 10000, 20190401},
    CriticalValueEntry{5, 0.1, 3.495511, 0.006659, 100000, 10000, 20190401},
    CriticalValueEntry{5, 0.05, 3.978348, 0.010152, 100000, 10000, 20190401},
    CriticalValueEntry{5, 0.01, 5.017277, 0.016383, 100000, 10000, 20190401},
}};

}  // namespace mmcpd
