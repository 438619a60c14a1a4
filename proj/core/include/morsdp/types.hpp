#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace morsdp {

using StateId = std::int32_t;
using ActionId = std::int32_t;
using Vec = std::vector<double>;

// Compensated (Neumaier) summation. Used wherever a sum feeds an oracle or a
// frozen expected value, so results are bit-reproducible for a fixed addend
// order.
struct NeumaierSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        double t = sum + x;
        if (std::fabs(sum) >= std::fabs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }

    double value() const { return sum + comp; }
};

}  // namespace morsdp
