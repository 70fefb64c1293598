#include "hamava/env.hpp"

#include <algorithm>
#include <cmath>

namespace hamava {

std::size_t ProtocolParams::recs_threshold() const {
    const auto t = static_cast<std::size_t>(std::floor(static_cast<double>(batch_size) * alpha));
    return std::clamp<std::size_t>(t, 1, std::max<std::size_t>(batch_size, 1));
}

}  // namespace hamava
