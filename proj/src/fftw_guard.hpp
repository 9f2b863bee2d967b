#pragma once

#include <mutex>

namespace ctc::detail {

/// FFTW plan creation and destruction are not thread-safe; hold this around them.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace ctc::detail
