#include "fftw_lock.hpp"

namespace dynnet::detail {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace dynnet::detail
