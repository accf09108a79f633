#include "hgs/logging.hpp"

#include <cstdlib>
#include <mutex>

#include <spdlog/spdlog.h>

namespace hgs {

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("HGS_LOG")) {
      spdlog::set_level(spdlog::level::from_str(lvl));
    }
  });
}

}  // namespace hgs
