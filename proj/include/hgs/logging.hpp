#pragma once

namespace hgs {

// Sets the log level from the HGS_LOG environment variable (default: warn).
// Runs once per process; later calls are no-ops.
void init_logging();

}  // namespace hgs
