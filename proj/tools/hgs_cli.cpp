#include <iostream>

#include "hgs/error.hpp"
#include "hgs/experiment.hpp"
#include "hgs/logging.hpp"

int main(int argc, char** argv) {
  hgs::init_logging();
  try {
    const auto spec = hgs::parse_command_line(std::vector<std::string>(argv + 1, argv + argc));
    if (!spec) return 0;
    const auto report = hgs::run_experiment(*spec);
    for (const auto& r : report.runs) {
      std::cout << r.name << ": total_time=" << r.total_time << "s final_loss=" << r.final_loss
                << "\n";
    }
    if (report.speedup) std::cout << "speedup=" << *report.speedup << "\n";
    std::cout << "summary: " << report.summary_file.string() << "\n";
  } catch (const hgs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
