#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace rvc::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,         ///< malformed flags or config file
    kInputError = 3,    ///< a module precondition was violated
    kNotConverged = 4,  ///< results written, but the learner did not converge
    kFailure = 5,       ///< internal invariant breach or failed theorem check
};

/// Inclusive start:stop:count grid.
struct Grid {
    double start = 0.0;
    double stop = 0.0;
    std::size_t count = 1;

    std::vector<double> values() const;
};

/// Throws std::invalid_argument on malformed text.
Grid parse_grid(const std::string& text);

/// Runs one subcommand. `args` excludes the program name. Result files go to
/// --output-dir, else $RVC_OUTPUT_DIR, else the working directory.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rvc::cli
