#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace forge::cli {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kMissingInput = 3,
    kValidation = 4,
    kFormat = 5,
    kAuditFailed = 6,
};

// Every command records itself as run-<command>.json in its output directory,
// e.g. run-mix.json or run-needle-gen.json.
std::string run_manifest_name(const std::string &command);

// Entry point behind the `forge` binary. argv excludes the program name.
// Reports go to `out`, logs and errors to standard error.
int run(const std::vector<std::string> &args, std::ostream &out);

} // namespace forge::cli
