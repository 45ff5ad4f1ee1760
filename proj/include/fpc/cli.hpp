#pragma once

namespace fpc::cli {

// Full command-line surface; returns the process exit code.
// 0 success, 1 usage error, 2 I/O error, 3 validation/numeric failure.
int run(int argc, const char* const* argv);

}  // namespace fpc::cli
