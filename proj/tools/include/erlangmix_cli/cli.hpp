#pragma once

namespace erlangmix::cli {

/// Entry point of the `erlangmix` executable. Exit codes: 0 success,
/// 2 configuration error, 3 data error, 4 numeric failure.
int run(int argc, const char* const* argv);

}  // namespace erlangmix::cli
