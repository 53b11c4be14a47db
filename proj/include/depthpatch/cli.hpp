#pragma once

#include <string>
#include <vector>

#include "depthpatch/transform.hpp"

namespace depthpatch {

// Entry point behind tools/depthpatch. Exit codes: 0 success, 2 config
// error, 3 data error, 4 numeric failure.
int cli_main(const std::vector<std::string>& args);

// Loads a patch from either an exact checkpoint sidecar (.json) or an 8-bit
// PNG rendering.
Patch load_patch_file(const std::string& path);

}  // namespace depthpatch
