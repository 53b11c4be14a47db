#include <vector>
#include <string>

#include "depthpatch/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return depthpatch::cli_main(args);
}
