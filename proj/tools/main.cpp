#include <vector>

#include "lumir/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lumir::cli::run(args);
}
