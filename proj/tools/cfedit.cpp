#include <iostream>
#include <string>
#include <vector>

#include "cfedit/pipeline.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cfedit::run_cli(args, std::cout, std::cerr);
}
