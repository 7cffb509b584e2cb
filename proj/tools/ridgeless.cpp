#include <iostream>

#include "ridgeless/cli.hpp"

int main(int argc, char** argv) {
    try {
        return ridgeless::run_cli(argc, argv, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << "\n";
        return ridgeless::exit_numerical;
    }
}
