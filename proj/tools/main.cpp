#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    syncrec::cli::install_signal_handlers();
    return syncrec::cli::run_command(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
