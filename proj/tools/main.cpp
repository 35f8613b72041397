#include "cli_app.hpp"

int main(int argc, char** argv) {
    return mmcpd::cli::run(argc, argv, std::cout, std::cerr);
}
