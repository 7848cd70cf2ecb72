#include <csignal>
#include <iostream>

#include "exr/cli.hpp"

namespace {

std::atomic<int> interrupts{0};

extern "C" void on_sigint(int) {
    interrupts.fetch_add(1);
}

}  // namespace

int main(int argc, char** argv) {
    struct sigaction sa {};
    sa.sa_handler = on_sigint;
    sigemptyset(&sa.sa_mask);
    sigaction(SIGINT, &sa, nullptr);
    sigaction(SIGTERM, &sa, nullptr);
    return exr::run_cli(argc, argv, {std::cout, std::cerr}, &interrupts);
}
