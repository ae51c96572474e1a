#include "nsrbm_main.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return nsrbm::cli::nsrbm_main(std::move(args));
}
