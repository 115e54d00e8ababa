#include <string>
#include <vector>

#include "plab/cli.hpp"

int main(int argc, char** argv) {
    return plab::cli_dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
