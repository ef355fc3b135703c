#include <vector>

#include "arbrepair/cli.hpp"

int main(int argc, char** argv) {
    return arbrepair::run_cli({argv + 1, argv + argc});
}
