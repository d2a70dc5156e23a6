#include <iostream>
#include <string>
#include <vector>

#include "app/app.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return qloss::app::run(args, std::cout, std::cerr);
}
