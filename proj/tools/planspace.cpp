#include "planspace/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return planspace::run_cli(argc, argv, std::cout, std::cerr);
}
