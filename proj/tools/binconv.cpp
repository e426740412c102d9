#include <iostream>

#include "binconv/cli.hpp"

int main(int argc, char** argv)
{
	return binconv::run_cli(argc, argv, std::cout, std::cerr);
}
