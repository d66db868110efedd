#include <iostream>

#include "embnav/app.hpp"

int main(int argc, char** argv) { return embnav::app::dispatch(argc, argv, std::cout, std::cerr); }
