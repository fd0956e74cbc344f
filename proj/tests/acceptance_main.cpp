#include "svflow/acceptance.hpp"

#include <iostream>

int main()
{
    return svf::run_acceptance(std::cout) == 0 ? 0 : 1;
}
