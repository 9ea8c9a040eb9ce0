#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "gsflow/rng.hpp"

int main(int argc, char** argv) {
    gsflow::tune_allocator();
    return doctest::Context(argc, argv).run();
}
