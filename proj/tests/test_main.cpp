#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "warnings.hpp"

int main(int argc, char** argv) {
  bsfree::set_warning_handler(nullptr);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
