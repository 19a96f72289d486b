// SPDX-License-Identifier: Apache-2.0
#include "prefguide/cli.hpp"

int main(int argc, char** argv) { return prefguide::run_cli(argc, argv); }
