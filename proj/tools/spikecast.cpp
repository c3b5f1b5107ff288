// SPDX-License-Identifier: Apache-2.0
#include "spikecast/cli.hpp"

int main(int argc, char** argv) { return spikecast::cli::run(argc, argv); }
