#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace archmap {

/// Entry point of the `archmap` tool. `args[0]` is the program name.
/// Subcommands: flatten, render, infer, eval, ablate, pipeline, synth.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace archmap
