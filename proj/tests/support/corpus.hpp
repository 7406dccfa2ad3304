// Access to the checked-in litmus and malware corpus.
#pragma once

#include <string>
#include <vector>

#include "specguard/ir.hpp"
#include "specguard/simulator.hpp"

namespace specguard::testing {

std::string corpus_path(const std::string& relative);
std::string read_text(const std::string& path);
Program load_corpus_program(const std::string& relative);
SimInput load_corpus_input(const std::string& relative);

/// "v01" .. "v15".
std::vector<std::string> litmus_names();

/// Copy of `in` with the first bytes of `region` set to `bytes`.
SimInput with_memory(SimInput in, const std::string& region, std::vector<std::uint8_t> bytes);

}  // namespace specguard::testing
