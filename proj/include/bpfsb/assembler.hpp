#pragma once

#include <string>
#include <vector>

#include "bpfsb/isa.hpp"

namespace bpfsb {

// Text assembly: one instruction per line, lowercase mnemonics, registers
// r0-r10, decimal or 0x-hex immediates, `label:` definitions, `+n`/`label`
// jump targets, `;` comments.
//
// Throws AsmSyntaxError (with line number) or UndefinedLabel.
std::vector<Instruction> parse_asm(const std::string& text);

} // namespace bpfsb
