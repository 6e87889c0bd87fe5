#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "kdpg/compile.hpp"

namespace kdpg {

/// Runs an external checker: `command` (argv, resolved through PATH) gets the
/// detokenized program on stdin; exit status 0 means compilable. A nonzero
/// status maps to UnexpectedToken at position 0 since the checker gives no
/// finer category.
///
/// Throws kdpg::Error with kind "SpawnFailure" or "Timeout".
CompileResult external_check(const std::vector<std::string>& command, const Vocab& vocab,
                             const TokenSeq& seq,
                             std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

}  // namespace kdpg
