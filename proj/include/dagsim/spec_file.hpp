#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dagsim/dag.hpp"

namespace dagsim {

/// A DAG read from a JSON spec document, plus its optional run defaults.
struct SpecFile {
    DagSpec dag;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
    /// Raw document bytes (hashed into run manifests).
    std::string text;
};

/// {"defaults": {"seed": .., "n": ..},
///  "nodes": [{"name": "A" | ["A", "B"], "kind": "root"|"child"|"td", "type": "...",
///             "params": {...}, "formula": "~ ...", "parents": [...], "output": "..."}]}
/// Unknown keys are rejected. Malformed JSON throws ParseError; every node
/// problem is collected into one ValidationError; graph checks run last.
SpecFile parse_spec(const std::string& text);
/// Throws IOError when the file cannot be read.
SpecFile load_spec(const std::string& path);

}  // namespace dagsim
