#pragma once

#include <istream>
#include <ostream>

#include "heloc/ast.hpp"

namespace heloc {

/// Reads the line-delimited interchange format: one JSON object per node with
/// fields id, type, text, start_line, end_line, parent (null for the root).
/// Children keep the file order of their records. Levels and paths are
/// recomputed. Throws FormatError for malformed records and TreeError for
/// dangling parents, duplicate ids, or cycles.
AstGraph load_ast_json(std::istream& in, const TreeCaps& caps = {});

/// Writes one record per node in preorder.
void save_ast_json(std::ostream& out, const AstGraph& graph);

}  // namespace heloc
