#include "heloc/ast_json.hpp"

#include <string>

#include <json.hpp>

#include "heloc/error.hpp"

namespace heloc {
namespace {

using nlohmann::json;

template <typename T>
T field(const json& record, const char* key, std::size_t line_no) {
  const auto it = record.find(key);
  if (it == record.end())
    throw FormatError("line " + std::to_string(line_no) + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError("line " + std::to_string(line_no) + ": field '" + key + "' has wrong type");
  }
}

}  // namespace

AstGraph load_ast_json(std::istream& in, const TreeCaps& caps) {
  std::vector<AstNode> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!record.is_object())
      throw FormatError("line " + std::to_string(line_no) + ": record is not an object");
    AstNode node;
    const auto id = field<long long>(record, "id", line_no);
    if (id < 0) throw FormatError("line " + std::to_string(line_no) + ": negative id");
    node.id = static_cast<NodeId>(id);
    node.type = field<std::string>(record, "type", line_no);
    node.text = field<std::string>(record, "text", line_no);
    node.start_line = field<int>(record, "start_line", line_no);
    node.end_line = field<int>(record, "end_line", line_no);
    if (node.start_line < 1 || node.end_line < node.start_line)
      throw FormatError("line " + std::to_string(line_no) + ": invalid line span");
    const auto parent = record.find("parent");
    if (parent == record.end())
      throw FormatError("line " + std::to_string(line_no) + ": missing field 'parent'");
    if (!parent->is_null()) {
      if (!parent->is_number_integer() || parent->get<long long>() < 0)
        throw FormatError("line " + std::to_string(line_no) + ": parent must be a node id or null");
      node.parent = parent->get<NodeId>();
    }
    records.push_back(std::move(node));
  }
  if (records.empty()) throw FormatError("no node records");
  if (records.size() > caps.max_nodes) throw CapError("max_nodes", caps.max_nodes, records.size());

  const std::size_t n = records.size();
  std::vector<AstNode> nodes(n);
  std::vector<bool> seen(n, false);
  for (AstNode& r : records) {
    if (r.id >= n) throw TreeError("node id " + std::to_string(r.id) + " outside 0.." + std::to_string(n - 1));
    if (seen[r.id]) throw TreeError("duplicate node id " + std::to_string(r.id));
    seen[r.id] = true;
  }
  // Children follow file order, so attach while walking the records as read.
  for (const AstNode& r : records) {
    if (r.parent) {
      if (*r.parent >= n)
        throw TreeError("node " + std::to_string(r.id) + " has dangling parent " +
                        std::to_string(*r.parent));
      if (*r.parent == r.id)
        throw TreeError("cycle: node " + std::to_string(r.id) + " is its own parent");
    }
  }
  for (AstNode& r : records) {
    const NodeId id = r.id;
    auto parent = r.parent;
    std::vector<NodeId> kept_children = std::move(nodes[id].children);
    nodes[id] = std::move(r);
    nodes[id].children = std::move(kept_children);
    if (parent) nodes[*parent].children.push_back(id);
  }
  return AstGraph::from_nodes(std::move(nodes), caps);
}

void save_ast_json(std::ostream& out, const AstGraph& graph) {
  // Preorder keeps every parent's children in their original order.
  std::vector<NodeId> stack{graph.root()};
  while (!stack.empty()) {
    const AstNode& node = graph.node(stack.back());
    stack.pop_back();
    for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.push_back(*it);
    json record = {{"id", node.id},
                   {"type", node.type},
                   {"text", node.text},
                   {"start_line", node.start_line},
                   {"end_line", node.end_line},
                   {"parent", node.parent ? json(*node.parent) : json(nullptr)}};
    out << record.dump() << '\n';
  }
}

}  // namespace heloc
