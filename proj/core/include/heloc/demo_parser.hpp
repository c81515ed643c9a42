#pragma once

#include <string_view>

#include "heloc/ast.hpp"

namespace heloc {

/// Node types produced by the demo-language parser.
namespace node_type {
inline constexpr std::string_view kCompilationUnit = "CompilationUnit";
inline constexpr std::string_view kFunctionDecl = "FunctionDecl";
inline constexpr std::string_view kParam = "Param";
inline constexpr std::string_view kBlock = "Block";
inline constexpr std::string_view kAssign = "Assign";
inline constexpr std::string_view kIf = "If";
inline constexpr std::string_view kWhile = "While";
inline constexpr std::string_view kCall = "Call";
inline constexpr std::string_view kReturn = "Return";
inline constexpr std::string_view kBinaryOp = "BinaryOp";
inline constexpr std::string_view kIdentifier = "Identifier";
inline constexpr std::string_view kIntLiteral = "IntLiteral";
}  // namespace node_type

/// Parses a demo-language program:
///
///   program    := fn_decl+
///   fn_decl    := "fn" IDENT "(" [IDENT {"," IDENT}] ")" block
///   block      := "{" stmt* "}"
///   stmt       := IDENT "=" expr ";" | "if" "(" expr ")" block ["else" block]
///               | "while" "(" expr ")" block | call ";" | "return" [expr] ";"
///   expr       := sum [("<" | "==") sum]
///   sum        := product {("+" | "-") product}
///   product    := primary {"*" primary}
///   primary    := INT | IDENT | call | "(" expr ")"
///   call       := IDENT "(" [expr {"," expr}] ")"
///
/// `//` starts a comment running to the end of the line. Node ids follow
/// preorder; each node's text is the source span it covers.
/// Throws SyntaxError (with line/column) or CapError.
AstGraph parse_demo_source(std::string_view source, const TreeCaps& caps = {});

}  // namespace heloc
