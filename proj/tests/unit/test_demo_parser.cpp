#include <doctest.h>

#include "heloc/demo_parser.hpp"
#include "heloc/error.hpp"
#include "heloc/synth.hpp"

using namespace heloc;

namespace {

std::vector<std::string> types(const AstGraph& g) {
  std::vector<std::string> out;
  for (const AstNode& n : g.nodes()) out.push_back(n.type);
  return out;
}

}  // namespace

TEST_CASE("minimal function") {
  const AstGraph g = parse_demo_source("fn f(){x=1;}");
  // CompilationUnit > FunctionDecl > Block > Assign > {Identifier, IntLiteral}
  REQUIRE(g.size() == 6);
  CHECK(types(g) == std::vector<std::string>{"CompilationUnit", "FunctionDecl", "Block", "Assign",
                                             "Identifier", "IntLiteral"});
  CHECK(g.levels() == std::vector<int>{0, 1, 2, 3, 4, 4});
  CHECK(g.node(1).text == "fn f(){x=1;}");
  CHECK(g.node(3).text == "x=1;");
  CHECK(g.node(4).text == "x");
  CHECK(g.node(5).text == "1");
}

TEST_CASE("statements and expressions") {
  const char* src =
      "fn main(a, b) {\n"
      "  while (i < 10) {\n"
      "    i = i + 1;\n"
      "  }\n"
      "  if (a == b) { print(a, 2 * b); } else { return; }\n"
      "  return (a - b) * 3;\n"
      "}\n";
  const AstGraph g = parse_demo_source(src);
  const auto t = types(g);
  CHECK(std::count(t.begin(), t.end(), "Param") == 2);
  CHECK(std::count(t.begin(), t.end(), "While") == 1);
  CHECK(std::count(t.begin(), t.end(), "If") == 1);
  CHECK(std::count(t.begin(), t.end(), "Call") == 1);
  CHECK(std::count(t.begin(), t.end(), "Return") == 2);
  CHECK(std::count(t.begin(), t.end(), "Block") == 4);

  const auto loop = std::find(t.begin(), t.end(), "While") - t.begin();
  CHECK(g.node(static_cast<NodeId>(loop)).start_line == 2);
  CHECK(g.node(static_cast<NodeId>(loop)).end_line == 4);
  CHECK(g.node(0).start_line == 1);
  CHECK(g.node(0).end_line == 7);

  // Left associativity: a - b - c parses as (a - b) - c.
  const AstGraph e = parse_demo_source("fn f(){x=a-b-c;}");
  const AstNode& top = e.node(e.node(3).children[1]);
  CHECK(top.type == "BinaryOp");
  CHECK(top.text == "a-b-c");
  CHECK(e.node(top.children[0]).text == "a-b");
}

TEST_CASE("syntax errors carry positions") {
  CHECK_THROWS_AS(parse_demo_source(""), SyntaxError);
  CHECK_THROWS_AS(parse_demo_source("   // only a comment\n"), SyntaxError);
  try {
    parse_demo_source("fn f() {\n  x = ;\n}");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 7);
  }
  CHECK_THROWS_AS(parse_demo_source("fn f() { x = 1 }"), SyntaxError);
  CHECK_THROWS_AS(parse_demo_source("fn f() { x = 1; "), SyntaxError);
  CHECK_THROWS_AS(parse_demo_source("fn f() { x = $; }"), SyntaxError);
  CHECK_THROWS_AS(parse_demo_source("fn f() { 12abc = 1; }"), SyntaxError);
}

TEST_CASE("caps") {
  TreeCaps shallow{4, 200, 1000};
  CHECK_NOTHROW(parse_demo_source("fn f(){x=1;}", shallow));
  CHECK_THROWS_AS(parse_demo_source("fn f(){ if (a) { x = 1; } }", shallow), CapError);
  TreeCaps tiny{30, 200, 5};
  CHECK_THROWS_AS(parse_demo_source("fn f(){x=1;}", tiny), CapError);
}

TEST_CASE("determinism") {
  const char* src = "fn f(n){ while (n < 3) { n = n + 1; } return n; }";
  CHECK(parse_demo_source(src) == parse_demo_source(src));
}

TEST_CASE("generated programs parse within the depth budget") {
  Rng rng(11);
  for (auto family : {ProgramFamily::mixed, ProgramFamily::loops, ProgramFamily::branches}) {
    for (int i = 0; i < 100; ++i) {
      const std::string src = generate_program(family, rng, 6);
      const AstGraph g = parse_demo_source(src, TreeCaps{6, 200, 1000});
      CHECK(g.depth() <= 6);
    }
  }
}
