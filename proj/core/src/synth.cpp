#include "heloc/synth.hpp"

#include <array>

#include "heloc/error.hpp"

namespace heloc {
namespace {

constexpr std::array<std::string_view, 10> kNames = {"a", "b", "c", "n", "i", "j", "acc", "tmp", "val", "sum"};
constexpr std::array<std::string_view, 6> kCallees = {"print", "log", "push", "emit", "check", "send"};

class Generator {
 public:
  Generator(ProgramFamily family, Rng& rng, int max_depth)
      : family_(family), rng_(rng), max_depth_(max_depth) {}

  std::string program() {
    std::string out;
    const std::size_t fns = 1 + rng_.index(2);
    for (std::size_t f = 0; f < fns; ++f) {
      out += "fn f" + std::to_string(f) + "(";
      const std::size_t params = rng_.index(3);
      for (std::size_t p = 0; p < params; ++p) {
        if (p > 0) out += ", ";
        out += std::string(pick(kNames));
      }
      out += ") {\n";
      block_body(out, 3, 1, family_ != ProgramFamily::mixed);
      out += "}\n";
    }
    return out;
  }

 private:
  template <std::size_t N>
  std::string_view pick(const std::array<std::string_view, N>& items) {
    return items[rng_.index(N)];
  }

  bool chance(double p) { return rng_.unit() < p; }

  void indent(std::string& out, int depth) { out.append(static_cast<std::size_t>(depth) * 2, ' '); }

  // Statements of a block whose statements sit at tree level `level`.
  // A template family opens every function with its characteristic block, so
  // no snippet is ambiguous between families.
  void block_body(std::string& out, int level, int depth, bool lead_with_family) {
    const std::size_t count = 2 + rng_.index(3);
    for (std::size_t s = 0; s < count; ++s) statement(out, level, depth, lead_with_family && s == 0);
  }

  // Height of an expression rooted at `level` may not exceed max_depth - level.
  std::string expression(int level, bool comparison) {
    const int room = max_depth_ - level;
    if (comparison && room >= 1) {
      const std::string_view op = family_ == ProgramFamily::branches   ? (chance(0.8) ? "==" : "<")
                                  : family_ == ProgramFamily::loops ? (chance(0.8) ? "<" : "==")
                                                                    : (chance(0.5) ? "<" : "==");
      return arithmetic(level + 1, 1) + " " + std::string(op) + " " + arithmetic(level + 1, 1);
    }
    return arithmetic(level, room);
  }

  std::string arithmetic(int level, int room) {
    if (room >= 1 && chance(0.35)) {
      static constexpr std::array<std::string_view, 3> ops = {"+", "-", "*"};
      return atom(level + 1) + " " + std::string(pick(ops)) + " " + atom(level + 1);
    }
    return atom(level);
  }

  std::string atom(int /*level*/) {
    if (chance(0.5)) return std::string(pick(kNames));
    return std::to_string(rng_.index(100));
  }

  void statement(std::string& out, int level, int depth, bool force_family = false) {
    // A nested block needs the statement, its block, the inner statements and
    // their operands: three levels below the statement itself.
    const bool can_nest = level + 3 <= max_depth_;
    double p_while = 0.15, p_if = 0.15;
    if (family_ == ProgramFamily::loops) {
      p_while = 0.6;
      p_if = 0.03;
    } else if (family_ == ProgramFamily::branches) {
      p_while = 0.03;
      p_if = 0.6;
    }
    double u = rng_.unit();
    if (force_family) u = family_ == ProgramFamily::loops ? 0.0 : p_while;
    indent(out, depth);
    if (can_nest && u < p_while) {
      const std::string var(pick(kNames));
      out += "while (" + expression(level + 1, true) + ") {\n";
      inner_body(out, level + 2, depth + 1, var);
      indent(out, depth);
      out += "}\n";
      return;
    }
    if (can_nest && u < p_while + p_if) {
      out += "if (" + expression(level + 1, true) + ") {\n";
      inner_body(out, level + 2, depth + 1, "");
      indent(out, depth);
      out += "}";
      if (family_ == ProgramFamily::branches ? chance(0.7) : chance(0.3)) {
        out += " else {\n";
        inner_body(out, level + 2, depth + 1, "");
        indent(out, depth);
        out += "}";
      }
      out += "\n";
      return;
    }
    simple_statement(out, level);
  }

  void inner_body(std::string& out, int level, int depth, const std::string& counter) {
    if (!counter.empty()) {
      indent(out, depth);
      // The binary form needs two levels below the statement.
      if (level + 2 <= max_depth_)
        out += counter + " = " + counter + " + 1;\n";
      else
        out += "inc(" + counter + ");\n";
    }
    const std::size_t count = 1 + rng_.index(3);
    for (std::size_t s = 0; s < count; ++s) statement(out, level, depth);
  }

  void simple_statement(std::string& out, int level) {
    const double u = rng_.unit();
    if (u < 0.6) {
      out += std::string(pick(kNames)) + " = " + expression(level + 1, false) + ";\n";
    } else if (u < 0.85) {
      out += std::string(pick(kCallees)) + "(";
      const std::size_t args = rng_.index(3);
      for (std::size_t a = 0; a < args; ++a) {
        if (a > 0) out += ", ";
        out += arithmetic(level + 1, max_depth_ - level - 1);
      }
      out += ");\n";
    } else {
      out += "return " + expression(level + 1, false) + ";\n";
    }
  }

  ProgramFamily family_;
  Rng& rng_;
  int max_depth_;
};

}  // namespace

ProgramFamily parse_family(std::string_view name) {
  if (name == "mixed") return ProgramFamily::mixed;
  if (name == "loops") return ProgramFamily::loops;
  if (name == "branches") return ProgramFamily::branches;
  throw DomainError("unknown program family '" + std::string(name) + "'");
}

std::string generate_program(ProgramFamily family, Rng& rng, int max_depth) {
  if (max_depth < 4) throw DomainError("generated programs need a depth budget of at least 4");
  return Generator(family, rng, max_depth).program();
}

}  // namespace heloc
