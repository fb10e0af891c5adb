#pragma once

// Propositional domain theories: a rule set is an acyclic collection of
// definite clauses with optional negated antecedents, evaluated under
// negation as failure. This is the symbolic half of the pipeline; rule sets
// are compiled into networks by translate() and refined from there.
//
// Grammar (line comments start with '%'):
//   statement := directive | rule
//   directive := "input" ident "." | "output" ident "."
//   rule      := ident ":-" literal ("," literal)* "."
//   literal   := ["not"] ident
//
// Identifiers start with a letter or underscore and may contain letters,
// digits, '_', '-', '=' (the latter two so feature atoms like pos-12=A can
// be referenced directly). "not", "input" and "output" are reserved.
//
// Symbols referenced but never defined and not declared are treated as
// inputs; consequents never referenced as antecedents (or declared) are
// outputs. A symbol with no rule and no assignment evaluates to false.

#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace regent {

struct Literal {
  std::string symbol;
  bool negated = false;

  bool operator==(const Literal&) const = default;
};

struct Rule {
  std::string consequent;
  std::vector<Literal> antecedents;

  bool operator==(const Rule&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t col, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", col " +
                           std::to_string(col) + ": " + what),
        line(line),
        col(col) {}
  std::size_t line, col;
};

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RuleSet {
  std::vector<Rule> rules;
  std::vector<std::string> inputs;   // declaration order, then first use
  std::vector<std::string> outputs;  // declaration order, then first definition

  bool operator==(const RuleSet&) const = default;

  bool is_input(const std::string& s) const {
    for (const auto& i : inputs)
      if (i == s) return true;
    return false;
  }

  bool is_output(const std::string& s) const {
    for (const auto& o : outputs)
      if (o == s) return true;
    return false;
  }

  std::vector<std::size_t> rules_for(const std::string& symbol) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rules.size(); ++i)
      if (rules[i].consequent == symbol) out.push_back(i);
    return out;
  }

  // distinct consequent symbols in first-definition order
  std::vector<std::string> consequents() const {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& r : rules)
      if (seen.insert(r.consequent).second) out.push_back(r.consequent);
    return out;
  }
};

namespace detail {

struct Token {
  enum Kind { Ident, Arrow, Comma, Period, End } kind;
  std::string text;
  std::size_t line, col;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_blank();
    std::size_t line = line_, col = col_;
    if (pos_ >= text_.size()) return {Token::End, "", line, col};
    char c = text_[pos_];
    if (c == ',') {
      advance();
      return {Token::Comma, ",", line, col};
    }
    if (c == '.') {
      advance();
      return {Token::Period, ".", line, col};
    }
    if (c == ':') {
      if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '-') {
        advance();
        advance();
        return {Token::Arrow, ":-", line, col};
      }
      throw ParseError(line, col, "expected ':-'");
    }
    if (is_ident_start(c)) {
      std::string s;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) {
        s.push_back(text_[pos_]);
        advance();
      }
      return {Token::Ident, s, line, col};
    }
    throw ParseError(line, col, std::string("unexpected character '") + c + "'");
  }

 private:
  static bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '=';
  }

  void skip_blank() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1, col_ = 1;
};

}  // namespace detail

// Parses rule text, derives the input/output partition and validates the
// result: no cyclic definitions, no rule whose consequent was declared an
// input, no self-referential rule.
inline RuleSet parse_rules(std::string_view text) {
  detail::Lexer lex(text);
  RuleSet rs;
  std::vector<std::string> declared_inputs, declared_outputs;

  for (;;) {
    detail::Token t = lex.next();
    if (t.kind == detail::Token::End) break;
    if (t.kind != detail::Token::Ident)
      throw ParseError(t.line, t.col, "expected identifier at statement start");

    if (t.text == "input" || t.text == "output") {
      detail::Token name = lex.next();
      if (name.kind != detail::Token::Ident || name.text == "not" ||
          name.text == "input" || name.text == "output")
        throw ParseError(name.line, name.col,
                         "expected symbol after '" + t.text + "'");
      detail::Token dot = lex.next();
      if (dot.kind != detail::Token::Period)
        throw ParseError(dot.line, dot.col, "expected '.' after directive");
      auto& list = (t.text == "input") ? declared_inputs : declared_outputs;
      bool dup = false;
      for (const auto& s : list) dup = dup || s == name.text;
      if (!dup) list.push_back(name.text);
      continue;
    }

    if (t.text == "not")
      throw ParseError(t.line, t.col, "'not' cannot start a rule");

    Rule rule;
    rule.consequent = t.text;
    detail::Token arrow = lex.next();
    if (arrow.kind != detail::Token::Arrow)
      throw ParseError(arrow.line, arrow.col, "expected ':-' after consequent");

    for (;;) {
      detail::Token lit = lex.next();
      bool neg = false;
      if (lit.kind == detail::Token::Ident && lit.text == "not") {
        neg = true;
        lit = lex.next();
      }
      if (lit.kind != detail::Token::Ident || lit.text == "not" ||
          lit.text == "input" || lit.text == "output")
        throw ParseError(lit.line, lit.col, "expected antecedent symbol");
      rule.antecedents.push_back({lit.text, neg});
      detail::Token sep = lex.next();
      if (sep.kind == detail::Token::Comma) continue;
      if (sep.kind == detail::Token::Period) break;
      throw ParseError(sep.line, sep.col, "expected ',' or '.' in rule body");
    }
    rs.rules.push_back(std::move(rule));
  }

  // semantic checks and the input/output partition
  std::unordered_set<std::string> consequents, antecedent_syms;
  for (const auto& r : rs.rules) {
    consequents.insert(r.consequent);
    for (const auto& l : r.antecedents) {
      antecedent_syms.insert(l.symbol);
      if (l.symbol == r.consequent)
        throw RuleError("rule for '" + r.consequent + "' references itself");
    }
  }
  for (const auto& s : declared_inputs)
    if (consequents.count(s))
      throw RuleError("'" + s + "' declared input but appears as a consequent");

  std::unordered_set<std::string> seen_in;
  for (const auto& s : declared_inputs)
    if (seen_in.insert(s).second) rs.inputs.push_back(s);
  for (const auto& r : rs.rules)
    for (const auto& l : r.antecedents)
      if (!consequents.count(l.symbol) && seen_in.insert(l.symbol).second)
        rs.inputs.push_back(l.symbol);

  std::unordered_set<std::string> seen_out;
  for (const auto& s : declared_outputs)
    if (seen_out.insert(s).second) rs.outputs.push_back(s);
  for (const auto& r : rs.rules)
    if (!antecedent_syms.count(r.consequent) &&
        seen_out.insert(r.consequent).second)
      rs.outputs.push_back(r.consequent);

  // cycle detection over consequent dependencies
  std::unordered_map<std::string, int> state;  // 0 new, 1 active, 2 done
  std::vector<std::string> stack;
  auto dfs = [&](auto&& self, const std::string& sym) -> void {
    int& st = state[sym];
    if (st == 1) {
      std::string cycle = sym;
      for (auto it = stack.rbegin(); it != stack.rend() && *it != sym; ++it)
        cycle += " <- " + *it;
      throw RuleError("cyclic rule dependency: " + cycle);
    }
    if (st == 2) return;
    st = 1;
    stack.push_back(sym);
    for (std::size_t ri : rs.rules_for(sym))
      for (const auto& l : rs.rules[ri].antecedents)
        if (consequents.count(l.symbol)) self(self, l.symbol);
    stack.pop_back();
    st = 2;
  };
  for (const auto& r : rs.rules) dfs(dfs, r.consequent);

  return rs;
}

inline RuleSet parse_rules_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw RuleError("cannot open rules file '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_rules(buf.str());
}

// Canonical text form; parse_rules(print_rules(r)) reproduces r exactly.
inline std::string print_rules(const RuleSet& rs) {
  std::string out;
  for (const auto& s : rs.inputs) out += "input " + s + ".\n";
  for (const auto& s : rs.outputs) out += "output " + s + ".\n";
  for (const auto& r : rs.rules) {
    out += r.consequent + " :- ";
    for (std::size_t i = 0; i < r.antecedents.size(); ++i) {
      if (i) out += ", ";
      if (r.antecedents[i].negated) out += "not ";
      out += r.antecedents[i].symbol;
    }
    out += ".\n";
  }
  return out;
}

// Truth values for every symbol under negation as failure. The assignment
// must cover every input; extra symbols are rejected to catch typos.
inline std::map<std::string, bool> evaluate(
    const RuleSet& rs, const std::map<std::string, bool>& assignment) {
  for (const auto& [sym, val] : assignment) {
    (void)val;
    if (!rs.is_input(sym))
      throw RuleError("assignment for non-input symbol '" + sym + "'");
  }
  std::map<std::string, bool> values;
  for (const auto& in : rs.inputs) {
    auto it = assignment.find(in);
    if (it == assignment.end())
      throw RuleError("assignment missing input '" + in + "'");
    values[in] = it->second;
  }

  // resolve consequents in dependency order
  std::unordered_map<std::string, int> state;
  auto solve = [&](auto&& self, const std::string& sym) -> bool {
    if (auto it = values.find(sym); it != values.end()) return it->second;
    auto defs = rs.rules_for(sym);
    if (defs.empty()) {
      values[sym] = false;  // undefined non-input: false by failure
      return false;
    }
    bool any = false;
    for (std::size_t ri : defs) {
      bool all = true;
      for (const auto& l : rs.rules[ri].antecedents) {
        bool v = self(self, l.symbol);
        if (l.negated) v = !v;
        all = all && v;
      }
      any = any || all;
      if (any) break;
    }
    values[sym] = any;
    return any;
  };
  for (const auto& r : rs.rules) solve(solve, r.consequent);
  for (const auto& o : rs.outputs) solve(solve, o);
  return values;
}

// Fast path used by dataset generators: inputs given as bits in rs.inputs
// order, returns the first output's truth value.
inline bool evaluate_output(const RuleSet& rs, const std::vector<bool>& bits) {
  if (bits.size() != rs.inputs.size())
    throw RuleError("bit vector size does not match input count");
  if (rs.outputs.empty()) throw RuleError("rule set has no output");
  std::map<std::string, bool> assignment;
  for (std::size_t i = 0; i < bits.size(); ++i)
    assignment[rs.inputs[i]] = bits[i];
  return evaluate(rs, assignment).at(rs.outputs.front());
}

}  // namespace regent
