// Copyright 2026 The hyrl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hyrl/logic/parser.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <utility>
#include <vector>

#include "hyrl/logic/ground.hpp"

namespace hyrl::logic {
namespace {

constexpr const char* kBottomName = "$F";
constexpr const char* kTopName = "$T";

struct Token {
  enum Kind {
    kIdent,
    kNumber,
    kLParen,
    kRParen,
    kComma,
    kColon,
    kSlash,
    kDot,
    kArrow,  // :-
    kEnd,
  };
  Kind kind = kEnd;
  std::string text;
  int col = 0;
  int64_t number = 0;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::vector<Token> lex_line(const std::string& s, int line) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    int col = static_cast<int>(i) + 1;
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') break;
    if (is_ident_start(c)) {
      size_t j = i;
      while (j < s.size() && is_ident_char(s[j])) ++j;
      out.push_back({Token::kIdent, s.substr(i, j - i), col, 0});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      int64_t v = 0;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
        v = v * 10 + (s[j] - '0');
        ++j;
      }
      out.push_back({Token::kNumber, s.substr(i, j - i), col, v});
      i = j;
      continue;
    }
    if (c == ':' && i + 1 < s.size() && s[i + 1] == '-') {
      out.push_back({Token::kArrow, ":-", col, 0});
      i += 2;
      continue;
    }
    Token::Kind k;
    switch (c) {
      case '(': k = Token::kLParen; break;
      case ')': k = Token::kRParen; break;
      case ',': k = Token::kComma; break;
      case ':': k = Token::kColon; break;
      case '/': k = Token::kSlash; break;
      case '.': k = Token::kDot; break;
      default:
        throw ParseError(line, col, std::string("unexpected character '") + c + "'");
    }
    out.push_back({k, std::string(1, c), col, 0});
    ++i;
  }
  int end_col = static_cast<int>(s.size()) + 1;
  out.push_back({Token::kEnd, "", end_col, 0});
  return out;
}

const char* kind_name(Token::Kind k) {
  switch (k) {
    case Token::kIdent: return "identifier";
    case Token::kNumber: return "number";
    case Token::kLParen: return "'('";
    case Token::kRParen: return "')'";
    case Token::kComma: return "','";
    case Token::kColon: return "':'";
    case Token::kSlash: return "'/'";
    case Token::kDot: return "'.'";
    case Token::kArrow: return "':-'";
    case Token::kEnd: return "end of line";
  }
  return "?";
}

class Cursor {
 public:
  Cursor(std::vector<Token> toks, int line) : toks_(std::move(toks)), line_(line) {}

  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool at(Token::Kind k) const { return peek().kind == k; }

  Token expect(Token::Kind k, const char* what) {
    if (!at(k)) {
      throw ParseError(line_, peek().col,
                       std::string("expected ") + what + ", found " + kind_name(peek().kind));
    }
    return take();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(line_, peek().col, msg);
  }

  int line() const { return line_; }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  int line_;
};

bool is_variable(const std::string& name) {
  return !name.empty() && std::isupper(static_cast<unsigned char>(name[0]));
}

class ProgramBuilder {
 public:
  explicit ProgramBuilder(int64_t max_ground_atoms) : cap_(max_ground_atoms) {}

  void statement(Cursor& c) {
    if (c.at(Token::kIdent) && c.peek().text == "pred") {
      c.take();
      pred_decl(c);
    } else if (c.at(Token::kIdent) && c.peek().text == "const") {
      c.take();
      const_decl(c);
    } else {
      rule(c);
    }
    c.expect(Token::kEnd, "end of line");
  }

  Program finish() {
    build_universe();
    return std::move(p_);
  }

 private:
  void pred_decl(Cursor& c) {
    Token name = c.expect(Token::kIdent, "predicate name");
    check_fresh_symbol(c, name);
    c.expect(Token::kSlash, "'/'");
    Token arity = c.expect(Token::kNumber, "arity");
    if (arity.number > 5) {
      throw ParseError(c.line(), arity.col, "arity above 5 is not supported");
    }
    Predicate pred;
    pred.name = name.text;
    pred.arity = static_cast<int32_t>(arity.number);
    if (pred.arity > 0) {
      c.expect(Token::kColon, "':' before argument types");
      for (int32_t i = 0; i < pred.arity; ++i) {
        if (i > 0) c.expect(Token::kComma, "','");
        Token t = c.expect(Token::kIdent, "datatype name");
        auto it = p_.datatype_index.find(t.text);
        if (it == p_.datatype_index.end()) {
          throw ParseError(c.line(), t.col, "undeclared datatype '" + t.text + "'");
        }
        pred.arg_types.push_back(it->second);
      }
    }
    p_.predicate_index.emplace(pred.name, static_cast<int32_t>(p_.predicates.size()));
    p_.predicates.push_back(std::move(pred));
  }

  void const_decl(Cursor& c) {
    Token dt = c.expect(Token::kIdent, "datatype name");
    if (is_variable(dt.text)) {
      throw ParseError(c.line(), dt.col, "datatype names must start lowercase");
    }
    auto [it, fresh] =
        p_.datatype_index.emplace(dt.text, static_cast<int32_t>(p_.datatypes.size()));
    if (fresh) {
      p_.datatypes.push_back(dt.text);
      p_.constants.emplace_back();
    }
    int32_t type = it->second;
    c.expect(Token::kColon, "':'");
    for (bool first = true;; first = false) {
      if (!first) {
        if (!c.at(Token::kComma)) break;
        c.take();
      }
      Token t = c.expect(Token::kIdent, "constant name");
      check_fresh_symbol(c, t);
      if (is_variable(t.text)) {
        throw ParseError(c.line(), t.col, "constant names must start lowercase");
      }
      p_.constant_index.emplace(
          t.text, std::make_pair(type, static_cast<int32_t>(p_.constants[type].size())));
      p_.constants[type].push_back(t.text);
    }
  }

  void check_fresh_symbol(Cursor& c, const Token& t) {
    if (t.text == "pred" || t.text == "const") {
      throw ParseError(c.line(), t.col, "'" + t.text + "' is a reserved word");
    }
    if (p_.predicate_index.count(t.text)) {
      throw ParseError(c.line(), t.col, "'" + t.text + "' is already a predicate");
    }
    if (p_.constant_index.count(t.text)) {
      throw ParseError(c.line(), t.col, "'" + t.text + "' is already a constant");
    }
  }

  Atom atom(Cursor& c, Clause& cl, std::map<std::string, int32_t>& var_ids) {
    Token name = c.expect(Token::kIdent, "predicate name");
    if (is_variable(name.text)) {
      throw ParseError(c.line(), name.col, "predicate names must start lowercase");
    }
    auto it = p_.predicate_index.find(name.text);
    if (it == p_.predicate_index.end()) {
      throw ParseError(c.line(), name.col, "undeclared predicate '" + name.text + "'");
    }
    Atom a;
    a.pred = it->second;
    const Predicate& pred = p_.predicates[a.pred];
    if (c.at(Token::kLParen)) {
      c.take();
      for (bool first = true;; first = false) {
        if (!first) {
          if (!c.at(Token::kComma)) break;
          c.take();
        }
        Token t = c.expect(Token::kIdent, "argument");
        int32_t pos = static_cast<int32_t>(a.args.size());
        if (pos >= pred.arity) {
          throw ParseError(c.line(), t.col,
                           "'" + pred.name + "' takes " + std::to_string(pred.arity) +
                               " arguments");
        }
        int32_t want = pred.arg_types[pos];
        Term term;
        term.name = t.text;
        if (is_variable(t.text)) {
          term.kind = Term::Kind::kVar;
          auto [vit, fresh] =
              var_ids.emplace(t.text, static_cast<int32_t>(cl.vars.size()));
          if (fresh) {
            cl.vars.push_back(t.text);
            cl.var_types.push_back(want);
          } else if (cl.var_types[vit->second] != want) {
            throw ParseError(c.line(), t.col,
                             "variable '" + t.text + "' used at type '" +
                                 p_.datatypes[want] + "' but bound to '" +
                                 p_.datatypes[cl.var_types[vit->second]] + "'");
          }
          term.id = vit->second;
        } else {
          auto cit = p_.constant_index.find(t.text);
          if (cit == p_.constant_index.end()) {
            throw ParseError(c.line(), t.col, "undeclared constant '" + t.text + "'");
          }
          if (cit->second.first != want) {
            throw ParseError(c.line(), t.col,
                             "constant '" + t.text + "' has type '" +
                                 p_.datatypes[cit->second.first] + "', expected '" +
                                 p_.datatypes[want] + "'");
          }
          term.kind = Term::Kind::kConst;
          term.id = cit->second.second;
        }
        a.args.push_back(std::move(term));
      }
      c.expect(Token::kRParen, "')'");
    }
    if (static_cast<int32_t>(a.args.size()) != pred.arity) {
      throw ParseError(c.line(), name.col,
                       "'" + pred.name + "' takes " + std::to_string(pred.arity) +
                           " arguments, got " + std::to_string(a.args.size()));
    }
    return a;
  }

  void rule(Cursor& c) {
    Clause cl;
    std::map<std::string, int32_t> var_ids;
    cl.head = atom(c, cl, var_ids);
    c.expect(Token::kArrow, "':-'");
    for (bool first = true;; first = false) {
      if (!first) {
        if (!c.at(Token::kComma)) break;
        c.take();
      }
      cl.body.push_back(atom(c, cl, var_ids));
    }
    c.expect(Token::kDot, "'.' after rule");
    sort_vars(cl);
    p_.clauses.push_back(std::move(cl));
  }

  // Re-number clause variables so ids follow name order; substitution
  // enumeration depends on this.
  static void sort_vars(Clause& cl) {
    size_t n = cl.vars.size();
    std::vector<int32_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<int32_t>(i);
    std::sort(order.begin(), order.end(),
              [&](int32_t a, int32_t b) { return cl.vars[a] < cl.vars[b]; });
    std::vector<int32_t> rank(n);
    for (size_t i = 0; i < n; ++i) rank[order[i]] = static_cast<int32_t>(i);
    std::vector<std::string> vars(n);
    std::vector<int32_t> types(n);
    for (size_t i = 0; i < n; ++i) {
      vars[rank[i]] = cl.vars[i];
      types[rank[i]] = cl.var_types[i];
    }
    cl.vars = std::move(vars);
    cl.var_types = std::move(types);
    auto remap = [&](Atom& a) {
      for (Term& t : a.args)
        if (t.kind == Term::Kind::kVar) t.id = rank[t.id];
    };
    remap(cl.head);
    for (Atom& a : cl.body) remap(a);
  }

  void build_universe() {
    int64_t total = 2;
    for (const Predicate& pred : p_.predicates) {
      int64_t n = 1;
      for (int32_t t : pred.arg_types) {
        n *= static_cast<int64_t>(p_.constants[t].size());
        if (n > cap_) break;
      }
      total += n;
      if (total > cap_) {
        throw GroundingError("ground atom universe exceeds the cap of " +
                             std::to_string(cap_) + " atoms");
      }
    }
    p_.ground_atoms.reserve(static_cast<size_t>(total));
    p_.ground_atoms.push_back({-1, {}});
    p_.ground_atoms.push_back({-1, {}});
    p_.atom_index[kBottomName] = kBottomAtom;
    p_.atom_index[kTopName] = kTopAtom;
    for (size_t pi = 0; pi < p_.predicates.size(); ++pi) {
      const Predicate& pred = p_.predicates[pi];
      std::vector<int32_t> tuple(pred.arity, 0);
      bool any_empty = false;
      for (int32_t t : pred.arg_types) any_empty |= p_.constants[t].empty();
      if (any_empty) continue;
      while (true) {
        GroundAtom ga;
        ga.pred = static_cast<int32_t>(pi);
        ga.args = tuple;
        int32_t idx = static_cast<int32_t>(p_.ground_atoms.size());
        p_.ground_atoms.push_back(ga);
        p_.atom_index.emplace(p_.atom_name(idx), idx);
        // Advance the rightmost position first: lexicographic tuple order.
        int32_t pos = pred.arity - 1;
        for (; pos >= 0; --pos) {
          int32_t size = static_cast<int32_t>(p_.constants[pred.arg_types[pos]].size());
          if (++tuple[pos] < size) break;
          tuple[pos] = 0;
        }
        if (pos < 0) break;
      }
    }
  }

  Program p_;
  int64_t cap_;
};

}  // namespace

ParseError::ParseError(int line_, int col_, const std::string& msg)
    : std::runtime_error("line " + std::to_string(line_) + ", col " +
                         std::to_string(col_) + ": " + msg),
      line(line_),
      col(col_) {}

std::string Program::atom_name(int32_t idx) const {
  const GroundAtom& ga = ground_atoms.at(static_cast<size_t>(idx));
  if (ga.pred < 0) return idx == kBottomAtom ? kBottomName : kTopName;
  const Predicate& pred = predicates[ga.pred];
  std::string s = pred.name;
  if (!ga.args.empty()) {
    s += '(';
    for (size_t i = 0; i < ga.args.size(); ++i) {
      if (i) s += ',';
      s += constants[pred.arg_types[i]][ga.args[i]];
    }
    s += ')';
  }
  return s;
}

int32_t Program::find_atom(const std::string& canonical) const {
  auto it = atom_index.find(canonical);
  return it == atom_index.end() ? -1 : it->second;
}

std::string to_string(const Program& p, const Atom& a) {
  std::string s = p.predicates[a.pred].name;
  if (!a.args.empty()) {
    s += '(';
    for (size_t i = 0; i < a.args.size(); ++i) {
      if (i) s += ',';
      s += a.args[i].name;
    }
    s += ')';
  }
  return s;
}

Program parse_program(const std::string& text, int64_t max_ground_atoms) {
  ProgramBuilder b(max_ground_atoms);
  size_t start = 0;
  int line = 1;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string raw = text.substr(start, end - start);
    Cursor c(lex_line(raw, line), line);
    if (!c.at(Token::kEnd)) b.statement(c);
    start = end + 1;
    ++line;
  }
  return b.finish();
}

std::string pretty_print(const Program& p) {
  std::string out;
  for (size_t t = 0; t < p.datatypes.size(); ++t) {
    if (p.constants[t].empty()) continue;
    out += "const " + p.datatypes[t] + ": ";
    for (size_t i = 0; i < p.constants[t].size(); ++i) {
      if (i) out += ", ";
      out += p.constants[t][i];
    }
    out += '\n';
  }
  for (const Predicate& pred : p.predicates) {
    out += "pred " + pred.name + "/" + std::to_string(pred.arity);
    for (size_t i = 0; i < pred.arg_types.size(); ++i) {
      out += i == 0 ? ": " : ", ";
      out += p.datatypes[pred.arg_types[i]];
    }
    out += '\n';
  }
  for (const Clause& cl : p.clauses) {
    out += to_string(p, cl.head) + " :- ";
    for (size_t i = 0; i < cl.body.size(); ++i) {
      if (i) out += ", ";
      out += to_string(p, cl.body[i]);
    }
    out += ".\n";
  }
  return out;
}

}  // namespace hyrl::logic
