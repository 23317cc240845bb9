#pragma once

// Photonic netlist language (.pnl): lexer, parser, canonical formatter and
// compiler to ChipModel.
//
//   chip  := "chip" IDENT "{" "ports" IDENT ("," IDENT)+ ";" stmt* "}"
//   stmt  := KIND IDENT "(" IDENT ("," IDENT)* ")" param* ";"
//   param := IDENT "=" NUMBER UNIT?          UNIT in {dB, deg, rad, nm}
//
// '#' starts a comment running to end of line. A file holds one or more
// chips. Angles given in deg are converted to rad while parsing; dB values
// are kept as written.
//
// Error codes
//   E001 syntax error                 E005 undeclared port
//   E002 unknown component kind       E006 parameter not valid for kind
//   E003 unknown unit                 E007 unit not valid for parameter
//   E004 duplicate instance name      E008 duplicate port declaration
//   E009 duplicate parameter
//   C001 chip does not declare exactly two ports
//   C002 parameter value out of range
//   C003 wrong number of target ports (or a port repeated)

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "swapsim/devices.hpp"

namespace swapsim::netlist {

struct SourceSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  int line = 1;
  int column = 1;
};

class NetlistError : public Error {
 public:
  NetlistError(std::string code, std::string message, SourceSpan span)
      : Error(code + ": " + message), code_(std::move(code)), message_(std::move(message)), span_(span) {}
  const std::string& code() const { return code_; }
  const std::string& message() const { return message_; }
  const SourceSpan& span() const { return span_; }

  /// "file:line:col: error[CODE]: message" followed by the source line and carets.
  std::string render(std::string_view source, std::string_view filename = "<input>") const {
    std::ostringstream os;
    os << filename << ':' << span_.line << ':' << span_.column << ": error[" << code_ << "]: " << message_ << '\n';
    const std::size_t begin = span_.start - static_cast<std::size_t>(span_.column - 1);
    std::size_t stop = source.find('\n', begin);
    if (stop == std::string_view::npos) stop = source.size();
    if (begin <= source.size()) {
      os << "  " << source.substr(begin, stop - begin) << '\n';
      os << "  " << std::string(static_cast<std::size_t>(span_.column - 1), ' ');
      const std::size_t width = std::max<std::size_t>(1, std::min(span_.end, stop) - std::min(span_.start, stop));
      os << std::string(width, '^') << '\n';
    }
    return os.str();
  }

 private:
  std::string code_;
  std::string message_;
  SourceSpan span_;
};

enum class Unit { None, dB, Rad, Nm };

inline std::string_view unit_text(Unit u) {
  switch (u) {
    case Unit::None: return "";
    case Unit::dB: return "dB";
    case Unit::Rad: return "rad";
    case Unit::Nm: return "nm";
  }
  return "";
}

struct Param {
  std::string name;
  double value = 0.0;
  Unit unit = Unit::None;
  SourceSpan span;
};

struct Target {
  std::string port;
  SourceSpan span;
};

struct Statement {
  ComponentKind kind = ComponentKind::LOSS;
  std::string name;
  std::vector<Target> targets;
  std::vector<Param> params;
  SourceSpan span;
};

struct ChipDecl {
  std::string name;
  std::vector<Target> ports;
  std::vector<Statement> statements;
  SourceSpan span;
};

struct NetlistAst {
  std::vector<ChipDecl> chips;
};

/// Equality ignoring source spans.
inline bool structurally_equal(const NetlistAst& a, const NetlistAst& b) {
  if (a.chips.size() != b.chips.size()) return false;
  for (std::size_t c = 0; c < a.chips.size(); ++c) {
    const auto& x = a.chips[c];
    const auto& y = b.chips[c];
    if (x.name != y.name || x.ports.size() != y.ports.size() || x.statements.size() != y.statements.size())
      return false;
    for (std::size_t i = 0; i < x.ports.size(); ++i)
      if (x.ports[i].port != y.ports[i].port) return false;
    for (std::size_t s = 0; s < x.statements.size(); ++s) {
      const auto& p = x.statements[s];
      const auto& q = y.statements[s];
      if (p.kind != q.kind || p.name != q.name || p.targets.size() != q.targets.size() ||
          p.params.size() != q.params.size())
        return false;
      for (std::size_t i = 0; i < p.targets.size(); ++i)
        if (p.targets[i].port != q.targets[i].port) return false;
      for (std::size_t i = 0; i < p.params.size(); ++i)
        if (p.params[i].name != q.params[i].name || p.params[i].value != q.params[i].value ||
            p.params[i].unit != q.params[i].unit)
          return false;
    }
  }
  return true;
}

namespace detail {

enum class Tok { Ident, Number, LBrace, RBrace, LParen, RParen, Comma, Semi, Equals, End };

struct Token {
  Tok type;
  std::string_view text;
  SourceSpan span;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      const SourceSpan at = here();
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, {}, at});
        return out;
      }
      const char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t b = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
        out.push_back({Tok::Ident, src_.substr(b, pos_ - b), close(at)});
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+') {
        out.push_back(number(at));
      } else {
        Tok t;
        switch (c) {
          case '{': t = Tok::LBrace; break;
          case '}': t = Tok::RBrace; break;
          case '(': t = Tok::LParen; break;
          case ')': t = Tok::RParen; break;
          case ',': t = Tok::Comma; break;
          case ';': t = Tok::Semi; break;
          case '=': t = Tok::Equals; break;
          default: {
            advance();
            throw NetlistError("E001", "unexpected character '" + std::string(1, c) + "'", close(at));
          }
        }
        advance();
        out.push_back({t, src_.substr(at.start, 1), close(at)});
      }
    }
  }

 private:
  SourceSpan here() const { return {pos_, pos_, line_, col_}; }
  SourceSpan close(SourceSpan s) const {
    s.end = pos_;
    return s;
  }
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }
  bool digit_at(std::size_t p) const { return p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p])); }

  Token number(SourceSpan at) {
    const std::size_t b = pos_;
    if (src_[pos_] == '-' || src_[pos_] == '+') advance();
    bool any = false;
    while (digit_at(pos_)) advance(), any = true;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      while (digit_at(pos_)) advance(), any = true;
    }
    if (!any) throw NetlistError("E001", "malformed number", close(at));
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      const std::size_t q = pos_ + 1;
      if (digit_at(q) || ((q < src_.size() && (src_[q] == '+' || src_[q] == '-')) && digit_at(q + 1))) {
        advance();
        if (src_[pos_] == '+' || src_[pos_] == '-') advance();
        while (digit_at(pos_)) advance();
      }
    }
    return {Tok::Number, src_.substr(b, pos_ - b), close(at)};
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

inline std::string_view tok_name(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Semi: return "';'";
    case Tok::Equals: return "'='";
    case Tok::End: return "end of input";
  }
  return "?";
}

enum class ParamClass { Decibel, Angle, Length, Plain };

inline ParamClass param_class(const std::string& name) {
  if (name.rfind("extinction", 0) == 0 || name.rfind("loss", 0) == 0 || name == "imbalance") return ParamClass::Decibel;
  if (name == "angle" || name == "phase" || name == "alpha" || name == "beta" || name == "gamma")
    return ParamClass::Angle;
  if (name == "wavelength") return ParamClass::Length;
  return ParamClass::Plain;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(Lexer(src).run()) {}

  NetlistAst run() {
    NetlistAst ast;
    std::set<std::string> chip_names;
    do {
      auto chip = parse_chip();
      if (!chip_names.insert(chip.name).second)
        throw NetlistError("E004", "duplicate chip name '" + chip.name + "'", chip.span);
      ast.chips.push_back(std::move(chip));
    } while (peek().type != Tok::End);
    return ast;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }
  const Token& next() {
    const Token& t = toks_[i_];
    if (i_ + 1 < toks_.size()) ++i_;
    return t;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw NetlistError("E001", "expected " + what + ", found " + std::string(tok_name(peek().type)) +
                                   (peek().type == Tok::Ident || peek().type == Tok::Number
                                        ? " '" + std::string(peek().text) + "'"
                                        : ""),
                       peek().span);
  }
  const Token& expect(Tok t) {
    if (peek().type != t) fail(std::string(tok_name(t)));
    return next();
  }
  const Token& expect_keyword(std::string_view kw) {
    if (peek().type != Tok::Ident || peek().text != kw) fail("'" + std::string(kw) + "'");
    return next();
  }

  ChipDecl parse_chip() {
    ChipDecl chip;
    chip.span = expect_keyword("chip").span;
    chip.name = std::string(expect(Tok::Ident).text);
    expect(Tok::LBrace);
    expect_keyword("ports");
    std::set<std::string> declared;
    for (;;) {
      const Token& p = expect(Tok::Ident);
      if (!declared.insert(std::string(p.text)).second)
        throw NetlistError("E008", "port '" + std::string(p.text) + "' declared twice", p.span);
      chip.ports.push_back({std::string(p.text), p.span});
      if (peek().type == Tok::Comma) {
        next();
        continue;
      }
      break;
    }
    if (chip.ports.size() < 2) fail("','");
    expect(Tok::Semi);
    std::set<std::string> names;
    while (peek().type != Tok::RBrace) {
      if (peek().type == Tok::End) fail("'}'");
      chip.statements.push_back(parse_statement(declared, names));
    }
    chip.span.end = next().span.end;
    return chip;
  }

  Statement parse_statement(const std::set<std::string>& ports, std::set<std::string>& names) {
    Statement st;
    if (peek().type != Tok::Ident) fail("component kind");
    const Token& kt = next();
    st.span = kt.span;
    const auto kind = kind_from_name(kt.text);
    if (!kind) throw NetlistError("E002", "unknown component kind '" + std::string(kt.text) + "'", kt.span);
    st.kind = *kind;
    const Token& nt = expect(Tok::Ident);
    st.name = std::string(nt.text);
    if (!names.insert(st.name).second)
      throw NetlistError("E004", "duplicate instance name '" + st.name + "'", nt.span);
    expect(Tok::LParen);
    for (;;) {
      const Token& p = expect(Tok::Ident);
      if (!ports.count(std::string(p.text)))
        throw NetlistError("E005", "undeclared port '" + std::string(p.text) + "'", p.span);
      st.targets.push_back({std::string(p.text), p.span});
      if (peek().type == Tok::Comma) {
        next();
        continue;
      }
      break;
    }
    expect(Tok::RParen);
    const auto& allowed = allowed_params(st.kind);
    std::set<std::string> seen;
    while (peek().type != Tok::Semi) {
      if (peek().type != Tok::Ident) fail("parameter or ';'");
      const Token& pn = next();
      Param prm;
      prm.name = std::string(pn.text);
      prm.span = pn.span;
      if (std::find(allowed.begin(), allowed.end(), prm.name) == allowed.end())
        throw NetlistError("E006",
                           "parameter '" + prm.name + "' is not valid for " + std::string(kind_name(st.kind)),
                           pn.span);
      if (!seen.insert(prm.name).second)
        throw NetlistError("E009", "parameter '" + prm.name + "' given twice", pn.span);
      expect(Tok::Equals);
      const Token& num = expect(Tok::Number);
      double v = 0.0;
      const auto* first = num.text.data();
      const auto* last = first + num.text.size();
      if (*first == '+') ++first;
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
        throw NetlistError("E001", "malformed number '" + std::string(num.text) + "'", num.span);
      prm.value = v;
      prm.span.end = num.span.end;
      // A unit is an identifier that does not start the next assignment.
      if (peek().type == Tok::Ident && peek(1).type != Tok::Equals) {
        const Token& ut = next();
        prm.span.end = ut.span.end;
        prm.unit = to_unit(prm, ut);
      }
      st.params.push_back(std::move(prm));
    }
    st.span.end = next().span.end;
    return st;
  }

  static Unit to_unit(Param& prm, const Token& ut) {
    Unit u;
    bool deg = false;
    if (ut.text == "dB") u = Unit::dB;
    else if (ut.text == "rad") u = Unit::Rad;
    else if (ut.text == "deg") u = Unit::Rad, deg = true;
    else if (ut.text == "nm") u = Unit::Nm;
    else throw NetlistError("E003", "unknown unit '" + std::string(ut.text) + "'", ut.span);
    const ParamClass pc = param_class(prm.name);
    const bool ok = (u == Unit::dB && pc == ParamClass::Decibel) || (u == Unit::Rad && pc == ParamClass::Angle) ||
                    (u == Unit::Nm && pc == ParamClass::Length);
    if (!ok) throw NetlistError("E007", "unit '" + std::string(ut.text) + "' is not valid for '" + prm.name + "'", ut.span);
    if (deg) prm.value = prm.value * kPi / 180.0;
    return u;
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline NetlistAst parse(std::string_view text) { return detail::Parser(text).run(); }

/// Canonical text. Comments are not preserved.
inline std::string format(const NetlistAst& ast) {
  std::ostringstream os;
  for (std::size_t c = 0; c < ast.chips.size(); ++c) {
    const auto& chip = ast.chips[c];
    if (c) os << '\n';
    os << "chip " << chip.name << " {\n  ports ";
    for (std::size_t i = 0; i < chip.ports.size(); ++i) os << (i ? ", " : "") << chip.ports[i].port;
    os << ";\n";
    for (const auto& st : chip.statements) {
      os << "  " << kind_name(st.kind) << ' ' << st.name << " (";
      for (std::size_t i = 0; i < st.targets.size(); ++i) os << (i ? ", " : "") << st.targets[i].port;
      os << ')';
      for (const auto& p : st.params) os << ' ' << p.name << '=' << detail::format_number(p.value) << unit_text(p.unit);
      os << ";\n";
    }
    os << "}\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// compilation

namespace detail {

inline void check_range(const Param& p) {
  auto bad = [&](const std::string& why) { throw NetlistError("C002", "'" + p.name + "' " + why, p.span); };
  if (p.name.rfind("extinction", 0) == 0 && !(p.value > 0.0)) bad("must be greater than 0 dB");
  if ((p.name.rfind("loss", 0) == 0 || p.name == "imbalance") && p.value < 0.0) bad("must be non-negative");
  if ((p.name == "coherence" || p.name == "xtalk" || p.name == "depol") && (p.value < 0.0 || p.value > 1.0))
    bad("must lie in [0, 1]");
  if (p.name == "wavelength" && !(p.value > 0.0)) bad("must be positive");
}

struct TargetRule {
  std::size_t min;
  std::size_t max;
};

inline TargetRule target_rule(ComponentKind k) {
  using K = ComponentKind;
  switch (k) {
    case K::PCNOT:
    case K::BS5050:
    case K::MZI:
    case K::FACET: return {2, 2};
    case K::MCNOT: return {1, 1};
    default: return {1, 2};
  }
}

}  // namespace detail

/// Lowers one statement to a device spec (port names mapped to channels).
inline ComponentSpec to_component_spec(const Statement& st, const std::vector<Target>& ports) {
  const auto rule = detail::target_rule(st.kind);
  if (st.targets.size() < rule.min || st.targets.size() > rule.max)
    throw NetlistError("C003",
                       std::string(kind_name(st.kind)) + " expects " + std::to_string(rule.min) +
                           (rule.min == rule.max ? "" : "-" + std::to_string(rule.max)) + " target port(s), got " +
                           std::to_string(st.targets.size()),
                       st.span);
  ComponentSpec spec{st.kind, {}, {}};
  for (const auto& t : st.targets) {
    int idx = -1;
    for (std::size_t i = 0; i < ports.size(); ++i)
      if (ports[i].port == t.port) idx = static_cast<int>(i);
    if (idx < 0) throw NetlistError("E005", "undeclared port '" + t.port + "'", t.span);
    if (std::find(spec.targets.begin(), spec.targets.end(), idx) != spec.targets.end())
      throw NetlistError("C003", "port '" + t.port + "' targeted twice", t.span);
    spec.targets.push_back(idx);
  }
  for (const auto& p : st.params) {
    detail::check_range(p);
    spec.params[p.name] = p.value;
  }
  return spec;
}

/// Compiles a chip declaration. The first declared port is channel T.
inline ChipModel compile(const ChipDecl& chip) {
  if (chip.ports.size() != 2)
    throw NetlistError("C001", "chip '" + chip.name + "' declares " + std::to_string(chip.ports.size()) +
                                   " ports; exactly 2 are supported",
                       chip.ports.size() > 2 ? chip.ports[2].span : chip.span);
  std::vector<QuantumChannel> stages;
  for (const auto& st : chip.statements) {
    const ComponentSpec spec = to_component_spec(st, chip.ports);
    try {
      if (st.kind == ComponentKind::MZI && spec.targets == std::vector<int>{1, 0}) {
        const Matrix x = spatial(pauli_x());
        const Matrix k = component_channel(spec).kraus().front();
        stages.push_back(QuantumChannel::unitary(x * k * x));
      } else {
        stages.push_back(component_channel(spec));
      }
    } catch (const ConfigError& e) {
      throw NetlistError("C002", e.what(), st.span);
    }
  }
  if (stages.empty()) stages.push_back(QuantumChannel::identity(4));
  return ChipModel(std::move(stages), chip.name);
}

/// Compiles the only chip, or the chip with the given name.
inline ChipModel compile(const NetlistAst& ast, std::string_view name = {}) {
  if (ast.chips.empty()) throw NetlistError("E001", "no chip declared", {});
  if (name.empty()) {
    if (ast.chips.size() != 1)
      throw NetlistError("C001", "netlist declares several chips; select one by name", ast.chips[1].span);
    return compile(ast.chips.front());
  }
  for (const auto& c : ast.chips)
    if (c.name == name) return compile(c);
  throw NetlistError("C001", "no chip named '" + std::string(name) + "'", {});
}

inline std::vector<ChipModel> compile_all(const NetlistAst& ast) {
  std::vector<ChipModel> out;
  for (const auto& c : ast.chips) out.push_back(compile(c));
  return out;
}

}  // namespace swapsim::netlist
