#include "crnpriv/spec_parser.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "crnpriv/error.hpp"

namespace crnpriv {
namespace {

struct Line {
  std::size_t number;
  std::string text;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw SyntaxError(line, "expected a number, got '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_count(std::string_view s, std::size_t line) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw SyntaxError(line, "expected a non-negative integer, got '" + std::string(s) + "'");
  if (v < 0) throw ValidationError(fmt::format("line {}: counts must be non-negative", line));
  return v;
}

bool valid_label(std::string_view s) {
  if (s.empty() || s == "0") return false;
  return s.find_first_of(" \t+:=#*") == std::string_view::npos;
}

class Parser {
 public:
  explicit Parser(std::string_view text) { split_sections(text); }

  ModelFile run() {
    parse_states();
    parse_types();
    parse_reactions();
    ModelFile m;
    m.crn = Crn(labels_, types_, reactions_);
    check_type_tags(m.crn);
    m.composition.per_type = type_counts_;
    m.composition.resources = resources_;
    std::sort(m.composition.resources.begin(), m.composition.resources.end());
    m.query = parse_query(m.crn);
    m.params = parse_params();
    return m;
  }

 private:
  void split_sections(std::string_view text) {
    std::size_t number = 0;
    std::string current;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
      ++number;
      std::string_view view = raw;
      if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
      view = trim(view);
      if (view.empty()) continue;
      if (view.front() == '[') {
        if (view.back() != ']') throw SyntaxError(number, "unterminated section header");
        current = std::string(trim(view.substr(1, view.size() - 2)));
        static const std::vector<std::string> known = {"types", "states", "reactions", "query", "params"};
        if (std::find(known.begin(), known.end(), current) == known.end())
          throw SyntaxError(number, "unknown section [" + current + "]");
        if (sections_.count(current)) throw SyntaxError(number, "section [" + current + "] repeated");
        sections_[current];
        continue;
      }
      if (current.empty()) throw SyntaxError(number, "content outside of any section");
      sections_[current].push_back({number, std::string(view)});
    }
  }

  const std::vector<Line>& section(const std::string& name) {
    static const std::vector<Line> empty;
    auto it = sections_.find(name);
    return it == sections_.end() ? empty : it->second;
  }

  std::size_t state_of(std::string_view label, std::size_t line) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw ValidationError(fmt::format("line {}: unknown state '{}'", line, label));
    return static_cast<std::size_t>(it - labels_.begin());
  }

  void parse_states() {
    for (const auto& line : section("states")) {
      auto tokens = split_ws(line.text);
      if (!valid_label(tokens[0])) throw SyntaxError(line.number, "invalid state label '" + std::string(tokens[0]) + "'");
      std::string label(tokens[0]);
      if (std::find(labels_.begin(), labels_.end(), label) != labels_.end())
        throw ValidationError(fmt::format("line {}: duplicate state '{}'", line.number, label));
      labels_.push_back(label);
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        auto tok = tokens[k];
        if (tok.rfind("resource=", 0) != 0) throw SyntaxError(line.number, "unexpected attribute '" + std::string(tok) + "'");
        resources_.emplace_back(labels_.size() - 1, parse_count(tok.substr(9), line.number));
      }
    }
  }

  void parse_types() {
    for (const auto& line : section("types")) {
      auto tokens = split_ws(line.text);
      if (tokens.size() < 2 || tokens.size() > 3) throw SyntaxError(line.number, "expected 'name count [initial=<state>]'");
      TypeInfo info;
      info.name = std::string(tokens[0]);
      if (!valid_label(info.name) || info.name.find_first_of("{},") != std::string::npos)
        throw SyntaxError(line.number, "invalid type name '" + info.name + "'");
      for (const auto& t : types_) {
        if (t.name == info.name) throw ValidationError(fmt::format("line {}: duplicate type '{}'", line.number, info.name));
      }
      const std::int64_t count = parse_count(tokens[1], line.number);
      if (tokens.size() == 3) {
        if (tokens[2].rfind("initial=", 0) != 0)
          throw SyntaxError(line.number, "unexpected attribute '" + std::string(tokens[2]) + "'");
        info.initial_state = state_of(tokens[2].substr(8), line.number);
      } else {
        throw ValidationError(fmt::format("line {}: type '{}' has no initial state declaration", line.number, info.name));
      }
      types_.push_back(std::move(info));
      type_counts_.push_back(count);
      type_lines_.push_back(line.number);
    }
  }

  Complex parse_side(std::string_view side, std::size_t line) const {
    Complex c(labels_.size(), 0);
    side = trim(side);
    if (side == "0") return c;
    std::size_t start = 0;
    while (true) {
      auto plus = side.find('+', start);
      auto term = trim(side.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start));
      if (term.empty()) throw SyntaxError(line, "empty term in reaction");
      Count mult = 1;
      if (auto star = term.find('*'); star != std::string_view::npos) {
        auto m = parse_count(term.substr(0, star), line);
        if (m < 1) throw SyntaxError(line, "multiplicity must be at least 1");
        mult = static_cast<Count>(m);
        term = trim(term.substr(star + 1));
      }
      c[state_of(term, line)] += mult;
      if (plus == std::string_view::npos) break;
      start = plus + 1;
    }
    return c;
  }

  void parse_reactions() {
    for (const auto& line : section("reactions")) {
      std::string_view text = line.text;
      auto colon = text.find(':');
      if (colon == std::string_view::npos) throw SyntaxError(line.number, "missing ': rate' in reaction");
      std::string_view equation = text.substr(0, colon);
      std::string_view rates = text.substr(colon + 1);
      bool reversible = false;
      std::size_t arrow = equation.find("<->");
      std::size_t arrow_len = 3;
      if (arrow != std::string_view::npos) {
        reversible = true;
      } else {
        arrow = equation.find("->");
        arrow_len = 2;
        if (arrow == std::string_view::npos) throw SyntaxError(line.number, "missing '->' or '<->'");
      }
      Complex lhs = parse_side(equation.substr(0, arrow), line.number);
      Complex rhs = parse_side(equation.substr(arrow + arrow_len), line.number);

      std::vector<double> ks;
      std::size_t start = 0;
      while (true) {
        auto comma = rates.find(',', start);
        ks.push_back(parse_double(rates.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start),
                                  line.number));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      if (ks.size() != (reversible ? 2u : 1u))
        throw SyntaxError(line.number, reversible ? "reversible reaction needs two rates" : "irreversible reaction needs one rate");
      for (double k : ks) {
        if (!std::isfinite(k) || k <= 0.0)
          throw ValidationError(fmt::format("line {}: rate constant must be positive, got {}", line.number, k));
      }
      if (lhs == rhs) throw ValidationError(fmt::format("line {}: reaction does not change the state", line.number));
      reactions_.push_back({lhs, rhs, ks[0]});
      if (reversible) reactions_.push_back({rhs, lhs, ks[1]});
    }
  }

  void check_type_tags(const Crn& crn) const {
    const IntMatrix member = type_membership(crn);
    for (std::size_t s = 0; s < types_.size(); ++s) {
      if (member.row(static_cast<Eigen::Index>(s)).sum() == 0)
        throw ValidationError(
            fmt::format("line {}: type '{}' does not appear in any state label", type_lines_[s], types_[s].name));
    }
  }

  QuerySpec parse_query(const Crn& crn) {
    std::vector<QuerySpec::Group> groups;
    for (const auto& line : section("query")) {
      auto eq = line.text.find('=');
      if (eq == std::string::npos) throw SyntaxError(line.number, "expected 'name = S1 + S2'");
      QuerySpec::Group g;
      g.name = std::string(trim(std::string_view(line.text).substr(0, eq)));
      if (!valid_label(g.name)) throw SyntaxError(line.number, "invalid query name '" + g.name + "'");
      for (const auto& other : groups) {
        if (other.name == g.name) throw ValidationError(fmt::format("line {}: duplicate query name '{}'", line.number, g.name));
      }
      auto rhs = trim(std::string_view(line.text).substr(eq + 1));
      if (!rhs.empty()) {
        std::size_t start = 0;
        while (true) {
          auto plus = rhs.find('+', start);
          auto term = trim(rhs.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start));
          if (term.empty()) throw SyntaxError(line.number, "empty term in query");
          g.states.push_back(state_of(term, line.number));
          if (plus == std::string_view::npos) break;
          start = plus + 1;
        }
      }
      groups.push_back(std::move(g));
    }
    try {
      return QuerySpec(std::move(groups), crn.num_states());
    } catch (const ValidationError& e) {
      const auto& lines = section("query");
      throw ValidationError(fmt::format("line {}: {}", lines.empty() ? 0 : lines.front().number, e.what()));
    }
  }

  std::map<std::string, double> parse_params() {
    std::map<std::string, double> params;
    for (const auto& line : section("params")) {
      auto eq = line.text.find('=');
      if (eq == std::string::npos) throw SyntaxError(line.number, "expected 'key=value'");
      std::string key(trim(std::string_view(line.text).substr(0, eq)));
      if (key.empty()) throw SyntaxError(line.number, "empty parameter name");
      if (params.count(key)) throw ValidationError(fmt::format("line {}: parameter '{}' repeated", line.number, key));
      params[key] = parse_double(std::string_view(line.text).substr(eq + 1), line.number);
    }
    return params;
  }

  std::map<std::string, std::vector<Line>> sections_;
  std::vector<std::string> labels_;
  std::vector<std::pair<std::size_t, std::int64_t>> resources_;
  std::vector<TypeInfo> types_;
  std::vector<std::int64_t> type_counts_;
  std::vector<std::size_t> type_lines_;
  std::vector<ReactionInput> reactions_;
};

std::string format_side(const Crn& crn, const Complex& c) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == 0) continue;
    if (!out.empty()) out += " + ";
    if (c[i] > 1) out += fmt::format("{}*", c[i]);
    out += crn.labels()[i];
  }
  return out.empty() ? "0" : out;
}

}  // namespace

double ModelFile::param(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

ModelFile parse_spec(std::string_view text) { return Parser(text).run(); }

ModelFile load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_spec(buffer.str());
}

std::string serialize_spec(const ModelFile& model) {
  const Crn& crn = model.crn;
  std::string out = "[types]\n";
  for (std::size_t s = 0; s < crn.num_types(); ++s) {
    const auto& t = crn.types()[s];
    out += fmt::format("{} {}", t.name, s < model.composition.per_type.size() ? model.composition.per_type[s] : 0);
    if (t.initial_state) out += " initial=" + crn.labels()[*t.initial_state];
    out += "\n";
  }
  out += "\n[states]\n";
  for (std::size_t i = 0; i < crn.num_states(); ++i) {
    out += crn.labels()[i];
    for (const auto& [state, count] : model.composition.resources) {
      if (state == i) out += fmt::format(" resource={}", count);
    }
    out += "\n";
  }
  out += "\n[reactions]\n";
  const auto& rs = crn.reactions();
  for (std::size_t l = 0; l < rs.size(); ++l) {
    const auto& r = rs[l];
    const std::string lhs = format_side(crn, crn.complexes()[r.source]);
    const std::string rhs = format_side(crn, crn.complexes()[r.target]);
    if (l + 1 < rs.size() && rs[l + 1].source == r.target && rs[l + 1].target == r.source) {
      out += fmt::format("{} <-> {} : {}, {}\n", lhs, rhs, r.rate, rs[l + 1].rate);
      ++l;
    } else {
      out += fmt::format("{} -> {} : {}\n", lhs, rhs, r.rate);
    }
  }
  out += "\n[query]\n";
  for (const auto& g : model.query.groups()) {
    out += g.name + " =";
    for (std::size_t k = 0; k < g.states.size(); ++k) out += (k == 0 ? " " : " + ") + crn.labels()[g.states[k]];
    out += "\n";
  }
  out += "\n[params]\n";
  for (const auto& [key, value] : model.params) out += fmt::format("{}={}\n", key, value);
  return out;
}

}  // namespace crnpriv
