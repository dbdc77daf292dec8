#pragma once

// Line-oriented model files.
//
//   # comment
//   [types]
//   A 2 initial=a{A}
//   [states]
//   a{A}
//   a{R} resource=2
//   a{A,R}
//   [reactions]
//   a{A} + a{R} <-> a{A,R} : 3, 1
//   2*x -> y : 0.5
//   [query]
//   free = a{A}
//   [params]
//   nu=1e-12
//
// A reversible line expands to a forward reaction followed by its reverse.
// `0` denotes the empty complex. Types must name their initial state.

#include <map>
#include <string>
#include <string_view>

#include "crnpriv/crn.hpp"

namespace crnpriv {

struct ModelFile {
  Crn crn;
  Composition composition;
  QuerySpec query;
  std::map<std::string, double> params;

  bool operator==(const ModelFile&) const = default;

  double param(const std::string& key, double fallback) const;
  bool has_param(const std::string& key) const { return params.count(key) != 0; }
};

/// Throws SyntaxError (with a 1-based line) or ValidationError.
ModelFile parse_spec(std::string_view text);
ModelFile load_spec(const std::string& path);

/// Canonical text; parse_spec(serialize_spec(m)) == m.
std::string serialize_spec(const ModelFile& model);

}  // namespace crnpriv
