#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "npnce/error.hpp"
#include "npnce/graph.hpp"

namespace npnce {

/// Reads an edge list: one edge per line, "i -> j" (directed) or "i -- j"
/// (undirected), zero-based ids. Blank lines and lines starting with '#'
/// are skipped. When `p` is unset it is taken as the largest id + 1.
inline Cpdag read_edge_list(std::istream& in, std::optional<std::size_t> p = std::nullopt) {
  std::vector<Edge> directed, undirected;
  std::size_t max_id = 0;
  bool any = false;
  std::string line;
  std::size_t line_no = 0;

  const auto parse_id = [&](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    std::size_t id = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
      throw InputError("edge list: bad node id '" + std::string(s) + "' on line " + std::to_string(line_no));
    return id;
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    const auto first = view.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || view[first] == '#') continue;
    bool is_directed = true;
    auto pos = view.find("->");
    if (pos == std::string_view::npos) {
      pos = view.find("--");
      is_directed = false;
    }
    if (pos == std::string_view::npos)
      throw InputError("edge list: line " + std::to_string(line_no) + " is not 'i -> j' or 'i -- j'");
    const std::size_t a = parse_id(view.substr(0, pos));
    const std::size_t b = parse_id(view.substr(pos + 2));
    (is_directed ? directed : undirected).emplace_back(a, b);
    max_id = std::max({max_id, a, b});
    any = true;
  }
  const std::size_t nodes = p ? *p : (any ? max_id + 1 : 0);
  return Cpdag(nodes, directed, undirected);
}

inline Cpdag load_edge_list(const std::string& path, std::optional<std::size_t> p = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open graph file '" + path + "'");
  return read_edge_list(in, p);
}

inline void write_edge_list(std::ostream& out, const Cpdag& g) {
  for (const auto& [a, b] : g.directed_edges()) out << a << " -> " << b << '\n';
  for (const auto& [a, b] : g.undirected_edges()) out << a << " -- " << b << '\n';
}

inline void write_edge_list(std::ostream& out, const Dag& g) { write_edge_list(out, Cpdag::from_dag(g)); }

}  // namespace npnce
