#include "noisy_distill/kgraph.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "noisy_distill/errors.hpp"

namespace noisy_distill {

bool KnowledgeGraph::add(Triple triple) {
  if (!seen_.insert(triple).second) return false;
  entities_.insert(triple.head);
  entities_.insert(triple.tail);
  children_[{triple.head, triple.relation}].insert(triple.tail);
  parents_[triple.tail].insert({triple.head, triple.relation});
  triples_.push_back(std::move(triple));
  return true;
}

std::set<std::string> KnowledgeGraph::siblings(const std::string& entity) const {
  if (!contains(entity)) throw LookupError("unknown entity: " + entity);
  std::set<std::string> out;
  const auto it = parents_.find(entity);
  if (it == parents_.end()) return out;
  for (const auto& parent : it->second) {
    for (const auto& tail : children_.at(parent)) {
      if (tail != entity) out.insert(tail);
    }
  }
  return out;
}

KnowledgeGraph parse_triples(std::istream& in, const std::string& source) {
  KnowledgeGraph graph;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw ParseError(source, line_no,
                       "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError(source, line_no, "empty field");
    }
    graph.add({fields[0], fields[1], fields[2]});
  }
  return graph;
}

KnowledgeGraph load_triples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read triple file " + path);
  return parse_triples(in, path);
}

void write_triples(const KnowledgeGraph& graph, std::ostream& out) {
  for (const auto& t : graph.triples()) out << t.head << '\t' << t.tail << '\t' << t.relation << '\n';
}

void save_triples(const KnowledgeGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write triple file " + path);
  write_triples(graph, out);
}

std::vector<std::string> load_label_order(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read label order file " + path);
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  return labels;
}

std::vector<std::vector<std::size_t>> sibling_table(const KnowledgeGraph& graph,
                                                    const std::vector<std::string>& labels) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);
  std::vector<std::vector<std::size_t>> table(labels.size());
  for (std::size_t m = 0; m < labels.size(); ++m) {
    if (!graph.contains(labels[m])) continue;
    for (const auto& sib : graph.siblings(labels[m])) {
      const auto it = index.find(sib);
      if (it != index.end()) table[m].push_back(it->second);
    }
  }
  return table;
}

RelationMatrix build_relation_matrix(const KnowledgeGraph& graph,
                                     const std::vector<std::string>& labels, double beta,
                                     bool transpose) {
  const std::size_t n_labels = labels.size();
  if (n_labels == 0) throw DataError("build_relation_matrix: empty label list");
  if (!(beta >= 0.0)) throw ParameterError("build_relation_matrix: beta must be >= 0");

  // N(n) is restricted to label entities.
  const auto siblings = sibling_table(graph, labels);
  Matrix raw = Matrix::identity(n_labels);
  for (std::size_t n = 0; n < n_labels; ++n) {
    if (siblings[n].empty()) continue;
    const double w = beta / static_cast<double>(siblings[n].size());
    for (std::size_t m : siblings[n]) {
      if (transpose) {
        raw(n, m) = w;
      } else {
        raw(m, n) = w;
      }
    }
  }
  for (std::size_t m = 0; m < n_labels; ++m) {
    double total = 0.0;
    for (double v : raw.row(m)) total += v;
    for (double& v : raw.row(m)) v /= total;
  }
  return {labels, std::move(raw), beta};
}

RelationMatrix identity_relation(const std::vector<std::string>& labels) {
  if (labels.empty()) throw DataError("identity_relation: empty label list");
  return {labels, Matrix::identity(labels.size()), 0.0};
}

}  // namespace noisy_distill
