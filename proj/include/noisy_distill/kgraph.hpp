#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "noisy_distill/numerics.hpp"

namespace noisy_distill {

// (head, tail, relation): `head` is the `relation` of `tail`, e.g.
// ("Mammal", "Rabbit", "class").
struct Triple {
  std::string head;
  std::string tail;
  std::string relation;

  auto operator<=>(const Triple&) const = default;
};

class KnowledgeGraph {
 public:
  // Returns false when the triple was already present.
  bool add(Triple triple);

  bool contains(const std::string& entity) const { return entities_.count(entity) != 0; }
  const std::set<std::string>& entities() const noexcept { return entities_; }
  // Insertion order, duplicates removed.
  const std::vector<Triple>& triples() const noexcept { return triples_; }

  // Entities other than n sharing a head with n under the same relation.
  // Throws LookupError for an unknown entity.
  std::set<std::string> siblings(const std::string& entity) const;

 private:
  std::set<std::string> entities_;
  std::vector<Triple> triples_;
  std::set<Triple> seen_;
  // (head, relation) -> tails
  std::map<std::pair<std::string, std::string>, std::set<std::string>> children_;
  // tail -> (head, relation) pairs it hangs from
  std::map<std::string, std::set<std::pair<std::string, std::string>>> parents_;
};

// Tab-separated "head\ttail\trelation" lines; blank lines and lines starting
// with '#' are skipped. Throws ParseError carrying the 1-based line number.
KnowledgeGraph parse_triples(std::istream& in, const std::string& source = "<stream>");
KnowledgeGraph load_triples(const std::string& path);
void write_triples(const KnowledgeGraph& graph, std::ostream& out);
void save_triples(const KnowledgeGraph& graph, const std::string& path);

// One entity id per line; defines the matrix index order.
std::vector<std::string> load_label_order(const std::string& path);

inline constexpr double kDefaultSiblingWeight = 0.4;

// Row-stochastic L x L label relation matrix.
struct RelationMatrix {
  std::vector<std::string> labels;
  Matrix g;
  double beta = kDefaultSiblingWeight;

  std::size_t size() const noexcept { return labels.size(); }
};

// Raw weights W(m, m) = 1, W(m, n) = beta / |N(n)| for m in N(n), 0 elsewhere,
// restricted to the label entities; each row is then divided by its sum.
// Labels missing from the graph get identity rows. With `transpose` the raw
// matrix is transposed before normalization.
RelationMatrix build_relation_matrix(const KnowledgeGraph& graph,
                                     const std::vector<std::string>& labels,
                                     double beta = kDefaultSiblingWeight, bool transpose = false);

RelationMatrix identity_relation(const std::vector<std::string>& labels);

// siblings_of[m] lists label indices sharing a parent with label m.
std::vector<std::vector<std::size_t>> sibling_table(const KnowledgeGraph& graph,
                                                    const std::vector<std::string>& labels);

}  // namespace noisy_distill
