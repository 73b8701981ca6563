#ifndef DGNN_GRAPH_HPP
#define DGNN_GRAPH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dgnn/csr.hpp"

namespace dgnn::graph {

/// Attributed graph with node features, integer labels and split masks.
/// The adjacency stores both directions of every undirected edge, no
/// self-loops, all structural values 1.
struct Graph {
    int n = 0;
    int d = 0;
    int num_classes = 0;
    Csr adj;
    std::vector<double> x;  // n*d row-major features
    std::vector<int> y;     // n labels in [0, num_classes)
    std::vector<std::uint8_t> train_mask;
    std::vector<std::uint8_t> val_mask;
    std::vector<std::uint8_t> test_mask;
    std::vector<std::string> ids;  // original node identifiers, content order

    int degree(int v) const { return adj.row_ptr[v + 1] - adj.row_ptr[v]; }
};

/// Â = D̃^{-1/2}(A+I)D̃^{-1/2} in CSR form; symmetric, self-loops included.
struct NormalizedAdjacency {
    Csr csr;
};

std::vector<int> indices_of(const std::vector<std::uint8_t>& mask);

/// Loads the plain-text citation-network distribution: content lines are
/// `<id> <feature...> <label>`, cites lines are `<cited> <citing>`.
/// Unknown endpoints are skipped; their count is reported via
/// `skipped_unknown` when non-null (and as a stderr warning otherwise).
Graph load_content_cites(const std::string& content_path, const std::string& cites_path,
                         int* skipped_unknown = nullptr);

/// Loads a directory with edges.csv, features.csv, labels.csv, splits.json.
Graph load_generic(const std::string& dir);

/// Writes the generic directory format; load_generic(save_generic(g)) is an
/// identity on structure, features, labels and masks.
void save_generic(const Graph& g, const std::string& dir);

NormalizedAdjacency normalize_adjacency(const Graph& g);

/// Deterministic per-class split: for each class the first `per_class`
/// nodes of a seed-shuffled order go to train; the remaining nodes are
/// shuffled once more and the first n_val / next n_test form val / test.
void generate_split(Graph& g, int per_class, int n_val, int n_test, std::uint64_t seed);

/// Copy of g with the feature rows of all val and test nodes zeroed.
Graph mask_features(const Graph& g);

}  // namespace dgnn::graph

#endif
