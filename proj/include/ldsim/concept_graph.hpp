#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ldsim/data.hpp"
#include "ldsim/gateway.hpp"

namespace ldsim {

/// Directed concept-prerequisite graph. An edge <start, end> means the end
/// concept is prerequisite knowledge for the start concept. Both directions
/// may coexist; self-loops and duplicates are invalid.
struct ConceptRelationGraph {
    std::map<int, std::string> nodes;          // concept id -> text
    std::set<std::pair<int, int>> edges;       // <start, end>

    void add_edge(int start, int end);
    bool has_edge(int start, int end) const { return edges.count({start, end}) != 0; }
    std::uint64_t hash() const;
};

std::string concept_graph_to_json(const ConceptRelationGraph& graph);
ConceptRelationGraph concept_graph_from_json(const std::string& text);
void save_concept_graph(const ConceptRelationGraph& graph, const std::string& path);
ConceptRelationGraph load_concept_graph(const std::string& path);

struct GraphDistillStats {
    std::int64_t pairs_considered = 0;
    std::int64_t pairs_relevant = 0;
    std::int64_t undetermined_pairs = 0;  // persistent parse failures, treated as no edge
};

/// Relevance of an unordered pair: both orderings are queried and must agree
/// on "yes". Exactly two gateway completions per call (cache aside).
int assess_relevance(int c_i, int c_j, const ConceptCatalog& catalog, LlmGateway& gateway);

/// Prerequisite assessment for a relevant pair: returns (b_ij, b_ji) where
/// b_ij = 1 means c_j is a prerequisite of c_i.
std::pair<int, int> assess_prerequisite(int c_i, int c_j, const ConceptCatalog& catalog,
                                        LlmGateway& gateway);

enum class PairScope { all, co_occurrence };

struct BuildGraphOptions {
    PairScope scope = PairScope::all;
    /// Required for co-occurrence scope: pairs restricted to concepts that
    /// appear together in at least one student's history.
    const std::vector<StudentHistory>* histories = nullptr;
};

/// Two-stage distillation over concept pairs: relevance first, prerequisite
/// only for relevant pairs. Undetermined pairs contribute no edge.
ConceptRelationGraph build_concept_graph(const ConceptCatalog& catalog, LlmGateway& gateway,
                                         const BuildGraphOptions& options = {},
                                         GraphDistillStats* stats = nullptr);

}  // namespace ldsim
