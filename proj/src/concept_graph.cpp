#include "ldsim/concept_graph.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ldsim/hash.hpp"
#include "ldsim/parallel.hpp"

namespace ldsim {

using nlohmann::json;

void ConceptRelationGraph::add_edge(int start, int end) {
    if (start == end) {
        throw ValidationError("self-loop edge on concept " + std::to_string(start));
    }
    if (!nodes.count(start) || !nodes.count(end)) {
        throw ValidationError("edge endpoints must be graph nodes");
    }
    if (!edges.insert({start, end}).second) {
        throw ValidationError("duplicate edge <" + std::to_string(start) + "," +
                              std::to_string(end) + ">");
    }
}

std::uint64_t ConceptRelationGraph::hash() const {
    std::string repr;
    for (const auto& [id, text] : nodes) {
        repr += std::to_string(id) + "=" + text + ";";
    }
    repr += "|";
    for (const auto& [s, e] : edges) {
        repr += std::to_string(s) + ">" + std::to_string(e) + ";";
    }
    return fnv1a64(repr);
}

std::string concept_graph_to_json(const ConceptRelationGraph& graph) {
    json doc;
    json nodes = json::array();
    for (const auto& [id, text] : graph.nodes) {
        nodes.push_back({{"id", id}, {"text", text}});
    }
    doc["nodes"] = std::move(nodes);
    json edges = json::array();
    for (const auto& [s, e] : graph.edges) {
        edges.push_back({{"start", s}, {"end", e}});
    }
    doc["edges"] = std::move(edges);
    return doc.dump(2) + "\n";
}

ConceptRelationGraph concept_graph_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed graph JSON: ") + e.what());
    }
    ConceptRelationGraph graph;
    for (const auto& n : doc.at("nodes")) {
        graph.nodes[n.at("id").get<int>()] = n.at("text").get<std::string>();
    }
    for (const auto& e : doc.at("edges")) {
        graph.add_edge(e.at("start").get<int>(), e.at("end").get<int>());
    }
    return graph;
}

void save_concept_graph(const ConceptRelationGraph& graph, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write graph file: " + path);
    }
    out << concept_graph_to_json(graph);
}

ConceptRelationGraph load_concept_graph(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open graph file: " + path);
    }
    std::ostringstream body;
    body << in.rdbuf();
    return concept_graph_from_json(body.str());
}

int assess_relevance(int c_i, int c_j, const ConceptCatalog& catalog, LlmGateway& gateway) {
    if (c_i == c_j) {
        throw ArgumentError("relevance is undefined for a concept with itself");
    }
    const std::string& ti = catalog.text(c_i);
    const std::string& tj = catalog.text(c_j);
    // Both orderings must agree; position swap counters generation randomness.
    int b_ij = gateway.complete_binary(TemplateId::relevance,
                                       {{"concept_i", ti}, {"concept_j", tj}});
    int b_ji = gateway.complete_binary(TemplateId::relevance,
                                       {{"concept_i", tj}, {"concept_j", ti}});
    return b_ij == 1 && b_ji == 1 ? 1 : 0;
}

std::pair<int, int> assess_prerequisite(int c_i, int c_j, const ConceptCatalog& catalog,
                                        LlmGateway& gateway) {
    if (c_i == c_j) {
        throw ArgumentError("prerequisite is undefined for a concept with itself");
    }
    const std::string& ti = catalog.text(c_i);
    const std::string& tj = catalog.text(c_j);
    int b_ij = gateway.complete_binary(TemplateId::prerequisite,
                                       {{"concept_i", ti}, {"concept_j", tj}});
    int b_ji = gateway.complete_binary(TemplateId::prerequisite,
                                       {{"concept_i", tj}, {"concept_j", ti}});
    return {b_ij, b_ji};
}

namespace {

std::vector<std::pair<int, int>> enumerate_pairs(const ConceptCatalog& catalog,
                                                 const BuildGraphOptions& options) {
    std::vector<int> ids;
    for (const auto& [id, text] : catalog.entries) {
        ids.push_back(id);
    }
    std::vector<std::pair<int, int>> pairs;
    if (options.scope == PairScope::all) {
        for (size_t a = 0; a < ids.size(); ++a) {
            for (size_t b = a + 1; b < ids.size(); ++b) {
                pairs.emplace_back(ids[a], ids[b]);
            }
        }
        return pairs;
    }
    if (options.histories == nullptr) {
        throw ArgumentError("co-occurrence scope requires histories");
    }
    std::set<std::pair<int, int>> seen;
    for (const auto& h : *options.histories) {
        std::set<int> in_history;
        for (const auto& r : h.records) {
            in_history.insert(r.concepts.begin(), r.concepts.end());
        }
        for (auto it = in_history.begin(); it != in_history.end(); ++it) {
            for (auto jt = std::next(it); jt != in_history.end(); ++jt) {
                seen.insert({*it, *jt});
            }
        }
    }
    pairs.assign(seen.begin(), seen.end());
    return pairs;
}

}  // namespace

ConceptRelationGraph build_concept_graph(const ConceptCatalog& catalog, LlmGateway& gateway,
                                         const BuildGraphOptions& options,
                                         GraphDistillStats* stats) {
    if (catalog.entries.empty()) {
        throw ArgumentError("cannot distill a graph from an empty concept catalog");
    }
    ConceptRelationGraph graph;
    for (const auto& [id, text] : catalog.entries) {
        graph.nodes[id] = text;
    }

    const auto pairs = enumerate_pairs(catalog, options);

    struct PairResult {
        bool edge_ij = false;
        bool edge_ji = false;
        bool relevant = false;
        bool undetermined = false;
    };
    std::vector<PairResult> results(pairs.size());

    run_indexed(pairs.size(), gateway.parallelism(), [&](size_t idx) {
        const auto [ci, cj] = pairs[idx];
        PairResult r;
        try {
            r.relevant = assess_relevance(ci, cj, catalog, gateway) == 1;
            if (r.relevant) {
                auto [b_ij, b_ji] = assess_prerequisite(ci, cj, catalog, gateway);
                r.edge_ij = b_ij == 1;
                r.edge_ji = b_ji == 1;
            }
        } catch (const ParseError&) {
            r = PairResult{};
            r.undetermined = true;
        }
        results[idx] = r;
    });

    // Deterministic single-threaded assembly in pair order.
    GraphDistillStats local;
    local.pairs_considered = static_cast<std::int64_t>(pairs.size());
    for (size_t idx = 0; idx < pairs.size(); ++idx) {
        const auto [ci, cj] = pairs[idx];
        const PairResult& r = results[idx];
        if (r.undetermined) {
            ++local.undetermined_pairs;
            continue;
        }
        if (!r.relevant) {
            continue;
        }
        ++local.pairs_relevant;
        if (r.edge_ij) {
            graph.add_edge(ci, cj);
        }
        if (r.edge_ji) {
            graph.add_edge(cj, ci);
        }
    }
    if (stats != nullptr) {
        *stats = local;
    }
    return graph;
}

}  // namespace ldsim
