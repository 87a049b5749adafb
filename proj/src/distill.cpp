#include "ldsim/distill.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ldsim/hash.hpp"
#include "ldsim/parallel.hpp"

namespace ldsim {

using nlohmann::json;

namespace {

std::string format_rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = seed ^ (a * 0x9e3779b97f4a7c15ull) ^ (b * 0xbf58476d1ce4e5b9ull);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

}  // namespace

PromptArgs mastery_prompt_args(const StudentHistory& history, int step, int question,
                               const std::vector<int>& concepts,
                               const ConceptRelationGraph& graph) {
    if (step < 0 || step >= static_cast<int>(history.records.size())) {
        throw ArgumentError("step out of range for history of student " + history.student);
    }
    if (concepts.empty()) {
        throw ArgumentError("mastery prompt requires a non-empty concept set");
    }

    // The sequence the prompt describes: for a pseudo question the record at
    // `step` is replaced by the pseudo question with unknown response, since
    // it is answered instead of the real one.
    std::vector<QARecord> sequence = history.records;
    const bool is_pseudo = question != history.records[static_cast<size_t>(step)].question ||
                           concepts != history.records[static_cast<size_t>(step)].concepts;
    if (is_pseudo) {
        sequence[static_cast<size_t>(step)] = QARecord{question, concepts, -1};
    }

    std::vector<QARecord> prefix(history.records.begin(), history.records.begin() + step);

    std::set<int> scope;
    for (const auto& r : history.records) {
        scope.insert(r.concepts.begin(), r.concepts.end());
    }
    scope.insert(concepts.begin(), concepts.end());

    std::string legend;
    std::string rates;
    for (int c : scope) {
        auto it = graph.nodes.find(c);
        const std::string text = it != graph.nodes.end() ? it->second : std::to_string(c);
        if (!legend.empty()) {
            legend += ";";
        }
        legend += std::to_string(c) + ":" + text;
        auto [cor, cou] = concept_stats(prefix, c);
        if (!rates.empty()) {
            rates += ";";
        }
        rates += std::to_string(c) + ":" + format_rate(cor);
    }

    std::string edges;
    for (const auto& [s, e] : graph.edges) {
        if (scope.count(s) == 0 || scope.count(e) == 0) {
            continue;
        }
        if (!edges.empty()) {
            edges += ";";
        }
        edges += std::to_string(s) + "<-" + std::to_string(e);
    }
    if (edges.empty()) {
        edges = "none";
    }

    std::string concept_list;
    for (size_t i = 0; i < concepts.size(); ++i) {
        if (i > 0) {
            concept_list += "|";
        }
        concept_list += std::to_string(concepts[i]);
    }

    return PromptArgs{
        {"records", serialize_records(sequence)},
        {"step", std::to_string(step + 1)},  // prompts use 1-based steps
        {"question", std::to_string(question)},
        {"concepts", concept_list},
        {"rates", rates},
        {"edges", edges},
        {"legend", legend},
    };
}

std::vector<DistilledRecord> distill_student(const StudentHistory& history,
                                             const ConceptRelationGraph& graph,
                                             LlmGateway& gateway, DistillCounters* counters) {
    if (history.records.empty()) {
        throw ArgumentError("cannot distill an empty history");
    }
    std::vector<DistilledRecord> out;
    for (int t = 0; t < static_cast<int>(history.records.size()); ++t) {
        const QARecord& rec = history.records[static_cast<size_t>(t)];
        if (counters != nullptr) {
            ++counters->steps_total;
        }
        try {
            auto args = mastery_prompt_args(history, t, rec.question, rec.concepts, graph);
            auto [m, s] = gateway.complete_mastery(args);
            out.push_back({history.student, t, rec.question, rec.concepts, rec.response, m, s,
                           /*pseudo=*/false});
        } catch (const ParseError&) {
            if (counters != nullptr) {
                ++counters->steps_skipped;
            }
        }
    }
    return out;
}

std::vector<DistilledRecord> augment_pseudo(const StudentHistory& history, int step, int n,
                                            const QuestionCatalog& questions,
                                            const ConceptRelationGraph& graph,
                                            LlmGateway& gateway, std::uint64_t seed,
                                            DistillCounters* counters) {
    if (step < 0 || step >= static_cast<int>(history.records.size())) {
        throw ArgumentError("augment step out of range");
    }
    const int real_question = history.records[static_cast<size_t>(step)].question;
    std::vector<int> pool;
    for (const auto& [qid, cids] : questions.entries) {
        if (qid != real_question) {
            pool.push_back(qid);
        }
    }
    if (n < 1 || n > static_cast<int>(pool.size())) {
        throw ArgumentError("pseudo sample size must satisfy 1 <= n <= |Q|-1, got n=" +
                            std::to_string(n) + " with |Q|-1=" + std::to_string(pool.size()));
    }

    // Partial Fisher-Yates: the first n entries are a uniform sample without
    // replacement.
    std::mt19937_64 rng(mix_seed(seed, fnv1a64(history.student), static_cast<std::uint64_t>(step)));
    for (int i = 0; i < n; ++i) {
        std::uniform_int_distribution<size_t> dist(static_cast<size_t>(i), pool.size() - 1);
        std::swap(pool[static_cast<size_t>(i)], pool[dist(rng)]);
    }

    std::vector<DistilledRecord> out;
    for (int i = 0; i < n; ++i) {
        const int qid = pool[static_cast<size_t>(i)];
        const std::vector<int>& cids = questions.concepts(qid);
        if (counters != nullptr) {
            ++counters->pseudo_total;
        }
        try {
            auto args = mastery_prompt_args(history, step, qid, cids, graph);
            auto [m, s] = gateway.complete_mastery(args);
            out.push_back({history.student, step, qid, cids, -1, m, s, /*pseudo=*/true});
        } catch (const ParseError&) {
            if (counters != nullptr) {
                ++counters->pseudo_skipped;
            }
        }
    }
    return out;
}

DistilledDataset build_distilled_dataset(const std::vector<StudentHistory>& train_split,
                                         const ConceptRelationGraph& graph,
                                         const QuestionCatalog& questions, LlmGateway& gateway,
                                         const DistillOptions& options,
                                         DistillCounters* counters) {
    if (options.every_k < 1) {
        throw ArgumentError("every_k must be >= 1");
    }
    std::vector<DistilledDataset> per_student(train_split.size());
    std::vector<DistillCounters> per_counters(train_split.size());

    run_indexed(train_split.size(), gateway.parallelism(), [&](size_t idx) {
        const StudentHistory& h = train_split[idx];
        if (h.records.empty()) {
            return;
        }
        DistilledDataset& slot = per_student[idx];
        slot.real = distill_student(h, graph, gateway, &per_counters[idx]);
        if (options.n_pseudo > 0) {
            for (int t = 0; t < static_cast<int>(h.records.size()); ++t) {
                if ((t + 1) % options.every_k != 0) {
                    continue;
                }
                auto pseudo = augment_pseudo(h, t, options.n_pseudo, questions, graph, gateway,
                                             options.seed, &per_counters[idx]);
                slot.pseudo.insert(slot.pseudo.end(), pseudo.begin(), pseudo.end());
            }
        }
    });

    DistilledDataset out;
    for (size_t i = 0; i < per_student.size(); ++i) {
        out.real.insert(out.real.end(), per_student[i].real.begin(), per_student[i].real.end());
        out.pseudo.insert(out.pseudo.end(), per_student[i].pseudo.begin(),
                          per_student[i].pseudo.end());
        if (counters != nullptr) {
            counters->steps_total += per_counters[i].steps_total;
            counters->steps_skipped += per_counters[i].steps_skipped;
            counters->pseudo_total += per_counters[i].pseudo_total;
            counters->pseudo_skipped += per_counters[i].pseudo_skipped;
        }
    }
    return out;
}

namespace {

json record_to_json(const DistilledRecord& r) {
    return json{{"student", r.student}, {"step", r.step},       {"question", r.question},
                {"concepts", r.concepts}, {"response", r.response}, {"mastery", r.mastery},
                {"credit", r.credit},   {"pseudo", r.pseudo}};
}

DistilledRecord record_from_json(const json& j) {
    DistilledRecord r;
    r.student = j.at("student").get<std::string>();
    r.step = j.at("step").get<int>();
    r.question = j.at("question").get<int>();
    r.concepts = j.at("concepts").get<std::vector<int>>();
    r.response = j.at("response").get<int>();
    r.mastery = j.at("mastery").get<double>();
    r.credit = j.at("credit").get<double>();
    r.pseudo = j.at("pseudo").get<bool>();
    if (r.mastery < 0 || r.mastery > 1 || r.credit < 0 || r.credit > 1) {
        throw ValidationError("distilled record out of range");
    }
    if (r.pseudo != (r.response == -1)) {
        throw ValidationError("pseudo flag must match response == -1");
    }
    return r;
}

}  // namespace

std::string distilled_to_jsonl(const DistilledDataset& ds) {
    std::string out;
    for (const auto& r : ds.real) {
        out += record_to_json(r).dump() + "\n";
    }
    for (const auto& r : ds.pseudo) {
        out += record_to_json(r).dump() + "\n";
    }
    return out;
}

DistilledDataset distilled_from_jsonl(const std::string& text) {
    DistilledDataset ds;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        DistilledRecord r = record_from_json(j);
        (r.pseudo ? ds.pseudo : ds.real).push_back(std::move(r));
    }
    return ds;
}

void save_distilled(const DistilledDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write distilled dataset: " + path);
    }
    out << distilled_to_jsonl(ds);
}

DistilledDataset load_distilled(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open distilled dataset: " + path);
    }
    std::ostringstream body;
    body << in.rdbuf();
    return distilled_from_jsonl(body.str());
}

}  // namespace ldsim
