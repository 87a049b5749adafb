#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldsim/concept_graph.hpp"
#include "ldsim/data.hpp"
#include "ldsim/gateway.hpp"

namespace ldsim {

/// A QA record enriched with the LLM's mastery estimate and credit score.
/// step is 0-based within the student's history. Pseudo records keep the
/// step of the real record they were synthesized beside and carry response -1.
struct DistilledRecord {
    std::string student;
    int step = 0;
    int question = -1;
    std::vector<int> concepts;
    int response = 0;
    double mastery = 0;
    double credit = 0;
    bool pseudo = false;
};

struct DistilledDataset {
    std::vector<DistilledRecord> real;    // D_r
    std::vector<DistilledRecord> pseudo;  // D_p
};

struct DistillCounters {
    std::int64_t steps_total = 0;
    std::int64_t steps_skipped = 0;
    std::int64_t pseudo_total = 0;
    std::int64_t pseudo_skipped = 0;
};

/// Assembles the mastery prompt arguments for one step of a history: the full
/// record sequence, causal per-concept correct rates, and the prerequisite
/// edges restricted to concepts the student has touched.
PromptArgs mastery_prompt_args(const StudentHistory& history, int step, int question,
                               const std::vector<int>& concepts,
                               const ConceptRelationGraph& graph);

/// One (mastery, credit) per usable step of the history. Steps whose
/// responses stay unparseable after retries are skipped and counted.
std::vector<DistilledRecord> distill_student(const StudentHistory& history,
                                             const ConceptRelationGraph& graph,
                                             LlmGateway& gateway,
                                             DistillCounters* counters = nullptr);

/// n pseudo records beside real step `step`: n distinct questions sampled
/// uniformly from the catalog minus the real question, each sent through the
/// mastery prompt with response -1.
std::vector<DistilledRecord> augment_pseudo(const StudentHistory& history, int step, int n,
                                            const QuestionCatalog& questions,
                                            const ConceptRelationGraph& graph,
                                            LlmGateway& gateway, std::uint64_t seed,
                                            DistillCounters* counters = nullptr);

struct DistillOptions {
    int n_pseudo = 5;
    /// Pseudo augmentation runs on every K-th real step (1-based steps where
    /// step % K == 0); 1 = every step.
    int every_k = 4;
    std::uint64_t seed = 17;
};

DistilledDataset build_distilled_dataset(const std::vector<StudentHistory>& train_split,
                                         const ConceptRelationGraph& graph,
                                         const QuestionCatalog& questions, LlmGateway& gateway,
                                         const DistillOptions& options,
                                         DistillCounters* counters = nullptr);

std::string distilled_to_jsonl(const DistilledDataset& ds);
DistilledDataset distilled_from_jsonl(const std::string& text);
void save_distilled(const DistilledDataset& ds, const std::string& path);
DistilledDataset load_distilled(const std::string& path);

}  // namespace ldsim
