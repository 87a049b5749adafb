#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ldsim/errors.hpp"

namespace ldsim {

/// Concept id -> human-readable text. Ids are dense per dataset but need not
/// start at 0 or be contiguous.
struct ConceptCatalog {
    std::map<int, std::string> entries;

    bool contains(int id) const { return entries.count(id) != 0; }
    const std::string& text(int id) const;
};

/// Question id -> sorted set of covered concept ids (never empty).
struct QuestionCatalog {
    std::map<int, std::vector<int>> entries;

    bool contains(int id) const { return entries.count(id) != 0; }
    const std::vector<int>& concepts(int id) const;
};

/// One question-answering event. response is 0/1 for real records; -1 marks
/// pseudo records whose outcome is unknown.
struct QARecord {
    int question = -1;
    std::vector<int> concepts;
    int response = 0;

    bool operator==(const QARecord& o) const {
        return question == o.question && concepts == o.concepts && response == o.response;
    }
};

/// A student's chronologically ordered records.
struct StudentHistory {
    std::string student;
    std::vector<QARecord> records;
};

/// CSV layout is shared across schemas; the schema id only sets per-dataset
/// validation bounds (e.g. Junyi allows a single concept per question).
struct DatasetSchema {
    std::string name;
    int max_concepts_per_question = 0;  // 0 = unbounded
};

const DatasetSchema& schema_by_name(const std::string& name);
std::vector<std::string> known_schema_names();

struct Dataset {
    std::string schema;
    ConceptCatalog concepts;
    QuestionCatalog questions;
    std::vector<StudentHistory> students;  // sorted by student id

    // Source-token bookkeeping. Internal ids are assigned by sorted token
    // order so they do not depend on row order.
    std::map<std::string, int> concept_id_by_token;
    std::map<std::string, int> question_id_by_token;
    std::map<int, std::string> concept_token;
    std::map<int, std::string> question_token;

    int concept_id(const std::string& token) const;
    int question_id(const std::string& token) const;
};

/// Loads a QA-log CSV (header row: student,question,concepts,response,timestamp;
/// concepts pipe-separated). Histories come back sorted per student by
/// timestamp then source order. Optional sidecar maps concept tokens to
/// display text.
Dataset load_dataset(const std::string& path, const std::string& schema,
                     const std::optional<std::string>& concept_names_path = std::nullopt);

/// Same parser over an in-memory CSV body (tests, synth pipelines).
Dataset load_dataset_from_text(const std::string& csv_text, const std::string& schema,
                               const std::string& origin = "<memory>",
                               const std::map<std::string, std::string>& concept_names = {});

/// Drops students with fewer than min_records records and truncates the rest
/// to their first max_len records.
std::vector<StudentHistory> filter_and_truncate(std::vector<StudentHistory> histories,
                                                int min_records, int max_len);

struct SplitResult {
    std::vector<StudentHistory> train;
    std::vector<StudentHistory> validation;
    std::vector<StudentHistory> test;
};

/// Splits by student. Ratios must sum to 1 (1e-9 slack); every partition with
/// a nonzero ratio receives at least one student or the call fails.
SplitResult split_dataset(const std::vector<StudentHistory>& histories,
                          const std::array<double, 3>& ratios, std::uint64_t seed);

/// (cor, cou) for one concept over a record prefix. Pseudo responses (-1) are
/// skipped; an unattempted concept reports the neutral prior cor = 0.5.
std::pair<double, int> concept_stats(const std::vector<QARecord>& prefix, int concept);

/// Incremental per-student per-concept counters; equivalent to recomputing
/// concept_stats over the records fed so far.
class ConceptStats {
public:
    void add(const QARecord& record);
    std::pair<double, int> get(int concept) const;
    void clear() { counts_.clear(); }

private:
    std::map<int, std::pair<int, int>> counts_;  // concept -> (correct, attempts)
};

/// Global per-question correct rates, estimated on the training split only.
/// Unseen questions report the neutral prior 0.5.
struct QuestionRates {
    std::map<int, double> rates;
    double get(int question) const;
};

QuestionRates build_question_rates(const std::vector<StudentHistory>& train_split);

double question_correct_rate(const std::vector<StudentHistory>& train_split, int question);

// Canonical JSON dump of one split (catalogs + histories). Round-trips field
// by field and serializes byte-identically for identical inputs.
std::string dataset_to_json(const Dataset& ds, const std::vector<StudentHistory>& histories);
Dataset dataset_from_json(const std::string& text);

void save_dataset_json(const Dataset& ds, const std::vector<StudentHistory>& histories,
                       const std::string& path);
Dataset load_dataset_json(const std::string& path);

}  // namespace ldsim
