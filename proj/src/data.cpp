#include "ldsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ldsim {

using nlohmann::json;

const std::string& ConceptCatalog::text(int id) const {
    auto it = entries.find(id);
    if (it == entries.end()) {
        throw ArgumentError("unknown concept id " + std::to_string(id));
    }
    return it->second;
}

const std::vector<int>& QuestionCatalog::concepts(int id) const {
    auto it = entries.find(id);
    if (it == entries.end()) {
        throw ArgumentError("unknown question id " + std::to_string(id));
    }
    return it->second;
}

int Dataset::concept_id(const std::string& token) const {
    auto it = concept_id_by_token.find(token);
    if (it == concept_id_by_token.end()) {
        throw ArgumentError("unknown concept token '" + token + "'");
    }
    return it->second;
}

int Dataset::question_id(const std::string& token) const {
    auto it = question_id_by_token.find(token);
    if (it == question_id_by_token.end()) {
        throw ArgumentError("unknown question token '" + token + "'");
    }
    return it->second;
}

namespace {

const std::vector<DatasetSchema>& schema_registry() {
    // Bounds follow the published per-dataset "max concepts per question".
    static const std::vector<DatasetSchema> schemas = {
        {"generic", 0}, {"junyi", 1}, {"assist09", 6}, {"assist12", 1}, {"algebra", 6},
    };
    return schemas;
}

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) {
        return "";
    }
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

struct RawRow {
    std::string student;
    std::string question;
    std::vector<std::string> concepts;
    int response = 0;
    double timestamp = 0;
    size_t line_no = 0;
};

}  // namespace

const DatasetSchema& schema_by_name(const std::string& name) {
    for (const auto& s : schema_registry()) {
        if (s.name == name) {
            return s;
        }
    }
    throw SchemaError("unknown dataset schema '" + name + "'");
}

std::vector<std::string> known_schema_names() {
    std::vector<std::string> names;
    for (const auto& s : schema_registry()) {
        names.push_back(s.name);
    }
    return names;
}

Dataset load_dataset_from_text(const std::string& csv_text, const std::string& schema_name,
                               const std::string& origin,
                               const std::map<std::string, std::string>& concept_names) {
    const DatasetSchema& schema = schema_by_name(schema_name);

    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError(origin + ": empty file, expected a header row");
    }
    auto header = split_line(trim(line), ',');
    for (auto& h : header) {
        h = trim(h);
    }
    auto column = [&](const std::string& name) -> int {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw SchemaError(origin + ": missing required column '" + name + "'");
        }
        return static_cast<int>(it - header.begin());
    };
    const int col_student = column("student");
    const int col_question = column("question");
    const int col_concepts = column("concepts");
    const int col_response = column("response");
    const int col_timestamp = column("timestamp");

    std::vector<RawRow> rows;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string body = trim(line);
        if (body.empty()) {
            continue;
        }
        auto fields = split_line(body, ',');
        if (static_cast<int>(fields.size()) < static_cast<int>(header.size())) {
            throw ValidationError(origin + ":" + std::to_string(line_no) +
                                  ": expected " + std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        }
        RawRow row;
        row.line_no = line_no;
        row.student = trim(fields[static_cast<size_t>(col_student)]);
        row.question = trim(fields[static_cast<size_t>(col_question)]);
        if (row.student.empty() || row.question.empty()) {
            throw ValidationError(origin + ":" + std::to_string(line_no) +
                                  ": empty student or question field");
        }
        std::string concepts_field = trim(fields[static_cast<size_t>(col_concepts)]);
        if (concepts_field.empty()) {
            throw ValidationError(origin + ":" + std::to_string(line_no) +
                                  ": empty concept field (every question must cover >= 1 concept)");
        }
        for (const auto& tok : split_line(concepts_field, '|')) {
            std::string t = trim(tok);
            if (t.empty()) {
                throw ValidationError(origin + ":" + std::to_string(line_no) +
                                      ": empty concept token in '" + concepts_field + "'");
            }
            row.concepts.push_back(t);
        }
        std::sort(row.concepts.begin(), row.concepts.end());
        row.concepts.erase(std::unique(row.concepts.begin(), row.concepts.end()),
                           row.concepts.end());
        if (schema.max_concepts_per_question > 0 &&
            static_cast<int>(row.concepts.size()) > schema.max_concepts_per_question) {
            throw ValidationError(origin + ":" + std::to_string(line_no) + ": question '" +
                                  row.question + "' covers " + std::to_string(row.concepts.size()) +
                                  " concepts, schema '" + schema.name + "' allows at most " +
                                  std::to_string(schema.max_concepts_per_question));
        }
        std::string resp = trim(fields[static_cast<size_t>(col_response)]);
        if (resp == "0") {
            row.response = 0;
        } else if (resp == "1") {
            row.response = 1;
        } else {
            throw ValidationError(origin + ":" + std::to_string(line_no) +
                                  ": non-binary response '" + resp + "'");
        }
        try {
            row.timestamp = std::stod(trim(fields[static_cast<size_t>(col_timestamp)]));
        } catch (const std::exception&) {
            throw ValidationError(origin + ":" + std::to_string(line_no) +
                                  ": unparseable timestamp '" +
                                  trim(fields[static_cast<size_t>(col_timestamp)]) + "'");
        }
        rows.push_back(std::move(row));
    }

    Dataset ds;
    ds.schema = schema.name;

    std::set<std::string> concept_tokens;
    std::set<std::string> question_tokens;
    for (const auto& r : rows) {
        question_tokens.insert(r.question);
        concept_tokens.insert(r.concepts.begin(), r.concepts.end());
    }
    int next_id = 0;
    for (const auto& tok : concept_tokens) {
        ds.concept_id_by_token[tok] = next_id;
        ds.concept_token[next_id] = tok;
        auto named = concept_names.find(tok);
        ds.concepts.entries[next_id] = named != concept_names.end() ? named->second : tok;
        ++next_id;
    }
    next_id = 0;
    for (const auto& tok : question_tokens) {
        ds.question_id_by_token[tok] = next_id;
        ds.question_token[next_id] = tok;
        ++next_id;
    }

    // A question's concept set must be consistent across all its rows.
    for (const auto& r : rows) {
        int qid = ds.question_id_by_token[r.question];
        std::vector<int> cids;
        for (const auto& c : r.concepts) {
            cids.push_back(ds.concept_id_by_token[c]);
        }
        std::sort(cids.begin(), cids.end());
        auto it = ds.questions.entries.find(qid);
        if (it == ds.questions.entries.end()) {
            ds.questions.entries[qid] = cids;
        } else if (it->second != cids) {
            throw ValidationError(origin + ":" + std::to_string(r.line_no) + ": question '" +
                                  r.question + "' appears with conflicting concept sets");
        }
    }

    std::map<std::string, std::vector<size_t>> per_student;
    for (size_t i = 0; i < rows.size(); ++i) {
        per_student[rows[i].student].push_back(i);
    }
    for (auto& [student, idx] : per_student) {
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            return rows[a].timestamp < rows[b].timestamp;
        });
        StudentHistory hist;
        hist.student = student;
        for (size_t i : idx) {
            const RawRow& r = rows[i];
            QARecord rec;
            rec.question = ds.question_id_by_token[r.question];
            rec.concepts = ds.questions.entries[rec.question];
            rec.response = r.response;
            hist.records.push_back(std::move(rec));
        }
        ds.students.push_back(std::move(hist));
    }
    return ds;
}

Dataset load_dataset(const std::string& path, const std::string& schema,
                     const std::optional<std::string>& concept_names_path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open dataset file: " + path);
    }
    std::ostringstream body;
    body << in.rdbuf();

    std::map<std::string, std::string> names;
    if (concept_names_path) {
        std::ifstream nin(*concept_names_path, std::ios::binary);
        if (!nin) {
            throw IoError("cannot open concept-names file: " + *concept_names_path);
        }
        std::string line;
        bool first = true;
        while (std::getline(nin, line)) {
            std::string body_line = trim(line);
            if (body_line.empty()) {
                continue;
            }
            if (first) {
                first = false;
                if (body_line == "id,text" || body_line == "concept,text") {
                    continue;
                }
            }
            auto pos = body_line.find(',');
            if (pos == std::string::npos) {
                throw SchemaError(*concept_names_path + ": expected 'id,text' rows");
            }
            names[trim(body_line.substr(0, pos))] = trim(body_line.substr(pos + 1));
        }
    }
    return load_dataset_from_text(body.str(), schema, path, names);
}

std::vector<StudentHistory> filter_and_truncate(std::vector<StudentHistory> histories,
                                                int min_records, int max_len) {
    if (min_records < 1 || max_len < 1) {
        throw ArgumentError("filter_and_truncate requires min_records >= 1 and max_len >= 1");
    }
    std::vector<StudentHistory> out;
    for (auto& h : histories) {
        if (static_cast<int>(h.records.size()) < min_records) {
            continue;
        }
        if (static_cast<int>(h.records.size()) > max_len) {
            // First-N truncation keeps the cold-start portion of the history.
            h.records.resize(static_cast<size_t>(max_len));
        }
        out.push_back(std::move(h));
    }
    return out;
}

SplitResult split_dataset(const std::vector<StudentHistory>& histories,
                          const std::array<double, 3>& ratios, std::uint64_t seed) {
    double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9) {
        throw ArgumentError("split ratios must sum to 1");
    }
    for (double r : ratios) {
        if (r < 0) {
            throw ArgumentError("split ratios must be non-negative");
        }
    }
    int nonzero = 0;
    for (double r : ratios) {
        nonzero += r > 0 ? 1 : 0;
    }
    const int n = static_cast<int>(histories.size());
    if (n < nonzero) {
        throw ArgumentError("fewer students (" + std::to_string(n) + ") than nonzero partitions (" +
                            std::to_string(nonzero) + ")");
    }

    // Cumulative rounding keeps sizes summing to n; the fix-up below guarantees
    // every nonzero-ratio partition is non-empty.
    std::array<int, 3> sizes{};
    double cum = 0;
    int assigned = 0;
    for (int k = 0; k < 3; ++k) {
        cum += ratios[static_cast<size_t>(k)];
        int upto = static_cast<int>(std::llround(cum * n));
        sizes[static_cast<size_t>(k)] = upto - assigned;
        assigned = upto;
    }
    for (int k = 0; k < 3; ++k) {
        if (ratios[static_cast<size_t>(k)] > 0 && sizes[static_cast<size_t>(k)] == 0) {
            int donor = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
            if (sizes[static_cast<size_t>(donor)] <= 1) {
                throw ArgumentError("cannot give every nonzero partition at least one student");
            }
            --sizes[static_cast<size_t>(donor)];
            ++sizes[static_cast<size_t>(k)];
        }
    }

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    SplitResult res;
    int pos = 0;
    for (int k = 0; k < 3; ++k) {
        auto* dst = k == 0 ? &res.train : k == 1 ? &res.validation : &res.test;
        for (int i = 0; i < sizes[static_cast<size_t>(k)]; ++i) {
            dst->push_back(histories[static_cast<size_t>(order[static_cast<size_t>(pos++)])]);
        }
        std::sort(dst->begin(), dst->end(),
                  [](const StudentHistory& a, const StudentHistory& b) { return a.student < b.student; });
    }
    return res;
}

std::pair<double, int> concept_stats(const std::vector<QARecord>& prefix, int concept) {
    int correct = 0;
    int attempts = 0;
    for (const auto& r : prefix) {
        if (r.response < 0) {
            continue;  // pseudo records never count
        }
        if (std::find(r.concepts.begin(), r.concepts.end(), concept) != r.concepts.end()) {
            ++attempts;
            correct += r.response;
        }
    }
    if (attempts == 0) {
        return {0.5, 0};
    }
    return {static_cast<double>(correct) / attempts, attempts};
}

void ConceptStats::add(const QARecord& record) {
    if (record.response < 0) {
        return;
    }
    for (int c : record.concepts) {
        auto& [correct, attempts] = counts_[c];
        ++attempts;
        correct += record.response;
    }
}

std::pair<double, int> ConceptStats::get(int concept) const {
    auto it = counts_.find(concept);
    if (it == counts_.end() || it->second.second == 0) {
        return {0.5, 0};
    }
    return {static_cast<double>(it->second.first) / it->second.second, it->second.second};
}

double QuestionRates::get(int question) const {
    auto it = rates.find(question);
    return it == rates.end() ? 0.5 : it->second;
}

QuestionRates build_question_rates(const std::vector<StudentHistory>& train_split) {
    std::map<int, std::pair<int, int>> counts;
    for (const auto& h : train_split) {
        for (const auto& r : h.records) {
            if (r.response < 0) {
                continue;
            }
            auto& [correct, attempts] = counts[r.question];
            ++attempts;
            correct += r.response;
        }
    }
    QuestionRates out;
    for (const auto& [q, ca] : counts) {
        if (ca.second > 0) {
            out.rates[q] = static_cast<double>(ca.first) / ca.second;
        }
    }
    return out;
}

double question_correct_rate(const std::vector<StudentHistory>& train_split, int question) {
    return build_question_rates(train_split).get(question);
}

std::string dataset_to_json(const Dataset& ds, const std::vector<StudentHistory>& histories) {
    json doc;
    doc["schema"] = ds.schema;
    json concepts = json::array();
    for (const auto& [id, text] : ds.concepts.entries) {
        concepts.push_back({{"id", id}, {"text", text}, {"token", ds.concept_token.at(id)}});
    }
    doc["concepts"] = std::move(concepts);
    json questions = json::array();
    for (const auto& [id, cids] : ds.questions.entries) {
        questions.push_back({{"id", id}, {"token", ds.question_token.at(id)}, {"concepts", cids}});
    }
    doc["questions"] = std::move(questions);
    json students = json::array();
    std::vector<const StudentHistory*> ordered;
    for (const auto& h : histories) {
        ordered.push_back(&h);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const StudentHistory* a, const StudentHistory* b) { return a->student < b->student; });
    for (const StudentHistory* h : ordered) {
        json records = json::array();
        for (const auto& r : h->records) {
            records.push_back({{"q", r.question}, {"r", r.response}});
        }
        students.push_back({{"id", h->student}, {"records", std::move(records)}});
    }
    doc["students"] = std::move(students);
    return doc.dump(2) + "\n";
}

Dataset dataset_from_json(const std::string& text) {
    json doc = json::parse(text);
    Dataset ds;
    ds.schema = doc.at("schema").get<std::string>();
    for (const auto& c : doc.at("concepts")) {
        int id = c.at("id").get<int>();
        ds.concepts.entries[id] = c.at("text").get<std::string>();
        std::string token = c.at("token").get<std::string>();
        ds.concept_token[id] = token;
        ds.concept_id_by_token[token] = id;
    }
    for (const auto& q : doc.at("questions")) {
        int id = q.at("id").get<int>();
        std::vector<int> cids = q.at("concepts").get<std::vector<int>>();
        if (cids.empty()) {
            throw ValidationError("question " + std::to_string(id) + " has an empty concept set");
        }
        for (int c : cids) {
            if (!ds.concepts.contains(c)) {
                throw ValidationError("question " + std::to_string(id) +
                                      " references unknown concept " + std::to_string(c));
            }
        }
        ds.questions.entries[id] = std::move(cids);
        std::string token = q.at("token").get<std::string>();
        ds.question_token[id] = token;
        ds.question_id_by_token[token] = id;
    }
    for (const auto& s : doc.at("students")) {
        StudentHistory h;
        h.student = s.at("id").get<std::string>();
        for (const auto& r : s.at("records")) {
            QARecord rec;
            rec.question = r.at("q").get<int>();
            rec.response = r.at("r").get<int>();
            if (rec.response != 0 && rec.response != 1 && rec.response != -1) {
                throw ValidationError("record response out of {0,1,-1}");
            }
            rec.concepts = ds.questions.concepts(rec.question);
            h.records.push_back(std::move(rec));
        }
        ds.students.push_back(std::move(h));
    }
    return ds;
}

void save_dataset_json(const Dataset& ds, const std::vector<StudentHistory>& histories,
                       const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write dataset file: " + path);
    }
    out << dataset_to_json(ds, histories);
}

Dataset load_dataset_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open dataset file: " + path);
    }
    std::ostringstream body;
    body << in.rdbuf();
    try {
        return dataset_from_json(body.str());
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace ldsim
