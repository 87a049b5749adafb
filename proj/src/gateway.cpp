#include "ldsim/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ldsim/hash.hpp"

namespace ldsim {

using nlohmann::json;
namespace fs = std::filesystem;

std::string template_id_name(TemplateId id) {
    switch (id) {
        case TemplateId::relevance: return "relevance";
        case TemplateId::prerequisite: return "prerequisite";
        case TemplateId::mastery: return "mastery";
    }
    return "unknown";
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& args) const {
    std::string out = text;
    for (const auto& [name, value] : args) {
        const std::string needle = "${" + name + "}";
        size_t pos = 0;
        while ((pos = out.find(needle, pos)) != std::string::npos) {
            out.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    size_t leftover = out.find("${");
    if (leftover != std::string::npos) {
        size_t end = out.find('}', leftover);
        std::string name = end == std::string::npos ? out.substr(leftover)
                                                    : out.substr(leftover + 2, end - leftover - 2);
        throw ArgumentError("unbound placeholder '" + name + "' in template " +
                            template_id_name(id));
    }
    return out;
}

namespace {

const char* kRelevanceTemplate =
    "You are an expert in curriculum design for an online learning platform.\n"
    "Consider two knowledge concepts:\n"
    "\n"
    "Concept A: ${concept_i}\n"
    "Concept B: ${concept_j}\n"
    "\n"
    "Are these two concepts related, in the sense that mastering one interacts with\n"
    "learning the other? Answer with exactly one word: yes or no.\n";

const char* kPrerequisiteTemplate =
    "You are an expert in curriculum design for an online learning platform.\n"
    "Consider two knowledge concepts:\n"
    "\n"
    "Concept A: ${concept_i}\n"
    "Concept B: ${concept_j}\n"
    "\n"
    "Is Concept B a prerequisite of Concept A? That is, should a student master\n"
    "\"${concept_j}\" before learning \"${concept_i}\"?\n"
    "Answer with exactly one word: yes or no.\n";

const char* kMasteryTemplate =
    "You are assessing a student's knowledge state on an online learning platform.\n"
    "\n"
    "Concept legend (id: name):\n"
    "${legend}\n"
    "\n"
    "Prerequisite relations among these concepts (a<-b means concept b must be\n"
    "mastered before concept a; 'none' if no relations are known):\n"
    "${edges}\n"
    "\n"
    "The student's per-concept historical correct rates (id:rate), before the\n"
    "current step:\n"
    "${rates}\n"
    "\n"
    "The student's full question-answering record sequence, one record per line\n"
    "(q=question id, c=concept ids, r=response; 1 correct, 0 incorrect, ? unknown):\n"
    "${records}\n"
    "\n"
    "At step ${step} (1-based) the student attempts question ${question} covering\n"
    "concept ids ${concepts}. Estimate the student's average mastery of those\n"
    "concepts at that moment on [0,1], and your confidence in that estimate on\n"
    "[0,1]. Respond with strict JSON only, no prose:\n"
    "{\"mastery\": <number>, \"credit\": <number>}\n";

}  // namespace

PromptLibrary::PromptLibrary() {
    templates_[TemplateId::relevance] = {TemplateId::relevance, kRelevanceTemplate};
    templates_[TemplateId::prerequisite] = {TemplateId::prerequisite, kPrerequisiteTemplate};
    templates_[TemplateId::mastery] = {TemplateId::mastery, kMasteryTemplate};
}

const PromptTemplate& PromptLibrary::get(TemplateId id) const {
    return templates_.at(id);
}

void PromptLibrary::load_override(TemplateId id, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open prompt template file: " + path);
    }
    std::ostringstream body;
    body << in.rdbuf();
    templates_[id] = {id, body.str()};
}

std::uint64_t cache_key(TemplateId id, const PromptArgs& args, const std::string& model_id) {
    std::string fp = template_id_name(id);
    fp += '\x1f';
    fp += model_id;
    for (const auto& [k, v] : args) {
        fp += '\x1e';
        fp += k;
        fp += '\x1f';
        fp += v;
    }
    return fnv1a64(fp);
}

namespace {

std::string request_fingerprint(TemplateId id, const PromptArgs& args, const std::string& model_id) {
    std::string fp = template_id_name(id);
    fp += '\x1f';
    fp += model_id;
    for (const auto& [k, v] : args) {
        fp += '\x1e';
        fp += k;
        fp += '\x1f';
        fp += v;
    }
    return fp;
}

}  // namespace

int parse_binary(const std::string& response_text) {
    size_t i = 0;
    while (i < response_text.size() &&
           !std::isalpha(static_cast<unsigned char>(response_text[i]))) {
        ++i;
    }
    std::string token;
    while (i < response_text.size() &&
           std::isalpha(static_cast<unsigned char>(response_text[i]))) {
        token += static_cast<char>(std::tolower(static_cast<unsigned char>(response_text[i])));
        ++i;
    }
    if (token == "yes") {
        return 1;
    }
    if (token == "no") {
        return 0;
    }
    throw ParseError("expected leading yes/no token, got: '" +
                     response_text.substr(0, std::min<size_t>(response_text.size(), 60)) + "'");
}

std::pair<double, double> parse_mastery(const std::string& response_text) {
    size_t start = response_text.find('{');
    if (start == std::string::npos) {
        throw ParseError("no JSON object in mastery response");
    }
    int depth = 0;
    size_t end = std::string::npos;
    for (size_t k = start; k < response_text.size(); ++k) {
        if (response_text[k] == '{') {
            ++depth;
        } else if (response_text[k] == '}') {
            if (--depth == 0) {
                end = k;
                break;
            }
        }
    }
    if (end == std::string::npos) {
        throw ParseError("unbalanced JSON object in mastery response");
    }
    json doc;
    try {
        doc = json::parse(response_text.substr(start, end - start + 1));
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed mastery JSON: ") + e.what());
    }
    if (!doc.contains("mastery") || !doc.contains("credit") ||
        !doc["mastery"].is_number() || !doc["credit"].is_number()) {
        throw ParseError("mastery response must contain numeric 'mastery' and 'credit'");
    }
    double m = doc["mastery"].get<double>();
    double s = doc["credit"].get<double>();
    if (!(m >= 0.0 && m <= 1.0) || !(s >= 0.0 && s <= 1.0)) {
        throw ParseError("mastery/credit out of [0,1]: mastery=" + std::to_string(m) +
                         " credit=" + std::to_string(s));
    }
    return {m, s};
}

std::string serialize_records(const std::vector<QARecord>& records) {
    std::string out;
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (i > 0) {
            out += '\n';
        }
        out += "q=" + std::to_string(r.question) + " c=";
        for (size_t c = 0; c < r.concepts.size(); ++c) {
            if (c > 0) {
                out += '|';
            }
            out += std::to_string(r.concepts[c]);
        }
        out += " r=";
        out += r.response < 0 ? "?" : std::to_string(r.response);
    }
    return out;
}

std::vector<QARecord> parse_serialized_records(const std::string& text) {
    std::vector<QARecord> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        QARecord rec;
        std::istringstream ls(line);
        std::string part;
        while (ls >> part) {
            if (part.rfind("q=", 0) == 0) {
                rec.question = std::stoi(part.substr(2));
            } else if (part.rfind("c=", 0) == 0) {
                std::stringstream cs(part.substr(2));
                std::string tok;
                while (std::getline(cs, tok, '|')) {
                    rec.concepts.push_back(std::stoi(tok));
                }
            } else if (part.rfind("r=", 0) == 0) {
                std::string v = part.substr(2);
                rec.response = v == "?" ? -1 : std::stoi(v);
            }
        }
        if (rec.question < 0 || rec.concepts.empty()) {
            throw ParseError("malformed record line: '" + line + "'");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mock backend

bool MockOracle::relevant(int a, int b) const {
    if (a == b) {
        return true;
    }
    // Weakly connected components of the prerequisite DAG.
    std::map<int, int> parent;
    std::function<int(int)> find = [&](int x) {
        auto it = parent.find(x);
        if (it == parent.end()) {
            parent[x] = x;
            return x;
        }
        if (it->second != x) {
            it->second = find(it->second);
        }
        return parent[x];
    };
    for (const auto& [i, j] : prereq_edges) {
        parent[find(i)] = find(j);
    }
    return find(a) == find(b);
}

bool MockOracle::prerequisite(int i, int j) const {
    return prereq_edges.count({i, j}) != 0;
}

std::pair<double, double> MockOracle::default_mastery(const std::vector<QARecord>& prefix,
                                                      const std::vector<int>& concepts) const {
    if (concepts.empty()) {
        return {0.5, 0.0};
    }
    double m = 0;
    double attempts = 0;
    for (int c : concepts) {
        auto [cor, cou] = concept_stats(prefix, c);
        m += cor;
        attempts += cou;
    }
    m /= static_cast<double>(concepts.size());
    attempts /= static_cast<double>(concepts.size());
    double s = (1.0 + attempts) / (3.0 + attempts);
    return {m, s};
}

int MockBackend::resolve_concept(const std::string& text) const {
    for (const auto& [id, t] : oracle_.concept_texts) {
        if (t == text) {
            return id;
        }
    }
    throw ArgumentError("mock oracle does not know concept '" + text + "'");
}

std::string MockBackend::complete(TemplateId id, const PromptArgs& args,
                                  const std::string& /*rendered_prompt*/) {
    switch (id) {
        case TemplateId::relevance: {
            int a = resolve_concept(args.at("concept_i"));
            int b = resolve_concept(args.at("concept_j"));
            return oracle_.relevant(a, b) ? "yes" : "no";
        }
        case TemplateId::prerequisite: {
            // Asked: is concept_j a prerequisite of concept_i.
            int i = resolve_concept(args.at("concept_i"));
            int j = resolve_concept(args.at("concept_j"));
            return oracle_.prerequisite(i, j) ? "yes" : "no";
        }
        case TemplateId::mastery: {
            auto records = parse_serialized_records(args.at("records"));
            int step = std::stoi(args.at("step"));  // 1-based target step
            if (step < 1 || step > static_cast<int>(records.size()) + 1) {
                throw ArgumentError("mastery step out of range");
            }
            std::vector<QARecord> prefix(records.begin(), records.begin() + (step - 1));
            std::vector<int> concepts;
            std::stringstream cs(args.at("concepts"));
            std::string tok;
            while (std::getline(cs, tok, '|')) {
                concepts.push_back(std::stoi(tok));
            }
            auto [m, s] = oracle_.mastery_fn ? oracle_.mastery_fn(prefix, concepts)
                                             : oracle_.default_mastery(prefix, concepts);
            char buf[80];
            std::snprintf(buf, sizeof(buf), "{\"mastery\":%.6f,\"credit\":%.6f}", m, s);
            return buf;
        }
    }
    throw ArgumentError("unknown template id");
}

MockOracle load_mock_oracle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open mock oracle file: " + path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    MockOracle oracle;
    std::map<std::string, int> by_text;
    for (const auto& c : doc.at("concepts")) {
        int id = c.at("id").get<int>();
        std::string text = c.at("text").get<std::string>();
        oracle.concept_texts[id] = text;
        by_text[text] = id;
    }
    for (const auto& e : doc.at("prerequisites")) {
        auto resolve = [&](const json& v) {
            if (v.is_number_integer()) {
                return v.get<int>();
            }
            auto it = by_text.find(v.get<std::string>());
            if (it == by_text.end()) {
                throw ValidationError(path + ": prerequisite references unknown concept '" +
                                      v.get<std::string>() + "'");
            }
            return it->second;
        };
        oracle.prereq_edges.insert({resolve(e.at("start")), resolve(e.at("end"))});
    }
    return oracle;
}

void save_mock_oracle(const MockOracle& oracle, const std::string& path) {
    json doc;
    json concepts = json::array();
    for (const auto& [id, text] : oracle.concept_texts) {
        concepts.push_back({{"id", id}, {"text", text}});
    }
    doc["concepts"] = std::move(concepts);
    json edges = json::array();
    for (const auto& [i, j] : oracle.prereq_edges) {
        edges.push_back({{"start", oracle.concept_texts.at(i)}, {"end", oracle.concept_texts.at(j)}});
    }
    doc["prerequisites"] = std::move(edges);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write mock oracle file: " + path);
    }
    out << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Gateway

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> backend, GatewayConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
    if (!backend_) {
        throw ArgumentError("gateway requires a backend");
    }
    if (!config_.cache_dir.empty()) {
        fs::create_directories(config_.cache_dir);
    }
}

std::string LlmGateway::disk_path(std::uint64_t key) const {
    return (fs::path(config_.cache_dir) / (to_hex(key) + ".json")).string();
}

std::optional<std::string> LlmGateway::cache_lookup(std::uint64_t key,
                                                    const std::string& fingerprint) {
    for (std::uint64_t probe = key;; ++probe) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find(probe);
            if (it != cache_.end()) {
                if (it->second.request_fingerprint == fingerprint) {
                    return it->second.response;
                }
                continue;  // hash collision, keep probing
            }
        }
        if (config_.cache_dir.empty()) {
            return std::nullopt;
        }
        std::ifstream in(disk_path(probe), std::ios::binary);
        if (!in) {
            return std::nullopt;
        }
        json doc;
        try {
            in >> doc;
        } catch (const json::exception&) {
            return std::nullopt;  // torn file; treat as miss
        }
        CacheEntry entry{doc.at("request").get<std::string>(), doc.at("response").get<std::string>()};
        {
            std::lock_guard<std::mutex> lock(mu_);
            cache_.emplace(probe, entry);
        }
        if (entry.request_fingerprint == fingerprint) {
            return entry.response;
        }
    }
}

void LlmGateway::cache_store(std::uint64_t key, const std::string& fingerprint,
                             const std::string& response) {
    std::uint64_t slot = key;
    {
        std::lock_guard<std::mutex> lock(mu_);
        while (true) {
            auto it = cache_.find(slot);
            if (it == cache_.end()) {
                cache_.emplace(slot, CacheEntry{fingerprint, response});
                break;
            }
            if (it->second.request_fingerprint == fingerprint) {
                // Replace only when upgrading an unparseable entry; a concurrent
                // equal-fingerprint writer already stored the canonical response.
                it->second.response = response;
                break;
            }
            ++slot;
        }
    }
    if (config_.cache_dir.empty()) {
        return;
    }
    json doc{{"request", fingerprint}, {"response", response}, {"model", backend_->model_id()}};
    std::string final_path = disk_path(slot);
    std::string tmp_path = final_path + ".tmp";
    {
        std::ofstream out(tmp_path, std::ios::binary);
        if (!out) {
            throw IoError("cannot write cache file: " + tmp_path);
        }
        out << doc.dump();
    }
    fs::rename(tmp_path, final_path);
}

std::string LlmGateway::call_backend(TemplateId id, const PromptArgs& args) {
    const std::string prompt = prompts_.get(id).render(args);
    std::string last_err;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        try {
            {
                std::lock_guard<std::mutex> lock(mu_);
                ++backend_calls_;
            }
            return backend_->complete(id, args, prompt);
        } catch (const TransportError& e) {
            last_err = e.what();
        }
    }
    throw TransportError("backend unreachable after " + std::to_string(config_.retries + 1) +
                         " attempts: " + last_err);
}

std::string LlmGateway::complete(TemplateId id, const PromptArgs& args) {
    const std::string fingerprint = request_fingerprint(id, args, backend_->model_id());
    const std::uint64_t key = cache_key(id, args, backend_->model_id());

    if (config_.cache_enabled) {
        if (auto hit = cache_lookup(key, fingerprint)) {
            std::lock_guard<std::mutex> lock(mu_);
            ++cache_hits_;
            return *hit;
        }
        // Collapse concurrent identical requests onto one backend call.
        std::shared_future<std::string> wait_on;
        bool owner = false;
        std::promise<std::string> promise;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = inflight_.find(key);
            if (it != inflight_.end()) {
                wait_on = it->second;
            } else {
                owner = true;
                wait_on = promise.get_future().share();
                inflight_.emplace(key, wait_on);
            }
        }
        if (!owner) {
            std::string value = wait_on.get();
            std::lock_guard<std::mutex> lock(mu_);
            ++cache_hits_;
            return value;
        }
        try {
            std::string response = call_backend(id, args);
            cache_store(key, fingerprint, response);
            promise.set_value(response);
            {
                std::lock_guard<std::mutex> lock(mu_);
                inflight_.erase(key);
            }
            return response;
        } catch (...) {
            promise.set_exception(std::current_exception());
            std::lock_guard<std::mutex> lock(mu_);
            inflight_.erase(key);
            throw;
        }
    }
    return call_backend(id, args);
}

int LlmGateway::complete_binary(TemplateId id, const PromptArgs& args) {
    const std::string fingerprint = request_fingerprint(id, args, backend_->model_id());
    const std::uint64_t key = cache_key(id, args, backend_->model_id());
    std::string last_err;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        std::string response = attempt == 0 ? complete(id, args) : call_backend(id, args);
        try {
            int value = parse_binary(response);
            if (attempt > 0 && config_.cache_enabled) {
                cache_store(key, fingerprint, response);
            }
            return value;
        } catch (const ParseError& e) {
            last_err = e.what();
        }
    }
    throw ParseError("unparseable " + template_id_name(id) + " response after " +
                     std::to_string(config_.retries + 1) + " attempts: " + last_err);
}

std::pair<double, double> LlmGateway::complete_mastery(const PromptArgs& args) {
    const std::string fingerprint =
        request_fingerprint(TemplateId::mastery, args, backend_->model_id());
    const std::uint64_t key = cache_key(TemplateId::mastery, args, backend_->model_id());
    std::string last_err;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        std::string response =
            attempt == 0 ? complete(TemplateId::mastery, args) : call_backend(TemplateId::mastery, args);
        try {
            auto value = parse_mastery(response);
            if (attempt > 0 && config_.cache_enabled) {
                cache_store(key, fingerprint, response);
            }
            return value;
        } catch (const ParseError& e) {
            last_err = e.what();
        }
    }
    throw ParseError("unparseable mastery response after " + std::to_string(config_.retries + 1) +
                     " attempts: " + last_err);
}

std::int64_t LlmGateway::backend_calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return backend_calls_;
}

std::int64_t LlmGateway::cache_hits() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_hits_;
}

}  // namespace ldsim
