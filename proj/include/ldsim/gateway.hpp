#pragma once

#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ldsim/data.hpp"
#include "ldsim/errors.hpp"

namespace ldsim {

enum class TemplateId { relevance, prerequisite, mastery };

std::string template_id_name(TemplateId id);

/// Plain-text template with ${name} placeholders. Rendering is bit-exact
/// substitution; an unbound placeholder is an error.
struct PromptTemplate {
    TemplateId id;
    std::string text;

    std::string render(const std::map<std::string, std::string>& args) const;
};

/// The three built-in templates plus optional overrides loaded from files.
class PromptLibrary {
public:
    PromptLibrary();
    const PromptTemplate& get(TemplateId id) const;
    void load_override(TemplateId id, const std::string& path);

private:
    std::map<TemplateId, PromptTemplate> templates_;
};

using PromptArgs = std::map<std::string, std::string>;

/// Cache key is a pure function of (template id, bound arguments); the model
/// id participates so different backends never share entries.
std::uint64_t cache_key(TemplateId id, const PromptArgs& args, const std::string& model_id);

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    /// args carry the semantic inputs; rendered_prompt is the full prompt text.
    virtual std::string complete(TemplateId id, const PromptArgs& args,
                                 const std::string& rendered_prompt) = 0;
    virtual std::string model_id() const = 0;
};

/// Deterministic stand-in for the LLM. Prerequisite answers come from a fixed
/// DAG; relevance holds iff the two concepts share a weakly connected
/// component; mastery defaults to the causal per-concept correct rate.
struct MockOracle {
    std::map<int, std::string> concept_texts;           // id -> text
    std::set<std::pair<int, int>> prereq_edges;         // <i, j>: j is prerequisite of i
    // (prefix records, target concepts) -> (mastery, credit)
    std::function<std::pair<double, double>(const std::vector<QARecord>&, const std::vector<int>&)>
        mastery_fn;

    bool relevant(int a, int b) const;
    bool prerequisite(int i, int j) const;  // is j a prerequisite of i
    std::pair<double, double> default_mastery(const std::vector<QARecord>& prefix,
                                              const std::vector<int>& concepts) const;
};

MockOracle load_mock_oracle(const std::string& path);
void save_mock_oracle(const MockOracle& oracle, const std::string& path);

class MockBackend : public LlmBackend {
public:
    explicit MockBackend(MockOracle oracle) : oracle_(std::move(oracle)) {}
    std::string complete(TemplateId id, const PromptArgs& args,
                         const std::string& rendered_prompt) override;
    std::string model_id() const override { return "mock"; }
    const MockOracle& oracle() const { return oracle_; }

private:
    int resolve_concept(const std::string& text) const;
    MockOracle oracle_;
};

struct HttpBackendConfig {
    std::string base_url;                      // e.g. https://api.example.com
    std::string path = "/v1/chat/completions";
    std::string model = "glm-4-flash";
    std::string api_key_env = "LDSIM_API_KEY";
    double temperature = 0.0;
    int timeout_seconds = 60;
};

/// OpenAI-style chat-completions client over cpp-httplib.
class HttpBackend : public LlmBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    std::string complete(TemplateId id, const PromptArgs& args,
                         const std::string& rendered_prompt) override;
    std::string model_id() const override { return config_.model; }

private:
    HttpBackendConfig config_;
    std::string api_key_;
};

struct GatewayConfig {
    int retries = 3;          // extra attempts beyond the first
    std::string cache_dir;    // empty = in-memory only
    bool cache_enabled = true;
    int parallelism = 4;      // honored by distillation drivers
};

/// Free-standing response parsers (also used directly by tests).
int parse_binary(const std::string& response_text);
std::pair<double, double> parse_mastery(const std::string& response_text);

/// Uniform LLM access: template rendering, persistent content-addressed
/// cache, transport retry, and parse-retry with fresh sampling. Thread-safe;
/// concurrent identical requests collapse to one backend call and the first
/// completed response is canonical.
class LlmGateway {
public:
    LlmGateway(std::shared_ptr<LlmBackend> backend, GatewayConfig config = {});

    /// Raw completion with caching and transport retry.
    std::string complete(TemplateId id, const PromptArgs& args);

    /// Completion + binary parse with the parse-retry loop.
    int complete_binary(TemplateId id, const PromptArgs& args);

    /// Completion + mastery parse with the parse-retry loop.
    std::pair<double, double> complete_mastery(const PromptArgs& args);

    std::int64_t backend_calls() const;
    std::int64_t cache_hits() const;
    int parallelism() const { return config_.parallelism; }
    const PromptLibrary& prompts() const { return prompts_; }
    PromptLibrary& prompts() { return prompts_; }

private:
    struct CacheEntry {
        std::string request_fingerprint;
        std::string response;
    };

    std::string call_backend(TemplateId id, const PromptArgs& args);
    std::optional<std::string> cache_lookup(std::uint64_t key, const std::string& fingerprint);
    void cache_store(std::uint64_t key, const std::string& fingerprint, const std::string& response);
    std::string disk_path(std::uint64_t key) const;

    std::shared_ptr<LlmBackend> backend_;
    GatewayConfig config_;
    PromptLibrary prompts_;

    mutable std::mutex mu_;
    std::map<std::uint64_t, CacheEntry> cache_;
    std::map<std::uint64_t, std::shared_future<std::string>> inflight_;
    std::int64_t backend_calls_ = 0;
    std::int64_t cache_hits_ = 0;
};

/// Canonical serialization helpers shared by prompt assembly and the mock
/// backend (one format, parsed on both sides).
std::string serialize_records(const std::vector<QARecord>& records);
std::vector<QARecord> parse_serialized_records(const std::string& text);

}  // namespace ldsim
