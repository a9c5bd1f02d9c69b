#pragma once

#include <chrono>
#include <cstdint>
#include <set>
#include <string>

#include "archmap/dkb.hpp"
#include "archmap/vlm_infer.hpp"

namespace archmap {

enum class CorruptionKind { Hallucination, InvalidJson, Fenced };
std::string to_string(CorruptionKind kind);
CorruptionKind parse_corruption_kind(std::string_view text);

struct MockOptions {
    std::uint64_t seed = 7;
    /// Cases ("<case>_<arch>") whose replies are corrupted.
    std::set<std::string> corrupt_cases;
    CorruptionKind corrupt_kind = CorruptionKind::Hallucination;
};

/// Rule-based stand-in for a vision-language model. The reply is a pure
/// function of the request digest and the seed: the digest and seed drive a
/// generator that picks a dentition stage and a consistent set of FDI codes
/// for the declared arch.
class MockBackend : public Backend {
public:
    MockBackend(DentalOntology ontology, MockOptions options);

    std::string complete(const InferenceRequest &request) override;
    std::string name() const override { return "mock"; }
    bool deterministic() const override { return true; }
    bool honours_mode() const override { return true; }

    /// The clean report the mock would emit before any corruption.
    StructuredReport emission(const InferenceRequest &request) const;

private:
    DentalOntology ontology_;
    MockOptions options_;
};

struct HttpOptions {
    std::string url;        // e.g. http://localhost:8000/v1/chat/completions
    std::string model_name;
    double timeout_s = 60.0;
    std::string api_key_env = "ARCHMAP_API_KEY";
    /// JSON object merged into the body in thinking mode (e.g.
    /// {"reasoning": {"effort": "high"}}); empty means the mode is advisory.
    std::string thinking_field;
};

/// Chat-style JSON endpoint: one user message with a text part and three
/// base64 PNG image parts, temperature 0, JSON-schema response format.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpOptions options);

    std::string complete(const InferenceRequest &request) override;
    std::string name() const override { return "http"; }
    bool honours_mode() const override { return !options_.thinking_field.empty(); }

    /// Request body as sent on the wire.
    nlohmann::ordered_json request_body(const InferenceRequest &request) const;

private:
    HttpOptions options_;
};

} // namespace archmap
