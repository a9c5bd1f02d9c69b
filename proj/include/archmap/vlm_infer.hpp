#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "archmap/dkb.hpp"
#include "archmap/render.hpp"
#include "archmap/report.hpp"

namespace archmap {

enum class InferenceMode { NonThinking, Thinking };
std::string to_string(InferenceMode mode);
/// thinking | non-thinking; throws InvalidConfig otherwise.
InferenceMode parse_inference_mode(std::string_view text);

/// Hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

struct EncodedImage {
    ViewName view = ViewName::Front;
    std::vector<std::uint8_t> png;
    std::string sha256;
};

struct InferenceRequest {
    std::string case_id;
    ArchSide arch_side = ArchSide::Maxillary;
    std::array<EncodedImage, 3> images; // front, back, bottom
    std::string prompt;
    nlohmann::ordered_json schema;
    double temperature = 0.0;
    InferenceMode mode = InferenceMode::NonThinking;
    std::string model_name;

    /// SHA-256 over every field that reaches the backend.
    std::string digest() const;
};

/// PNG-encodes the three views, renders the prompt (the full ontology prompt,
/// or the minimal one when `with_ontology` is false) and pins temperature 0.
InferenceRequest build_request(const MultiViewSet &views, const DentalOntology &ontology, InferenceMode mode,
                               std::string model_name, std::string case_id = {}, bool with_ontology = true);

/// Raised by backends for transient transport failures (connect errors,
/// timeouts); `infer` retries these.
class TransportFailure : public Error {
public:
    explicit TransportFailure(const std::string &what) : Error("TransportFailure", what) {}
};

class Backend {
public:
    virtual ~Backend() = default;
    /// Raw reply text. Throws TransportFailure or BackendRejected.
    virtual std::string complete(const InferenceRequest &request) = 0;
    virtual std::string name() const = 0;
    /// True when replies are a pure function of the request.
    virtual bool deterministic() const { return false; }
    /// False when the backend has no way to express the thinking mode.
    virtual bool honours_mode() const { return false; }
};

struct RetryPolicy {
    int max_attempts = 3;
    double initial_backoff_s = 0.5;
    double multiplier = 2.0;
};

/// Calls the backend, retrying transport failures with exponential backoff.
/// Any reply, valid JSON or not, is returned as is. Throws
/// BackendUnreachable once the attempts are exhausted; BackendRejected
/// passes through without retry.
std::string infer(Backend &backend, const InferenceRequest &request, const RetryPolicy &policy = {},
                  int *attempts_used = nullptr);

struct InferenceOutcome {
    std::optional<StructuredReport> report;
    bool json_valid = false;
    bool repair_applied = false;
    std::vector<Violation> violations;
    std::vector<std::string> schema_errors;
    std::string raw;
    std::optional<double> latency; // seconds; absent for deterministic backends
};

/// First balanced {...} block, honouring JSON string quoting; nullopt when
/// there is none.
std::optional<std::string> extract_brace_block(std::string_view text);

/// Strict parse, then at most one extraction-only repair pass; the parsed
/// value must also conform to the report structure. `validate` runs the
/// ontology rules on the resulting report.
InferenceOutcome parse_and_repair(const std::string &raw, const DentalOntology &ontology, bool validate = true);

} // namespace archmap
