#include "archmap/vlm_infer.hpp"

#include <chrono>
#include <thread>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace archmap {

std::string to_string(InferenceMode mode) { return mode == InferenceMode::Thinking ? "thinking" : "non-thinking"; }

InferenceMode parse_inference_mode(std::string_view text) {
    if (text == "thinking") return InferenceMode::Thinking;
    if (text == "non-thinking" || text == "nonthinking") return InferenceMode::NonThinking;
    throw InvalidConfig(fmt::format("unknown inference mode '{}'", text));
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
}

std::string sha256_hex(std::string_view text) {
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string InferenceRequest::digest() const {
    nlohmann::ordered_json j;
    j["case_id"] = case_id;
    j["arch"] = to_string(arch_side);
    j["model"] = model_name;
    j["mode"] = to_string(mode);
    j["temperature"] = temperature;
    j["prompt_sha256"] = sha256_hex(prompt);
    j["schema_sha256"] = sha256_hex(schema.dump());
    for (const auto &img : images) j["images"].push_back({{"view", to_string(img.view)}, {"sha256", img.sha256}});
    return sha256_hex(j.dump());
}

InferenceRequest build_request(const MultiViewSet &views, const DentalOntology &ontology, InferenceMode mode,
                               std::string model_name, std::string case_id, bool with_ontology) {
    InferenceRequest r;
    r.case_id = std::move(case_id);
    r.arch_side = views.arch_side;
    r.mode = mode;
    r.model_name = std::move(model_name);
    r.temperature = 0.0;
    constexpr std::array<ViewName, 3> order{ViewName::Front, ViewName::Back, ViewName::Bottom};
    for (std::size_t i = 0; i < 3; ++i) {
        r.images[i].view = order[i];
        r.images[i].png = encode_png(views.views[i]);
        r.images[i].sha256 = sha256_hex(r.images[i].png);
    }
    r.schema = report_schema(ontology);
    r.prompt = with_ontology ? render_prompt(ontology, views.arch_side, r.schema)
                             : minimal_prompt(views.arch_side, r.schema);
    return r;
}

std::string infer(Backend &backend, const InferenceRequest &request, const RetryPolicy &policy, int *attempts_used) {
    const int attempts = std::max(1, policy.max_attempts);
    double backoff = policy.initial_backoff_s;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempts_used) *attempts_used = attempt;
        try {
            return backend.complete(request);
        } catch (const TransportFailure &e) {
            last_error = e.what();
        }
        if (attempt < attempts && backoff > 0.0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= policy.multiplier;
        }
    }
    throw BackendUnreachable(
        fmt::format("{} backend unreachable after {} attempts: {}", backend.name(), attempts, last_error));
}

std::optional<std::string> extract_brace_block(std::string_view text) {
    const auto start = text.find('{');
    if (start == std::string_view::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (ch == '\\') escaped = true;
            else if (ch == '"') in_string = false;
            continue;
        }
        if (ch == '"') in_string = true;
        else if (ch == '{') ++depth;
        else if (ch == '}' && --depth == 0) return std::string(text.substr(start, i - start + 1));
    }
    return std::nullopt;
}

InferenceOutcome parse_and_repair(const std::string &raw, const DentalOntology &ontology, bool validate) {
    InferenceOutcome out;
    out.raw = raw;
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        out.repair_applied = true;
        if (auto block = extract_brace_block(raw)) value = nlohmann::json::parse(*block, nullptr, false);
    }
    if (value.is_discarded()) {
        out.schema_errors.push_back("reply is not parseable JSON");
        return out;
    }
    out.report = report_from_json(value, out.schema_errors);
    out.json_valid = out.report.has_value();
    if (out.report && validate) out.violations = validate_report(*out.report, ontology);
    return out;
}

} // namespace archmap
