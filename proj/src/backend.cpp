#include "archmap/backend.hpp"

#include <cstdlib>
#include <random>

#include <fmt/format.h>

// after Eigen: resolv.h defines _res
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace archmap {

std::string to_string(CorruptionKind kind) {
    switch (kind) {
    case CorruptionKind::Hallucination: return "hallucination";
    case CorruptionKind::InvalidJson: return "invalid_json";
    case CorruptionKind::Fenced: return "fenced";
    }
    return "?";
}

CorruptionKind parse_corruption_kind(std::string_view text) {
    for (auto k : {CorruptionKind::Hallucination, CorruptionKind::InvalidJson, CorruptionKind::Fenced})
        if (to_string(k) == text) return k;
    throw InvalidConfig(fmt::format("unknown corruption kind '{}'", text));
}

MockBackend::MockBackend(DentalOntology ontology, MockOptions options)
    : ontology_(std::move(ontology)), options_(std::move(options)) {}

namespace {

std::mt19937_64 seeded_engine(const std::string &digest_hex, std::uint64_t seed) {
    std::vector<std::uint32_t> words;
    for (std::size_t i = 0; i + 8 <= digest_hex.size(); i += 8)
        words.push_back(static_cast<std::uint32_t>(std::stoul(digest_hex.substr(i, 8), nullptr, 16)));
    words.push_back(static_cast<std::uint32_t>(seed));
    words.push_back(static_cast<std::uint32_t>(seed >> 32));
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

// Uniform in [0, n) from raw engine output; the standard distributions are
// implementation-defined, this is not.
std::uint64_t draw(std::mt19937_64 &rng, std::uint64_t n) { return rng() % n; }

std::string side_name(int quadrant) {
    // viewer's left is the patient's right
    return (quadrant % 2 == 1) ? "right" : "left";
}

} // namespace

StructuredReport MockBackend::emission(const InferenceRequest &request) const {
    auto rng = seeded_engine(request.digest(), options_.seed);
    StructuredReport r;
    r.arch = request.arch_side;
    const int q_right = request.arch_side == ArchSide::Maxillary ? 1 : 4;
    const int q_left = request.arch_side == ArchSide::Maxillary ? 2 : 3;
    std::vector<int> codes;

    const auto stage_roll = draw(rng, 10);
    if (stage_roll < 7) {
        r.dentition_stage = DentitionStage::Permanent;
        for (int q : {q_right, q_left}) {
            for (int p = 1; p <= 7; ++p) codes.push_back(10 * q + p);
            if (draw(rng, 10) < 3) {
                codes.push_back(10 * q + 8);
                r.third_molar_evidence = true;
            }
        }
        if (draw(rng, 10) < 2) {
            const int q = draw(rng, 2) == 0 ? q_right : q_left;
            const int code = 10 * q + (draw(rng, 2) == 0 ? 4 : 5);
            codes.erase(std::find(codes.begin(), codes.end(), code));
            r.anomalies.push_back({AnomalyKind::Extracted, code,
                                   fmt::format("{} premolar segment, quadrant {}", side_name(q), q),
                                   "gap consistent with orthodontic extraction", {}});
        }
        r.notes = "permanent dentition";
    } else if (stage_roll < 9) {
        r.dentition_stage = DentitionStage::Mixed;
        for (int q : {q_right, q_left}) {
            for (int p : {1, 2, 6}) codes.push_back(10 * q + p);
            for (int p : {3, 4, 5}) codes.push_back(10 * (q + 4) + p);
        }
        r.special_conditions.push_back("transitional dentition; primary canines and molars retained");
        r.notes = "mixed dentition";
    } else {
        r.dentition_stage = DentitionStage::Deciduous;
        for (int q : {q_right, q_left})
            for (int p = 1; p <= 5; ++p) codes.push_back(10 * (q + 4) + p);
        r.notes = "primary dentition";
    }
    std::sort(codes.begin(), codes.end());
    r.fdi_present = codes;
    r.teeth_number = static_cast<int>(codes.size());
    RegionCounts regions;
    SizeCounts sizes;
    for (int code : codes) {
        switch (ontology_.region_of(code)) {
        case Region::Anterior: ++regions.anterior; break;
        case Region::Premolar: ++regions.premolar; break;
        case Region::Molar: ++regions.molar; break;
        }
        switch (ontology_.size_of(code)) {
        case SizeClass::Large: ++sizes.large; break;
        case SizeClass::Medium: ++sizes.medium; break;
        case SizeClass::Small: ++sizes.small; break;
        }
    }
    r.anatomical_counts = regions;
    r.size_counts = sizes;
    return r;
}

std::string MockBackend::complete(const InferenceRequest &request) {
    const StructuredReport report = emission(request);
    auto j = to_json(report);
    const auto key = fmt::format("{}_{}", request.case_id, to_string(request.arch_side));
    if (!options_.corrupt_cases.contains(key)) return j.dump(2);
    switch (options_.corrupt_kind) {
    case CorruptionKind::Hallucination:
        j["dentition_stage"] = "adult";
        return j.dump(2);
    case CorruptionKind::InvalidJson: {
        const auto text = j.dump(2);
        return text.substr(0, text.size() / 2);
    }
    case CorruptionKind::Fenced:
        return fmt::format("Here is the structured report.\n```json\n{}\n```\n", j.dump(2));
    }
    return j.dump(2);
}

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
    if (options_.url.empty()) throw InvalidConfig("http backend requires a url");
}

nlohmann::ordered_json HttpBackend::request_body(const InferenceRequest &request) const {
    using oj = nlohmann::ordered_json;
    oj content = oj::array();
    content.push_back({{"type", "text"}, {"text", request.prompt}});
    for (const auto &img : request.images)
        content.push_back(
            {{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + base64_encode(img.png)}}}});
    oj body;
    body["model"] = request.model_name.empty() ? options_.model_name : request.model_name;
    body["temperature"] = request.temperature;
    body["messages"] = oj::array({{{"role", "user"}, {"content", content}}});
    body["response_format"] = {{"type", "json_schema"},
                               {"json_schema", {{"name", "arch_report"}, {"strict", true}, {"schema", request.schema}}}};
    if (request.mode == InferenceMode::Thinking && !options_.thinking_field.empty()) {
        const auto extra = oj::parse(options_.thinking_field, nullptr, false);
        if (extra.is_discarded() || !extra.is_object())
            throw InvalidConfig("backend.thinking_field must be a JSON object");
        for (const auto &item : extra.items()) body[item.key()] = item.value();
    }
    return body;
}

std::string HttpBackend::complete(const InferenceRequest &request) {
    const auto scheme_end = options_.url.find("://");
    if (scheme_end == std::string::npos) throw InvalidConfig(fmt::format("bad backend url '{}'", options_.url));
    const auto path_start = options_.url.find('/', scheme_end + 3);
    const std::string origin = options_.url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : options_.url.substr(path_start);

    httplib::Client client(origin);
    const auto seconds = static_cast<time_t>(options_.timeout_s);
    const auto micros = static_cast<time_t>((options_.timeout_s - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    httplib::Headers headers;
    if (const char *key = std::getenv(options_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", fmt::format("Bearer {}", key));

    auto result = client.Post(path, headers, request_body(request).dump(), "application/json");
    if (!result) throw TransportFailure(fmt::format("{}: {}", options_.url, httplib::to_string(result.error())));
    if (result->status < 200 || result->status >= 300)
        throw BackendRejected(fmt::format("status {}: {}", result->status, result->body));

    const auto envelope = nlohmann::json::parse(result->body, nullptr, false);
    if (!envelope.is_discarded() && envelope.contains("choices") && envelope["choices"].is_array() &&
        !envelope["choices"].empty()) {
        const auto &message = envelope["choices"][0]["message"];
        if (message.is_object() && message.contains("content") && message["content"].is_string())
            return message["content"].get<std::string>();
    }
    return result->body;
}

} // namespace archmap
