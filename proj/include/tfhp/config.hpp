#pragma once

#include "tfhp/analytics.hpp"
#include "tfhp/bernstein.hpp"
#include "tfhp/errors.hpp"
#include "tfhp/hawkes.hpp"
#include "tfhp/montecarlo.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tfhp {

/// Schema violation; line is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& where, std::size_t line, const std::string& msg)
        : std::runtime_error(where + ":" + std::to_string(line) + ": " + msg), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct OutputNames {
    std::string csv;
    std::string json;
};

struct ExperimentConfig {
    std::optional<HawkesParams> hawkes;
    std::optional<BernsteinSpec> sub;
    std::vector<double> times;
    std::vector<std::pair<double, double>> pairs;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 1;
    std::optional<double> delta;  // empty: chosen by the bias rule
    std::uint64_t max_steps = kDefaultMaxSteps;
    std::size_t max_events = kMaxEvents;
    double convolution_tol = kDefaultConvolutionTol;
    int inversion_order = kPhiInversionOrder;
    Lemma41Variant lemma41_variant = Lemma41Variant::Proof;
    std::optional<double> gamma;  // lemma-check rate; defaults to the Hawkes gamma
    std::vector<std::array<double, 4>> ml3_points;  // (a, b, c, z)
    std::vector<std::array<double, 4>> phi_points;  // (beta, nu, gamma, t)
    std::optional<OutputNames> output;
    std::string source = "config";  // file name for messages
};

namespace detail {

// JSON pointer -> line of the token that starts the value. The text has already been accepted
// by the real parser, so the scan only tracks strings, containers and keys.
inline std::map<std::string, std::size_t> value_lines(const std::string& text) {
    struct Frame {
        bool object;
        std::string key;
        std::size_t index;
    };
    std::map<std::string, std::size_t> lines;
    std::vector<Frame> stack;
    std::size_t line = 1;
    bool expect_key = false;
    auto escape = [](const std::string& k) {
        std::string out;
        for (char c : k) {
            if (c == '~') {
                out += "~0";
            } else if (c == '/') {
                out += "~1";
            } else {
                out += c;
            }
        }
        return out;
    };
    auto pointer = [&]() {
        std::string p;
        for (const auto& f : stack) {
            p += "/" + (f.object ? escape(f.key) : std::to_string(f.index));
        }
        return p;
    };
    auto mark_value = [&]() {
        if (!stack.empty()) {
            lines.emplace(pointer(), line);
        }
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            continue;
        }
        if (c == '"') {
            std::string s;
            for (++i; i < text.size() && text[i] != '"'; ++i) {
                if (text[i] == '\\') {
                    ++i;
                }
                s += text[i];
            }
            if (expect_key) {
                stack.back().key = s;
                expect_key = false;
                // key line doubles as the value line unless the value starts later
                lines.emplace(pointer(), line);
            } else {
                mark_value();
            }
            continue;
        }
        if (c == '{' || c == '[') {
            mark_value();
            stack.push_back({c == '{', "", 0});
            expect_key = c == '{';
            continue;
        }
        if (c == '}' || c == ']') {
            stack.pop_back();
            expect_key = false;
            continue;
        }
        if (c == ',') {
            if (!stack.empty()) {
                if (stack.back().object) {
                    expect_key = true;
                } else {
                    ++stack.back().index;
                }
            }
            continue;
        }
        if (c == ':') {
            continue;
        }
        mark_value();
        while (i + 1 < text.size() && std::string_view(",]}\n \t\r").find(text[i + 1]) == std::string_view::npos) {
            ++i;
        }
    }
    return lines;
}

class Reader {
public:
    Reader(std::string where, const std::string& text) : where_(std::move(where)), lines_(value_lines(text)) {}

    [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
        // nearest enclosing value that has a recorded line
        std::string p = ptr;
        for (;;) {
            if (auto it = lines_.find(p); it != lines_.end()) {
                throw ConfigError(where_, it->second, msg);
            }
            if (p.empty()) {
                throw ConfigError(where_, 1, msg);
            }
            p.resize(p.rfind('/'));
        }
    }

    void allow_keys(const nlohmann::json& obj, const std::string& ptr, std::initializer_list<const char*> keys) const {
        if (!obj.is_object()) {
            fail(ptr, (ptr.empty() ? std::string("config") : "'" + ptr + "'") + " must be an object");
        }
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& [k, v] : obj.items()) {
            if (!ok.count(k)) {
                fail(ptr + "/" + k, "unknown key '" + k + "'" + (ptr.empty() ? "" : " in " + ptr));
            }
        }
    }

    const nlohmann::json& need(const nlohmann::json& obj, const std::string& ptr, const char* key) const {
        if (!obj.contains(key)) {
            fail(ptr, std::string("missing key '") + key + "'" + (ptr.empty() ? "" : " in " + ptr));
        }
        return obj.at(key);
    }

    double number(const nlohmann::json& v, const std::string& ptr) const {
        if (!v.is_number()) {
            fail(ptr, "'" + ptr + "' must be a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            fail(ptr, "'" + ptr + "' must be finite");
        }
        return x;
    }

    double number(const nlohmann::json& obj, const std::string& ptr, const char* key) const {
        return number(need(obj, ptr, key), ptr + "/" + key);
    }

    std::uint64_t unsigned_int(const nlohmann::json& v, const std::string& ptr) const {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            fail(ptr, "'" + ptr + "' must be a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    std::string string(const nlohmann::json& v, const std::string& ptr) const {
        if (!v.is_string()) {
            fail(ptr, "'" + ptr + "' must be a string");
        }
        return v.get<std::string>();
    }

    const nlohmann::json& array(const nlohmann::json& v, const std::string& ptr) const {
        if (!v.is_array()) {
            fail(ptr, "'" + ptr + "' must be an array");
        }
        return v;
    }

private:
    std::string where_;
    std::map<std::string, std::size_t> lines_;
};

inline MarkLaw parse_marks(const Reader& r, const nlohmann::json& j, const std::string& ptr) {
    r.allow_keys(j, ptr, {"law", "value", "mean", "shape", "rate"});
    const auto law = r.string(r.need(j, ptr, "law"), ptr + "/law");
    if (law == "deterministic") {
        r.allow_keys(j, ptr, {"law", "value"});
        return DeterministicMark{r.number(j, ptr, "value")};
    }
    if (law == "exponential") {
        r.allow_keys(j, ptr, {"law", "mean"});
        return ExponentialMark{r.number(j, ptr, "mean")};
    }
    if (law == "gamma") {
        r.allow_keys(j, ptr, {"law", "shape", "rate"});
        return GammaMark{r.number(j, ptr, "shape"), r.number(j, ptr, "rate")};
    }
    r.fail(ptr + "/law", "unknown mark law '" + law + "' (deterministic, exponential, gamma)");
}

inline HawkesParams parse_hawkes(const Reader& r, const nlohmann::json& j, const std::string& ptr) {
    r.allow_keys(j, ptr, {"theta", "kappa", "eta", "lambda0", "marks"});
    HawkesParams p{r.number(j, ptr, "theta"), r.number(j, ptr, "kappa"), r.number(j, ptr, "eta"),
                   r.number(j, ptr, "lambda0"), parse_marks(r, r.need(j, ptr, "marks"), ptr + "/marks")};
    try {
        p.validate();
    } catch (const ValidationError& e) {
        r.fail(ptr, e.what());
    }
    return p;
}

inline BernsteinSpec parse_subordinator(const Reader& r, const nlohmann::json& j, const std::string& ptr) {
    r.allow_keys(j, ptr, {"family", "beta", "nu", "p", "q", "delta", "g", "a", "b", "atoms"});
    const auto family = r.string(r.need(j, ptr, "family"), ptr + "/family");
    try {
        if (family == "tempered_stable") {
            r.allow_keys(j, ptr, {"family", "beta", "nu"});
            return BernsteinSpec::tempered_stable(r.number(j, ptr, "beta"), r.number(j, ptr, "nu"));
        }
        if (family == "stable") {
            r.allow_keys(j, ptr, {"family", "beta"});
            return BernsteinSpec::stable(r.number(j, ptr, "beta"));
        }
        if (family == "gamma") {
            r.allow_keys(j, ptr, {"family", "p", "q"});
            return BernsteinSpec::gamma(r.number(j, ptr, "p"), r.number(j, ptr, "q"));
        }
        if (family == "inverse_gaussian") {
            r.allow_keys(j, ptr, {"family", "delta", "g"});
            return BernsteinSpec::inverse_gaussian(r.number(j, ptr, "delta"), r.number(j, ptr, "g"));
        }
        if (family == "custom") {
            r.allow_keys(j, ptr, {"family", "a", "b", "atoms"});
            std::vector<LevyAtom> atoms;
            if (j.contains("atoms")) {
                const auto& arr = r.array(j.at("atoms"), ptr + "/atoms");
                for (std::size_t i = 0; i < arr.size(); ++i) {
                    const std::string ap = ptr + "/atoms/" + std::to_string(i);
                    if (!arr[i].is_array() || arr[i].size() != 2) {
                        r.fail(ap, "atoms must be [location, weight] pairs");
                    }
                    atoms.push_back({r.number(arr[i][0], ap + "/0"), r.number(arr[i][1], ap + "/1")});
                }
            }
            const double a = j.contains("a") ? r.number(j.at("a"), ptr + "/a") : 0.0;
            const double b = j.contains("b") ? r.number(j.at("b"), ptr + "/b") : 0.0;
            return BernsteinSpec::custom(a, b, std::move(atoms));
        }
    } catch (const ValidationError& e) {
        r.fail(ptr, e.what());
    }
    r.fail(ptr + "/family",
           "unknown family '" + family + "' (tempered_stable, stable, gamma, inverse_gaussian, custom)");
}

inline std::vector<std::array<double, 4>> parse_quads(const Reader& r, const nlohmann::json& j,
                                                      const std::string& ptr) {
    std::vector<std::array<double, 4>> out;
    const auto& arr = r.array(j, ptr);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string ip = ptr + "/" + std::to_string(i);
        if (!arr[i].is_array() || arr[i].size() != 4) {
            r.fail(ip, "entries of '" + ptr + "' need four numbers");
        }
        out.push_back({r.number(arr[i][0], ip + "/0"), r.number(arr[i][1], ip + "/1"), r.number(arr[i][2], ip + "/2"),
                       r.number(arr[i][3], ip + "/3")});
    }
    return out;
}

}  // namespace detail

/// Parses and schema-checks a config text; where names the source in error messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& where) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            line += text[i] == '\n';
        }
        throw ConfigError(where, line, std::string("malformed JSON: ") + e.what());
    }
    const detail::Reader r(where, text);
    r.allow_keys(j, "",
                 {"description", "hawkes", "subordinator", "times", "pairs", "n_paths", "seed", "delta", "max_steps",
                  "max_events", "tolerances", "inversion_order", "lemma41_variant", "gamma", "ml3", "phi", "output"});
    ExperimentConfig c;
    c.source = where;
    if (j.contains("description")) {
        r.string(j.at("description"), "/description");
    }
    if (j.contains("hawkes")) {
        c.hawkes = detail::parse_hawkes(r, j.at("hawkes"), "/hawkes");
    }
    if (j.contains("subordinator")) {
        c.sub = detail::parse_subordinator(r, j.at("subordinator"), "/subordinator");
    }
    if (j.contains("times")) {
        const auto& arr = r.array(j.at("times"), "/times");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ip = "/times/" + std::to_string(i);
            const double t = r.number(arr[i], ip);
            if (!(t > 0.0)) {
                r.fail(ip, "times must be positive");
            }
            if (!c.times.empty() && !(t > c.times.back())) {
                r.fail(ip, "times must be strictly ascending");
            }
            c.times.push_back(t);
        }
    }
    if (j.contains("pairs")) {
        const auto& arr = r.array(j.at("pairs"), "/pairs");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ip = "/pairs/" + std::to_string(i);
            if (!arr[i].is_array() || arr[i].size() != 2) {
                r.fail(ip, "pairs must be [s, t]");
            }
            const double s = r.number(arr[i][0], ip + "/0");
            const double t = r.number(arr[i][1], ip + "/1");
            if (!(s > 0.0) || !(s <= t)) {
                r.fail(ip, "pairs need 0 < s <= t");
            }
            c.pairs.emplace_back(s, t);
        }
    }
    if (j.contains("n_paths")) {
        c.n_paths = r.unsigned_int(j.at("n_paths"), "/n_paths");
        if (c.n_paths < kMinPaths) {
            r.fail("/n_paths", "n_paths must be at least " + std::to_string(kMinPaths));
        }
    }
    if (j.contains("seed")) {
        c.seed = r.unsigned_int(j.at("seed"), "/seed");
    }
    if (j.contains("delta")) {
        const auto& d = j.at("delta");
        if (d.is_string()) {
            if (d.get<std::string>() != "auto") {
                r.fail("/delta", "delta must be a positive number or \"auto\"");
            }
        } else {
            c.delta = r.number(d, "/delta");
            if (!(*c.delta > 0.0)) {
                r.fail("/delta", "delta must be positive");
            }
        }
    }
    if (j.contains("max_steps")) {
        c.max_steps = r.unsigned_int(j.at("max_steps"), "/max_steps");
    }
    if (j.contains("max_events")) {
        c.max_events = r.unsigned_int(j.at("max_events"), "/max_events");
    }
    if (j.contains("tolerances")) {
        const auto& tj = j.at("tolerances");
        r.allow_keys(tj, "/tolerances", {"convolution"});
        if (tj.contains("convolution")) {
            c.convolution_tol = r.number(tj.at("convolution"), "/tolerances/convolution");
            if (!(c.convolution_tol > 0.0)) {
                r.fail("/tolerances/convolution", "tolerance must be positive");
            }
        }
    }
    if (j.contains("inversion_order")) {
        const auto o = r.unsigned_int(j.at("inversion_order"), "/inversion_order");
        if (o < kMinStehfestOrder || o > kMaxStehfestOrder || o % 2 != 0) {
            r.fail("/inversion_order", "inversion_order must be even and within [8, 20]");
        }
        c.inversion_order = static_cast<int>(o);
    }
    if (j.contains("lemma41_variant")) {
        const auto v = r.string(j.at("lemma41_variant"), "/lemma41_variant");
        if (v == "proof") {
            c.lemma41_variant = Lemma41Variant::Proof;
        } else if (v == "statement") {
            c.lemma41_variant = Lemma41Variant::Statement;
        } else {
            r.fail("/lemma41_variant", "lemma41_variant must be \"proof\" or \"statement\"");
        }
    }
    if (j.contains("gamma")) {
        c.gamma = r.number(j.at("gamma"), "/gamma");
        if (!(*c.gamma > 0.0)) {
            r.fail("/gamma", "gamma must be positive");
        }
    }
    if (j.contains("ml3")) {
        c.ml3_points = detail::parse_quads(r, j.at("ml3"), "/ml3");
    }
    if (j.contains("phi")) {
        c.phi_points = detail::parse_quads(r, j.at("phi"), "/phi");
    }
    if (j.contains("output")) {
        const auto& oj = j.at("output");
        r.allow_keys(oj, "/output", {"csv", "json"});
        OutputNames names{r.string(r.need(oj, "/output", "csv"), "/output/csv"),
                          r.string(r.need(oj, "/output", "json"), "/output/json")};
        for (const auto* n : {&names.csv, &names.json}) {
            if (n->empty() || n->find('/') != std::string::npos) {
                r.fail("/output", "output names must be plain file names");
            }
        }
        c.output = names;
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(path, 0, "cannot read config file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

inline const char* variant_name(Lemma41Variant v) { return v == Lemma41Variant::Proof ? "proof" : "statement"; }

}  // namespace tfhp
