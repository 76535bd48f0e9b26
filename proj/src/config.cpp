#include "affine/config.hpp"

#include "affine/oracles.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <sstream>
#include <utility>

namespace affine {

namespace {

using nlohmann::json;

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
    // nlohmann reports a 1-based byte position.
    const std::size_t pos = std::min(byte == 0 ? 0 : byte - 1, text.size());
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const char* where) {
    for (const auto& item : obj.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return item.key() == k; });
        if (!known)
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
}

const json& require_key(const json& obj, const char* key, const char* where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw ConfigError(std::string(where) + " is missing required key '" + key + "'");
    return *it;
}

double expect_number(const json& j, const std::string& what) {
    if (!j.is_number())
        throw ConfigError(what + " must be a number");
    return j.get<double>();
}

Eigen::Index expect_count(const json& j, const std::string& what) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0)
        throw ConfigError(what + " must be a nonnegative integer");
    return static_cast<Eigen::Index>(j.get<std::int64_t>());
}

std::string expect_string(const json& j, const std::string& what) {
    if (!j.is_string())
        throw ConfigError(what + " must be a string");
    return j.get<std::string>();
}

const json& expect_object(const json& j, const std::string& what) {
    if (!j.is_object())
        throw ConfigError(what + " must be an object");
    return j;
}

VecD read_vector(const json& j, const std::string& what, Eigen::Index len) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != len) {
        std::ostringstream os;
        os << what << " must be an array of " << len << " numbers";
        throw ConfigError(os.str());
    }
    VecD v(len);
    for (Eigen::Index i = 0; i < len; ++i) {
        std::ostringstream os;
        os << what << "[" << i << "]";
        v(i) = expect_number(j[static_cast<std::size_t>(i)], os.str());
    }
    return v;
}

MatD read_matrix(const json& j, const std::string& what, Eigen::Index rows,
                 Eigen::Index cols) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        std::ostringstream os;
        os << what << " must be an array of " << rows << " rows";
        throw ConfigError(os.str());
    }
    MatD m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        std::ostringstream os;
        os << what << "[" << r << "]";
        m.row(r) = read_vector(j[static_cast<std::size_t>(r)], os.str(), cols).transpose();
    }
    return m;
}

using ParamSlots = std::vector<std::pair<const char*, std::function<void(double)>>>;

void apply_params(const json& params, const std::string& preset, const ParamSlots& slots) {
    if (params.is_null()) return;
    if (!params.is_object())
        throw ConfigError("params must be an object");
    for (const auto& item : params.items()) {
        auto hit = std::find_if(slots.begin(), slots.end(),
                                [&](const auto& s) { return item.key() == s.first; });
        if (hit == slots.end())
            throw ConfigError("unknown parameter '" + item.key() + "' for preset '" +
                              preset + "'");
        hit->second(expect_number(item.value(), "params." + item.key()));
    }
}

ModelConfig build_preset(const std::string& name, const json& params) {
    ModelConfig cfg;
    cfg.preset = name;
    if (name == "cir") {
        CirParams p;
        apply_params(params, name,
                     {{"a", [&](double x) { p.a = x; }},
                      {"kappa_p", [&](double x) { p.kappa_p = x; }},
                      {"sigma", [&](double x) { p.sigma = x; }},
                      {"u", [&](double x) { p.u = x; }},
                      {"gamma", [&](double x) { p.gamma_override = x; }},
                      {"delta", [&](double x) { p.delta_override = x; }}});
        cfg.model = cir_model(p);
        cfg.pk = cir_kernel(p);
        cfg.x0 = VecD::Constant(1, p.kappa_p > 0.0 ? p.a / p.kappa_p : 0.0);
    } else if (name == "vasicek" || name == "gaussian-nonreverting") {
        VasicekParams p;
        if (name == "gaussian-nonreverting") p.kappa = -0.1;
        apply_params(params, name,
                     {{"kappa", [&](double x) { p.kappa = x; }},
                      {"theta_p", [&](double x) { p.theta_p = x; }},
                      {"sigma", [&](double x) { p.sigma = x; }},
                      {"u", [&](double x) { p.u = x; }},
                      {"gamma", [&](double x) { p.gamma_override = x; }},
                      {"delta", [&](double x) { p.delta_override = x; }}});
        cfg.model = vasicek_model(p);
        cfg.pk = vasicek_kernel(p);
        cfg.x0 = VecD::Constant(1, p.theta_p);
    } else if (name == "breeden") {
        BreedenParams p;
        apply_params(params, name,
                     {{"kappa_v", [&](double x) { p.kappa_v = x; }},
                      {"theta_v", [&](double x) { p.theta_v = x; }},
                      {"sigma_v", [&](double x) { p.sigma_v = x; }},
                      {"kappa_g", [&](double x) { p.kappa_g = x; }},
                      {"theta_g", [&](double x) { p.theta_g = x; }},
                      {"sigma_g", [&](double x) { p.sigma_g = x; }},
                      {"sigma_c", [&](double x) { p.sigma_c = x; }},
                      {"a", [&](double x) { p.a = x; }},
                      {"b", [&](double x) { p.b = x; }}});
        cfg.model = breeden_model(p);
        cfg.pk = breeden_kernel(p);
        cfg.x0 = (VecD(2) << p.theta_v, p.theta_g).finished();
    } else if (name == "bhs") {
        if (!params.is_null() && !params.empty())
            throw ConfigError("preset 'bhs' takes no parameters");
        auto built = bhs_model();
        cfg.model = std::move(built.first);
        cfg.pk = std::move(built.second);
        cfg.x0 = (VecD(3) << 1.0, 0.0, 0.0).finished();
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return cfg;
}

AffineModelD read_model(const json& jm) {
    check_keys(jm, {"m", "n", "a", "alpha", "b", "B", "rho", "s", "time_unit"}, "model");
    AffineModelD model;
    model.m = expect_count(require_key(jm, "m", "model"), "model.m");
    model.n = expect_count(require_key(jm, "n", "model"), "model.n");
    const Eigen::Index d = model.m + model.n;
    if (d < 1) throw ConfigError("model dimension m + n must be at least 1");
    model.a = read_matrix(require_key(jm, "a", "model"), "model.a", d, d);
    const json& jalpha = require_key(jm, "alpha", "model");
    if (!jalpha.is_array() || static_cast<Eigen::Index>(jalpha.size()) != model.m) {
        std::ostringstream os;
        os << "model.alpha must be an array of " << model.m << " matrices";
        throw ConfigError(os.str());
    }
    model.alpha.reserve(static_cast<std::size_t>(model.m));
    for (Eigen::Index i = 0; i < model.m; ++i) {
        std::ostringstream os;
        os << "model.alpha[" << i << "]";
        model.alpha.push_back(read_matrix(jalpha[static_cast<std::size_t>(i)], os.str(), d, d));
    }
    model.b = read_vector(require_key(jm, "b", "model"), "model.b", d);
    model.B = read_matrix(require_key(jm, "B", "model"), "model.B", d, d);
    if (jm.contains("rho") != jm.contains("s"))
        throw ConfigError("model.rho and model.s must be given together");
    if (jm.contains("rho")) {
        VolStructure<double> vs;
        vs.rho = read_matrix(jm.at("rho"), "model.rho", d, d);
        const json& js = expect_object(jm.at("s"), "model.s");
        check_keys(js, {"c", "kappa"}, "model.s");
        vs.c = read_vector(require_key(js, "c", "model.s"), "model.s.c", d);
        vs.kappa = read_matrix(require_key(js, "kappa", "model.s"), "model.s.kappa", d, d);
        model.vol_structure = std::move(vs);
    }
    if (jm.contains("time_unit"))
        model.time_unit = expect_string(jm.at("time_unit"), "model.time_unit");
    return model;
}

PricingKernelSpecD read_kernel(const json& jk, Eigen::Index d) {
    check_keys(jk, {"gamma", "u", "delta"}, "kernel");
    PricingKernelSpecD pk;
    pk.gamma = expect_number(require_key(jk, "gamma", "kernel"), "kernel.gamma");
    pk.u = read_vector(require_key(jk, "u", "kernel"), "kernel.u", d);
    pk.delta = read_vector(require_key(jk, "delta", "kernel"), "kernel.delta", d);
    return pk;
}

json vec_json(const VecD& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat_json(const MatD& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r)));
    return a;
}

}  // namespace

ModelConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte);
        std::ostringstream os;
        os << "parse error at line " << line << ", column " << col << ": " << e.what();
        throw ConfigError(os.str(), line, col);
    }
    try {
        if (!doc.is_object())
            throw ConfigError("top-level document must be an object");
        check_keys(doc, {"preset", "params", "model", "kernel", "x0"}, "document");
        ModelConfig cfg;
        if (doc.contains("preset")) {
            if (doc.contains("model") || doc.contains("kernel"))
                throw ConfigError("preset and explicit model are mutually exclusive");
            cfg = build_preset(expect_string(doc.at("preset"), "preset"),
                               doc.contains("params") ? doc.at("params") : json());
        } else {
            if (doc.contains("params"))
                throw ConfigError("params requires a preset");
            if (!doc.contains("model") || !doc.contains("kernel"))
                throw ConfigError("document needs either a preset or model + kernel");
            cfg.model = read_model(expect_object(doc.at("model"), "model"));
            cfg.pk = read_kernel(expect_object(doc.at("kernel"), "kernel"), cfg.model.dim());
        }
        if (doc.contains("x0"))
            cfg.x0 = read_vector(doc.at("x0"), "x0", cfg.model.dim());
        check_dimensions(cfg.model);
        check_dimensions(cfg.model, cfg.pk);
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

ModelConfig preset_config(const std::string& name) {
    return build_preset(name, json());
}

std::string serialize(const ModelConfig& cfg) {
    json jm;
    jm["m"] = static_cast<std::int64_t>(cfg.model.m);
    jm["n"] = static_cast<std::int64_t>(cfg.model.n);
    jm["a"] = mat_json(cfg.model.a);
    json alphas = json::array();
    for (const auto& alpha : cfg.model.alpha) alphas.push_back(mat_json(alpha));
    jm["alpha"] = alphas;
    jm["b"] = vec_json(cfg.model.b);
    jm["B"] = mat_json(cfg.model.B);
    if (cfg.model.vol_structure) {
        const auto& vs = *cfg.model.vol_structure;
        jm["rho"] = mat_json(vs.rho);
        jm["s"] = json{{"c", vec_json(vs.c)}, {"kappa", mat_json(vs.kappa)}};
    }
    jm["time_unit"] = cfg.model.time_unit;
    json doc;
    doc["model"] = std::move(jm);
    doc["kernel"] = json{{"gamma", cfg.pk.gamma},
                         {"u", vec_json(cfg.pk.u)},
                         {"delta", vec_json(cfg.pk.delta)}};
    if (cfg.x0.size() > 0) doc["x0"] = vec_json(cfg.x0);
    return doc.dump(2);
}

std::string config_hash(const ModelConfig& cfg) {
    const std::string doc = serialize(cfg);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : doc) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string csv_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    for (std::size_t i = 0; i < header.size(); ++i)
        os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << row[i];
        os << '\n';
    }
}

}  // namespace affine
