#include "powertrace/bundle.hpp"

#include <fstream>

#include <json.hpp>

#include "powertrace/errors.hpp"

namespace powertrace {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j;
    j["shape"] = {m.rows(), m.cols()};
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    j["data"] = std::move(flat);
    return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
    const auto flat = j.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
        static_cast<Eigen::Index>(flat.size()) != shape[0] * shape[1])
        throw BundleError("bundle: matrix shape does not match data length");
    Eigen::MatrixXd m(shape[0], shape[1]);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < shape[0]; ++r)
        for (Eigen::Index c = 0; c < shape[1]; ++c) m(r, c) = flat[i++];
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const json& j) {
    const auto vals = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                             static_cast<Eigen::Index>(vals.size()));
}

json cell_to_json(const GruCell& c) {
    json j;
    j["w_r"] = matrix_to_json(c.w_r);
    j["w_z"] = matrix_to_json(c.w_z);
    j["w_n"] = matrix_to_json(c.w_n);
    j["u_r"] = matrix_to_json(c.u_r);
    j["u_z"] = matrix_to_json(c.u_z);
    j["u_n"] = matrix_to_json(c.u_n);
    j["b_r"] = vector_to_json(c.b_r);
    j["b_z"] = vector_to_json(c.b_z);
    j["b_n"] = vector_to_json(c.b_n);
    return j;
}

GruCell cell_from_json(const json& j) {
    GruCell c;
    c.w_r = matrix_from_json(j.at("w_r"));
    c.w_z = matrix_from_json(j.at("w_z"));
    c.w_n = matrix_from_json(j.at("w_n"));
    c.u_r = matrix_from_json(j.at("u_r"));
    c.u_z = matrix_from_json(j.at("u_z"));
    c.u_n = matrix_from_json(j.at("u_n"));
    c.b_r = vector_from_json(j.at("b_r"));
    c.b_z = vector_from_json(j.at("b_z"));
    c.b_n = vector_from_json(j.at("b_n"));
    return c;
}

json surrogate_to_json(const LatencySurrogate& s) {
    return {{"alpha0", s.alpha0},
            {"alpha1", s.alpha1},
            {"sigma_ttft", s.sigma_ttft},
            {"mu_log_tbt", s.mu_log_tbt},
            {"sigma_log_tbt", s.sigma_log_tbt}};
}

LatencySurrogate surrogate_from_json(const json& j) {
    LatencySurrogate s;
    s.alpha0 = j.at("alpha0").get<double>();
    s.alpha1 = j.at("alpha1").get<double>();
    s.sigma_ttft = j.at("sigma_ttft").get<double>();
    s.mu_log_tbt = j.at("mu_log_tbt").get<double>();
    s.sigma_log_tbt = j.at("sigma_log_tbt").get<double>();
    return s;
}

json catalog_to_json(const StateCatalog& c) {
    return {{"k", c.k},     {"pi", c.pi},       {"mu", c.mu},
            {"sigma", c.sigma}, {"phi", c.phi}, {"y_min", c.y_min},
            {"y_max", c.y_max}};
}

StateCatalog catalog_from_json(const json& j) {
    StateCatalog c;
    c.k = j.at("k").get<int>();
    c.pi = j.at("pi").get<std::vector<double>>();
    c.mu = j.at("mu").get<std::vector<double>>();
    c.sigma = j.at("sigma").get<std::vector<double>>();
    c.phi = j.at("phi").get<std::vector<double>>();
    c.y_min = j.at("y_min").get<double>();
    c.y_max = j.at("y_max").get<double>();
    return c;
}

json classifier_to_json(const ClassifierModel& m) {
    json j;
    j["input_dim"] = m.input_dim;
    j["hidden"] = m.hidden;
    j["k"] = m.k;
    j["feat_mean"] = vector_to_json(m.feat_mean);
    j["feat_std"] = vector_to_json(m.feat_std);
    j["fwd"] = cell_to_json(m.fwd);
    j["bwd"] = cell_to_json(m.bwd);
    j["w_out"] = matrix_to_json(m.w_out);
    j["b_out"] = vector_to_json(m.b_out);
    return j;
}

ClassifierModel classifier_from_json(const json& j) {
    ClassifierModel m;
    m.input_dim = j.at("input_dim").get<int>();
    m.hidden = j.at("hidden").get<int>();
    m.k = j.at("k").get<int>();
    m.feat_mean = vector_from_json(j.at("feat_mean"));
    m.feat_std = vector_from_json(j.at("feat_std"));
    m.fwd = cell_from_json(j.at("fwd"));
    m.bwd = cell_from_json(j.at("bwd"));
    m.w_out = matrix_from_json(j.at("w_out"));
    m.b_out = vector_from_json(j.at("b_out"));
    return m;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BundleError("bundle: cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw BundleError("bundle: write failed for " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BundleError("bundle: cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw BundleError("bundle: corrupted payload in " + path + ": " + e.what());
    }
}

} // namespace

void ModelBundle::validate() const {
    config.validate();
    surrogate.validate();
    catalog.validate();
    classifier.validate();
    if (catalog.k != classifier.k)
        throw BundleError("bundle: catalog has " + std::to_string(catalog.k) +
                          " states but classifier outputs " +
                          std::to_string(classifier.k));
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    bundle.validate();
    json j;
    j["format_version"] = bundle.format_version;
    j["config"] = {{"hardware", bundle.config.hardware},
                   {"model", bundle.config.model},
                   {"tensor_parallel", bundle.config.tensor_parallel},
                   {"is_moe", bundle.config.is_moe}};
    j["surrogate"] = surrogate_to_json(bundle.surrogate);
    j["catalog"] = catalog_to_json(bundle.catalog);
    j["classifier"] = classifier_to_json(bundle.classifier);
    write_json_file(j, path);
}

ModelBundle load_bundle(const std::string& path) {
    const json j = read_json_file(path);
    try {
        const int version = j.at("format_version").get<int>();
        if (version != ModelBundle::kFormatVersion)
            throw BundleError("bundle: format_version " + std::to_string(version) +
                              " unsupported (expected " +
                              std::to_string(ModelBundle::kFormatVersion) + ")");
        ModelBundle b;
        b.format_version = version;
        const json& cfg = j.at("config");
        b.config.hardware = cfg.at("hardware").get<std::string>();
        b.config.model = cfg.at("model").get<std::string>();
        b.config.tensor_parallel = cfg.at("tensor_parallel").get<int>();
        b.config.is_moe = cfg.at("is_moe").get<bool>();
        b.surrogate = surrogate_from_json(j.at("surrogate"));
        b.catalog = catalog_from_json(j.at("catalog"));
        b.classifier = classifier_from_json(j.at("classifier"));
        b.validate();
        return b;
    } catch (const json::exception& e) {
        throw BundleError("bundle: missing or mistyped field in " + path + ": " +
                          e.what());
    }
}

void save_surrogate(const LatencySurrogate& surrogate, const std::string& path) {
    surrogate.validate();
    write_json_file(surrogate_to_json(surrogate), path);
}

LatencySurrogate load_surrogate(const std::string& path) {
    try {
        LatencySurrogate s = surrogate_from_json(read_json_file(path));
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw BundleError("bundle: missing or mistyped field in " + path + ": " +
                          e.what());
    }
}

void save_catalog(const StateCatalog& catalog, const std::string& path) {
    catalog.validate();
    write_json_file(catalog_to_json(catalog), path);
}

StateCatalog load_catalog(const std::string& path) {
    try {
        StateCatalog c = catalog_from_json(read_json_file(path));
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw BundleError("bundle: missing or mistyped field in " + path + ": " +
                          e.what());
    }
}

void save_classifier(const ClassifierModel& classifier, const std::string& path) {
    classifier.validate();
    write_json_file(classifier_to_json(classifier), path);
}

ClassifierModel load_classifier(const std::string& path) {
    try {
        ClassifierModel m = classifier_from_json(read_json_file(path));
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw BundleError("bundle: missing or mistyped field in " + path + ": " +
                          e.what());
    }
}

} // namespace powertrace
