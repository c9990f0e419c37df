#include "ghgmm/io.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ghgmm::io {
namespace {

std::string at(std::size_t row, std::size_t col) {
    return "row " + std::to_string(row) + ", column " + std::to_string(col) + ": ";
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    while (!out.empty() && trim(out.back()).empty()) out.pop_back();
    return out;
}

double parse_double(const std::string& cell, std::size_t row, std::size_t col) {
    const std::string s = trim(cell);
    if (s.empty()) throw InputError(at(row, col) + "missing value");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw InputError(at(row, col) + "not a finite number: '" + s + "'");
    return v;
}

int parse_int(const std::string& cell, std::size_t row, std::size_t col) {
    const std::string s = trim(cell);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw InputError(at(row, col) + "not an integer: '" + s + "'");
    return v;
}

// Column names of the form <prefix><j> with j = 1, 2, ... in order.
bool numbered(const std::string& name, char prefix, std::size_t j) {
    return name == std::string(1, prefix) + std::to_string(j);
}

Json vector_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
    Json a = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
    return a;
}

Eigen::VectorXd json_vector(const Json& j, const std::string& what) {
    if (!j.is_array()) throw InputError(what + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InputError(what + " must hold numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd json_matrix(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw InputError(what + " must be an array of rows");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Eigen::VectorXd row = json_vector(j[r], what);
        if (row.size() != cols) throw InputError(what + " rows differ in length");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

Variant variant_from_name(const std::string& s) {
    for (Variant v : {Variant::ModelI, Variant::ModelII, Variant::ModelIII, Variant::ModelIV, Variant::GaussianBaseline})
        if (to_string(v) == s) return v;
    throw InputError("unknown variant '" + s + "'");
}

}  // namespace

Table parse_dataset_csv(const std::string& text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw InputError(at(1, 1) + "empty file");
    const auto header = split_line(lines[0]);
    if (header.empty() || trim(header[0]) != "id") throw InputError(at(1, 1) + "first column must be 'id'");
    std::size_t T = 0;
    std::size_t m = 0;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string name = trim(header[c]);
        if (m == 0 && numbered(name, 't', T + 1))
            ++T;
        else if (numbered(name, 'x', m + 1))
            ++m;
        else
            throw InputError(at(1, c + 1) + "unexpected column '" + name + "', expected t1..tT then x1..xm");
    }
    if (T == 0) throw InputError(at(1, 2) + "no outcome columns");
    const std::size_t n = lines.size() - 1;
    if (n == 0) throw InputError(at(2, 1) + "no subjects");

    Table out;
    Eigen::MatrixXd y(n, T);
    Eigen::MatrixXd x(n, m);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t row = r + 2;
        const auto cells = split_line(lines[r + 1]);
        if (cells.size() != header.size())
            throw InputError(at(row, std::min(cells.size(), header.size()) + 1) + "expected " +
                             std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
        const std::string id = trim(cells[0]);
        if (id.empty()) throw InputError(at(row, 1) + "missing id");
        out.ids.push_back(id);
        for (std::size_t t = 0; t < T; ++t) y(r, t) = parse_double(cells[1 + t], row, 2 + t);
        for (std::size_t j = 0; j < m; ++j) x(r, j) = parse_double(cells[1 + T + j], row, 2 + T + j);
    }
    out.data = make_dataset(std::move(y), std::move(x));
    return out;
}

Table read_dataset_csv(const std::string& path) { return parse_dataset_csv(read_file(path)); }

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw InputError("number formatting failed");
    return std::string(buf, ptr);
}

std::string format_dataset_csv(const std::vector<std::string>& ids, const LongitudinalDataset& data) {
    if (static_cast<Eigen::Index>(ids.size()) != data.n()) throw InputError("ids and rows differ in number");
    std::string out = "id";
    for (Eigen::Index t = 0; t < data.T(); ++t) out += ",t" + std::to_string(t + 1);
    for (Eigen::Index j = 0; j < data.m(); ++j) out += ",x" + std::to_string(j + 1);
    out += '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out += ids[i];
        for (Eigen::Index t = 0; t < data.T(); ++t) out += ',' + format_number(data.outcomes(i, t));
        for (Eigen::Index j = 0; j < data.m(); ++j) out += ',' + format_number(data.covariates(i, j));
        out += '\n';
    }
    return out;
}

Labels parse_labels_csv(const std::string& text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw InputError(at(1, 1) + "empty file");
    const auto header = split_line(lines[0]);
    if (header.size() != 2 || trim(header[0]) != "id" || trim(header[1]) != "label")
        throw InputError(at(1, 1) + "header must be 'id,label'");
    Labels out;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_line(lines[r]);
        if (cells.size() != 2) throw InputError(at(r + 1, std::min<std::size_t>(cells.size(), 2) + 1) + "expected 2 cells");
        const std::string id = trim(cells[0]);
        if (id.empty()) throw InputError(at(r + 1, 1) + "missing id");
        out.ids.push_back(id);
        out.labels.push_back(parse_int(cells[1], r + 1, 2));
    }
    if (out.ids.empty()) throw InputError(at(2, 1) + "no labels");
    return out;
}

Labels read_labels_csv(const std::string& path) { return parse_labels_csv(read_file(path)); }

std::string format_labels_csv(const std::vector<std::string>& ids, const std::vector<int>& labels) {
    if (ids.size() != labels.size()) throw InputError("ids and labels differ in number");
    std::string out = "id,label\n";
    for (std::size_t i = 0; i < ids.size(); ++i) out += ids[i] + ',' + std::to_string(labels[i]) + '\n';
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("failed reading '" + path + "'");
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path + "'");
    }
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string software_version() { return GHGMM_VERSION; }

Json to_json(const RunManifest& m) {
    Json inputs = Json::array();
    for (const auto& [path, digest] : m.inputs) inputs.push_back({{"path", path}, {"sha256", digest}});
    return {{"command", m.command},     {"config_sha256", m.config_digest}, {"seed", m.seed},
            {"version", m.version},     {"wall_seconds", m.wall_seconds},   {"inputs", inputs}};
}

Json to_json(const ModelSpec& spec) {
    return {{"variant", to_string(spec.variant)},
            {"parameterization", to_string(spec.parameterization)},
            {"K", spec.K},
            {"q", spec.q},
            {"covariate_mixing", spec.use_covariate_mixing}};
}

Json to_json(const ClassParameters& c, const ModelSpec& spec) {
    Json j = {{"alpha", vector_json(c.alpha)}};
    if (c.gamma.size() > 0) j["gamma"] = matrix_json(c.gamma);
    if (latent_skew(spec.variant)) j["beta_eta"] = vector_json(c.beta_eta);
    if (observed_skew(spec.variant)) j["beta_y"] = vector_json(c.beta_y);
    j["psi"] = matrix_json(c.psi);
    j["theta"] = vector_json(c.theta);
    if (ghd_weights(spec.variant)) {
        j["lambda"] = c.lambda;
        j["omega"] = c.omega;
    }
    if (gst_weights(spec.variant)) j["nu"] = c.nu;
    return j;
}

Json to_json(const FittedModel& fm, bool with_responsibilities) {
    Json classes = Json::array();
    for (const auto& c : fm.params) classes.push_back(to_json(c, fm.spec));
    Json weights = {{"pi", vector_json(fm.weights.pi)}};
    if (fm.weights.covariate_dependent) {
        weights["logit_intercepts"] = vector_json(fm.weights.alpha_c);
        weights["logit_slopes"] = matrix_json(fm.weights.gamma_c);
    }
    Json j = {{"schema_version", kSchemaVersion},
              {"kind", "fit"},
              {"spec", to_json(fm.spec)},
              {"converged", fm.converged},
              {"iterations", fm.iterations},
              {"restarts", fm.restarts},
              {"loglik", fm.loglik},
              {"bic", fm.bic},
              {"n_free", fm.n_free},
              {"mixing", weights},
              {"classes", classes},
              {"loglik_trace", fm.loglik_trace},
              {"map_labels", fm.map_labels},
              {"flags", fm.flags}};
    if (with_responsibilities) j["responsibilities"] = matrix_json(fm.responsibilities);
    return j;
}

Json to_json(const SelectionReport& rep) {
    Json entries = Json::array();
    for (const auto& e : rep.entries) {
        Json j = {{"spec", to_json(e.spec)}, {"K", e.K},         {"loglik", e.loglik}, {"n_free", e.n_free},
                  {"bic", e.bic},            {"converged", e.converged}, {"failed", e.failed}};
        if (e.failed) j["error"] = e.error;
        entries.push_back(j);
    }
    Json j = {{"schema_version", kSchemaVersion}, {"kind", "selection"}, {"entries", entries}};
    j["best"] = rep.best >= 0 ? Json(rep.best) : Json(nullptr);
    return j;
}

ScenarioConfig scenario_from_json(const Json& j) {
    if (!j.is_object()) throw InputError("scenario must be a JSON object");
    try {
        ScenarioConfig s;
        s.name = j.value("name", std::string("custom"));
        s.variant = variant_from_name(j.at("variant").get<std::string>());
        s.n = j.at("n").get<int>();
        s.K = j.at("K").get<int>();
        s.T = j.at("T").get<int>();
        s.q = j.at("q").get<int>();
        s.seed = j.value("seed", std::uint64_t{1});
        s.center = j.value("center", 0.0);
        s.mixing = j.contains("mixing") ? json_vector(j["mixing"], "mixing")
                                        : Eigen::VectorXd::Constant(s.K, 1.0 / std::max(1, s.K));
        s.time_scores = j.contains("time_scores") ? json_vector(j["time_scores"], "time_scores")
                                                  : Eigen::VectorXd::LinSpaced(s.T, 0.0, s.T - 1.0);
        const Json& cls = j.at("classes");
        if (!cls.is_array()) throw InputError("classes must be an array");
        for (const Json& cj : cls) {
            ClassParameters c;
            c.alpha = json_vector(cj.at("alpha"), "alpha");
            c.gamma = Eigen::MatrixXd::Zero(s.q, 0);
            c.beta_eta = cj.contains("beta_eta") ? json_vector(cj["beta_eta"], "beta_eta") : Eigen::VectorXd::Zero(s.q);
            c.beta_y = cj.contains("beta_y") ? json_vector(cj["beta_y"], "beta_y") : Eigen::VectorXd::Zero(s.T);
            const Json& psi = cj.at("psi");
            if (psi.is_array() && !psi.empty() && psi[0].is_array())
                c.psi = json_matrix(psi, "psi");
            else
                c.psi = json_vector(psi, "psi").asDiagonal();
            const Json& theta = cj.at("theta");
            c.theta = theta.is_number() ? Eigen::VectorXd::Constant(s.T, theta.get<double>())
                                        : json_vector(theta, "theta");
            c.lambda = cj.value("lambda", -0.5);
            c.omega = cj.value("omega", 1.0);
            c.nu = cj.value("nu", 10.0);
            s.classes.push_back(std::move(c));
        }
        validate(s);
        return s;
    } catch (const Json::exception& e) {
        throw InputError(std::string("scenario: ") + e.what());
    }
}

Json to_json(const ScenarioConfig& cfg) {
    const ModelSpec spec{cfg.variant, Parameterization::General, cfg.K, cfg.q, false};
    Json classes = Json::array();
    for (const auto& c : cfg.classes) {
        Json cj = to_json(c, spec);
        cj.erase("gamma");
        classes.push_back(cj);
    }
    return {{"name", cfg.name},
            {"variant", to_string(cfg.variant)},
            {"n", cfg.n},
            {"K", cfg.K},
            {"T", cfg.T},
            {"q", cfg.q},
            {"seed", cfg.seed},
            {"center", cfg.center},
            {"mixing", vector_json(cfg.mixing)},
            {"time_scores", vector_json(cfg.time_scores)},
            {"classes", classes}};
}

Variant parse_variant(const std::string& weights, const std::string& skew) {
    if (skew != "latent" && skew != "observed") throw InputError("skew must be 'latent' or 'observed'");
    const bool latent = skew == "latent";
    if (weights == "ghd") return latent ? Variant::ModelI : Variant::ModelII;
    if (weights == "gst") return latent ? Variant::ModelIII : Variant::ModelIV;
    if (weights == "gaussian") return Variant::GaussianBaseline;
    throw InputError("variant must be 'ghd', 'gst' or 'gaussian'");
}

}  // namespace ghgmm::io
