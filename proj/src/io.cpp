#include "yoularen/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "yoularen/random.hpp"

namespace yoularen::io {

Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json to_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw std::runtime_error(what + ": expected a nested array");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Matrix(0, 0);
    if (!j[0].is_array()) throw std::runtime_error(what + ": expected rows to be arrays");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw std::runtime_error(what + ": ragged row " + std::to_string(i));
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& e = row[static_cast<std::size_t>(c)];
            if (!e.is_number()) throw std::runtime_error(what + ": non-numeric entry");
            m(i, c) = e.get<double>();
        }
    }
    return m;
}

Vector vector_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw std::runtime_error(what + ": expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw std::runtime_error(what + ": non-numeric entry");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Json lti_to_json(const lti::LtiSystem& sys, const lti::CostWeights* w, const lti::NoiseCov* n) {
    Json j;
    j["A"] = to_json(sys.A);
    j["B"] = to_json(sys.B);
    j["C"] = to_json(sys.C);
    if (w) {
        j["Q"] = to_json(w->Q);
        j["R"] = to_json(w->R);
        j["Qf"] = to_json(w->Qf);
    }
    if (n) {
        j["Sigma_x"] = to_json(n->sigma_x);
        j["Sigma_y"] = to_json(n->sigma_y);
    }
    return j;
}

LtiDocument lti_from_json(const Json& j) {
    LtiDocument doc;
    doc.sys.A = matrix_from_json(j.at("A"), "A");
    doc.sys.B = matrix_from_json(j.at("B"), "B");
    doc.sys.C = matrix_from_json(j.at("C"), "C");
    doc.sys.validate();
    if (j.contains("Q") && j.contains("R")) {
        lti::CostWeights w;
        w.Q = matrix_from_json(j["Q"], "Q");
        w.R = matrix_from_json(j["R"], "R");
        w.Qf = j.contains("Qf") ? matrix_from_json(j["Qf"], "Qf") : w.Q;
        doc.weights = std::move(w);
    }
    if (j.contains("Sigma_x") && j.contains("Sigma_y")) {
        doc.noise = lti::NoiseCov{matrix_from_json(j["Sigma_x"], "Sigma_x"),
                                  matrix_from_json(j["Sigma_y"], "Sigma_y")};
    }
    return doc;
}

std::string system_hash(const lti::LtiSystem& sys) {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(sys.nx() * 1000000 + sys.nu() * 1000 + sys.ny()));
    for (const Matrix* m : {&sys.A, &sys.B, &sys.C}) {
        for (Eigen::Index i = 0; i < m->rows(); ++i)
            for (Eigen::Index k = 0; k < m->cols(); ++k) {
                std::uint64_t bits;
                const double v = (*m)(i, k) == 0.0 ? 0.0 : (*m)(i, k);  // fold -0 into +0
                std::memcpy(&bits, &v, sizeof bits);
                h = mix64(h ^ bits);
            }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json theta_to_json(const ren::RenTheta& t) {
    Json j;
    j["dims"] = {{"n_chi", t.dims.n_chi}, {"n_v", t.dims.n_v}, {"n_in", t.dims.n_in},
                 {"n_out", t.dims.n_out}};
    Json th;
    th["A"] = to_json(t.A_free);
    th["B1"] = to_json(t.B1_free);
    th["B2"] = to_json(t.B2);
    th["C1"] = to_json(t.C1_free);
    th["D11"] = to_json(t.D11_free);
    th["D12"] = to_json(t.D12);
    th["C2"] = to_json(t.C2);
    th["D21"] = to_json(t.D21);
    th["D22"] = to_json(t.D22);
    th["b_chi"] = to_json(t.b_chi);
    th["b_v"] = to_json(t.b_v);
    th["b_y"] = to_json(t.b_y);
    j["theta"] = std::move(th);
    j["alpha_bar"] = t.alpha_bar;
    j["out_scale"] = t.out_scale;
    j["sigma"] = "relu";
    return j;
}

ren::RenTheta theta_from_json(const Json& j) {
    if (j.value("sigma", std::string("relu")) != "relu")
        throw std::runtime_error("theta snapshot: only sigma = relu is supported");
    const auto& d = j.at("dims");
    ren::RenDims dims{d.at("n_chi").get<long>(), d.at("n_v").get<long>(), d.at("n_in").get<long>(),
                      d.at("n_out").get<long>()};
    ren::RenTheta t =
        ren::RenTheta::zeros(dims, j.at("alpha_bar").get<double>(), j.at("out_scale").get<double>());
    const auto& th = j.at("theta");
    auto load = [&](Matrix& dst, const char* key) {
        Matrix m = matrix_from_json(th.at(key), key);
        if (m.size() == 0 && dst.size() == 0) return;
        if (m.rows() != dst.rows() || m.cols() != dst.cols())
            throw std::runtime_error(std::string("theta snapshot: block ") + key + " has the wrong shape");
        dst = std::move(m);
    };
    auto load_vec = [&](Vector& dst, const char* key) {
        Vector v = vector_from_json(th.at(key), key);
        if (v.size() != dst.size())
            throw std::runtime_error(std::string("theta snapshot: bias ") + key + " has the wrong length");
        dst = std::move(v);
    };
    load(t.A_free, "A");
    load(t.B1_free, "B1");
    load(t.B2, "B2");
    load(t.C1_free, "C1");
    load(t.D11_free, "D11");
    load(t.D12, "D12");
    load(t.C2, "C2");
    load(t.D21, "D21");
    load(t.D22, "D22");
    load_vec(t.b_chi, "b_chi");
    load_vec(t.b_v, "b_v");
    load_vec(t.b_y, "b_y");
    return t;
}

Json base_controller_to_json(const lti::LtiSystem& sys, const lti::GainPair& gains) {
    Json j;
    j["system_hash"] = system_hash(sys);
    j["K"] = to_json(gains.K);
    j["L"] = to_json(gains.L);
    return j;
}

lti::GainPair base_gains_from_json(const Json& j, const lti::LtiSystem& sys) {
    if (j.contains("system_hash") && j["system_hash"].get<std::string>() != system_hash(sys))
        throw std::runtime_error("base controller was synthesized for a different plant");
    lti::GainPair g{matrix_from_json(j.at("K"), "K"), matrix_from_json(j.at("L"), "L")};
    if (g.K.rows() != sys.nu() || g.K.cols() != sys.nx() || g.L.rows() != sys.nx() ||
        g.L.cols() != sys.ny())
        throw std::runtime_error("base controller gains do not match the plant dimensions");
    return g;
}

Json policy_to_json(const lti::LtiSystem& sys, const lti::GainPair& gains, youla::Arch arch,
                    const ren::RenTheta& theta) {
    Json j;
    j["arch"] = youla::to_string(arch);
    j["base"] = base_controller_to_json(sys, gains);
    j["ren"] = theta_to_json(theta);
    return j;
}

PolicySnapshot policy_from_json(const Json& j, const lti::LtiSystem& sys) {
    return PolicySnapshot{base_gains_from_json(j.at("base"), sys),
                          youla::arch_from_string(j.at("arch").get<std::string>()),
                          theta_from_json(j.at("ren"))};
}

Json scenario_to_json(const Scenario& s) {
    Json j;
    j["seed"] = s.seed;
    j["x0"] = to_json(s.x0);
    j["dx"] = to_json(s.dx);
    j["dy"] = to_json(s.dy);
    return j;
}

Scenario scenario_from_json(const Json& j) {
    Scenario s;
    s.seed = j.value("seed", std::uint64_t{0});
    s.x0 = vector_from_json(j.at("x0"), "x0");
    s.dx = matrix_from_json(j.at("dx"), "dx");
    s.dy = matrix_from_json(j.at("dy"), "dy");
    if (s.dx.rows() != s.dy.rows()) throw std::runtime_error("scenario: dx and dy lengths differ");
    return s;
}

void write_scenarios(const std::filesystem::path& path, const std::vector<Scenario>& batch) {
    std::string out;
    for (const auto& s : batch) {
        out += scenario_to_json(s).dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<Scenario> read_scenarios(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<Scenario> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(scenario_from_json(Json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string curve_to_csv(const std::vector<train::CurvePoint>& curve) {
    std::string out = "epoch,train_cost,test_cost,normalized_cost\n";
    for (const auto& p : curve) {
        out += std::to_string(p.epoch) + "," + format_double(p.train_cost) + "," +
               format_double(p.test_cost) + "," + format_double(p.normalized_cost) + "\n";
    }
    return out;
}

namespace {

double parse_double(const std::string& field, const std::string& where) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw std::runtime_error(where + ": cannot parse number '" + field + "'");
    return v;
}

}  // namespace

std::vector<train::CurvePoint> curve_from_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    std::vector<train::CurvePoint> curve;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string where = source + ":" + std::to_string(lineno);
        if (lineno == 1) {
            if (line != "epoch,train_cost,test_cost,normalized_cost")
                throw std::runtime_error(where + ": unexpected header '" + line + "'");
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        if (fields.size() != 4)
            throw std::runtime_error(where + ": expected 4 fields, got " + std::to_string(fields.size()));
        train::CurvePoint p;
        p.epoch = static_cast<long>(parse_double(fields[0], where));
        p.train_cost = parse_double(fields[1], where);
        p.test_cost = parse_double(fields[2], where);
        p.normalized_cost = parse_double(fields[3], where);
        curve.push_back(p);
    }
    if (lineno == 0) throw std::runtime_error(source + ": empty file");
    return curve;
}

std::vector<train::CurvePoint> read_curve(const std::filesystem::path& path) {
    return curve_from_csv(read_file(path), path.string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << contents;
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace yoularen::io
