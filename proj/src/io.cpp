#include "empc/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "empc/error.hpp"

namespace empc::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(m.row_vector(r));
    return rows;
}

Vector vector_from_json(const json& j) {
    require(j.is_array(), ErrorKind::Io, "expected a numeric array");
    Vector v;
    for (const auto& e : j) {
        require(e.is_number(), ErrorKind::Io, "expected a number");
        v.push_back(e.get<double>());
    }
    return v;
}

Matrix matrix_from_json(const json& j, std::size_t cols) {
    require(j.is_array(), ErrorKind::Io, "expected an array of rows");
    if (j.empty()) return Matrix(0, cols);
    std::vector<Vector> rows;
    for (const auto& r : j) rows.push_back(vector_from_json(r));
    const std::size_t c = rows.front().size();
    for (const auto& r : rows) require(r.size() == c, ErrorKind::Io, "ragged matrix");
    return Matrix::from_rows(rows, c);
}

json to_json(const Polytope& p) { return {{"dim", p.dim()}, {"C", to_json(p.C)}, {"c", p.c}}; }

Polytope polytope_from_json(const json& j, std::size_t dim_hint) {
    std::size_t dim = dim_hint;
    if (j.contains("dim")) dim = j.at("dim").get<std::size_t>();
    else if (!j.at("C").empty()) dim = j.at("C").at(0).size();
    Polytope p(matrix_from_json(j.at("C"), dim), vector_from_json(j.at("c")));
    require(p.dim() == dim, ErrorKind::Io, "polytope dimension");
    return p;
}

json to_json(const PwaFunction& f) {
    json regions = json::array();
    for (const auto& r : f.regions) regions.push_back({{"region", to_json(r.region)}, {"K", to_json(r.K)}, {"g", r.g}});
    return {{"nx", f.nx}, {"nu", f.nu}, {"regions", regions}};
}

PwaFunction pwa_from_json(const json& j) {
    PwaFunction f;
    f.nx = j.at("nx").get<std::size_t>();
    f.nu = j.at("nu").get<std::size_t>();
    for (const auto& r : j.at("regions"))
        f.regions.push_back({polytope_from_json(r.at("region")), matrix_from_json(r.at("K"), f.nx),
                             vector_from_json(r.at("g"))});
    f.validate();
    return f;
}

json to_json(const ExplicitLaw& law) {
    json j = to_json(law.law);
    for (std::size_t i = 0; i < law.regions.size(); ++i) {
        j["regions"][i]["active_set"] = law.regions[i].active_set;
        j["regions"][i]["chebyshev_radius"] = law.regions[i].ball.radius;
    }
    j["candidates"] = law.candidates;
    j["degenerate_skipped"] = law.degenerate_skipped;
    return j;
}

json to_json(const ReluNetwork& n) {
    json layers = json::array();
    for (const auto& l : n.layers) layers.push_back({{"W", to_json(l.W)}, {"b", l.b}});
    return {{"layers", layers}};
}

ReluNetwork network_from_json(const json& j) {
    ReluNetwork n;
    for (const auto& l : j.at("layers")) n.layers.push_back({matrix_from_json(l.at("W")), vector_from_json(l.at("b"))});
    n.validate();
    return n;
}

json to_json(const AffineTransform& t) { return {{"S", to_json(t.S)}, {"t", t.t}}; }

AffineTransform transform_from_json(const json& j) {
    return {matrix_from_json(j.at("S")), vector_from_json(j.at("t"))};
}

json to_json(const ExactRepresentation& r) {
    json pairs = json::array();
    for (const auto& [g, e] : r.pairs) pairs.push_back({{"gamma", to_json(g)}, {"eta", to_json(e)}});
    return {{"Ax", to_json(r.Ax)}, {"Au", to_json(r.Au)}, {"pairs", pairs}};
}

ExactRepresentation exact_from_json(const json& j) {
    ExactRepresentation r{transform_from_json(j.at("Ax")), transform_from_json(j.at("Au")), {}};
    for (const auto& p : j.at("pairs"))
        r.pairs.emplace_back(network_from_json(p.at("gamma")), network_from_json(p.at("eta")));
    return r;
}

json to_json(const Polynomial& p) {
    return {{"degree", p.degree}, {"nx", p.nx}, {"nu", p.nu}, {"coeffs", to_json(p.coeffs)}};
}

Polynomial polynomial_from_json(const json& j) {
    Polynomial p{j.at("degree").get<std::size_t>(), j.at("nx").get<std::size_t>(), j.at("nu").get<std::size_t>(), {}};
    p.coeffs = matrix_from_json(j.at("coeffs"), p.num_terms());
    require(p.coeffs.rows() == p.nu && p.coeffs.cols() == p.num_terms(), ErrorKind::Io, "polynomial coefficient shape");
    return p;
}

json to_json(const EllipsoidSafeSet& s) { return {{"E", to_json(s.E)}, {"epsilon", s.epsilon}}; }

EllipsoidSafeSet ellipsoid_from_json(const json& j) {
    return {matrix_from_json(j.at("E")), j.at("epsilon").get<double>()};
}

json to_json(const SvmSafeSet& s) {
    json sv = json::array();
    for (const auto& v : s.support_vectors) sv.push_back(v);
    return {{"support_vectors", sv}, {"coef", s.coef},   {"bias", s.bias},
            {"nu", s.nu},            {"C", s.C},         {"iterations", s.iterations},
            {"kkt_violation", s.kkt_violation}};
}

SvmSafeSet svm_from_json(const json& j) {
    SvmSafeSet s;
    for (const auto& v : j.at("support_vectors")) s.support_vectors.push_back(vector_from_json(v));
    s.coef = vector_from_json(j.at("coef"));
    require(s.coef.size() == s.support_vectors.size(), ErrorKind::Io, "svm: coefficient count");
    s.bias = j.at("bias").get<double>();
    s.nu = j.at("nu").get<double>();
    s.C = j.at("C").get<double>();
    s.iterations = j.value("iterations", std::size_t{0});
    s.kkt_violation = j.value("kkt_violation", 0.0);
    return s;
}

json to_json(const Scenario& s) {
    json j = {{"name", s.name},
              {"A", to_json(s.system.A)},
              {"B", to_json(s.system.B)},
              {"Q", to_json(s.Q)},
              {"R", to_json(s.R)},
              {"P", to_json(s.P)},
              {"N", s.N},
              {"X", to_json(s.X)},
              {"U", to_json(s.U)},
              {"sample_box", {{"lo", s.sample_box.lo}, {"hi", s.sample_box.hi}}},
              {"settle_tol", s.settle_tol},
              {"k_end", s.k_end}};
    if (s.Xf) j["Xf"] = to_json(*s.Xf);
    return j;
}

Scenario scenario_from_json(const json& j) {
    if (j.is_string()) {
        Scenario s = builtin_scenario(j.get<std::string>());
        s.validate();
        return s;
    }
    require(j.is_object(), ErrorKind::PreconditionViolated, "scenario must be a name or an object");
    for (const auto& [k, v] : j.items()) {
        static const std::set<std::string> known{"base", "name", "A", "B", "Q", "R", "P", "N", "X",
                                                 "U", "Xf", "sample_box", "settle_tol", "k_end"};
        require(known.count(k) > 0, ErrorKind::PreconditionViolated, "scenario: unknown key '" + k + "'");
    }
    Scenario s = j.contains("base") ? builtin_scenario(j.at("base").get<std::string>()) : Scenario{};
    if (j.contains("name")) s.name = j.at("name").get<std::string>();
    if (j.contains("A") || j.contains("B"))
        s.system = LtiSystem(j.contains("A") ? matrix_from_json(j.at("A")) : s.system.A,
                             j.contains("B") ? matrix_from_json(j.at("B")) : s.system.B);
    if (j.contains("Q")) s.Q = matrix_from_json(j.at("Q"));
    if (j.contains("R")) s.R = matrix_from_json(j.at("R"));
    if (j.contains("P")) {
        // "dare" selects the infinite-horizon LQR cost as terminal weight.
        if (j.at("P").is_string()) {
            require(j.at("P").get<std::string>() == "dare", ErrorKind::PreconditionViolated,
                    "scenario: P must be a matrix or \"dare\"");
            s.P = solve_dare(s.system.A, s.system.B, s.Q, s.R);
        } else {
            s.P = matrix_from_json(j.at("P"));
        }
    }
    if (j.contains("N")) s.N = j.at("N").get<std::size_t>();
    if (j.contains("X")) s.X = polytope_from_json(j.at("X"), s.nx());
    if (j.contains("U")) s.U = polytope_from_json(j.at("U"), s.nu());
    if (j.contains("Xf")) s.Xf = polytope_from_json(j.at("Xf"), s.nx());
    if (j.contains("sample_box"))
        s.sample_box = {vector_from_json(j.at("sample_box").at("lo")), vector_from_json(j.at("sample_box").at("hi"))};
    if (j.contains("settle_tol")) s.settle_tol = j.at("settle_tol").get<double>();
    if (j.contains("k_end")) s.k_end = j.at("k_end").get<std::size_t>();
    s.validate();
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    require(!out.fail(), ErrorKind::Io, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        fail(ErrorKind::Io, path.string() + ": " + e.what());
    }
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text, std::vector<std::string>& header) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(l);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        return cells;
    };
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Io, "csv: missing header");
    header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        require(cells.size() == header.size(), ErrorKind::Io, "csv: row width differs from header");
        rows.push_back(std::move(cells));
    }
    return rows;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        fail(ErrorKind::Io, "csv: bad number '" + s + "'");
    }
    require(used == s.size(), ErrorKind::Io, "csv: bad number '" + s + "'");
    return v;
}

}  // namespace

void write_dataset_csv(const fs::path& path, const Dataset& d) {
    std::string out;
    const std::size_t nx = d.nx(), nu = d.nu();
    for (std::size_t j = 0; j < nx; ++j) out += "x" + std::to_string(j) + ",";
    for (std::size_t j = 0; j < nu; ++j) out += "u" + std::to_string(j) + (j + 1 < nu ? "," : "\n");
    for (const auto& p : d.points) {
        for (double v : p.x) out += format_double(v) + ",";
        for (std::size_t j = 0; j < nu; ++j) out += format_double(p.u[j]) + (j + 1 < nu ? "," : "\n");
    }
    write_text(path, out);
}

Dataset read_dataset_csv(const fs::path& path) {
    std::vector<std::string> header;
    const auto rows = parse_csv(read_text(path), header);
    std::size_t nx = 0;
    while (nx < header.size() && !header[nx].empty() && header[nx][0] == 'x') ++nx;
    const std::size_t nu = header.size() - nx;
    require(nx >= 1 && nu >= 1, ErrorKind::Io, "dataset csv: expected x and u columns");
    Dataset d;
    for (const auto& r : rows) {
        DataPoint p{Vector(nx), Vector(nu)};
        for (std::size_t j = 0; j < nx; ++j) p.x[j] = parse_double(r[j]);
        for (std::size_t j = 0; j < nu; ++j) p.u[j] = parse_double(r[nx + j]);
        d.points.push_back(std::move(p));
    }
    return d;
}

void write_labeled_csv(const fs::path& path, const LabeledInitialSet& s) {
    std::string out;
    const std::size_t nx = s.points.empty() ? 0 : s.points.front().x0.size();
    for (std::size_t j = 0; j < nx; ++j) out += "x" + std::to_string(j) + ",";
    out += "label\n";
    for (const auto& p : s.points) {
        for (double v : p.x0) out += format_double(v) + ",";
        out += std::to_string(p.label) + "\n";
    }
    write_text(path, out);
}

LabeledInitialSet read_labeled_csv(const fs::path& path) {
    std::vector<std::string> header;
    const auto rows = parse_csv(read_text(path), header);
    require(!header.empty() && header.back() == "label", ErrorKind::Io, "labeled csv: last column must be label");
    const std::size_t nx = header.size() - 1;
    LabeledInitialSet s;
    for (const auto& r : rows) {
        LabeledPoint p{Vector(nx), 0};
        for (std::size_t j = 0; j < nx; ++j) p.x0[j] = parse_double(r[j]);
        p.label = static_cast<int>(parse_double(r[nx]));
        require(p.label == 1 || p.label == -1, ErrorKind::Io, "labeled csv: label must be ±1");
        s.points.push_back(std::move(p));
    }
    return s;
}

}  // namespace empc::io
