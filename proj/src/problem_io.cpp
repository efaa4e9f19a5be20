#include "fdshape/problem_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fdshape/errors.hpp"
#include "json.hpp"

namespace fdshape {

namespace {

using nlohmann::json;

json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open '" + path + "'");
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw InputError("parse error in '" + path + "': " + e.what());
    }
    return j;
}

void require_schema(const json& j, const std::string& path) {
    if (!j.contains("schema_version"))
        throw InputError("'" + path + "': missing field 'schema_version'");
    if (j["schema_version"].get<int>() != kSchemaVersion)
        throw InputError("'" + path + "': unsupported schema_version");
}

double number_field(const json& j, const std::string& field) {
    if (!j.contains(field))
        throw InputError("missing field '" + field + "'");
    if (!j[field].is_number())
        throw InputError("field '" + field + "' must be a number");
    return j[field].get<double>();
}

std::vector<double> coeff_array(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty())
        throw InputError("field '" + field + "' must be a non-empty array");
    std::vector<double> v;
    for (const auto& e : j) {
        if (!e.is_number())
            throw InputError("field '" + field + "' must contain numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

// Coefficients are written highest power first.
RationalTF parse_tf(const json& j, const std::string& field) {
    if (!j.is_object() || !j.contains("num") || !j.contains("den"))
        throw InputError("field '" + field + "' must be {num: [...], den: [...]}");
    return RationalTF(coeff_array(j["num"], field + ".num"),
                      coeff_array(j["den"], field + ".den"));
}

Matrix parse_matrix(const json& j, const std::string& field) {
    if (!j.is_array())
        throw InputError("field '" + field + "' must be a nested array");
    const size_t rows = j.size();
    size_t cols = 0;
    if (rows > 0) {
        if (!j[0].is_array())
            throw InputError("field '" + field + "' must be a nested array");
        cols = j[0].size();
    }
    Matrix M(rows, cols);
    for (size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw InputError("field '" + field + "' is not rectangular");
        for (size_t k = 0; k < cols; ++k) {
            if (!j[i][k].is_number())
                throw InputError("field '" + field + "' must contain numbers");
            M(i, k) = j[i][k].get<double>();
        }
    }
    return M;
}

json matrix_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ChannelSpan> parse_channels(const json& j,
                                        const std::string& field) {
    if (!j.is_array() || j.empty())
        throw InputError("field '" + field + "' must list channels");
    std::vector<ChannelSpan> spans;
    Eigen::Index off = 0;
    for (const auto& c : j) {
        if (!c.is_object() || !c.contains("name") || !c.contains("width"))
            throw InputError("field '" + field +
                             "' entries need name and width");
        ChannelSpan s;
        s.name = c["name"].get<std::string>();
        s.offset = off;
        s.width = c["width"].get<Eigen::Index>();
        if (s.width < 1)
            throw InputError("channel '" + s.name + "' width must be >= 1");
        off += s.width;
        spans.push_back(std::move(s));
    }
    return spans;
}

void parse_config(const json& j, SynthesisConfig& cfg) {
    cfg.gamma0 = number_field(j, "gamma0");
    if (j.contains("mu")) cfg.mu = j["mu"].get<double>();
    if (j.contains("max_outer_iters"))
        cfg.max_outer_iters = j["max_outer_iters"].get<int>();
    if (j.contains("shared_lyapunov"))
        cfg.shared_lyapunov = j["shared_lyapunov"].get<bool>();
    if (j.contains("disturbance_channel"))
        cfg.disturbance_channel = j["disturbance_channel"].get<std::string>();
    if (j.contains("fault_channel"))
        cfg.fault_channel = j["fault_channel"].get<std::string>();
    if (j.contains("residual_channel"))
        cfg.residual_channel = j["residual_channel"].get<std::string>();
    if (j.contains("gap_tol")) cfg.solver.gap_tol = j["gap_tol"].get<double>();
    if (j.contains("feas_tol"))
        cfg.solver.feas_tol = j["feas_tol"].get<double>();
    if (j.contains("solver_max_iter"))
        cfg.solver.max_iter = j["solver_max_iter"].get<int>();
}

std::string fmt(double v) {
    char buf[64];
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

}  // namespace

ProblemFile load_problem(const std::string& path) {
    json j = read_json(path);
    require_schema(j, path);
    ProblemFile pf;
    pf.name = j.value("name", std::string{});

    pf.has_transfer_form = j.contains("transfer_form");
    pf.has_plant_form = j.contains("plant_form");
    if (pf.has_transfer_form == pf.has_plant_form)
        throw InputError("'" + path +
                         "': exactly one of transfer_form/plant_form required");

    if (pf.has_transfer_form) {
        const json& t = j["transfer_form"];
        for (const char* f : {"G", "C", "Gd", "Gf"})
            if (!t.contains(f))
                throw InputError("missing field 'transfer_form." +
                                 std::string(f) + "'");
        pf.G = parse_tf(t["G"], "transfer_form.G");
        pf.C = parse_tf(t["C"], "transfer_form.C");
        pf.Gd = parse_tf(t["Gd"], "transfer_form.Gd");
        pf.Gf = parse_tf(t["Gf"], "transfer_form.Gf");
    } else {
        const json& p = j["plant_form"];
        GeneralizedPlant P;
        P.A = parse_matrix(p.contains("A") ? p["A"] : json::array(),
                           "plant_form.A");
        for (const char* f :
             {"B1", "B2", "C1", "C2", "D11", "D12", "D21"})
            if (!p.contains(f))
                throw InputError("missing field 'plant_form." +
                                 std::string(f) + "'");
        P.B1 = parse_matrix(p["B1"], "plant_form.B1");
        P.B2 = parse_matrix(p["B2"], "plant_form.B2");
        P.C1 = parse_matrix(p["C1"], "plant_form.C1");
        P.C2 = parse_matrix(p["C2"], "plant_form.C2");
        P.D11 = parse_matrix(p["D11"], "plant_form.D11");
        P.D12 = parse_matrix(p["D12"], "plant_form.D12");
        P.D21 = parse_matrix(p["D21"], "plant_form.D21");
        P.D22 = p.contains("D22")
                    ? parse_matrix(p["D22"], "plant_form.D22")
                    : Matrix::Zero(P.C2.rows(), P.B2.cols());
        if (!p.contains("w_channels") || !p.contains("z_channels"))
            throw InputError("plant_form needs w_channels and z_channels");
        P.w_channels = parse_channels(p["w_channels"], "plant_form.w_channels");
        P.z_channels = parse_channels(p["z_channels"], "plant_form.z_channels");
        P.validate();
        pf.plant = std::move(P);
    }

    if (!j.contains("synthesis"))
        throw InputError("'" + path + "': missing field 'synthesis'");
    parse_config(j["synthesis"], pf.config);
    return pf;
}

GeneralizedPlant problem_plant(const ProblemFile& pf) {
    if (pf.has_transfer_form)
        return build_fdi_plant(pf.G, pf.C, pf.Gd, pf.Gf);
    return pf.plant;
}

void save_filter(const std::string& path, const StateSpace& Q) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["filter"] = {{"A", matrix_json(Q.A)},
                   {"B", matrix_json(Q.B)},
                   {"C", matrix_json(Q.C)},
                   {"D", matrix_json(Q.D)}};
    std::ofstream os(path);
    if (!os) throw InputError("cannot write '" + path + "'");
    os << j.dump(1) << "\n";
}

StateSpace load_filter(const std::string& path) {
    json j = read_json(path);
    require_schema(j, path);
    if (!j.contains("filter"))
        throw InputError("'" + path + "': missing field 'filter'");
    const json& f = j["filter"];
    for (const char* k : {"A", "B", "C", "D"})
        if (!f.contains(k))
            throw InputError("missing field 'filter." + std::string(k) + "'");
    return StateSpace(parse_matrix(f["A"], "filter.A"),
                      parse_matrix(f["B"], "filter.B"),
                      parse_matrix(f["C"], "filter.C"),
                      parse_matrix(f["D"], "filter.D"));
}

void save_certificates(const std::string& path, const Certificates& c) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["status"] = c.status;
    j["nu"] = c.nu;
    j["gamma0"] = c.gamma0;
    j["J"] = c.J;
    j["hinf_disturbance"] = c.hinf_disturbance;
    j["hminus_fault"] = c.hminus_fault;
    json iters = json::array();
    for (const auto& r : c.iterations)
        iters.push_back({{"iter", r.iter},
                         {"nu2_step1", r.nu2_step1},
                         {"nu2_step2", r.nu2_step2}});
    j["iterations"] = std::move(iters);
    std::ofstream os(path);
    if (!os) throw InputError("cannot write '" + path + "'");
    os << j.dump(1) << "\n";
}

void write_sweep_csv(const std::string& path, const VerifyResult& vr,
                     double gamma, double nu, const ProblemFile& pf) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write '" + path + "'");
    os << "omega,sigma_max_Ted,sigma_min_Tef,gamma_bound,nu_bound\n";
    for (size_t i = 0; i < vr.omegas.size(); ++i) {
        const double w = vr.omegas[i];
        double gb = std::numeric_limits<double>::quiet_NaN();
        double nb = std::numeric_limits<double>::quiet_NaN();
        if (pf.has_transfer_form) {
            const double gd = pf.Gd.evaluate_mag(w);
            const double gf = pf.Gf.evaluate_mag(w);
            gb = gd > 0.0 ? gamma / gd : std::numeric_limits<double>::infinity();
            nb = gf > 0.0 ? nu / gf : std::numeric_limits<double>::infinity();
        }
        os << fmt(w) << "," << fmt(vr.smax_disturbance[i]) << ","
           << fmt(vr.smin_fault[i]) << "," << fmt(gb) << "," << fmt(nb)
           << "\n";
    }
}

void write_report(const std::string& path, const ProblemFile& pf,
                  const Certificates& c) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write '" + path + "'");
    const SynthesisConfig& cfg = pf.config;
    os << "residual shaping report\n";
    os << "problem: " << (pf.name.empty() ? "(unnamed)" : pf.name) << "\n";
    os << "settings: gamma0=" << cfg.gamma0 << " mu=" << cfg.mu
       << " max_outer_iters=" << cfg.max_outer_iters << " shared_lyapunov="
       << (cfg.shared_lyapunov ? "on" : "off")
       << " gap_tol=" << cfg.solver.gap_tol
       << " feas_tol=" << cfg.solver.feas_tol << " strict_eps=" << kStrictEps
       << "\n";
    os << "status: " << c.status << "\n";
    os << "certified: nu=" << fmt(c.nu) << " gamma0=" << fmt(c.gamma0)
       << " J=" << fmt(c.J) << "\n";
    os << "measured: hinf_disturbance=" << fmt(c.hinf_disturbance)
       << " hminus_fault=" << fmt(c.hminus_fault) << "\n";
    if (!c.iterations.empty()) {
        os << "iterations (nu^2 after each half-step):\n";
        os << "  k  vars  slacks\n";
        for (const auto& r : c.iterations)
            os << "  " << r.iter << "  " << fmt(r.nu2_step1) << "  "
               << fmt(r.nu2_step2) << "\n";
    }
}

namespace {

struct SvgMapper {
    double x0, x1, y0, y1;  // data ranges, log10
    double W = 760, H = 440, ml = 60, mt = 20;
    double px(double w) const {
        return ml + (std::log10(w) - x0) / (x1 - x0) * W;
    }
    double py(double v) const {
        return mt + H - (std::log10(v) - y0) / (y1 - y0) * H;
    }
};

void polyline(std::ostream& os, const SvgMapper& m,
              const std::vector<double>& ws, const std::vector<double>& vs,
              const char* color, bool dashed) {
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"";
    if (dashed) os << " stroke-dasharray=\"6 4\"";
    os << " points=\"";
    char buf[64];
    for (size_t i = 0; i < ws.size(); ++i) {
        if (!(ws[i] > 0.0) || !(vs[i] > 0.0) || !std::isfinite(vs[i]))
            continue;
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", m.px(ws[i]),
                      m.py(vs[i]));
        os << buf;
    }
    os << "\"/>\n";
}

}  // namespace

void write_sweep_svg(const std::string& path, const VerifyResult& vr,
                     double gamma, double nu, const ProblemFile& pf) {
    std::vector<double> gb(vr.omegas.size(),
                           std::numeric_limits<double>::quiet_NaN());
    std::vector<double> nb = gb;
    if (pf.has_transfer_form) {
        for (size_t i = 0; i < vr.omegas.size(); ++i) {
            const double gd = pf.Gd.evaluate_mag(vr.omegas[i]);
            const double gf = pf.Gf.evaluate_mag(vr.omegas[i]);
            if (gd > 0.0) gb[i] = gamma / gd;
            if (gf > 0.0) nb[i] = nu / gf;
        }
    }

    double wlo = 0, whi = 0, vlo = 0, vhi = 0;
    bool any = false;
    auto scan = [&](const std::vector<double>& v) {
        for (size_t i = 0; i < vr.omegas.size(); ++i) {
            if (!(vr.omegas[i] > 0.0) || !(v[i] > 0.0) ||
                !std::isfinite(v[i]))
                continue;
            if (!any) {
                wlo = whi = vr.omegas[i];
                vlo = vhi = v[i];
                any = true;
            }
            wlo = std::min(wlo, vr.omegas[i]);
            whi = std::max(whi, vr.omegas[i]);
            vlo = std::min(vlo, v[i]);
            vhi = std::max(vhi, v[i]);
        }
    };
    scan(vr.smax_disturbance);
    scan(vr.smin_fault);
    scan(gb);
    scan(nb);
    if (!any) {
        wlo = 1e-3;
        whi = 1e3;
        vlo = 1e-3;
        vhi = 1.0;
    }
    vlo = std::max(vlo, vhi * 1e-8);

    SvgMapper m{std::log10(wlo), std::log10(whi), std::log10(vlo),
                std::log10(vhi)};
    std::ofstream os(path);
    if (!os) throw InputError("cannot write '" + path + "'");
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"840\" "
          "height=\"500\" viewBox=\"0 0 840 500\">\n";
    os << "<rect x=\"60\" y=\"20\" width=\"760\" height=\"440\" "
          "fill=\"white\" stroke=\"black\"/>\n";
    polyline(os, m, vr.omegas, vr.smax_disturbance, "#1f4e9c", false);
    polyline(os, m, vr.omegas, vr.smin_fault, "#b02318", false);
    polyline(os, m, vr.omegas, gb, "#1f4e9c", true);
    polyline(os, m, vr.omegas, nb, "#b02318", true);
    os << "<text x=\"70\" y=\"40\" font-size=\"13\" fill=\"#1f4e9c\">"
          "sigma_max disturbance (dashed: gamma bound)</text>\n";
    os << "<text x=\"70\" y=\"58\" font-size=\"13\" fill=\"#b02318\">"
          "sigma_min fault (dashed: nu bound)</text>\n";
    os << "<text x=\"430\" y=\"490\" font-size=\"13\">omega (rad/s, log)"
          "</text>\n";
    os << "</svg>\n";
}

}  // namespace fdshape
