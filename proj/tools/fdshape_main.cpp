#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fdshape/errors.hpp"
#include "fdshape/problem_io.hpp"
#include "fdshape/synthesis.hpp"

namespace fs = std::filesystem;
using namespace fdshape;

namespace {

struct SynthFlags {
    std::string problem;
    std::string out_dir = ".";
    double gamma0 = 0;
    double mu = 0;
    int max_iters = 0;
    std::string shared = "";
    bool svg = false;
    bool has_gamma0 = false, has_mu = false, has_max_iters = false;
};

struct AnalyzeFlags {
    std::string problem;
    std::string filter;
    std::string out_dir = ".";
    double scale = 1.0;
    bool post_scale = false;
    bool svg = false;
};

int run_synth(const SynthFlags& f) {
    ProblemFile pf = load_problem(f.problem);
    if (f.has_gamma0) pf.config.gamma0 = f.gamma0;
    if (f.has_mu) pf.config.mu = f.mu;
    if (f.has_max_iters) pf.config.max_outer_iters = f.max_iters;
    if (!f.shared.empty()) pf.config.shared_lyapunov = (f.shared == "on");

    GeneralizedPlant P = problem_plant(pf);
    SynthesisResult res = synthesize(P, pf.config);

    fs::create_directories(f.out_dir);
    const fs::path out(f.out_dir);
    save_filter((out / "filter.json").string(), res.Q);

    Certificates cert;
    cert.status = res.status == SynthesisStatus::Converged ? "converged"
                                                           : "iter-limit";
    cert.nu = res.nu_certified;
    cert.gamma0 = res.gamma0;
    cert.J = res.gamma0 > 0 ? res.nu_certified / res.gamma0 : 0.0;
    cert.hinf_disturbance = res.check.hinf_disturbance;
    cert.hminus_fault = res.check.hminus_fault;
    cert.iterations = res.history;
    save_certificates((out / "certificates.json").string(), cert);
    write_sweep_csv((out / "sweep.csv").string(), res.check, res.gamma0,
                    res.nu_certified, pf);
    write_report((out / "report.txt").string(), pf, cert);
    if (f.svg)
        write_sweep_svg((out / "sweep.svg").string(), res.check, res.gamma0,
                        res.nu_certified, pf);

    std::cout << "status=" << cert.status << " nu=" << cert.nu
              << " gamma0=" << cert.gamma0 << " J=" << cert.J
              << " hinf=" << cert.hinf_disturbance
              << " hminus=" << cert.hminus_fault << "\n";
    if (res.status != SynthesisStatus::Converged) {
        std::cerr << "warning: " << res.message << "\n";
        return 3;
    }
    return 0;
}

int run_analyze(const AnalyzeFlags& f) {
    ProblemFile pf = load_problem(f.problem);
    GeneralizedPlant P = problem_plant(pf);
    StateSpace Q = load_filter(f.filter);
    if (f.scale <= 0.0) throw InputError("--scale must be > 0");
    if (f.scale != 1.0) Q = scale_output(Q, f.scale);

    fs::create_directories(f.out_dir);
    const fs::path out(f.out_dir);
    if (f.post_scale) {
        Q = post_scale_update(P, Q, pf.config.gamma0,
                              pf.config.disturbance_channel,
                              pf.config.residual_channel);
        save_filter((out / "filter_scaled.json").string(), Q);
    }

    VerifyResult vr = verify(P, Q, pf.config.disturbance_channel,
                             pf.config.fault_channel,
                             pf.config.residual_channel);

    Certificates cert;
    cert.status = "analyze";
    cert.nu = vr.hminus_fault;
    cert.gamma0 = pf.config.gamma0;
    cert.J = vr.J;
    cert.hinf_disturbance = vr.hinf_disturbance;
    cert.hminus_fault = vr.hminus_fault;
    save_certificates((out / "certificates.json").string(), cert);
    write_sweep_csv((out / "sweep.csv").string(), vr, pf.config.gamma0,
                    vr.hminus_fault, pf);
    write_report((out / "report.txt").string(), pf, cert);
    if (f.svg)
        write_sweep_svg((out / "sweep.svg").string(), vr, pf.config.gamma0,
                        vr.hminus_fault, pf);

    std::cout << "hinf=" << vr.hinf_disturbance
              << " hminus=" << vr.hminus_fault << " J=" << vr.J << "\n";
    return 0;
}

template <typename F>
int guarded(F&& fn) {
    try {
        return fn();
    } catch (const InfeasibleAtStep1& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const UnstableLoop& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const ImproperScaling& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const UnstableScaling& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const IllPosedLoop& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const SingularRecovery& e) {
        std::cerr << "numerical: " << e.what() << "\n";
        return 3;
    } catch (const SingularCompletion& e) {
        std::cerr << "numerical: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "fdshape: fault detection filter synthesis by shaping the "
        "disturbance H-infinity ceiling and the fault minimum-gain floor"};
    app.require_subcommand(1);

    SynthFlags sf;
    auto* synth =
        app.add_subcommand("synth", "synthesize a filter from a problem file");
    synth->add_option("problem", sf.problem, "problem JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    auto* og = synth->add_option("--gamma0", sf.gamma0,
                                 "disturbance bound override");
    auto* om = synth->add_option("--mu", sf.mu, "plateau tolerance override");
    auto* oi = synth->add_option("--max-iters", sf.max_iters,
                                 "outer iteration cap override");
    synth
        ->add_option("--shared-lyapunov", sf.shared,
                     "share one Lyapunov pair across both bounds")
        ->check(CLI::IsMember({"on", "off"}));
    synth->add_option("--out-dir", sf.out_dir, "output directory");
    synth->add_flag("--svg", sf.svg, "also emit an SVG of the sweep");

    AnalyzeFlags af;
    auto* analyze = app.add_subcommand(
        "analyze", "measure an existing filter against a problem");
    analyze->add_option("problem", af.problem, "problem JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_option("--filter", af.filter, "filter JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_flag("--post-scale", af.post_scale,
                      "rescale the filter to make the disturbance bound "
                      "tight at all frequencies");
    analyze->add_option("--scale", af.scale,
                        "multiply the filter output by a constant");
    analyze->add_option("--out-dir", af.out_dir, "output directory");
    analyze->add_flag("--svg", af.svg, "also emit an SVG of the sweep");

    CLI11_PARSE(app, argc, argv);

    if (*synth) {
        sf.has_gamma0 = og->count() > 0;
        sf.has_mu = om->count() > 0;
        sf.has_max_iters = oi->count() > 0;
        return guarded([&] { return run_synth(sf); });
    }
    return guarded([&] { return run_analyze(af); });
}
