// scbill: command line front end for the billiard/ODE correspondence tools.
//
//   scbill <build|simulate|map|billiard|verify|analyze> [--config FILE] [--preset NAME]
//          [--out DIR] [--precision N] [--seed N] ...
//
// Exit codes: 0 ok, 1 numerical failure, 2 invalid input.

#include "scb/billiard.hpp"
#include "scb/correspondence.hpp"
#include "scb/error.hpp"
#include "scb/integrator.hpp"
#include "scb/sc_map.hpp"
#include "scb/system.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

using namespace scb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kVersion = "1.0.0";
const double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------- presets

json fig56_spec() { return {{"r", 2}, {"mu", {"1/2", "2/7", "3/14"}}, {"u", {"-1/2", "1/2", "3/2"}}}; }

json with_spec(json spec, json extra)
{
    json j = {{"spec", std::move(spec)}};
    j.merge_patch(extra);
    return j;
}

json preset(const std::string& name)
{
    const json generic = {{"u0", {0.25, 0.0}}, {"chi0", 2.51558}};
    if (name == "fig56")
        return with_spec(fig56_spec(), {{"u0", generic["u0"]}, {"chi0", 2.51558},
                                        {"integration", {{"t_end", 150}}},
                                        {"analysis", "lyapunov"}});
    if (name == "fig5")
        return with_spec(fig56_spec(), {{"u0", {0.4, 0.0}}, {"chi0", "perpendicular"},
                                        {"u0_list", {0.4, 0.46, 0.47, 0.53, 0.55}},
                                        {"integration", {{"t_end", 500}}},
                                        {"analysis", "periodic"}});
    if (name == "fig6" || name == "fig7-rational" || name == "fig8") {
        std::string a = name == "fig6" ? "density" : name == "fig8" ? "tail" : "poincare";
        return with_spec(fig56_spec(), {{"u0", generic["u0"]}, {"chi0", 2.51558},
                                        {"integration", {{"t_end", 5000}, {"precision", 30}}},
                                        {"analysis", a}});
    }
    if (name == "fig7-irrational") {
        // 1/sqrt5, 1/sqrt7 and the remainder, to 36 digits
        json spec = {{"r", 2},
                     {"mu", {"0.447213595499957939281834733746255247", "0.377964473009227227214516536234180061",
                             "0.174821931490814833503648730019564692"}},
                     {"u", {"-1/2", "1/2", "3/2"}}};
        return with_spec(spec, {{"u0", generic["u0"]}, {"chi0", 2.51558},
                                {"integration", {{"t_end", 5000}, {"precision", 30}}},
                                {"analysis", "poincare"}});
    }
    if (name == "scattering")
        return with_spec({{"r", 2}, {"mu", {"-1/4", "3/4", "1/2"}}, {"u", {"-1/2", "1/2", "3/2"}}},
                         {{"u0", generic["u0"]}, {"aim", "phi_inf"},
                          {"integration", {{"t_end", 10000}, {"sample_dt", 0.1}}},
                          {"analysis", "scattering"}});
    if (name == "parallel")
        return with_spec({{"r", 2}, {"mu", {"0", "1/2", "1/2"}}, {"u", {"-1/2", "1/2", "3/2"}}},
                         {{"u0", generic["u0"]}, {"chi0", 0.3},
                          {"integration", {{"t_end", 200}, {"sample_dt", 0.01}}},
                          {"analysis", "scattering"}});
    if (name == "corner")
        return with_spec(fig56_spec(), {{"u0", generic["u0"]}, {"aim", "vertex:0"},
                                        {"integration", {{"t_end", 10}, {"precision", 30}, {"rel_tol", 1e-20},
                                                         {"corner_guard", 1e-12}}},
                                        {"analysis", "corner"}});
    if (name == "newton-k3")
        return {{"system", "newton"}, {"k", 3}};
    throw Error(ErrorCode::InvalidInput, "unknown preset '" + name + "'");
}

const std::vector<std::string> kPresets = {"fig56", "fig5", "fig6", "fig7-rational", "fig7-irrational", "fig8",
                                           "scattering", "parallel", "corner", "newton-k3"};

// ---------------------------------------------------------------- run config

struct Options {
    std::string config_file, preset, out, which;
    int precision = -1;
    std::uint64_t seed = 1;
    double t_end = -1, rel_tol = -1, sample_dt = -1, u0 = NAN, chi0 = NAN;
    long bounces = -1;
};

struct Run {
    json config;
    bool newton = false;
    BilliardSpec spec;
    InitialCondition init;
    IntegrationConfig cfg;
    std::string hash;
    Options opt;
};

json read_json_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw Error(ErrorCode::IoError, "cannot read " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, path + ": " + e.what());
    }
}

double default_tol(int digits)
{
    int d = effective_digits(digits);
    return d <= 15 ? 1e-13 : d <= 18 ? 1e-15 : 1e-18;
}

int env_precision(int fallback)
{
    if (const char* e = std::getenv("SCBILL_PRECISION")) {
        try {
            return std::stoi(e);
        } catch (...) {
            throw Error(ErrorCode::InvalidInput, "SCBILL_PRECISION must be an integer");
        }
    }
    return fallback;
}

// chi0 for a launch from real u0 whose image heads for a target point
quad aim_phase(const BilliardSpec& spec, double u0, const std::string& aim)
{
    ScMap map(spec, cdouble(u0, 0));
    cdouble w0 = map.eval(cdouble(u0, 0)), target;
    if (aim == "phi_inf") {
        target = map.polygon().phi_inf;
    } else if (aim.rfind("vertex:", 0) == 0) {
        int a = std::stoi(aim.substr(7));
        if (a < 0 || a >= map.polygon().sides() || map.polygon().at_infinity[a])
            throw Error(ErrorCode::InvalidInput, "aim: no finite vertex " + std::to_string(a));
        target = map.polygon().vertices[a];
    } else {
        throw Error(ErrorCode::InvalidInput, "aim must be phi_inf or vertex:N");
    }
    return phase_for_direction(spec.r, quad(std::arg(target - w0)));
}

Run resolve(const Options& o, const std::string& command)
{
    Run run;
    run.opt = o;
    json c = json::object();
    if (!o.preset.empty())
        c = preset(o.preset);
    if (!o.config_file.empty())
        c.merge_patch(read_json_file(o.config_file));
    if (o.preset.empty() && o.config_file.empty())
        throw Error(ErrorCode::InvalidInput, "need --config FILE or --preset NAME");
    if (c.value("system", "") == "newton") {
        run.newton = true;
        run.config = c;
        return run;
    }
    json sj = c.contains("spec") ? c["spec"] : c;
    for (const char* k : {"u0", "chi0"})
        if (c.contains(k) && !sj.contains(k) && c[k].is_number())
            sj[k] = c[k];
    if (c.contains("u0") && c["u0"].is_array())
        sj["u0"] = c["u0"];
    SpecFile sf = spec_file_from_json(sj);
    run.spec = sf.spec;
    run.hash = spec_hash(run.spec);

    // integration settings: flag > config > environment > command default
    json ij = c.value("integration", json::object());
    IntegrationConfig& cfg = run.cfg;
    int def_digits = command == "verify" ? 30 : 15;
    cfg.precision_digits = o.precision > 0 ? o.precision : ij.value("precision", env_precision(def_digits));
    cfg.rel_tol = o.rel_tol > 0 ? o.rel_tol : ij.value("rel_tol", default_tol(cfg.precision_digits));
    cfg.abs_tol = ij.value("abs_tol", cfg.rel_tol * 1e-3);
    cfg.t_end = o.t_end > 0 ? o.t_end : ij.value("t_end", 100.0);
    cfg.sample_dt = o.sample_dt >= 0 ? o.sample_dt : ij.value("sample_dt", command == "verify" ? 0.01 : 0.0);
    cfg.corner_guard = ij.value("corner_guard", cfg.corner_guard);
    cfg.max_step = ij.value("max_step", cfg.max_step);
    cfg.validate();

    cquad u0 = sf.u0.value_or(cquad(quad(0.25)));
    if (!std::isnan(o.u0))
        u0 = cquad(quad(o.u0));
    quad chi0;
    if (!std::isnan(o.chi0)) {
        chi0 = quad(o.chi0);
    } else if (c.contains("aim")) {
        if (u0.imag() != 0)
            throw Error(ErrorCode::InvalidInput, "aim needs a real u0");
        chi0 = aim_phase(run.spec, static_cast<double>(u0.real()), c["aim"].get<std::string>());
    } else if (c.contains("chi0") && c["chi0"].is_string()) {
        if (c["chi0"] != "perpendicular")
            throw Error(ErrorCode::InvalidInput, "chi0 must be a number or \"perpendicular\"");
        chi0 = perpendicular_phase(run.spec, u0.real());
    } else if (sf.chi0) {
        chi0 = *sf.chi0;
    } else {
        // generic phase from the seed
        std::mt19937_64 rng(o.seed);
        chi0 = quad(std::uniform_real_distribution<double>(0, 2 * kPi)(rng));
    }
    run.init = state_from(run.spec, u0, chi0);
    c["u0"] = {static_cast<double>(u0.real()), static_cast<double>(u0.imag())};
    c["chi0"] = static_cast<double>(chi0);
    c["integration"] = {{"precision", cfg.precision_digits}, {"rel_tol", cfg.rel_tol}, {"abs_tol", cfg.abs_tol},
                        {"t_end", cfg.t_end}, {"sample_dt", cfg.sample_dt}, {"corner_guard", cfg.corner_guard}};
    run.config = c;
    return run;
}

// ---------------------------------------------------------------- output

json meta(const Run& run)
{
    return {{"tool", "scbill"}, {"version", kVersion}, {"spec_hash", run.hash}, {"seed", run.opt.seed},
            {"config", run.config}};
}

std::string csv_header(const Run& run)
{
    return "# tool=scbill version=" + std::string(kVersion) + " spec=" + run.hash +
           " seed=" + std::to_string(run.opt.seed) + "\n# config=" + run.config.dump() + "\n";
}

// main artifact: file under --out, or stdout
void emit(const Run& run, const std::string& name, const std::string& text)
{
    if (run.opt.out.empty()) {
        std::cout << text;
        return;
    }
    fs::create_directories(run.opt.out);
    fs::path p = fs::path(run.opt.out) / name;
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::IoError, "cannot write " + p.string());
    f << text;
    std::cerr << "wrote " << p.string() << "\n";
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string cell(double x)
{
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

// ---------------------------------------------------------------- commands

int cmd_build(const Run& run)
{
    ODESystem sys;
    json out;
    if (run.newton) {
        Number k(Rational(run.config.value("k", 3)));
        sys = newtonian_system(k);
        out["system"] = "newton";
        out["k"] = run.config.value("k", 3);
    } else {
        sys = build_system(run.spec);
        out = meta(run);
        out.erase("config");
        out["spec"] = spec_to_json(run.spec);
    }
    // coefficients of x1^r, x1^(r-1) x2, ..., x2^r
    json p = json::array(), q = json::array();
    for (int j = sys.r; j >= 0; --j) {
        p.push_back(number_to_json(j < static_cast<int>(sys.p.size()) ? sys.p[j] : Number(0)));
        q.push_back(number_to_json(j < static_cast<int>(sys.q.size()) ? sys.q[j] : Number(0)));
    }
    out["r"] = sys.r;
    out["p"] = p;
    out["q"] = q;
    out["equations"] = sys.str();
    std::ostringstream os;
    os << "# tool=scbill version=" << kVersion << (run.newton ? "" : " spec=" + run.hash) << "\n";
    os << sys.str() << "\n";
    os << "p (x1^" << sys.r << " .. x2^" << sys.r << "): " << p.dump() << "\n";
    os << "q (x1^" << sys.r << " .. x2^" << sys.r << "): " << q.dump() << "\n";
    std::cout << os.str();
    if (!run.opt.out.empty())
        emit(run, "system.json", dump(out));
    return 0;
}

int cmd_map(const Run& run)
{
    ScMap map(run.spec);
    json j = meta(run);
    j["polygon"] = map.polygon().to_json();
    double s = 0;
    for (double a : map.polygon().angles)
        s += a;
    j["angle_sum"] = s;
    j["angle_sum_over_pi"] = s / kPi;
    emit(run, "polygon.json", dump(j));
    return 0;
}

int cmd_simulate(const Run& run)
{
    Trajectory tr = integrate(run.spec, run.init, run.cfg);
    json j = meta(run);
    j["status"] = status_name(tr.status);
    j["t_final"] = tr.t_final;
    j["max_dev"] = tr.max_dev;
    j["steps"] = tr.steps;
    j["rejected"] = tr.rejected;
    j["crossings"] = tr.events.size();
    j["digits"] = tr.digits;
    if (tr.status == TrajStatus::BlowUp) {
        j["t_blowup"] = tr.t_blowup;
        j["corner"] = tr.corner_index;
    }
    if (run.opt.out.empty()) {
        std::cout << dump(j);
    } else {
        std::ostringstream ts, es;
        write_trajectory_csv(ts, tr, csv_header(run));
        write_events_csv(es, tr.events, csv_header(run));
        emit(run, "trajectory.csv", ts.str());
        emit(run, "events.csv", es.str());
        emit(run, "summary.json", dump(j));
    }
    return tr.status == TrajStatus::ToleranceFailure ? 1 : 0;
}

int cmd_billiard(const Run& run)
{
    cdouble base(static_cast<double>(run.init.u0.real()), static_cast<double>(run.init.u0.imag()));
    ScMap map(run.spec, base.imag() >= 0 ? base : std::conj(base));
    Table table(map.polygon());
    long nb = run.opt.bounces > 0 ? run.opt.bounces : 1000;
    BounceSequence seq = trace_from_launch(map, table, run.init,
                                           run.opt.t_end > 0 ? run.opt.t_end : INFINITY, nb);
    std::ostringstream os;
    std::string h = csv_header(run) + "# terminal=" + terminal_name(seq.terminal) +
                    " t_end=" + cell(seq.t_end) + "\n";
    write_bounces_csv(os, seq, h);
    emit(run, "bounces.csv", os.str());
    return 0;
}

int cmd_verify(const Run& run)
{
    CorrespondenceReport rep = verify_correspondence(run.spec, run.init, run.cfg);
    json j = meta(run);
    j["report"] = rep.to_json();
    emit(run, "report.json", dump(j));
    std::cerr << (rep.all_pass() ? "all checks pass" : "some checks fail") << "\n";
    return rep.all_pass() ? 0 : 1;
}

// run the configured orbit without stored samples, for long ergodic analyses
Trajectory long_run(const Run& run, const StepObserver& obs = {})
{
    IntegrationConfig c = run.cfg;
    c.store_samples = false;
    Trajectory tr = integrate(run.spec, run.init, c, obs);
    if (tr.status != TrajStatus::Completed)
        throw Error(ErrorCode::CornerEncounter,
                    std::string("run ended early: ") + status_name(tr.status) + " at t = " + cell(tr.t_final));
    return tr;
}

int analyze_density(const Run& run)
{
    Trajectory tr = long_run(run);
    ScMap map(run.spec, cdouble(0.25, 0));
    CrossingDensity p(map);
    auto u = crossing_positions(tr);
    double ks = p.ks(u);
    // histogram on the perimeter fraction F(u), where the prediction is flat
    const int bins = 50;
    std::vector<long> h(bins, 0);
    for (double x : u)
        ++h[std::min(bins - 1, static_cast<int>(p.cdf(x) * bins))];
    std::ostringstream os;
    os << csv_header(run) << "# crossings=" << u.size() << " ks=" << cell(ks) << " max_dev=" << cell(tr.max_dev)
       << "\nF_lo,F_hi,count,expected\n";
    for (int k = 0; k < bins; ++k)
        os << cell(double(k) / bins) << "," << cell(double(k + 1) / bins) << "," << h[k] << ","
           << cell(double(u.size()) / bins) << "\n";
    emit(run, "density.csv", os.str());
    std::cerr << "KS distance " << ks << " over " << u.size() << " crossings\n";
    return 0;
}

int analyze_tail(const Run& run)
{
    OccupationHistogram h;
    Trajectory tr = long_run(run, h.observer(0));
    TailFit f = tail_exponent(h);
    std::ostringstream hs;
    hs << csv_header(run) << "B_lo,B_hi,time,subsamples\n";
    for (int k = 0; k < h.bins(); ++k)
        if (h.count[k])
            hs << cell(h.bin_lo(k)) << "," << cell(h.bin_lo(k + 1)) << "," << cell(h.time[k]) << "," << h.count[k]
               << "\n";
    std::ostringstream fs_;
    fs_ << csv_header(run)
        << "density_slope,density_err,fraction_slope,fraction_err,B_lo,B_hi,samples_above,top_slope,bounded_support\n"
        << cell(f.density_slope) << "," << cell(f.density_err) << "," << cell(f.fraction_slope) << ","
        << cell(f.fraction_err) << "," << cell(f.B_lo) << "," << cell(f.B_hi) << "," << f.samples_above << ","
        << cell(f.top_slope) << "," << (f.bounded_support ? 1 : 0) << "\n";
    if (!run.opt.out.empty())
        emit(run, "tail_histogram.csv", hs.str());
    emit(run, "tail_fit.csv", fs_.str());
    return 0;
}

int analyze_poincare(const Run& run)
{
    Trajectory tr = long_run(run);
    auto pts = poincare_section(tr);
    BoxDimension bd = box_counting(pts);
    std::ostringstream ps, ds;
    ps << csv_header(run) << "t,re_x2,im_x2\n";
    for (size_t k = 0; k < pts.size(); ++k)
        ps << cell(tr.events[k].t) << "," << cell(pts[k].real()) << "," << cell(pts[k].imag()) << "\n";
    ds << csv_header(run) << "# dimension=" << cell(bd.dimension) << " stderr=" << cell(bd.stderr_dim)
       << " points=" << bd.points << "\neps,boxes\n";
    for (size_t k = 0; k < bd.eps.size(); ++k)
        ds << cell(bd.eps[k]) << "," << cell(bd.counts[k]) << "\n";
    if (!run.opt.out.empty())
        emit(run, "section.csv", ps.str());
    emit(run, "dimension.csv", ds.str());
    std::cerr << "box-counting dimension " << bd.dimension << "\n";
    return 0;
}

int analyze_lyapunov(const Run& run)
{
    LyapunovOptions o;
    o.t_max = run.cfg.t_end;
    LyapunovResult R = lyapunov_estimate(run.spec, run.init, run.cfg, o);
    LyapunovOptions lo;
    lo.t_max = 1000;
    LyapunovResult L = lyapunov_lorenz(lo);
    std::ostringstream os;
    os << csv_header(run) << "system,lambda,stderr,t_reached,renormalizations,jumps,aborted\n";
    for (auto [name, r] : {std::pair<const char*, const LyapunovResult*>{"spec", &R}, {"lorenz_control", &L}})
        os << name << "," << cell(r->lambda) << "," << cell(r->stderr_lambda) << "," << cell(r->t_reached) << ","
           << r->renormalizations << "," << r->jumps << "," << (r->aborted ? 1 : 0) << "\n";
    emit(run, "lyapunov.csv", os.str());
    return R.aborted ? 1 : 0;
}

int analyze_periodic(const Run& run)
{
    std::vector<double> list;
    if (run.config.contains("u0_list"))
        list = run.config["u0_list"].get<std::vector<double>>();
    else
        list.push_back(static_cast<double>(run.init.u0.real()));
    std::ostringstream os;
    os << csv_header(run) << "u0,status,T,crossings,recurrence,sampled,billiard_T,billiard_m\n";
    for (double u0 : list) {
        os << cell(u0) << ",";
        try {
            auto p = periodic_from_perpendicular(run.spec, u0, run.cfg.t_end, run.cfg);
            if (p)
                os << "periodic," << cell(p->T) << "," << p->crossings << "," << cell(p->recurrence) << ","
                   << cell(p->sampled) << "," << cell(p->billiard_T) << "," << p->billiard_m << "\n";
            else
                os << "none,,,,,,\n";
        } catch (const Error& e) {
            if (e.code() != ErrorCode::CornerEncounter)
                throw;
            os << "corner,,,,,,\n";
        }
    }
    emit(run, "periodic.csv", os.str());
    return 0;
}

int analyze_corner(const Run& run)
{
    Trajectory tr = integrate(run.spec, run.init, run.cfg);
    CornerFit f = corner_blowup_fit(run.spec, tr);
    std::ostringstream os;
    os << csv_header(run) << "corner,t_c,exponent_u,exponent_x2,K_measured,K_predicted,ratio_error,points\n"
       << f.corner << "," << cell(f.t_c) << "," << cell(f.exponent_u) << "," << cell(f.exponent_x2) << ","
       << cell(f.K_measured) << "," << cell(f.K_predicted) << "," << cell(f.ratio_error) << "," << f.points << "\n";
    emit(run, "corner.csv", os.str());
    return 0;
}

int analyze_scattering(const Run& run)
{
    Trajectory fwd = integrate(run.spec, run.init, run.cfg);
    InitialCondition back = run.init;
    back.x1 = -back.x1;
    back.x2 = -back.x2;
    back.chi0 += pi_q();
    Trajectory bwd = integrate(run.spec, back, run.cfg);
    ScatteringReport R = scattering_asymptotics(run.spec, fwd, bwd);
    std::ostringstream os;
    os << csv_header(run) << "# pole_found=" << (R.pole_found ? 1 : 0) << " pole_t=" << cell(R.pole_t)
       << " pole_modulus=" << cell(R.pole_modulus) << "\n"
       << "direction,vertex,limit_error,x2_slope,prefactor_ratio,parallel,exp_rate,exp_rate_bound,exp_r2\n";
    for (auto [name, c] : {std::pair<const char*, const ChannelAsymptotics*>{"forward", &R.forward},
                           {"backward", &R.backward}})
        os << name << "," << c->vertex << "," << cell(c->limit_error) << "," << cell(c->x2_slope) << ","
           << cell(c->prefactor_ratio) << "," << (c->parallel ? 1 : 0) << "," << cell(c->exp_rate) << ","
           << cell(c->exp_rate_predicted) << "," << cell(c->exp_r2) << "\n";
    emit(run, "scattering.csv", os.str());
    return 0;
}

int cmd_analyze(const Run& run)
{
    std::string which = run.opt.which.empty() ? run.config.value("analysis", "") : run.opt.which;
    if (which == "density")
        return analyze_density(run);
    if (which == "tail")
        return analyze_tail(run);
    if (which == "poincare")
        return analyze_poincare(run);
    if (which == "lyapunov")
        return analyze_lyapunov(run);
    if (which == "periodic")
        return analyze_periodic(run);
    if (which == "corner")
        return analyze_corner(run);
    if (which == "scattering")
        return analyze_scattering(run);
    throw Error(ErrorCode::InvalidInput,
                "analyze needs --which density|tail|poincare|lyapunov|periodic|corner|scattering");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Complex ODE systems and their polygonal billiards"};
    app.set_version_flag("--version", std::string("scbill ") + kVersion);
    app.require_subcommand(1);
    Options o;
    std::string presets;
    for (const auto& p : kPresets)
        presets += (presets.empty() ? "" : ", ") + p;

    struct Cmd {
        const char* name;
        const char* help;
        int (*fn)(const Run&);
    };
    const Cmd cmds[] = {
        {"build", "print the ODE coefficients of a spec", cmd_build},
        {"simulate", "integrate an orbit; trajectory and crossing CSV", cmd_simulate},
        {"map", "polygon of the spec as JSON", cmd_map},
        {"billiard", "trace the billiard orbit of the launch; bounce CSV", cmd_billiard},
        {"verify", "check the ODE orbit against the billiard; report JSON", cmd_verify},
        {"analyze", "density, tail, poincare, lyapunov, periodic, corner or scattering analysis", cmd_analyze},
    };
    for (const auto& c : cmds) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", o.config_file, "JSON config: spec fields, u0, chi0, integration");
        sub->add_option("--preset", o.preset, "one of " + presets);
        sub->add_option("--out", o.out, "output directory (default: stdout)");
        sub->add_option("--precision", o.precision, "working decimal digits (15, 18 or up to 33)");
        sub->add_option("--seed", o.seed, "seed for a generic chi0 when none is given");
        sub->add_option("--t-end", o.t_end, "integration / trace horizon");
        sub->add_option("--rtol", o.rel_tol, "relative tolerance");
        sub->add_option("--sample-dt", o.sample_dt, "spacing of stored samples (0: every step)");
        sub->add_option("--u0", o.u0, "real initial u, overriding the config");
        sub->add_option("--chi0", o.chi0, "initial phase, overriding the config");
        if (std::string(c.name) == "billiard")
            sub->add_option("--bounces", o.bounces, "bounce limit");
        if (std::string(c.name) == "analyze")
            sub->add_option("--which", o.which, "analysis to run");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    for (const auto& c : cmds) {
        if (!app.got_subcommand(c.name))
            continue;
        try {
            Run run = resolve(o, c.name);
            if (run.newton && std::string(c.name) != "build")
                throw Error(ErrorCode::InvalidInput, "the newton system only supports build");
            return c.fn(run);
        } catch (const Error& e) {
            std::cerr << "scbill " << c.name << ": " << e.what() << "\n";
            return is_input_error(e.code()) ? 2 : 1;
        } catch (const std::exception& e) {
            std::cerr << "scbill " << c.name << ": " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
