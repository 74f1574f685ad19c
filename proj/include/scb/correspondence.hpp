#pragma once

#include "scb/billiard.hpp"
#include "scb/integrator.hpp"
#include "scb/sc_map.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace scb {

// Where the folded image of an initial condition starts in the polygon.
struct Launch {
    cdouble w0;           // Phi of the folded u0
    double chi = 0;       // direction of the folded image at t = 0
    int start_side = -1;  // side containing w0 for real u0
    bool lower = false;   // u starts in (or immediately dives into) the lower half plane
    cdouble udot0;        // du/dt at t = 0
};
Launch billiard_launch(const ScMap& map, const InitialCondition& init);

// Folded image w(t) of an ODE orbit together with the bounces read off
// the crossing events.
struct ImageOrbit {
    Launch launch;
    std::vector<double> t;
    std::vector<cdouble> w;
    std::vector<char> lower;    // parity of each sample
    BounceSequence bounces;     // tau_n, side, hit, chi_n from the events
    std::vector<CrossingEvent> events;  // with chi_before / chi_after filled in
    double straightness = 0;    // max distance of samples from their segment
    double speed = 0;           // max | |dw/dt| - 1 | over sample chords and bounce chords
    double reflection = 0;      // max |chi_n + chi_n-1 - 2 theta|
    double first_segment = 0;   // max |w(t) - w0 - e^{i chi} t| before the first bounce
};

// pre: trajectory with stored samples; throws CornerEncounter on a blown-up run
ImageOrbit image_orbit(const ScMap& map, const Trajectory& traj, const InitialCondition& init);

struct BounceComparison {
    long compared = 0;
    bool sides_match = true;
    bool count_match = true;
    double max_dtau = 0;
    double max_dchi = 0;
};
BounceComparison compare_bounces(const BounceSequence& a, const BounceSequence& b, double t_limit);

// billiard oracle for an ODE run: trace from the launch of init up to t_max
BounceSequence trace_from_launch(const ScMap& map, const Table& table, const InitialCondition& init, double t_max,
                                 long max_bounces = 1000000);

struct ReconstructedState {
    double t = 0;
    bool ok = false;
    std::string error;
    cdouble w, u, x1, x2;
};

// invert a billiard orbit back to ODE states at the requested times
std::vector<ReconstructedState> ode_from_billiard(const ScMap& map, const Table& table, const InitialCondition& init,
                                                  const BounceSequence& seq, const std::vector<double>& times);

// Ergodic crossing density p(u) = |prod (u-u_a)^(mu_a-1)| / N on the real line.
class CrossingDensity {
public:
    explicit CrossingDensity(const ScMap& map);
    // keeps a pointer to the map
    explicit CrossingDensity(ScMap&&) = delete;
    double pdf(double u) const;
    // fraction of the perimeter swept from u = -infinity to u
    double cdf(double u) const;
    double normalization() const { return N_; }
    // sup |F_emp - F| over crossing positions
    double ks(const std::vector<double>& u) const;

private:
    const ScMap* map_;
    std::vector<double> u_, mu_;
    std::vector<double> off_;  // cdf at each prevertex
    double N_ = 0;
    double head_ = 0;          // |v_0 - Phi_inf|
};

std::vector<double> crossing_positions(const Trajectory& traj);

// Time spent with |x1| in logarithmic bins, from dense output of every step.
struct OccupationHistogram {
    double log_lo = -3, log_hi = 12;
    int per_decade = 10;
    std::vector<double> time;  // time per bin
    std::vector<long> count;   // sub-samples per bin
    double total = 0;
    double max_value = 0;

    OccupationHistogram();
    void add(double value, double dt);
    StepObserver observer(int component = 0, int subdiv = 8);
    double bin_lo(int k) const;
    int bins() const { return static_cast<int>(time.size()); }
};

struct TailFit {
    double density_slope = 0, density_err = 0;
    double fraction_slope = 0, fraction_err = 0;
    double B_lo = 0, B_hi = 0;
    long samples_above = 0;
    // density slope between B_hi and the largest value
    double top_slope = 0;
    bool bounded_support = false;
};

struct TailOptions {
    double decades = 1.5;
    // the window ends this many decades below the largest occupied bin
    double top_margin = 0.5;
    long min_samples = 100;
};

// throws InsufficientTail when the window holds too few sub-samples
TailFit tail_exponent(const OccupationHistogram& h, const TailOptions& opt = {});
// from stored samples, weighting each by its step length
OccupationHistogram occupation_from_samples(const Trajectory& traj, int component = 0);

// Benettin estimator over an abstract flow; shared by the ODE and the control.
struct LyapunovResult {
    double lambda = 0;
    double stderr_lambda = 0;
    double t_reached = 0;
    long renormalizations = 0;
    int jumps = 0;
    bool aborted = false;
    std::vector<double> jump_times;
    // accumulated log growth against time, for the linear/exponential comparison
    std::vector<double> times, log_growth;
    double linear_r2 = 0, exp_r2 = 0;
};

struct LyapunovOptions {
    double delta0 = 1e-8;
    double renorm = 1e-4;
    double chunk = 0.25;
    double t_max = 1e4;
    double jump_factor = 1e3;
    // skip measuring while the state is large (near corners)
    double measure_limit = 1e30;
};

// advance(state, dt) returns false when the flow cannot continue
LyapunovResult lyapunov_benettin(std::vector<cdouble> x0, const std::vector<cdouble>& dir,
                                 const std::function<bool(std::vector<cdouble>&, double)>& advance,
                                 const std::function<double(const std::vector<cdouble>&)>& size,
                                 const LyapunovOptions& opt);

LyapunovResult lyapunov_estimate(const BilliardSpec& spec, const InitialCondition& init, const IntegrationConfig& cfg,
                                 const LyapunovOptions& opt);
// standard Lorenz system (10, 28, 8/3)
LyapunovResult lyapunov_lorenz(const LyapunovOptions& opt);

struct CornerFit {
    int corner = -1;
    double t_c = 0;
    // |u - u_a| ~ |t - t_c|^exponent_u, |x2| ~ |t - t_c|^exponent_x2
    double exponent_u = 0, exponent_x2 = 0;
    double K_measured = 0, K_predicted = 0;
    double ratio_error = 0;   // |x1/x2 - u_a| at the last sample
    double window_lo = 0, window_hi = 0;
    long points = 0;
};

// fits over the final decades of |t - t_c| before the guard
CornerFit corner_blowup_fit(const BilliardSpec& spec, const Trajectory& traj, double decades = 2);

// |K| = |mu_a| prod_{b != a} |u_a - u_b|^(1 - mu_b)
double corner_constant(const BilliardSpec& spec, int a);

struct ChannelAsymptotics {
    int vertex = -1;
    double limit_error = 0;     // |u(t_max) - u_a|
    double x2_slope = 0;        // d log|x2| / d log t, expected -1/(r-1)
    double prefactor_ratio = 0; // |x2| / predicted leading term
    double exp_rate = 0;        // parallel channel: d log|u-u_a|/dt
    double exp_rate_predicted = 0;
    double exp_r2 = 0;
    bool parallel = false;
};

struct ScatteringReport {
    ChannelAsymptotics forward, backward;
    // closest approach to Phi_inf: |(t - t_inf) u|
    bool pole_found = false;
    double pole_t = 0;
    double pole_modulus = 0;
};

// pre: unbounded spec; traj escaped (u settles at a channel prevertex)
ChannelAsymptotics channel_asymptotics(const BilliardSpec& spec, const Trajectory& traj);
ScatteringReport scattering_asymptotics(const BilliardSpec& spec, const Trajectory& forward,
                                        const Trajectory& backward);
// modulus and phase of (t - t_inf) u around the sample of largest |u|
bool pole_passage(const Trajectory& traj, double& t_inf, double& modulus, cdouble& limit);

struct PeriodResult {
    double T = 0;
    long crossings = 0;        // crossings per period
    double recurrence = 0;     // |x(T) - x(0)| / |x(0)|
    double sampled = 0;        // max over sampled t of |x(t+T) - x(t)| / (1 + |x|)
    double billiard_T = 0;
    long billiard_m = 0;
};

// chi0 = perpendicular launch from real u0; throws CornerEncounter for singular launches
std::optional<PeriodResult> periodic_from_perpendicular(const BilliardSpec& spec, double u0, double t_max,
                                                        const IntegrationConfig& cfg, double tol = 1e-6);

// x2 at every crossing
std::vector<cdouble> poincare_section(const Trajectory& traj);

struct BoxDimension {
    double dimension = 0;
    double stderr_dim = 0;
    std::vector<double> eps, counts;
    long points = 0;
};
struct BoxOptions {
    // central window in log|x2|
    double quantile = 0.05;
    // finest scale kept: mean points per occupied box at least this
    double min_occupancy = 4;
    // the slope is fitted over this many finest kept scales
    int fit_scales = 3;
};
// coordinates (log|x2|, arg x2) scaled to the unit square; throws FitWindowTooSmall
BoxDimension box_counting(const std::vector<cdouble>& pts, const BoxOptions& opt = {});

// least squares y = a + b x
struct LineFit {
    double a = 0, b = 0, err_b = 0, r2 = 0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct Check {
    std::string name;
    bool pass = false;
    double value = 0;
    double threshold = 0;
};

struct CorrespondenceReport {
    double straightness_residual = 0;
    double speed_residual = 0;
    double reflection_residual = 0;
    double conservation = 0;
    std::vector<double> chi_sequence;
    bool bounce_match = false;
    long crossings = 0;
    BounceComparison comparison;
    std::vector<Check> checks;
    nlohmann::json to_json() const;
    bool all_pass() const;
};

struct VerifyOptions {
    double straightness_tol = 1e-6;
    double speed_tol = 1e-6;
    double bounce_tol = 1e-6;
    long min_crossings = 50;
};

CorrespondenceReport verify_correspondence(const BilliardSpec& spec, const InitialCondition& init,
                                           const IntegrationConfig& cfg, const VerifyOptions& opt = {});

} // namespace scb
