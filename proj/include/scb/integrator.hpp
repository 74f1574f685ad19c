#pragma once

#include "scb/number.hpp"
#include "scb/system.hpp"

#include <array>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace scb {

struct IntegrationConfig {
    double rel_tol = 1e-13;
    double abs_tol = 1e-16;
    // 15 -> double, 18 -> long double, up to 33 -> float128
    int precision_digits = 15;
    double max_step = 0;   // 0: unlimited
    double min_step = 1e-14;
    double t_end = 100;
    double corner_guard = 1e-6;
    double overflow_guard = 1e10;
    double pole_eps = 1e-6;
    long max_steps = 0;    // 0: unlimited
    // sample spacing for stored output; 0 stores every accepted step
    double sample_dt = 0;
    bool store_samples = true;
    bool detect_events = true;

    void validate() const;
};

// real type names the dispatcher picks for a digit count
int effective_digits(int precision_digits);

enum class TrajStatus { Completed, BlowUp, ToleranceFailure };
const char* status_name(TrajStatus s);

struct Sample {
    double t = 0;
    cdouble x1, x2;
    cdouble u;
    // |C| - 1 evaluated in the working precision
    double dev = 0;
    // u - u_near for the nearest prevertex, formed in the working precision
    cdouble du;
    int near = -1;
};

struct CrossingEvent {
    double t = 0;
    double u = 0;
    int direction = 0;   // sign of d(Im u)/dt
    int side = 0;        // interval index: (u_a, u_a+1) -> a, outside -> r
    bool pole = false;   // |u| beyond 1/pole_eps, i.e. x2 near a simple zero
    bool near_corner = false;
    cdouble x1, x2;
    double chi_before = std::numeric_limits<double>::quiet_NaN();
    double chi_after = std::numeric_limits<double>::quiet_NaN();
};

struct Trajectory {
    std::vector<Sample> samples;
    std::vector<CrossingEvent> events;
    TrajStatus status = TrajStatus::Completed;
    double t_final = 0;
    double t_blowup = std::numeric_limits<double>::quiet_NaN();
    int corner_index = -1;
    double max_dev = 0;
    long steps = 0, rejected = 0, evaluations = 0;
    int digits = 15;
    // final state in working precision, rounded to quad
    cquad x1_final, x2_final;
};

// View of one accepted step handed to observers.  at(s) evaluates the
// dense interpolant at t0 + s (t1 - t0), s in [0, 1].
struct StepView {
    double t0 = 0, t1 = 0;
    std::array<cdouble, 2> y0, y1;
    std::function<std::array<cdouble, 2>(double)> at;
};
using StepObserver = std::function<void(const StepView&)>;

Trajectory integrate(const ODESystem& sys, const InitialCondition& init, const IntegrationConfig& cfg,
                     const StepObserver& observer = {});
// same, with the spec already known (saves the root finding in recover_spec)
Trajectory integrate(const BilliardSpec& spec, const InitialCondition& init, const IntegrationConfig& cfg,
                     const StepObserver& observer = {});

// Second route: integrate u' = kappa prod (u-u_a)^(1-mu_a) with continuously
// tracked branches (1/u chart at large |u|) and rebuild x1, x2 from u.
Trajectory integrate_u(const BilliardSpec& spec, const InitialCondition& init, const IntegrationConfig& cfg);

// events already stored in a trajectory, re-sorted by time
std::vector<CrossingEvent> detect_crossings(const Trajectory& traj);

// side index for a real crossing position
int side_of(const std::vector<double>& u, double x);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::string& header = "");
void write_events_csv(std::ostream& os, const std::vector<CrossingEvent>& events, const std::string& header = "");

} // namespace scb
