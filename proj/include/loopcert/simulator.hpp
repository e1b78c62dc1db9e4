#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loopcert/analyzer.hpp"
#include "loopcert/ir.hpp"

namespace loopcert {

struct DivergenceError : std::runtime_error {
    long step;
    explicit DivergenceError(long k)
        : std::runtime_error("non-finite value at plant update " + std::to_string(k)), step(k) {}
};

struct InitialConditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceRecord {
    long k;  // completed plant updates when this line ran
    std::string label;
    std::vector<std::pair<std::string, std::vector<double>>> values;  // initialized vars
    double lyapunov;  // invariant-tuple quadratic form, 0 without an invariant
};

/// Concrete rendezvous execution: deterministic run-until-blocked scheduling,
/// capacity-1 buffered sends, blocking receives — the same rules as
/// serialize_order. Initial conditions come from the spec; x_p0 overrides the
/// ellipse-initialized variable and must lie inside its ellipse unless
/// force_initial.
std::vector<TraceRecord> simulate(const SystemSpec& spec, const std::vector<double>& x_p0,
                                  long steps, bool force_initial = false);

struct Violation {
    std::size_t record_index;
    std::string label;
    double margin;
};

/// Membership of each record's live values in the line's post-condition set.
std::vector<Violation> check_annotations(const std::vector<TraceRecord>& trace,
                                         const AnalysisResult& analysis,
                                         double tol = 1e-6);

/// (k, V) sampled once per plant update.
std::vector<std::pair<long, double>> lyapunov_profile(const std::vector<TraceRecord>& trace);

/// Streaming bulk runner: no trace is stored; per-line membership, Lyapunov
/// decay, invariant-ellipsoid membership and the pointwise sector inequality
/// are checked on the fly.
struct BulkConfig {
    long steps = 10000;
    int samples = 1000;
    std::uint64_t seed = 0;
    double member_tol = 1e-6;
    double decay_tol = 1e-9;
    double ellipsoid_tol = 1e-8;
    bool check_annotations = true;
    int threads = 0;  // 0: hardware concurrency; results merge by sample index
};

struct BulkStats {
    long runs = 0;
    long plant_updates = 0;
    long membership_checks = 0;
    long violations = 0;
    double worst_member_margin = 1e300;  // min over all checks
    std::string worst_member_label;
    double max_v_increase = -1e300;      // max of V_{k+1} - V_k
    double max_quadform = 0.0;           // max x'Px along all traces
    long ep_violations = 0;
    double max_sector_product = -1e300;  // (yc - a y)(yc - b y) where applicable
    long sector_violations = 0;
    long diverged = 0;

    bool clean() const { return violations == 0 && ep_violations == 0 && diverged == 0; }
};

BulkStats run_bulk(const SystemSpec& spec, const AnalysisResult* analysis,
                   const BulkConfig& cfg);

/// CSV rendering (step, line, one column per variable component, V).
std::string trace_csv(const SystemSpec& spec, const std::vector<TraceRecord>& trace);

/// The variable initialized inside an ellipse (the physical state), if any.
std::optional<std::string> ellipse_variable(const SystemSpec& spec);

/// Deterministic initial point for one sample index: even indices on the
/// boundary, odd inside. Each index derives its own stream from the seed, so
/// samples are independent of evaluation order.
std::vector<double> sample_initial(const SystemSpec& spec, std::uint64_t seed, int index);

}  // namespace loopcert
