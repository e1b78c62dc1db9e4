#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loopcert/absstab.hpp"
#include "loopcert/ir.hpp"
#include "loopcert/quadset.hpp"

namespace loopcert {

/// Abstract value threaded along the serialized order. Variables not in the
/// tracked tuple are implicitly unconstrained (top); bottom marks unreached
/// code; False is the textual post-condition of a nonterminating loop end.
struct AbstractState {
    enum class Kind { Bottom, Top, Set, False_ };
    Kind kind = Kind::Bottom;
    std::optional<QuadSet> set;

    static AbstractState bottom() { return {}; }
    static AbstractState top() { return {Kind::Top, std::nullopt}; }
    static AbstractState falsum() { return {Kind::False_, std::nullopt}; }
    static AbstractState of(QuadSet q) { return {Kind::Set, std::move(q)}; }

    bool is_set() const { return kind == Kind::Set; }

    /// "(xc, xp, y) in G_R", "(xc, xp) in E_P", "false", "top", "bottom".
    std::string render() const;
};

struct Annotation {
    std::string label;
    std::optional<AbstractState> pre;  // nullopt: elided (blocked receive)
    AbstractState post;
    std::string unlock;
    bool blocked = false;
    std::optional<AbstractState> weakened_post;  // extra skip row after post
};

struct Verdict {
    bool inductive = false;
    std::vector<std::string> failures;  // named failing checks, root cause first

    bool has_embed = false;
    double embed_margin = 0.0;
    bool has_sector = false;
    double sector_reach = 0.0;
    double sector_bound = 0.0;
    bool has_lemma = false;
    double lemma_min_eig = 0.0;
    std::map<std::string, double> loop_margins;  // end label -> min eig margin
};

struct AnalysisResult {
    std::vector<std::string> label_order;          // first-execution order
    std::map<std::string, Annotation> by_label;
    std::map<std::string, QuadSet> named_sets;     // EP, R, V, W, X, Y, Z, ...
    Verdict verdict;
};

struct TransferOutcome {
    AbstractState post;
    std::optional<AbstractState> released;  // after liveness release, when separate
};

/// Forward propagation of quadratic invariants through the serialized
/// statement order. The loop invariant is postulated at the loop head from
/// the incoming state and checked for compatibility at the loop end; it is
/// never iterated to a fixed point.
class ForwardAnalyzer {
public:
    ForwardAnalyzer(const SystemSpec& spec, double psd_tol = 1e-9, double contain_tol = 1e-8);

    AnalysisResult run();

    /// Single-statement transfer, exposed for testing. process_index selects
    /// the constant namespace.
    TransferOutcome transfer(const AbstractState& state, const Stmt& stmt, int process_index);

private:
    const SystemSpec& spec_;
    double psd_tol_;
    double contain_tol_;
    std::vector<std::map<std::string, Matrix>> consts_;  // per process
    std::map<std::string, std::vector<std::string>> release_after_;
    int next_label_ = 0;
    // set labels assigned per (line, slot) so revisited lines reuse them
    std::map<std::pair<std::string, int>, std::string> line_labels_;
    std::string current_line_;
    int current_slot_ = 0;
    Verdict* verdict_ = nullptr;        // set during run()
    AnalysisResult* result_ = nullptr;  // set during run()

    std::string fresh_label();
    void fail(const std::string& what);
    AbstractState drop_if_tracked(const AbstractState& s, const std::string& var);
    TransferOutcome do_affine(const AbstractState& state, const Stmt& stmt, int pi);
    TransferOutcome do_saturate(const AbstractState& state, const Stmt& stmt);
    void record_set(const QuadSet& q);
};

AnalysisResult analyze(const SystemSpec& spec, double psd_tol = 1e-9,
                       double contain_tol = 1e-8);

/// For each line label, the variables whose last use (within one steady
/// loop iteration) is that statement; they are dropped right after it.
std::map<std::string, std::vector<std::string>> liveness_release_points(const SystemSpec& spec);

/// Closed-loop (A, B, C) assembled by composing the affine updates of one
/// steady iteration around the single saturation; P, lambda, sector come
/// from the spec sections.
ClosedLoopSpec extract_closed_loop(const SystemSpec& spec);

/// min eigenvalue of P^-1 - G_init where G_init is the block-diagonal Gram
/// of the declared initial conditions; nullopt when the spec lacks the
/// invariant or an initial condition for one of its variables.
std::optional<double> initial_embedding_margin(const SystemSpec& spec);

/// Human-readable margins-and-matrices report.
std::string render_report(const AnalysisResult& result, const SystemSpec& spec);

/// Flat key=value rendering of the same facts, for machines.
std::string report_keyvalues(const AnalysisResult& result, const SystemSpec& spec);

/// Adapter feeding emit_listing.
std::map<std::string, ListingAnnotation> listing_annotations(const AnalysisResult& result);

}  // namespace loopcert
