#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "loopcert/absstab.hpp"
#include "loopcert/symmat.hpp"

namespace loopcert {

struct ParseError : std::runtime_error {
    int line;
    int col;
    ParseError(int l, int c, const std::string& what)
        : std::runtime_error("parse error at line " + std::to_string(l) + ", col " +
                             std::to_string(c) + ": " + what),
          line(l), col(c) {}
};

struct DeadlockError : std::runtime_error {
    std::vector<std::string> blocked_labels;
    explicit DeadlockError(std::vector<std::string> labels);
};

/// One statement of the restricted concurrent language. No general
/// expressions: matrix/vector initialization, affine assignment, clamp
/// saturation, send/receive, and the single surrounding loop.
struct Stmt {
    enum class Kind { MatInit, VecInit, AffineAssign, Saturate, Send, Receive, Loop, LoopEnd };

    struct Term {
        std::string coeff_name;  // empty for identity / bare numeric coefficient
        double coeff_scalar = 1.0;
        std::string var;
    };

    Kind kind;
    std::string label;

    // MatInit
    std::string const_name;
    Matrix value{0, 0};

    // VecInit / AffineAssign / Saturate
    std::string target;
    std::vector<Term> terms;          // AffineAssign
    std::vector<double> constant;     // AffineAssign constant part (usually zero)
    std::string sat_source;           // Saturate
    double sat_lo = -1.0, sat_hi = 1.0;

    // Send / Receive
    std::string channel;

    // Loop
    std::vector<Stmt> body;
    std::string end_label;
};

struct Process {
    std::string name;
    std::vector<std::pair<std::string, int>> vars;  // declared with dimensions
    std::vector<Stmt> body;

    bool declares(const std::string& v) const;
    int var_dim(const std::string& v) const;
};

struct Channel {
    std::string name;  // also the variable carried
    std::string from;
    std::string to;
};

/// Initial condition for one variable: exactly zero, or inside an ellipse.
struct InitialCondition {
    enum class Kind { Zero, Ellipse };
    Kind kind = Kind::Zero;
    std::optional<SymMatrix> q;  // Ellipse only
};

struct SystemSpec {
    std::vector<Process> processes;  // execution starts with processes[0]
    std::vector<Channel> channels;

    std::vector<std::string> invariant_vars;  // tuple order of P
    std::optional<SymMatrix> p;
    double lambda = 0.0;
    SectorBound sector;
    bool sector_declared = false;
    std::map<std::string, InitialCondition> initial;

    const Channel* find_channel(const std::string& name) const;
    const Process* find_process(const std::string& name) const;
    int var_dim(const std::string& v) const;  // across processes
};

/// Parses the plain-text system file (see docs/specfile.md).
SystemSpec parse_spec(const std::string& text);

/// Canonical re-emission; parse(format_spec(parse(text))) is a fixed point.
std::string format_spec(const SystemSpec& spec);

/// Canonical single-statement rendering, e.g. "u = Cc*xc + Dc*yc".
std::string stmt_text(const Stmt& s);

/// Diagnostics (empty means valid): channel wiring, rendezvous liveness over
/// a dry run, P and the initial ellipses PD, invariant tuple shapes.
std::vector<std::string> validate(const SystemSpec& spec);

/// One executed statement of the serialized global order.
struct OrderEntry {
    int process;
    const Stmt* stmt;
    std::string label;
    std::string unlock;  // for Receive: label of the matching Send
    bool blocked_wait = false;  // the receive had to wait for its value
};

/// Deterministic rendezvous serialization: each process runs until it
/// blocks; capacity-1 buffered sends, blocking receives. Runs until every
/// looping process has completed min_cycles loop iterations. Throws
/// DeadlockError when no process can make progress.
std::vector<OrderEntry> serialize_order(const SystemSpec& spec, int min_cycles = 2);

/// Pre/post conditions rendered around each line; supplied by the analyzer.
struct ListingAnnotation {
    std::string pre;            // empty = elided (blocked receive)
    std::string post;
    std::string unlock;         // bracket, e.g. "6p"
    bool blocked = false;
    std::string skip_post;      // extra weakening row after post, "" if none
};

/// Two-column annotated program listing. Annotations keyed by line label;
/// unknown labels raise std::invalid_argument.
std::string emit_listing(const SystemSpec& spec,
                         const std::map<std::string, ListingAnnotation>* annotations);

}  // namespace loopcert
