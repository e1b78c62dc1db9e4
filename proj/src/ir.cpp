#include "loopcert/ir.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "loopcert/format.hpp"

namespace loopcert {

DeadlockError::DeadlockError(std::vector<std::string> labels)
    : std::runtime_error([&] {
          std::string s = "deadlock: blocked at";
          for (const auto& l : labels) s += " " + l;
          return s;
      }()),
      blocked_labels(std::move(labels)) {}

bool Process::declares(const std::string& v) const {
    return std::any_of(vars.begin(), vars.end(), [&](const auto& p) { return p.first == v; });
}

int Process::var_dim(const std::string& v) const {
    for (const auto& p : vars)
        if (p.first == v) return p.second;
    throw DimensionError("undeclared variable " + v);
}

const Channel* SystemSpec::find_channel(const std::string& name) const {
    for (const auto& ch : channels)
        if (ch.name == name) return &ch;
    return nullptr;
}

const Process* SystemSpec::find_process(const std::string& name) const {
    for (const auto& p : processes)
        if (p.name == name) return &p;
    return nullptr;
}

int SystemSpec::var_dim(const std::string& v) const {
    for (const auto& p : processes)
        if (p.declares(v)) return p.var_dim(v);
    throw DimensionError("undeclared variable " + v);
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

struct Cursor {
    const std::string& s;
    int line;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(line, static_cast<int>(pos) + 1, msg);
    }
    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) { ++pos; return true; }
        return false;
    }
    void expect(char c) {
        if (!eat(c)) fail(std::string("expected '") + c + "'");
    }
    bool at_end() {
        skip_ws();
        return pos >= s.size();
    }
    std::string ident() {
        skip_ws();
        std::size_t start = pos;
        while (pos < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
            ++pos;
        if (pos == start) fail("expected identifier");
        return s.substr(start, pos - start);
    }
    double number() {
        skip_ws();
        const char* begin = s.c_str() + pos;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("expected number");
        pos += static_cast<std::size_t>(end - begin);
        return v;
    }
    bool peek_number() {
        skip_ws();
        if (pos >= s.size()) return false;
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return true;
        if ((c == '-' || c == '+') && pos + 1 < s.size()) {
            char d = s[pos + 1];
            return std::isdigit(static_cast<unsigned char>(d)) || d == '.';
        }
        return false;
    }
};

Matrix parse_matrix_literal(Cursor& c) {
    c.expect('[');
    std::vector<std::vector<double>> rows(1);
    for (;;) {
        rows.back().push_back(c.number());
        if (c.eat(',')) continue;
        if (c.eat(';')) { rows.emplace_back(); continue; }
        c.expect(']');
        break;
    }
    const std::size_t cols = rows[0].size();
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) c.fail("ragged matrix literal");
        for (std::size_t j = 0; j < cols; ++j) m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
    return m;
}

// Splits "a; b; c" at top level (';' inside brackets belongs to a literal).
std::vector<std::string> split_stmts(const std::string& s) {
    std::vector<std::string> parts;
    int depth = 0;
    std::string cur;
    for (char ch : s) {
        if (ch == '[' || ch == '(') ++depth;
        if (ch == ']' || ch == ')') --depth;
        if (ch == ';' && depth == 0) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    // drop empty trailing pieces from "stmt;"
    while (parts.size() > 1 && parts.back().find_first_not_of(" \t") == std::string::npos)
        parts.pop_back();
    return parts;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct ProcessBuilder {
    Process proc;
    std::map<std::string, Matrix> consts;  // MatInit shapes, for reference checks
    std::vector<Stmt*> loop_stack;
    std::map<std::string, int> label_lines;
};

Stmt parse_statement(Cursor& c, ProcessBuilder& pb, const std::string& label) {
    Stmt st;
    st.label = label;
    c.skip_ws();

    // while (1)
    if (c.s.compare(c.pos, 5, "while") == 0) {
        c.pos += 5;
        c.expect('(');
        c.number();
        c.expect(')');
        st.kind = Stmt::Kind::Loop;
        return st;
    }
    std::string head = c.ident();
    if (head == "end") {
        st.kind = Stmt::Kind::LoopEnd;
        return st;
    }
    if (head == "send" || head == "receive") {
        c.expect('(');
        st.channel = c.ident();
        c.expect(')');
        st.kind = head == "send" ? Stmt::Kind::Send : Stmt::Kind::Receive;
        return st;
    }

    c.expect('=');
    c.skip_ws();

    // NAME = [matrix]  or  NAME = scalar   (constant definition)
    if (c.pos < c.s.size() && c.s[c.pos] == '[') {
        st.kind = Stmt::Kind::MatInit;
        st.const_name = head;
        st.value = parse_matrix_literal(c);
        return st;
    }
    if (!pb.proc.declares(head)) {
        // not a variable: must be a scalar constant definition
        st.kind = Stmt::Kind::MatInit;
        st.const_name = head;
        st.value = Matrix(1, 1);
        st.value(0, 0) = c.number();
        return st;
    }

    // zeros(r, c)
    if (c.s.compare(c.pos, 6, "zeros(") == 0) {
        c.pos += 5;
        c.expect('(');
        const double r = c.number();
        c.expect(',');
        const double k = c.number();
        c.expect(')');
        if (k != 1.0) c.fail("zeros(r,c) must have c = 1");
        st.kind = Stmt::Kind::VecInit;
        st.target = head;
        if (pb.proc.var_dim(head) != static_cast<int>(r)) c.fail("zeros dimension mismatch for " + head);
        st.constant.assign(static_cast<int>(r), 0.0);
        return st;
    }

    // saturation: max(min(v,hi),lo) or min(max(v,lo),hi)
    if (c.s.compare(c.pos, 4, "max(") == 0 || c.s.compare(c.pos, 4, "min(") == 0) {
        const bool outer_max = c.s.compare(c.pos, 4, "max(") == 0;
        c.pos += 4;
        std::string inner = c.ident();
        if ((outer_max && inner != "min") || (!outer_max && inner != "max"))
            c.fail("saturation must be max(min(...)) or min(max(...))");
        c.expect('(');
        st.sat_source = c.ident();
        c.expect(',');
        const double b1 = c.number();
        c.expect(')');
        c.expect(',');
        const double b2 = c.number();
        c.expect(')');
        st.kind = Stmt::Kind::Saturate;
        st.target = head;
        st.sat_hi = outer_max ? b1 : b2;
        st.sat_lo = outer_max ? b2 : b1;
        if (st.sat_lo >= st.sat_hi) c.fail("saturation bounds must satisfy lo < hi");
        if (!pb.proc.declares(head) || !pb.proc.declares(st.sat_source))
            c.fail("saturation references undeclared variable");
        if (pb.proc.var_dim(head) != 1 || pb.proc.var_dim(st.sat_source) != 1)
            c.fail("saturation applies to scalar variables");
        return st;
    }

    // affine assignment: head = term (+|-) term ...
    st.kind = Stmt::Kind::AffineAssign;
    st.target = head;
    st.constant.assign(pb.proc.var_dim(head), 0.0);

    double sign = 1.0;
    for (;;) {
        c.skip_ws();
        if (c.peek_number()) {
            double num = sign * c.number();
            if (c.eat('*')) {
                Stmt::Term term;
                term.coeff_scalar = num;
                term.var = c.ident();
                st.terms.push_back(term);
            } else {
                // bare constant; scalar targets only
                if (st.constant.size() != 1) c.fail("constant term on a non-scalar assignment");
                st.constant[0] += num;
            }
        } else {
            std::string name = c.ident();
            if (c.eat('*')) {
                Stmt::Term term;
                term.coeff_name = name;
                term.coeff_scalar = sign;
                term.var = c.ident();
                st.terms.push_back(term);
            } else {
                Stmt::Term term;
                term.coeff_scalar = sign;
                term.var = name;
                st.terms.push_back(term);
            }
        }
        if (c.eat('+')) { sign = 1.0; continue; }
        if (c.eat('-')) { sign = -1.0; continue; }
        break;
    }
    return st;
}

void check_affine_shapes(const ProcessBuilder& pb, const Stmt& st, int line) {
    const int dt = pb.proc.var_dim(st.target);
    for (const auto& term : st.terms) {
        if (!pb.proc.declares(term.var))
            throw ParseError(line, 1, "reference to undeclared variable " + term.var);
        const int dv = pb.proc.var_dim(term.var);
        if (!term.coeff_name.empty()) {
            auto it = pb.consts.find(term.coeff_name);
            if (it == pb.consts.end())
                throw ParseError(line, 1, "unknown coefficient " + term.coeff_name);
            if (it->second.rows() != dt || it->second.cols() != dv)
                throw ParseError(line, 1, "coefficient " + term.coeff_name + " has shape " +
                                              std::to_string(it->second.rows()) + "x" +
                                              std::to_string(it->second.cols()) +
                                              ", expected " + std::to_string(dt) + "x" +
                                              std::to_string(dv));
        } else if (dv != dt) {
            throw ParseError(line, 1, "term " + term.var + " has dimension " +
                                          std::to_string(dv) + ", target needs " +
                                          std::to_string(dt));
        }
    }
}

}  // namespace

SystemSpec parse_spec(const std::string& text) {
    SystemSpec spec;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;

    enum class Section { None, Channels, Process, Invariant, Sector, Initial };
    Section section = Section::None;
    std::unique_ptr<ProcessBuilder> pb;
    std::vector<ProcessBuilder> built;

    auto finish_process = [&]() {
        if (!pb) return;
        if (!pb->loop_stack.empty())
            throw ParseError(lineno, 1, "unterminated loop in process " + pb->proc.name);
        built.push_back(std::move(*pb));
        pb.reset();
    };

    while (std::getline(in, raw)) {
        ++lineno;
        if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            const auto close = line.find(']');
            if (close == std::string::npos) throw ParseError(lineno, 1, "unterminated section header");
            const std::string header = trim(line.substr(1, close - 1));
            if (header == "channels") {
                finish_process();
                section = Section::Channels;
            } else if (header.rfind("process", 0) == 0) {
                finish_process();
                pb = std::make_unique<ProcessBuilder>();
                pb->proc.name = trim(header.substr(7));
                if (pb->proc.name.empty()) throw ParseError(lineno, 1, "process needs a name");
                section = Section::Process;
            } else if (header == "invariant") {
                finish_process();
                section = Section::Invariant;
            } else if (header == "sector") {
                finish_process();
                section = Section::Sector;
                spec.sector_declared = true;
            } else if (header == "initial") {
                finish_process();
                section = Section::Initial;
            } else {
                throw ParseError(lineno, 1, "unknown section [" + header + "]");
            }
            continue;
        }

        Cursor c{line, lineno};
        switch (section) {
            case Section::None:
                throw ParseError(lineno, 1, "content before any section header");
            case Section::Channels: {
                Channel ch;
                ch.name = c.ident();
                c.expect(':');
                ch.from = c.ident();
                c.expect('-');
                c.expect('>');
                ch.to = c.ident();
                spec.channels.push_back(ch);
                break;
            }
            case Section::Process: {
                if (line.rfind("vars:", 0) == 0) {
                    Cursor vc{line, lineno};
                    vc.ident();
                    vc.expect(':');
                    for (;;) {
                        std::string name = vc.ident();
                        vc.expect('(');
                        const int dim = static_cast<int>(vc.number());
                        vc.expect(')');
                        if (dim < 1) vc.fail("variable dimension must be >= 1");
                        if (pb->proc.declares(name)) vc.fail("duplicate variable " + name);
                        pb->proc.vars.emplace_back(name, dim);
                        if (!vc.eat(',')) break;
                    }
                    if (!vc.at_end()) vc.fail("trailing content after vars");
                    break;
                }
                // LABEL: stmt[; stmt]*
                const auto colon = line.find(':');
                if (colon == std::string::npos) throw ParseError(lineno, 1, "statement needs a label");
                const std::string label = trim(line.substr(0, colon));
                if (label.empty()) throw ParseError(lineno, 1, "empty line label");
                if (auto it = pb->label_lines.find(label);
                    it != pb->label_lines.end() && it->second != lineno)
                    throw ParseError(lineno, 1, "label " + label + " already used on line " +
                                                    std::to_string(it->second));
                pb->label_lines[label] = lineno;

                for (const std::string& piece : split_stmts(line.substr(colon + 1))) {
                    const std::string body = trim(piece);
                    if (body.empty()) throw ParseError(lineno, 1, "empty statement");
                    Cursor sc{body, lineno};
                    Stmt st = parse_statement(sc, *pb, label);
                    if (!sc.at_end()) sc.fail("trailing content after statement");

                    if (st.kind == Stmt::Kind::MatInit) {
                        if (pb->proc.declares(st.const_name))
                            sc.fail(st.const_name + " is a declared variable, not a constant");
                        pb->consts.emplace(st.const_name, st.value);
                    }
                    if (st.kind == Stmt::Kind::AffineAssign) check_affine_shapes(*pb, st, lineno);

                    auto& target_list =
                        pb->loop_stack.empty() ? pb->proc.body : pb->loop_stack.back()->body;
                    if (st.kind == Stmt::Kind::Loop) {
                        target_list.push_back(std::move(st));
                        pb->loop_stack.push_back(&target_list.back());
                    } else if (st.kind == Stmt::Kind::LoopEnd) {
                        if (pb->loop_stack.empty()) sc.fail("'end' without an open loop");
                        Stmt* loop = pb->loop_stack.back();
                        loop->end_label = label;
                        loop->body.push_back(std::move(st));
                        pb->loop_stack.pop_back();
                    } else {
                        target_list.push_back(std::move(st));
                    }
                }
                break;
            }
            case Section::Invariant: {
                std::string key = c.ident();
                if (key == "P") {
                    c.expect('(');
                    for (;;) {
                        spec.invariant_vars.push_back(c.ident());
                        if (!c.eat(',')) break;
                    }
                    c.expect(')');
                    c.expect('=');
                    spec.p = SymMatrix(parse_matrix_literal(c));
                } else if (key == "lambda") {
                    c.expect('=');
                    spec.lambda = c.number();
                } else {
                    c.fail("unknown invariant entry " + key);
                }
                break;
            }
            case Section::Sector: {
                std::string key = c.ident();
                c.expect('=');
                const double v = c.number();
                if (key == "alpha") spec.sector.alpha = v;
                else if (key == "beta") spec.sector.beta = v;
                else c.fail("unknown sector entry " + key);
                break;
            }
            case Section::Initial: {
                std::string var = c.ident();
                InitialCondition ic;
                if (c.eat('=')) {
                    const double v = c.number();
                    if (v != 0.0) c.fail("only zero initial values are supported");
                    ic.kind = InitialCondition::Kind::Zero;
                } else {
                    std::string kw = c.ident();
                    if (kw != "in") c.fail("expected '= 0' or 'in ellipse [...]'");
                    kw = c.ident();
                    if (kw != "ellipse") c.fail("expected 'ellipse'");
                    ic.kind = InitialCondition::Kind::Ellipse;
                    ic.q = SymMatrix(parse_matrix_literal(c));
                }
                if (!c.at_end()) c.fail("trailing content after initial condition");
                spec.initial[var] = ic;
                break;
            }
        }
    }
    finish_process();

    for (auto& b : built) spec.processes.push_back(std::move(b.proc));

    // cross-references that need the whole file
    for (const auto& p : spec.processes) {
        std::vector<const Stmt*> stack;
        std::vector<const std::vector<Stmt>*> todo{&p.body};
        while (!todo.empty()) {
            const auto* list = todo.back();
            todo.pop_back();
            for (const Stmt& st : *list) {
                if (st.kind == Stmt::Kind::Loop) todo.push_back(&st.body);
                if ((st.kind == Stmt::Kind::Send || st.kind == Stmt::Kind::Receive)) {
                    if (!spec.find_channel(st.channel))
                        throw ParseError(0, 0, "statement " + st.label +
                                                   " references undeclared channel " + st.channel);
                    if (!p.declares(st.channel))
                        throw ParseError(0, 0, "process " + p.name +
                                                   " does not declare channel variable " +
                                                   st.channel);
                }
            }
        }
    }
    for (const auto& v : spec.invariant_vars) {
        bool found = std::any_of(spec.processes.begin(), spec.processes.end(),
                                 [&](const Process& p) { return p.declares(v); });
        if (!found) throw ParseError(0, 0, "invariant references undeclared variable " + v);
    }
    for (const auto& [name, ic] : spec.initial) {
        (void)ic;
        bool found = std::any_of(spec.processes.begin(), spec.processes.end(),
                                 [&](const Process& p) { return p.declares(name); });
        if (!found) throw ParseError(0, 0, "initial condition for undeclared variable " + name);
    }
    if (spec.p) {
        int total = 0;
        for (const auto& v : spec.invariant_vars) total += spec.var_dim(v);
        if (total != spec.p->dim())
            throw ParseError(0, 0, "invariant P has dimension " + std::to_string(spec.p->dim()) +
                                       " but its tuple totals " + std::to_string(total));
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Canonical emission
// ---------------------------------------------------------------------------

std::string stmt_text(const Stmt& s) {
    switch (s.kind) {
        case Stmt::Kind::MatInit:
            if (s.value.rows() == 1 && s.value.cols() == 1)
                return s.const_name + " = " + fmt_double(s.value(0, 0));
            return s.const_name + " = " + fmt_matrix(s.value);
        case Stmt::Kind::VecInit:
            return s.target + " = zeros(" + std::to_string(s.constant.size()) + ",1)";
        case Stmt::Kind::AffineAssign: {
            std::string out = s.target + " = ";
            bool first = true;
            for (const auto& t : s.terms) {
                double mag = t.coeff_scalar;
                std::string piece;
                if (!t.coeff_name.empty()) {
                    piece = t.coeff_name + "*" + t.var;
                    if (mag < 0) { piece = "- " + piece; mag = -mag; }
                    else if (!first) piece = "+ " + piece;
                } else if (mag == 1.0) {
                    piece = (first ? "" : "+ ") + t.var;
                } else if (mag == -1.0) {
                    piece = "- " + t.var;
                } else {
                    if (mag < 0 && !first) { piece = "- " + fmt_double(-mag) + "*" + t.var; }
                    else piece = (first ? "" : "+ ") + fmt_double(mag) + "*" + t.var;
                }
                out += (first ? "" : " ") + piece;
                first = false;
            }
            if (!s.constant.empty() && s.constant[0] != 0.0)
                out += " + " + fmt_double(s.constant[0]);
            return out;
        }
        case Stmt::Kind::Saturate:
            return s.target + " = max(min(" + s.sat_source + "," + fmt_double(s.sat_hi) + ")," +
                   fmt_double(s.sat_lo) + ")";
        case Stmt::Kind::Send:
            return "send(" + s.channel + ")";
        case Stmt::Kind::Receive:
            return "receive(" + s.channel + ")";
        case Stmt::Kind::Loop:
            return "while (1)";
        case Stmt::Kind::LoopEnd:
            return "end";
    }
    return "";
}

namespace {

void emit_stmts(const SystemSpec& spec, const std::vector<Stmt>& body, std::string& out) {
    for (std::size_t i = 0; i < body.size(); ++i) {
        const Stmt& s = body[i];
        if (s.kind == Stmt::Kind::Loop) {
            out += s.label + ": while (1)\n";
            emit_stmts(spec, s.body, out);
            continue;
        }
        // statements sharing one label were written on one source line
        std::string line = s.label + ": " + stmt_text(s);
        while (i + 1 < body.size() && body[i + 1].label == s.label &&
               body[i + 1].kind != Stmt::Kind::Loop) {
            ++i;
            line += "; " + stmt_text(body[i]);
        }
        out += line + "\n";
    }
}

}  // namespace

std::string format_spec(const SystemSpec& spec) {
    std::string out;
    if (!spec.channels.empty()) {
        out += "[channels]\n";
        for (const auto& ch : spec.channels)
            out += ch.name + ": " + ch.from + " -> " + ch.to + "\n";
        out += "\n";
    }
    for (const auto& p : spec.processes) {
        out += "[process " + p.name + "]\n";
        out += "vars: ";
        for (std::size_t i = 0; i < p.vars.size(); ++i) {
            if (i) out += ", ";
            out += p.vars[i].first + "(" + std::to_string(p.vars[i].second) + ")";
        }
        out += "\n";
        emit_stmts(spec, p.body, out);
        out += "\n";
    }
    if (spec.p) {
        out += "[invariant]\n";
        out += "P(";
        for (std::size_t i = 0; i < spec.invariant_vars.size(); ++i) {
            if (i) out += ", ";
            out += spec.invariant_vars[i];
        }
        out += ") = " + fmt_matrix(spec.p->to_matrix()) + "\n";
        out += "lambda = " + fmt_double(spec.lambda) + "\n\n";
    }
    if (spec.sector_declared) {
        out += "[sector]\n";
        out += "alpha = " + fmt_double(spec.sector.alpha) + "\n";
        out += "beta = " + fmt_double(spec.sector.beta) + "\n\n";
    }
    if (!spec.initial.empty()) {
        out += "[initial]\n";
        for (const auto& [name, ic] : spec.initial) {
            if (ic.kind == InitialCondition::Kind::Zero)
                out += name + " = 0\n";
            else
                out += name + " in ellipse " + fmt_matrix(ic.q->to_matrix()) + "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void walk(const std::vector<Stmt>& body, const std::function<void(const Stmt&)>& f) {
    for (const Stmt& s : body) {
        f(s);
        if (s.kind == Stmt::Kind::Loop) walk(s.body, f);
    }
}

}  // namespace

std::vector<std::string> validate(const SystemSpec& spec) {
    std::vector<std::string> diags;

    for (std::size_t i = 0; i < spec.channels.size(); ++i) {
        const Channel& ch = spec.channels[i];
        if (!spec.find_process(ch.from)) diags.push_back("channel " + ch.name + ": unknown sender process " + ch.from);
        if (!spec.find_process(ch.to)) diags.push_back("channel " + ch.name + ": unknown receiver process " + ch.to);
        if (ch.from == ch.to) diags.push_back("channel " + ch.name + " loops back to " + ch.from);
        for (std::size_t j = 0; j < i; ++j)
            if (spec.channels[j].name == ch.name)
                diags.push_back("channel " + ch.name + " declared twice");
        const Process* from = spec.find_process(ch.from);
        const Process* to = spec.find_process(ch.to);
        if (from && to && from->declares(ch.name) && to->declares(ch.name) &&
            from->var_dim(ch.name) != to->var_dim(ch.name))
            diags.push_back("channel " + ch.name + " has mismatched dimensions at its ends");
    }
    for (std::size_t i = 0; i < spec.invariant_vars.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (spec.invariant_vars[i] == spec.invariant_vars[j])
                diags.push_back("invariant tuple repeats variable " + spec.invariant_vars[i]);

    std::map<std::string, int> sends, receives;
    for (std::size_t pi = 0; pi < spec.processes.size(); ++pi) {
        const Process& p = spec.processes[pi];
        int top_loops = 0;
        for (const Stmt& s : p.body)
            if (s.kind == Stmt::Kind::Loop) ++top_loops;
        if (top_loops > 1)
            diags.push_back("process " + p.name + " has more than one top-level loop");
        walk(p.body, [&](const Stmt& s) {
            if (s.kind == Stmt::Kind::Send) {
                ++sends[s.channel];
                if (const Channel* ch = spec.find_channel(s.channel); ch && ch->from != p.name)
                    diags.push_back("process " + p.name + " sends on channel " + s.channel +
                                    " owned by " + ch->from);
            }
            if (s.kind == Stmt::Kind::Receive) {
                ++receives[s.channel];
                if (const Channel* ch = spec.find_channel(s.channel); ch && ch->to != p.name)
                    diags.push_back("process " + p.name + " receives on channel " + s.channel +
                                    " destined for " + ch->to);
            }
        });
    }
    for (const auto& [ch, n] : receives) {
        (void)n;
        if (sends.find(ch) == sends.end())
            diags.push_back("channel " + ch + " is received from but never sent on");
    }

    if (spec.p) {
        const double scale = std::max(1.0, spec.p->max_abs());
        if (min_eigenvalue(*spec.p) <= 1e-12 * scale)
            diags.push_back("invariant P is not positive definite");
        for (const auto& v : spec.invariant_vars)
            if (spec.initial.find(v) == spec.initial.end())
                diags.push_back("invariant variable " + v + " has no initial condition");
    }
    bool has_saturate = false;
    for (const auto& proc : spec.processes)
        walk(proc.body, [&](const Stmt& s) {
            has_saturate = has_saturate || s.kind == Stmt::Kind::Saturate;
        });
    if (has_saturate && !spec.sector_declared)
        diags.push_back("the program saturates but the file has no [sector] section");
    for (const auto& [name, ic] : spec.initial) {
        if (ic.kind == InitialCondition::Kind::Ellipse) {
            if (ic.q->dim() != spec.var_dim(name))
                diags.push_back("initial ellipse for " + name + " has the wrong dimension");
            else if (min_eigenvalue(*ic.q) <= 1e-12 * std::max(1.0, ic.q->max_abs()))
                diags.push_back("initial ellipse for " + name + " is not positive definite");
        }
    }

    try {
        serialize_order(spec, 1);
    } catch (const DeadlockError& e) {
        diags.push_back(e.what());
    }
    return diags;
}

// ---------------------------------------------------------------------------
// Deterministic rendezvous serialization
// ---------------------------------------------------------------------------

namespace {

struct Frame {
    const std::vector<Stmt>* stmts;
    std::size_t idx = 0;
};

struct Walker {
    std::vector<Frame> stack;
    bool waiting = false;  // a receive/send already failed once
    int cycles = 0;        // completed top-level loop iterations
    const Stmt* top_loop = nullptr;
    std::string current_label;

    bool done() const { return stack.empty(); }
};

const Stmt* find_top_loop(const Process& p) {
    for (const Stmt& s : p.body)
        if (s.kind == Stmt::Kind::Loop) return &s;
    return nullptr;
}

}  // namespace

std::vector<OrderEntry> serialize_order(const SystemSpec& spec, int min_cycles) {
    std::vector<OrderEntry> order;
    const int np = static_cast<int>(spec.processes.size());
    std::vector<Walker> walkers(np);
    for (int i = 0; i < np; ++i) {
        walkers[i].stack.push_back({&spec.processes[i].body, 0});
        walkers[i].top_loop = find_top_loop(spec.processes[i]);
    }
    std::map<std::string, std::string> buffer;  // channel -> pending sender label

    auto stopped = [&] {
        for (const Walker& w : walkers) {
            if (w.top_loop ? w.cycles < min_cycles : !w.done()) return false;
        }
        return true;
    };

    bool stop = stopped();
    while (!stop) {
        bool progressed = false;
        for (int pi = 0; pi < np && !stop; ++pi) {
            Walker& w = walkers[pi];
            // run process pi until it blocks or finishes; a looper that is a
            // full bonus cycle past min_cycles yields so the others catch up
            while (!w.done() && (!w.top_loop || w.cycles <= min_cycles)) {
                Frame& f = w.stack.back();
                if (f.idx >= f.stmts->size()) {
                    w.stack.pop_back();  // loop bodies re-enter via the Loop stmt below
                    continue;
                }
                const Stmt& s = (*f.stmts)[f.idx];
                w.current_label = s.label;

                if (s.kind == Stmt::Kind::Receive && buffer.find(s.channel) == buffer.end()) {
                    w.waiting = true;
                    break;  // blocked
                }
                if (s.kind == Stmt::Kind::Send && buffer.find(s.channel) != buffer.end()) {
                    w.waiting = true;
                    break;  // capacity-1 buffer still full
                }

                OrderEntry e;
                e.process = pi;
                e.stmt = &s;
                e.label = s.label;
                if (s.kind == Stmt::Kind::Receive) {
                    e.unlock = buffer[s.channel];
                    e.blocked_wait = w.waiting;
                    buffer.erase(s.channel);
                    w.waiting = false;
                    ++f.idx;
                } else if (s.kind == Stmt::Kind::Send) {
                    buffer[s.channel] = s.label;
                    w.waiting = false;
                    ++f.idx;
                } else if (s.kind == Stmt::Kind::Loop) {
                    // leave idx on the loop so it restarts after the body
                    w.stack.push_back({&s.body, 0});
                } else if (s.kind == Stmt::Kind::LoopEnd) {
                    // find the loop this end belongs to (the enclosing frame's stmt)
                    ++f.idx;
                    if (w.stack.size() >= 2) {
                        Frame& parent = w.stack[w.stack.size() - 2];
                        const Stmt& loop = (*parent.stmts)[parent.idx];
                        if (&loop == w.top_loop) ++w.cycles;
                    }
                } else {
                    ++f.idx;
                }
                order.push_back(e);
                progressed = true;
                if ((stop = stopped())) break;
            }
        }
        if (stop) break;
        if (!progressed) {
            if (stopped()) break;  // every process ran to completion
            std::vector<std::string> blocked;
            for (const Walker& w : walkers)
                if (!w.done()) blocked.push_back(w.current_label);
            throw DeadlockError(std::move(blocked));
        }
    }
    return order;
}

// ---------------------------------------------------------------------------
// Annotated listing
// ---------------------------------------------------------------------------

namespace {

void listing_rows(const std::vector<Stmt>& body,
                  const std::map<std::string, ListingAnnotation>* ann,
                  std::vector<std::string>& rows, std::string& last_cond) {
    for (std::size_t i = 0; i < body.size(); ++i) {
        const Stmt& s = body[i];

        std::string text = stmt_text(s);
        std::size_t group_end = i;
        while (group_end + 1 < body.size() && body[group_end + 1].label == s.label &&
               body[group_end + 1].kind != Stmt::Kind::Loop) {
            ++group_end;
            text += "; " + stmt_text(body[group_end]);
        }

        const ListingAnnotation* a = nullptr;
        if (ann) {
            auto it = ann->find(s.label);
            if (it != ann->end()) a = &it->second;
        }

        if (a) {
            if (a->blocked) {
                rows.push_back("⋮");  // the pre-condition cannot be extracted
            } else if (!a->pre.empty() && a->pre != last_cond) {
                rows.push_back("{" + a->pre + "}");
            }
            std::string line = s.label + ": " + text;
            if (a->blocked && !a->unlock.empty()) line += "  [" + a->unlock + "]";
            rows.push_back(line);
            if (!a->post.empty()) {
                rows.push_back("{" + a->post + "}");
                last_cond = a->post;
            }
            if (!a->skip_post.empty()) {
                rows.push_back("skip");
                rows.push_back("{" + a->skip_post + "}");
                last_cond = a->skip_post;
            }
        } else {
            rows.push_back(s.label + ": " + text);
        }

        if (s.kind == Stmt::Kind::Loop) listing_rows(s.body, ann, rows, last_cond);
        i = group_end;
    }
}

std::size_t display_width(const std::string& s) {
    // count UTF-8 code points, close enough for box alignment here
    std::size_t w = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++w;
    return w;
}

}  // namespace

std::string emit_listing(const SystemSpec& spec,
                         const std::map<std::string, ListingAnnotation>* annotations) {
    if (annotations) {
        for (const auto& [label, a] : *annotations) {
            (void)a;
            bool known = false;
            for (const auto& p : spec.processes)
                walk(p.body, [&](const Stmt& s) { known = known || s.label == label; });
            if (!known) throw std::invalid_argument("annotation for unknown label " + label);
        }
    }

    std::vector<std::vector<std::string>> columns;
    for (const auto& p : spec.processes) {
        std::vector<std::string> rows;
        rows.push_back("% " + p.name + " dynamics");
        std::string last_cond;
        listing_rows(p.body, annotations, rows, last_cond);
        columns.push_back(std::move(rows));
    }

    std::size_t height = 0, width = 0;
    for (const auto& col : columns) {
        height = std::max(height, col.size());
        for (const auto& r : col) width = std::max(width, display_width(r));
    }
    width += 4;

    std::string out;
    for (std::size_t r = 0; r < height; ++r) {
        std::string line;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::string cell = r < columns[c].size() ? columns[c][r] : "";
            if (c + 1 < columns.size()) {
                const std::size_t pad = width - display_width(cell);
                cell += std::string(pad, ' ');
            }
            line += cell;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
    }
    return out;
}

}  // namespace loopcert
