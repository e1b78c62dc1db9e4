#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

#include "loopcert/symmat.hpp"

namespace loopcert {

/// Shortest decimal rendering that round-trips the double exactly.
inline std::string fmt_double(double v) {
    char buf[40];
    for (int prec : {15, 16, 17}) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string fmt_fixed(double v, int decimals) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

inline std::string fmt_sci(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6e", v);
    return buf;
}

/// MATLAB-style literal: rows separated by ';', entries by ','.
inline std::string fmt_matrix(const Matrix& m) {
    std::string s = "[";
    for (int i = 0; i < m.rows(); ++i) {
        if (i) s += "; ";
        for (int j = 0; j < m.cols(); ++j) {
            if (j) s += ", ";
            s += fmt_double(m(i, j));
        }
    }
    s += "]";
    return s;
}

/// Fixed-decimals block rendering for reports.
inline std::string fmt_matrix_block(const SymMatrix& m, int decimals, const std::string& indent) {
    std::string s;
    for (int i = 0; i < m.dim(); ++i) {
        s += indent;
        for (int j = 0; j < m.dim(); ++j) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%12.*f", decimals, m(i, j));
            s += buf;
        }
        s += "\n";
    }
    return s;
}

}  // namespace loopcert
